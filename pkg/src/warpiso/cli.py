"""Command-line front end: ``warpiso {profile,classify,verify,reduce}``.

Exit codes: 0 ok, 2 configuration error, 3 inconclusive or partial result,
4 the verifier found a violation.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import expr as E
from .classifier import classify, render_text
from .geometry import EUCLIDEAN_PUNCTURED, SpaceError, SpaceSpec, euclidean_punctured, sphere_measure
from .model import reduce
from .profile import Refusal, build_profile
from .verify import (DiscreteFiberSpace, VerifierError, jensen_check, nonconvex_counterexample,
                     perturb_sphere)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INCONCLUSIVE = 3
EXIT_VIOLATION = 4

SPACE_KEYS = ("dimension", "interval", "warp", "surface_density", "volume_density", "fiber_measure",
              "preset", "base_point")
RUN_KEYS = ("grid", "log_step", "tol", "seed", "trials", "mode", "v0", "radius", "amplitude",
            "cells", "r0", "r1", "span", "psi_table", "absolute")
KNOWN_KEYS = SPACE_KEYS + RUN_KEYS


class ConfigError(ValueError):
    """Configuration problem, reported with the offending line when known."""

    def __init__(self, message: str, line: Optional[int] = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass
class SpaceConfig:
    """Parsed ``key = value`` document; ``lines`` remembers where each key was set."""

    values: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    source: str = "<config>"

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{key}: {message}", self.lines.get(key), self.source)

    def number(self, key: str, default=None, kind=float):
        if key not in self.values:
            return default
        try:
            x = kind(float(self.values[key])) if kind is int else float(self.values[key])
        except ValueError:
            raise self.error(key, f"expected a number, got {self.values[key]!r}") from None
        if kind is int and float(self.values[key]) != x:
            raise self.error(key, f"expected an integer, got {self.values[key]!r}")
        return x


def parse_config(text: str, source: str = "<config>") -> SpaceConfig:
    cfg = SpaceConfig(source=source)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, source)
        if key in cfg.values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {cfg.lines[key]})", lineno, source)
        if not value:
            raise ConfigError(f"empty value for {key!r}", lineno, source)
        cfg.values[key] = value
        cfg.lines[key] = lineno
    return cfg


def load_config(path: str) -> SpaceConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def _end_token(cfg: SpaceConfig, tok: str) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(tok)
    except ValueError:
        raise cfg.error("interval", f"bad endpoint {tok!r}") from None


def _expr(cfg: SpaceConfig, key: str) -> E.Expr:
    try:
        return E.parse(cfg.values[key])
    except E.ExprError as exc:
        raise cfg.error(key, str(exc)) from None


def _default_base(A: float, B: float) -> float:
    if math.isfinite(A) and math.isfinite(B):
        return 0.5 * (A + B)
    if math.isfinite(A):
        return A + 1.0
    if math.isfinite(B):
        return B - 1.0
    return 0.0


# words in validation messages and the config key they point at
_ERROR_KEYS = (("base point", "base_point"), ("interval", "interval"), ("dimension", "dimension"),
               ("fiber measure", "fiber_measure"), ("warp", "warp"), ("psi_s", "surface_density"),
               ("psi_v", "volume_density"))


def build_space(cfg: SpaceConfig, tol: Optional[float] = None) -> SpaceSpec:
    """Turn a parsed configuration into a validated :class:`SpaceSpec`."""
    tol = cfg.number("tol", 1e-9) if tol is None else tol
    if "dimension" not in cfg.values:
        raise ConfigError("missing required key 'dimension'", None, cfg.source)
    n = cfg.number("dimension", kind=int)
    if "surface_density" not in cfg.values:
        raise ConfigError("missing required key 'surface_density'", None, cfg.source)
    psi_s = _expr(cfg, "surface_density")
    psi_v = _expr(cfg, "volume_density") if "volume_density" in cfg.values else psi_s
    preset = cfg.get("preset")
    try:
        if preset is not None:
            if preset != EUCLIDEAN_PUNCTURED:
                raise cfg.error("preset", f"unknown preset {preset!r}")
            for key in ("interval", "warp", "fiber_measure"):
                if key in cfg.values:
                    raise cfg.error(key, f"not allowed together with preset = {EUCLIDEAN_PUNCTURED}")
            return euclidean_punctured(n, psi_s, psi_v, base_point=cfg.number("base_point", 1.0), tol=tol)
        for key in ("interval", "warp", "fiber_measure"):
            if key not in cfg.values:
                raise ConfigError(f"missing required key {key!r} (or set preset)", None, cfg.source)
        toks = cfg.values["interval"].replace(",", " ").split()
        if len(toks) != 2:
            raise cfg.error("interval", "expected two endpoints")
        A, B = (_end_token(cfg, t) for t in toks)
        if not A < B:
            raise cfg.error("interval", f"empty interval ({A}, {B})")
        fm = cfg.values["fiber_measure"]
        measure = sphere_measure(n) if fm == "sphere" else cfg.number("fiber_measure")
        base = cfg.number("base_point", _default_base(A, B))
        return SpaceSpec(n, (A, B), _expr(cfg, "warp"), psi_s, psi_v, measure, base, None, tol)
    except SpaceError as exc:
        msg = str(exc)
        key = next((k for word, k in _ERROR_KEYS if word in msg), None)
        raise (cfg.error(key, msg) if key and key in cfg.lines else ConfigError(msg, None, cfg.source)) from None


# ---------------------------------------------------------------------------


def _write(path: Optional[str], text: str):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _grid_options(args, cfg: SpaceConfig) -> dict:
    per_rung = args.grid if args.grid is not None else cfg.number("grid", 8, kind=int)
    if per_rung < 1:
        raise ConfigError("grid must be a positive integer", cfg.lines.get("grid"), cfg.source)
    return {"per_rung": per_rung, "log_step": cfg.number("log_step", 0.2)}


def cmd_profile(args, cfg: SpaceConfig) -> int:
    space = build_space(cfg, args.tol)
    p = build_profile(space, **_grid_options(args, cfg))
    absolute = args.absolute or cfg.get("absolute", "false").lower() in ("1", "true", "yes")
    _write(args.out, p.to_csv(absolute=absolute))
    if p.partial:
        print("warning: partial profile: " + "; ".join(p.notes), file=sys.stderr)
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_classify(args, cfg: SpaceConfig) -> int:
    space = build_space(cfg, args.tol)
    rep = classify(space, **_grid_options(args, cfg))
    body = rep.to_json() + "\n" if args.format == "json" else rep.to_text()
    sys.stdout.write(body)
    if args.out:
        Path(args.out).write_text(rep.to_json() + "\n" if args.out.endswith(".json") else rep.to_text())
    return EXIT_INCONCLUSIVE if rep.inconclusive else EXIT_OK


def cmd_reduce(args, cfg: SpaceConfig) -> int:
    space = build_space(cfg, args.tol)
    model = reduce(space, **_grid_options(args, cfg))
    lines = ["r,s,Psi"]
    lines += [",".join(format(x, ".17g") for x in row) for row in model.to_rows()]
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _read_psi_table(path: str, cfg: SpaceConfig):
    try:
        with open(path, newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read psi table: {exc.strerror}", None, path) from None
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        data = np.array([[float(a), float(b)] for a, b, *_ in rows])
    except (ValueError, TypeError):
        raise ConfigError("psi table rows must be 's,psi' numbers", None, path) from None
    if data.shape[0] < 3 or np.any(np.diff(data[:, 0]) <= 0) or np.any(data[:, 1] <= 0):
        raise ConfigError("psi table needs >= 3 rows, increasing s and positive psi", None, path)
    s, psi = data[:, 0], data[:, 1]
    return (float(s[0]), float(s[-1])), (lambda x: np.interp(x, s, psi))


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def _verify_number(args, cfg: SpaceConfig, name: str, default, kind=float):
    val = getattr(args, name, None)
    if val is not None:
        return val
    return cfg.number(name, default, kind=kind)


def cmd_verify(args, cfg: SpaceConfig) -> int:
    mode = args.mode or cfg.get("mode", "jensen")
    seed = args.seed if args.seed is not None else cfg.number("seed", 0, kind=int)
    trials = args.trials if args.trials is not None else cfg.number("trials", 1000, kind=int)
    if mode not in ("jensen", "counterexample", "perturb"):
        raise ConfigError(f"unknown verifier mode {mode!r}", cfg.lines.get("mode"), cfg.source)
    cells = cfg.number("cells", 64, kind=int)
    psi_table = args.psi_table or cfg.get("psi_table")
    try:
        if mode == "perturb":
            space = build_space(cfg, args.tol)
            radius = _verify_number(args, cfg, "radius", space.base_point)
            amplitude = _verify_number(args, cfg, "amplitude", 0.1)
            rep = perturb_sphere(space, radius, trials, amplitude, seed=seed)
        else:
            if psi_table:
                interval, psi = _read_psi_table(psi_table, cfg)
                d = DiscreteFiberSpace(np.full(cells, 1.0 / cells), interval, psi)
            else:
                space = build_space(cfg, args.tol)
                model = reduce(space, **_grid_options(args, cfg))
                d = DiscreteFiberSpace.from_model(
                    model, np.full(cells, space.fiber_measure / cells), exact=False)
            if mode == "jensen":
                V0 = _verify_number(args, cfg, "v0", 0.0)
                rep = jensen_check(d, trials, V0, seed=seed, span=cfg.number("span", 1.0))
            else:
                lo, hi = d.interval
                r0 = cfg.number("r0", lo + 0.005 * (hi - lo) if math.isfinite(hi - lo) else None)
                r1 = cfg.number("r1", hi - 0.005 * (hi - lo) if math.isfinite(hi - lo) else None)
                if r0 is None or r1 is None:
                    raise ConfigError("counterexample mode needs r0 and r1 on an infinite interval",
                                      None, cfg.source)
                rep = nonconvex_counterexample(d, r0, r1)
    except VerifierError as exc:
        raise ConfigError(str(exc), None, cfg.source) from None
    if isinstance(rep, Refusal):
        doc = {"mode": mode, "refused": rep.reason, "failed": rep.failed}
        sys.stdout.write(render_text(doc))
        if args.out:
            Path(args.out).write_text(render_text(doc))
        return EXIT_INCONCLUSIVE
    sys.stdout.write(rep.to_json() + "\n" if args.format == "json" else rep.to_text())
    if args.out:
        Path(args.out).write_text(rep.to_json() + "\n" if args.out.endswith(".json") else rep.to_text())
    if args.worst:
        Path(args.worst).write_text(rep.worst_csv())
    return EXIT_OK if rep.ok else EXIT_VIOLATION


COMMANDS = {"profile": cmd_profile, "classify": cmd_classify, "verify": cmd_verify, "reduce": cmd_reduce}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpiso",
                                     description="Isoperimetric certificates for warped products with density.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("profile", "write the V,F,Fp,Fpp profile CSV"),
                           ("classify", "print the certification report"),
                           ("verify", "run the competitor search"),
                           ("reduce", "dump the model space table r,s,Psi")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="space configuration file")
        p.add_argument("--out", help="output file (default: standard output)")
        p.add_argument("--grid", type=int, help="grid points per ladder rung")
        p.add_argument("--tol", type=float, help="relative tolerance for integrals")
        if name == "profile":
            p.add_argument("--absolute", action="store_true",
                           help="measure volume from the end A (when finite there)")
        if name in ("classify", "verify"):
            p.add_argument("--format", choices=("text", "json"), default="text")
        if name == "verify":
            p.add_argument("--mode", choices=("jensen", "counterexample", "perturb"))
            p.add_argument("--trials", type=int)
            p.add_argument("--seed", type=int)
            p.add_argument("--v0", type=float, help="target volume for jensen mode")
            p.add_argument("--radius", type=float, help="sphere radius for perturb mode")
            p.add_argument("--amplitude", type=float, help="perturbation amplitude")
            p.add_argument("--psi-table", dest="psi_table", help="CSV of s,psi for a tabulated density")
            p.add_argument("--worst", help="write the worst competitor as CSV")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
