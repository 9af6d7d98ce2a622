"""Hypothesis checklists and verdicts for a warped product with density.

Each theorem is a list of named predicates with numeric evidence. A
conclusion is certified only when every predicate holds; an inconclusive
predicate downgrades it to "not certified (inconclusive)".
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import expr as E
from .geometry import (INFINITE, POSITIVE, ZERO, AreaLimit, FinitenessReport, SpaceSpec,
                       classify_finiteness, euclidean_punctured, is_punctured_euclidean, is_simple,
                       reflect)
from .profile import (FAILS, HOLDS, INCONCLUSIVE, ConvexityVerdict, ProfileCurve, Refusal,
                      build_profile, certify_large_fibers, check_convexity, contact_intervals,
                      contact_set, tri)
from .quadrature import (FINITE, LIM_FINITE, LIM_POS_INF, IntegralResult, approach_values,
                         ladder_point, limit_at, sequence_limit)

CERTIFIED = "certified"
NOT_CERTIFIED = "not certified"
NOT_CERTIFIED_INCONCLUSIVE = "not certified (inconclusive)"

ALL_VOLUMES = "all volumes"
HALF_VOLUME = "half volume"
NET_ZERO = "net volume zero"
SINGLE_VOLUMES = "single volumes"
ABOVE_THRESHOLD = "above threshold"

_MODE_TEXT = {
    ALL_VOLUMES: "all volumes",
    HALF_VOLUME: "half-volume side (boundary inclusive)",
    NET_ZERO: "every fiber among net-volume-zero competitors",
}

# order in which a certified theorem becomes the headline
HEADLINE_RANK = ("Thm 3.2", "Thm 3.1", "Thm 3.4", "Thm 2.6", "Cor 3.5", "Cor 2.8", "Thm 2.7")


@dataclass(frozen=True)
class Hypothesis:
    name: str
    status: str
    evidence: dict = field(default_factory=dict)

    def to_dict(self):
        return {"name": self.name, "status": self.status, "evidence": self.evidence}


@dataclass(frozen=True)
class TheoremResult:
    theorem: str
    conclusion_mode: str
    conclusion: str
    hypotheses: tuple
    volume_range: Optional[dict] = None

    @property
    def status(self) -> str:
        states = {h.status for h in self.hypotheses}
        if states == {HOLDS}:
            return CERTIFIED
        if FAILS in states:
            return NOT_CERTIFIED
        return NOT_CERTIFIED_INCONCLUSIVE

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def summary(self) -> str:
        if not self.certified:
            return f"{self.theorem}: {self.status}"
        if self.conclusion_mode == ABOVE_THRESHOLD:
            v = (self.volume_range or {}).get("threshold")
            where = "V*" if v is None else f"V* = {v:.6g}"
            return f"{self.theorem}: certified above {where}; below V*: not certified"
        if self.conclusion_mode == SINGLE_VOLUMES:
            runs = (self.volume_range or {}).get("intervals", [])
            text = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in runs[:3])
            return f"{self.theorem}: certified, volumes {text} (grid resolution)"
        return f"{self.theorem}: certified, {_MODE_TEXT[self.conclusion_mode]}"

    def to_dict(self):
        return {
            "theorem": self.theorem,
            "status": self.status,
            "conclusion_mode": self.conclusion_mode,
            "conclusion": self.conclusion,
            "volume_range": self.volume_range,
            "hypotheses": [h.to_dict() for h in self.hypotheses],
        }


@dataclass(frozen=True)
class CertificationReport:
    space: dict
    finiteness: FinitenessReport
    convexity: ConvexityVerdict
    theorems: tuple
    criteria: tuple
    warnings: tuple
    grid: dict

    @property
    def certified(self) -> list:
        return [t for t in self.theorems if t.certified]

    def theorem(self, theorem_id: str) -> TheoremResult:
        for t in self.theorems:
            if t.theorem == theorem_id:
                return t
        raise KeyError(theorem_id)

    @property
    def headline(self) -> str:
        for prefix in HEADLINE_RANK:
            for t in self.theorems:
                if t.certified and (t.theorem == prefix or t.theorem.startswith(prefix + "(")
                                    or t.theorem.startswith(prefix + " ")):
                    return t.summary()
        if any(t.status == NOT_CERTIFIED_INCONCLUSIVE for t in self.theorems):
            return "not certified (inconclusive)"
        return "not certified"

    @property
    def inconclusive(self) -> bool:
        return not self.certified and any(t.status == NOT_CERTIFIED_INCONCLUSIVE for t in self.theorems)

    def to_dict(self):
        return {
            "space": self.space,
            "headline": self.headline,
            "finiteness": self.finiteness.to_dict(),
            "convexity": self.convexity.to_dict(),
            "theorems": [t.to_dict() for t in self.theorems],
            "criteria": list(self.criteria),
            "warnings": list(self.warnings),
            "grid": self.grid,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=False, allow_nan=False)

    def to_text(self) -> str:
        return render_text(self.to_dict())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return x


def _scalar_text(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def render_text(doc, indent: int = 0) -> str:
    """Indented key-value rendering of a nested report document."""
    lines: list = []
    _render(_jsonable(doc), indent, lines)
    return "\n".join(lines) + "\n"


def _render(doc, indent: int, lines: list):
    pad = "  " * indent
    if isinstance(doc, dict):
        for k, v in doc.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                _render(v, indent + 1, lines)
            else:
                lines.append(f"{pad}{k}: {_scalar_text(v) if not isinstance(v, (dict, list)) else '[]'}")
    elif isinstance(doc, list):
        for item in doc:
            if isinstance(item, dict):
                lines.append(f"{pad}-")
                _render(item, indent + 1, lines)
            elif isinstance(item, list) and all(not isinstance(z, (dict, list)) for z in item):
                lines.append(f"{pad}- [{', '.join(_scalar_text(z) for z in item)}]")
            else:
                lines.append(f"{pad}- {_scalar_text(item)}")
    else:
        lines.append(f"{pad}{_scalar_text(doc)}")


# ---------------------------------------------------------------------------
# Checklist predicates


def _kind_hyp(name: str, res: IntegralResult, want: str) -> Hypothesis:
    ev = res.to_dict()
    if res.kind == INCONCLUSIVE:
        return Hypothesis(name, INCONCLUSIVE, ev)
    return Hypothesis(name, tri(res.kind == want), ev)


def _limit_hyp(name: str, lim: AreaLimit, want: str) -> Hypothesis:
    ev = lim.to_dict()
    ev.pop("evidence", None)
    if lim.kind == INCONCLUSIVE:
        return Hypothesis(name, INCONCLUSIVE, ev)
    if want == ZERO:
        return Hypothesis(name, tri(lim.kind == ZERO), ev)
    return Hypothesis(name, tri(lim.is_positive), ev)


def _convex_hyp(verdict: ConvexityVerdict, name: str = "fiber area is convex in signed volume") -> Hypothesis:
    ev = {"violations": len(verdict.violations)}
    if verdict.violations:
        ev["first_violation"] = list(verdict.violations[0])
    cf = verdict.closed_form
    if cf.get("available"):
        ev["closed_form_convex"] = cf["convex"]
    return Hypothesis(name, verdict.convex_everywhere, ev)


def _log_convex_hyp(verdict: ConvexityVerdict) -> Hypothesis:
    cf = verdict.closed_form
    ev = {"discrete": verdict.log_convex_in_r}
    status = verdict.log_convex_in_r
    if cf.get("available"):
        ev["closed_form"] = cf["log_convex"]
        ev["criterion_min"] = cf["criterion_min"]
        if status == HOLDS and cf["log_convex"] == FAILS:
            status = INCONCLUSIVE
    return Hypothesis("fiber area is log-convex in r", status, ev)


def _flag(name: str, ok: bool, **evidence) -> Hypothesis:
    return Hypothesis(name, tri(ok), evidence)


# ---------------------------------------------------------------------------
# Theorem families


def _general_theorems(fin: FinitenessReport, verdict: ConvexityVerdict, suffix: str = "",
                      flip: bool = False) -> list:
    """Convex-profile family; ``flip`` swaps the roles of the ends (reversed statements)."""
    convex = _convex_hyp(verdict)
    A, B = ("B", "A") if flip else ("A", "B")
    vol_A = fin.volume_at_B if flip else fin.volume_at_A
    lim_A = fin.area_limit_B if flip else fin.area_limit_A
    horiz = fin.horizontal_integral_to_A if flip else fin.horizontal_integral_to_B
    total = _kind_hyp("infinite total volume", fin.total_volume, INFINITE)
    out = [
        TheoremResult(
            f"Thm 2.6(1){suffix}", ALL_VOLUMES, "fibers minimize vertical area for all volumes",
            (convex, total, _kind_hyp(f"finite volume at {A}", vol_A, FINITE),
             _limit_hyp(f"fiber area tends to 0 at {A}", lim_A, ZERO)),
            {"coordinate": f"volume from {A}", "intervals": [[0.0, "inf"]]}),
        TheoremResult(
            f"Thm 2.6(2){suffix}", HALF_VOLUME,
            f"fibers bounding at most half the total volume (measured from {A}) minimize",
            (convex, _kind_hyp("finite total volume", fin.total_volume, FINITE),
             _limit_hyp(f"fiber area tends to 0 at {A}", lim_A, ZERO),
             _kind_hyp(f"horizontal integral toward {B} diverges", horiz, INFINITE)),
            _half_range(fin, A)),
    ]
    return out


def _half_range(fin: FinitenessReport, end: str) -> dict:
    tot = fin.total_volume
    upper = 0.5 * tot.value if tot.kind == FINITE else None
    return {"coordinate": f"volume from {end}", "intervals": [[0.0, upper]], "inclusive": True}


def _net_zero_theorem(theorem: str, fin: FinitenessReport, convex: Hypothesis) -> TheoremResult:
    return TheoremResult(
        theorem, NET_ZERO, "every fiber minimizes among competitors bounding net volume zero",
        (convex, _kind_hyp("infinite volume at A", fin.volume_at_A, INFINITE),
         _kind_hyp("infinite volume at B", fin.volume_at_B, INFINITE),
         _limit_hyp("fiber area limit at A is positive", fin.area_limit_A, POSITIVE),
         _limit_hyp("fiber area limit at B is positive", fin.area_limit_B, POSITIVE)),
        {"coordinate": "signed volume", "intervals": [["-inf", "inf"]]})


def _mirror_fin(fin: FinitenessReport) -> FinitenessReport:
    return FinitenessReport(fin.volume_at_B, fin.volume_at_A, fin.total_volume, fin.area_limit_B,
                            fin.area_limit_A, fin.horizontal_integral_to_A, fin.horizontal_integral_to_B)


def _single_fiber_theorems(p: ProfileCurve, fin: FinitenessReport, verdict: ConvexityVerdict,
                           space: SpaceSpec, reflected: Optional[tuple]) -> list:
    out = []
    # case 1 at A
    out.append(_case1_theorem("Thm 2.7(1)", p, fin, "A"))
    if reflected is not None:
        rp, rfin = reflected
        out.append(_case1_theorem("Thm 2.7(1) reversed", rp, rfin, "B"))
    else:
        out.append(_case1_theorem("Thm 2.7(1) reversed", None, _mirror_fin(fin), "B"))
    # case 2
    pre = (_kind_hyp("infinite volume at A", fin.volume_at_A, INFINITE),
           _kind_hyp("infinite volume at B", fin.volume_at_B, INFINITE))
    if all(h.status == HOLDS for h in pre):
        cs = contact_set(p, fin)
        if isinstance(cs, Refusal):
            mini = Hypothesis("convex minorant touches F", FAILS, cs.to_dict())
            rng = None
        else:
            _, mask, env = cs
            runs = contact_intervals(p.V, mask)
            mini = Hypothesis("convex minorant with positive end limits touches F", tri(bool(runs)),
                              {"envelope": env.to_dict(max_vertices=8), "contact_samples": int(mask.sum())})
            rng = {"coordinate": "signed volume", "intervals": runs,
                   "radii": _contact_radii(p, mask)}
        out.append(TheoremResult("Thm 2.7(2)", SINGLE_VOLUMES,
                                 "fibers at the certified volumes minimize among competitors "
                                 "bounding net volume zero", pre + (mini,), rng))
    else:
        out.append(TheoremResult("Thm 2.7(2)", SINGLE_VOLUMES,
                                 "fibers at the certified volumes minimize among competitors "
                                 "bounding net volume zero", pre))
    # Cor 2.8 at A, and mirrored
    out.append(_large_theorem("Cor 2.8", p, fin, verdict_abs=None))
    if reflected is not None:
        out.append(_large_theorem("Cor 2.8 reversed", reflected[0], reflected[1], verdict_abs=None))
    else:
        out.append(_large_theorem("Cor 2.8 reversed", None, _mirror_fin(fin), verdict_abs=None))
    return out


def _contact_radii(p: ProfileCurve, mask: np.ndarray) -> list:
    return [[float(abs(p.radii[a])), float(abs(p.radii[b]))]
            for a, b in _runs(mask)]


def _runs(mask: np.ndarray) -> list:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    return list(zip(starts.tolist(), ends.tolist()))


def _case1_theorem(theorem: str, p: Optional[ProfileCurve], fin: FinitenessReport,
                   end: str) -> TheoremResult:
    pre = (_kind_hyp("infinite total volume", fin.total_volume, INFINITE),
           _kind_hyp(f"finite volume at {end}", fin.volume_at_A, FINITE))
    text = f"fibers at the certified volumes (measured from {end}) minimize vertical area"
    if p is None or not all(h.status == HOLDS for h in pre):
        return TheoremResult(theorem, SINGLE_VOLUMES, text, pre)
    cs = contact_set(p, fin)
    if isinstance(cs, Refusal):
        return TheoremResult(theorem, SINGLE_VOLUMES, text,
                             pre + (Hypothesis("convex minorant vanishing at volume 0 touches F",
                                               FAILS, cs.to_dict()),))
    _, mask, env = cs
    runs = contact_intervals(p.V_abs, mask)
    mini = Hypothesis("convex minorant vanishing at volume 0 touches F", tri(bool(runs)),
                      {"envelope": env.to_dict(max_vertices=8), "contact_samples": int(mask.sum())})
    return TheoremResult(theorem, SINGLE_VOLUMES, text, pre + (mini,),
                         {"coordinate": f"volume from {end}", "intervals": runs,
                          "radii": _contact_radii(p, mask)})


def _large_theorem(theorem: str, p: Optional[ProfileCurve], fin: FinitenessReport,
                   verdict_abs) -> TheoremResult:
    end = "B" if theorem.endswith("reversed") else "A"
    pre = (_kind_hyp("infinite total volume", fin.total_volume, INFINITE),
           _kind_hyp(f"finite volume at {end}", fin.volume_at_A, FINITE))
    text = f"fibers bounding large volume (measured from {end}) are isoperimetric"
    if p is None or not all(h.status == HOLDS for h in pre):
        return TheoremResult(theorem, ABOVE_THRESHOLD, text, pre)
    cert = certify_large_fibers(p, fin)
    if isinstance(cert, Refusal):
        return TheoremResult(theorem, ABOVE_THRESHOLD, text,
                             pre + (Hypothesis(f"three-piece minorant: {cert.failed}", FAILS,
                                               cert.to_dict()),))
    return TheoremResult(theorem, ABOVE_THRESHOLD, text,
                         pre + (Hypothesis("three-piece minorant (eventually convex, line through "
                                           "origin, F' unbounded)", HOLDS, cert.to_dict()),),
                         {"coordinate": f"volume from {end}", "threshold": cert.threshold,
                          "threshold_radius": abs(cert.radius)})


# ---------------------------------------------------------------------------
# Punctured Euclidean space


def _euclidean_theorems(space: SpaceSpec, p: ProfileCurve, fin: FinitenessReport,
                        verdict: ConvexityVerdict, large: Optional[TheoremResult]) -> tuple:
    convex = _convex_hyp(verdict, "sphere area is convex in signed volume")
    total_inf = _kind_hyp("infinite total volume", fin.total_volume, INFINITE)
    total_fin = _kind_hyp("finite total volume", fin.total_volume, FINITE)
    out = [
        TheoremResult("Thm 3.1(1a)", ALL_VOLUMES, "spheres about the origin are isoperimetric for all volumes",
                      (convex, total_inf, _kind_hyp("finite volume at the origin", fin.volume_at_A, FINITE),
                       _limit_hyp("sphere area tends to 0 at the origin", fin.area_limit_A, ZERO)),
                      {"coordinate": "volume of balls", "intervals": [[0.0, "inf"]]}),
        TheoremResult("Thm 3.1(1b)", ALL_VOLUMES,
                      "spheres about the origin are isoperimetric for all volumes (bounding volume at infinity)",
                      (convex, total_inf, _kind_hyp("finite volume at infinity", fin.volume_at_B, FINITE),
                       _limit_hyp("sphere area tends to 0 at infinity", fin.area_limit_B, ZERO)),
                      {"coordinate": "volume of ball complements", "intervals": [[0.0, "inf"]]}),
        TheoremResult("Thm 3.1(2)", HALF_VOLUME,
                      "spheres bounding at most half the total volume at the origin are isoperimetric",
                      (convex, total_fin, _limit_hyp("sphere area tends to 0 at the origin", fin.area_limit_A, ZERO)),
                      _half_range(fin, "the origin")),
        TheoremResult("Thm 3.1(2) reversed", HALF_VOLUME,
                      "spheres bounding at most half the total volume at infinity are isoperimetric",
                      (convex, total_fin, _limit_hyp("sphere area tends to 0 at infinity", fin.area_limit_B, ZERO)),
                      _half_range(fin, "infinity")),
        _net_zero_theorem("Thm 3.1(3)", fin, convex),
    ]
    simple = is_simple(space)
    simple_h = _flag("simple density (surface and volume densities agree)", simple)
    logc = _log_convex_hyp(verdict)
    out += [
        TheoremResult("Thm 3.2(1)", ALL_VOLUMES,
                      "complements of balls about the origin are isoperimetric for all volumes",
                      (simple_h, logc, total_inf,
                       _kind_hyp("finite volume at infinity", fin.volume_at_B, FINITE)),
                      {"coordinate": "volume of ball complements", "intervals": [[0.0, "inf"]]}),
        TheoremResult("Thm 3.2(2)", HALF_VOLUME,
                      "spheres bounding at least half the volume at the origin are isoperimetric",
                      (simple_h, logc, total_fin),
                      {"coordinate": "volume of balls",
                       "intervals": [[0.5 * fin.total_volume.value if fin.total_volume.kind == FINITE else None,
                                      fin.total_volume.value if fin.total_volume.kind == FINITE else None]],
                       "inclusive": True}),
        TheoremResult("Thm 3.2(3)", NET_ZERO,
                      "every sphere minimizes among competitors bounding net volume zero",
                      (simple_h, logc, _kind_hyp("infinite volume at the origin", fin.volume_at_A, INFINITE),
                       _kind_hyp("infinite volume at infinity", fin.volume_at_B, INFINITE)),
                      {"coordinate": "signed volume", "intervals": [["-inf", "inf"]]}),
        _surface_density_theorem(space, p),
        _large_balls_theorem(space, p, simple_h, large),
    ]
    return tuple(out), _criteria(space, p, verdict, simple)


def _surface_density_theorem(space: SpaceSpec, p: ProfileCurve) -> TheoremResult:
    r = p.radii
    psi_v = _eval(space.psi_v, r)
    unit_volume = bool(np.all(np.isfinite(psi_v)) and np.allclose(psi_v, 1.0, rtol=1e-12, atol=0))
    hyps = [_flag("volume density is 1", unit_volume)]
    psi = _eval(space.psi_s, r)
    ok = np.isfinite(psi)
    nondecr = bool(ok.all() and np.all(np.diff(psi) >= -1e-12 * np.abs(psi[1:])))
    hyps.append(_flag("surface density is nondecreasing", nondecr))
    lim = limit_at(lambda x: E.evaluate(space.psi_s, x), space.base_point, 0.0)
    if lim.kind == LIM_FINITE:
        psi0 = 0.0 if abs(lim.value) < 1e-7 * max(1.0, abs(psi[0]) if ok[0] else 1.0) else lim.value
        hyps.append(Hypothesis("surface density has a finite value at the origin", HOLDS, {"value": psi0}))
        # convexity of (psi(t^(1/n)) - psi(0)) t^(1 - 1/n) on t = r^n
        n = space.n
        t = r ** n
        G = (psi - psi0) * t ** (1.0 - 1.0 / n)
        from .profile import _violations, slope_jumps
        jump, tol = slope_jumps(t, G)
        bad = _violations(jump, tol)
        hyps.append(Hypothesis("(psi(t^(1/n)) - psi(0)) t^(1-1/n) is convex",
                               tri(bad.size == 0) if ok.all() else INCONCLUSIVE,
                               {"violations": int(bad.size)}))
    else:
        hyps.append(Hypothesis("surface density has a finite value at the origin",
                               INCONCLUSIVE if lim.kind == "inconclusive" else FAILS, lim.to_dict()))
    return TheoremResult("Thm 3.4", ALL_VOLUMES, "spheres about the origin are isoperimetric",
                         tuple(hyps), {"coordinate": "volume of balls", "intervals": [[0.0, "inf"]]})


def _eval(e: E.Expr, r: np.ndarray) -> np.ndarray:
    from .profile import _eval_safe
    return _eval_safe(e, np.asarray(r, dtype=float))


def _large_balls_theorem(space: SpaceSpec, p: ProfileCurve, simple_h: Hypothesis,
                         large: Optional[TheoremResult]) -> TheoremResult:
    hyps = [simple_h]
    lim = limit_at(lambda x: E.evaluate(space.psi_s, x), space.base_point, 0.0)
    finite_pos = lim.kind == LIM_FINITE and lim.value > 1e-7 * max(1.0, abs(lim.value))
    hyps.append(Hypothesis("density is finite and positive at the origin",
                           INCONCLUSIVE if lim.kind == "inconclusive" else tri(finite_pos), lim.to_dict()))
    phi = E.log(space.psi_s)
    d2 = E.differentiate(E.differentiate(phi))
    r = p.radii
    vals = _eval(d2, r)
    hyps.append(_flag("log-density is twice differentiable on the grid", bool(np.all(np.isfinite(vals)))))
    # r * phi'' must stay above a positive constant beyond some radius
    rphi = r * vals
    tail_lim = limit_at(lambda x: x * E.evaluate(d2, x), space.base_point, space.B)
    tail_ok = tail_lim.kind == LIM_POS_INF or (tail_lim.kind == LIM_FINITE and tail_lim.value > 1e-9)
    finite = np.isfinite(rphi)
    neg = np.flatnonzero(finite & (rphi <= 1e-9))
    r0 = float(r[neg[-1] + 1]) if neg.size and neg[-1] + 1 < r.size else (float(r[0]) if not neg.size else None)
    ev = {"tail_limit": tail_lim.to_dict(), "from_radius": r0}
    if r0 is not None:
        ev["inf_on_tail"] = float(np.min(rphi[(r >= r0) & finite]))
    status = INCONCLUSIVE if tail_lim.kind == "inconclusive" else tri(tail_ok and r0 is not None)
    hyps.append(Hypothesis("r * phi''(r) >= eps > 0 beyond some radius", status, ev))
    rng = None
    if large is not None and large.certified:
        rng = dict(large.volume_range)
    return TheoremResult("Cor 3.5", ABOVE_THRESHOLD, "large spheres about the origin are isoperimetric",
                         tuple(hyps), rng)


def _criteria(space: SpaceSpec, p: ProfileCurve, verdict: ConvexityVerdict, simple: bool) -> tuple:
    out = []
    cf = verdict.closed_form
    if simple and cf.get("available"):
        out.append({
            "criterion": "phi'' >= (n-1)/r^2 (log-convexity of sphere area in r)",
            "status": cf["log_convex"],
            "min_margin": cf["criterion_min"],
            "holds_from_radius": cf["log_convex_from_radius"],
        })
    psi_s = _eval(space.psi_s, p.radii)
    if np.all(np.isfinite(psi_s)) and np.allclose(psi_s, 1.0, rtol=1e-12, atol=0):
        phi1 = _eval(E.differentiate(E.log(space.psi_v)), p.radii)
        margin = phi1 + 1.0 / p.radii
        ok = np.isfinite(margin)
        tol = 1e-9 * (np.abs(phi1) + 1.0 / p.radii)
        out.append({
            "criterion": "phi' <= -1/r (volume density e^phi, unit surface density)",
            "status": tri(bool(np.all(margin[ok] <= tol[ok]))) if ok.any() else INCONCLUSIVE,
            "max_margin": float(np.max(margin[ok])) if ok.any() else None,
        })
    return tuple(out)


# ---------------------------------------------------------------------------


def _warnings(space: SpaceSpec, p: ProfileCurve, fin: FinitenessReport,
              verdict: ConvexityVerdict) -> tuple:
    out = []
    convex = verdict.convex_everywhere == HOLDS
    if (convex and fin.volume_at_A.kind == FINITE and fin.total_volume.kind == INFINITE
            and fin.area_limit_A.kind in (POSITIVE, INFINITE)):
        out.append("nonexistence regime: profile is convex with finite volume at A and infinite total "
                   "volume, but fiber area does not tend to 0 at A; fibers bounding small volumes "
                   "cannot be isoperimetric")
    if convex and is_simple(space) and fin.area_limit_A.kind == ZERO and is_punctured_euclidean(space):
        out.append("consistency warning: a smooth simple density with sphere area tending to 0 at the "
                   "origin cannot have a convex profile; check the density or the grid")
    if p.partial:
        out.append("profile is partial: " + "; ".join(p.notes))
    for name in ("volume_at_A", "volume_at_B", "area_limit_A", "area_limit_B"):
        if getattr(fin, name).kind == INCONCLUSIVE:
            out.append(f"{name} is inconclusive")
    return tuple(out)


def classify(space: SpaceSpec, per_rung: int = 8, log_step: float = 0.2) -> CertificationReport:
    """Run every applicable hypothesis checklist on ``space``."""
    fin = classify_finiteness(space)
    p = build_profile(space, per_rung=per_rung, log_step=log_step)
    verdict = check_convexity(p)
    theorems = _general_theorems(fin, verdict)
    theorems += _general_theorems(fin, verdict, " reversed", flip=True)
    theorems.append(_net_zero_theorem("Thm 2.6(3)", fin, _convex_hyp(verdict)))
    reflected = None
    if fin.volume_at_B.kind == FINITE and fin.total_volume.kind == INFINITE:
        rspace = reflect(space)
        reflected = (build_profile(rspace, per_rung=per_rung, log_step=log_step), _mirror_fin(fin))
    single = _single_fiber_theorems(p, fin, verdict, space, reflected)
    theorems += single
    criteria: tuple = ()
    if is_punctured_euclidean(space):
        large = next(t for t in single if t.theorem == "Cor 2.8")
        extra, criteria = _euclidean_theorems(space, p, fin, verdict, large)
        theorems += list(extra)
    grid = dict(p.grid, window=[float(p.radii[0]), float(p.radii[-1])])
    return CertificationReport(space.describe(), fin, verdict, tuple(theorems), criteria,
                               _warnings(space, p, fin, verdict), grid)


# ---------------------------------------------------------------------------
# Conformal metrics on the punctured plane


@dataclass(frozen=True)
class ConformalVerdict:
    phi: str
    criterion: str
    equality: bool
    min_margin: float
    max_margin: float
    curvature_form: dict
    report: Optional[CertificationReport]

    @property
    def verdict(self) -> str:
        if self.report is None:
            return NOT_CERTIFIED
        return self.report.headline

    def to_dict(self):
        return {
            "phi": self.phi,
            "criterion": "phi'' >= phi'^2 + phi'/r + 1/r^2",
            "status": self.criterion,
            "equality": self.equality,
            "min_margin": self.min_margin,
            "max_margin": self.max_margin,
            "curvature_form": self.curvature_form,
            "verdict": self.verdict,
            "report": None if self.report is None else self.report.to_dict(),
        }


def conformal_plane_space(phi) -> SpaceSpec:
    """Punctured plane with metric e^phi |dx|, as a space with differing densities."""
    phi = E.as_expr(phi)
    return euclidean_punctured(2, E.exp(phi), E.exp(E.mul(E.Num(2.0), phi)))


def classify_conformal_plane(phi, per_rung: int = 8, log_step: float = 0.2) -> ConformalVerdict:
    """Convexity criterion for the metric e^phi ds on the punctured plane.

    The profile is convex at radius r iff phi'' >= phi'^2 + phi'/r + 1/r^2,
    equivalently kappa >= (phi' + 1/r)^2 with kappa = phi'' + phi'/r.
    """
    phi = E.as_expr(phi)
    space = conformal_plane_space(phi)
    d1 = E.differentiate(phi)
    d2 = E.differentiate(d1)
    from .geometry import radial_grid
    r = radial_grid(space, per_rung=per_rung, log_step=log_step)
    p1, p2 = _eval(d1, r), _eval(d2, r)
    rhs = p1 ** 2 + p1 / r + 1.0 / r ** 2
    margin = p2 - rhs
    scale = np.abs(p2) + np.abs(p1) ** 2 + np.abs(p1 / r) + 1.0 / r ** 2
    tol = 1e-9 * scale
    ok = np.isfinite(margin)
    holds = bool(ok.all() and np.all(margin >= -tol))
    equality = bool(holds and np.all(np.abs(margin) <= tol))
    kappa = p2 + p1 / r
    curv = {"form": "kappa >= (phi' + 1/r)^2 with kappa = phi'' + phi'/r",
            "min_margin": float(np.min((kappa - (p1 + 1.0 / r) ** 2)[ok])) if ok.any() else None}
    report = classify(space, per_rung=per_rung, log_step=log_step) if holds else None
    return ConformalVerdict(E.to_text(phi), tri(holds) if ok.all() else INCONCLUSIVE, equality,
                            float(np.min(margin[ok])) if ok.any() else math.nan,
                            float(np.max(margin[ok])) if ok.any() else math.nan, curv, report)
