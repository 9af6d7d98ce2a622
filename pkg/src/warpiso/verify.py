"""Empirical search for competitors that beat fibers or spheres.

Two restricted competitor families are searched: graphs over a fiber split
into weighted cells (model space, vertical perimeter only) and axisymmetric
radial graphs around a sphere in punctured Euclidean space. Passing is
evidence, not proof.
"""

from __future__ import annotations

import functools
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as E
from .classifier import ALL_VOLUMES, HALF_VOLUME, _jsonable, classify, render_text
from .geometry import SpaceSpec, fiber_area, is_punctured_euclidean, sphere_measure
from .model import ModelSpace
from .profile import FAILS, HOLDS, Refusal, tri
from .quadrature import gauss_legendre

SPLIT_RTOL = 1e-9
EXHAUSTIVE_SPLIT_MAX = 20
SHELL_ORDER = 24


class VerifierError(ValueError):
    """Invalid verifier input (bad weights, infeasible volume, bad radius)."""


def _csv_number(x: float) -> str:
    return format(float(x), ".17g")


class _Report:
    """Shared serialization for verifier reports."""

    def to_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, allow_nan=False)

    def to_text(self) -> str:
        return render_text(self.to_dict())


# ---------------------------------------------------------------------------
# Model space with a discretized fiber


@dataclass(frozen=True, eq=False)
class DiscreteFiberSpace:
    """Model interval (s_A, s_B) whose fiber is split into cells of measure ``weights``."""

    weights: np.ndarray
    interval: tuple
    psi: Callable

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise VerifierError("need at least two cells")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise VerifierError("cell weights must be positive and finite")
        lo, hi = (float(x) for x in self.interval)
        if not lo < hi:
            raise VerifierError("empty model interval")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "interval", (lo, hi))

    @property
    def m(self) -> int:
        return self.weights.size

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def contains(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        return (h > self.interval[0]) & (h < self.interval[1])

    @classmethod
    def from_model(cls, model: ModelSpace, weights, exact: bool = True) -> "DiscreteFiberSpace":
        """Cells over the tabulated window of a reduced space."""
        psi = model.psi if exact else model.psi_interpolated
        return cls(np.asarray(weights, dtype=float), (float(model.s_table[0]), float(model.s_table[-1])), psi)


@dataclass(frozen=True, eq=False)
class GraphSurface:
    """Graph h_i over the cells of a :class:`DiscreteFiberSpace`."""

    space: DiscreteFiberSpace
    heights: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=float)
        if h.shape != self.space.weights.shape:
            raise VerifierError("one height per cell is required")
        if not np.all(self.space.contains(h)):
            raise VerifierError("heights must lie inside the model interval")
        object.__setattr__(self, "heights", h)

    @property
    def volume(self) -> float:
        return float(np.dot(self.space.weights, self.heights))

    @property
    def vertical_perimeter(self) -> float:
        return float(np.dot(self.space.weights, self.space.psi(self.heights)))

    def to_csv(self, out=None) -> str:
        buf = io.StringIO()
        buf.write("cell,height\n")
        for i, h in enumerate(self.heights):
            buf.write(f"{i},{_csv_number(h)}\n")
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


def second_difference_check(psi: Callable, lo: float, hi: float, points: int = 257) -> dict:
    """Sampled second differences of ``psi`` on a uniform grid inside [lo, hi]."""
    x = np.linspace(lo, hi, points)
    y = np.asarray(psi(x), dtype=float)
    d2 = y[2:] - 2 * y[1:-1] + y[:-2]
    tol = 1e-12 * (np.abs(y[2:]) + 2 * np.abs(y[1:-1]) + np.abs(y[:-2]))
    ok = np.isfinite(d2)
    return {"status": tri(bool(ok.all() and np.all(d2 >= -tol))), "min_second_difference":
            float(np.min(d2[ok])) if ok.any() else math.nan, "window": [float(lo), float(hi)]}


@dataclass(frozen=True)
class JensenReport(_Report):
    trials: int
    seed: int
    target_volume: float
    fiber_perimeter: float
    min_slack: float
    violations: int
    psi_convexity: dict
    worst: GraphSurface = field(repr=False)

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self):
        return {"mode": "jensen", "trials": self.trials, "seed": self.seed, "cells": self.worst.space.m,
                "target_volume": self.target_volume, "fiber_perimeter": self.fiber_perimeter,
                "min_slack": self.min_slack, "violations": self.violations,
                "psi_convexity": self.psi_convexity, "worst_volume": self.worst.volume}

    def worst_csv(self) -> str:
        return self.worst.to_csv()


def _transfer_heights(d: DiscreteFiberSpace, level: float, trials: int, seed: int,
                      span: float) -> np.ndarray:
    """Random heights with fixed weighted sum, via mean-preserving pairwise transfers.

    Each trial uses its own generator seeded by (seed, trial index) and makes
    4m transfers; trials are then advanced together as arrays.
    """
    m = d.m
    steps = 4 * m
    I = np.empty((trials, steps), dtype=np.int64)
    J = np.empty((trials, steps), dtype=np.int64)
    U = np.empty((trials, steps))
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        i = rng.integers(0, m, size=steps)
        j = rng.integers(0, m - 1, size=steps)
        I[t], J[t] = i, j + (j >= i)
        U[t] = rng.random(steps)
    w = d.weights
    lo, hi = d.interval
    H = np.full((trials, m), level)
    rows = np.arange(trials)
    for k in range(steps):
        i, j = I[:, k], J[:, k]
        hi_i, hj = H[rows, i], H[rows, j]
        # mass moved from cell j up into cell i, limited by the headroom of both
        room_i = (hi - hi_i) * w[i] if math.isfinite(hi) else np.full(trials, span * w[i])
        room_j = (hj - lo) * w[j] if math.isfinite(lo) else np.full(trials, span * w[j])
        if math.isfinite(hi):
            room_i = np.minimum(room_i, span * w[i])
        if math.isfinite(lo):
            room_j = np.minimum(room_j, span * w[j])
        mass = 0.999 * U[:, k] * np.minimum(room_i, room_j)
        H[rows, i] = hi_i + mass / w[i]
        H[rows, j] = hj - mass / w[j]
    return H


def jensen_check(d: DiscreteFiberSpace, trials: int, V0: float, seed: int = 0,
                 span: float = 1.0) -> JensenReport:
    """Compare random graphs of weighted volume V0 against the flat fiber at V0/W.

    ``span`` caps a single transfer (in model units) where an end is infinite.
    """
    W = d.total_weight
    level = V0 / W
    if not d.contains(level):
        raise VerifierError(f"volume {V0} is outside W*(s_A, s_B)")
    if trials < 1:
        raise VerifierError("trials must be positive")
    H = _transfer_heights(d, level, trials, seed, span)
    P = np.asarray(d.psi(H), dtype=float) @ d.weights
    base = W * float(d.psi(np.array([level]))[0])
    slack = P - base
    vol_drift = np.abs(H @ d.weights - V0)
    tol = 1e-9 * (np.abs(P) + abs(base)) + 1e-12
    bad = ~np.isfinite(slack) | (slack < -tol)
    worst = int(np.nanargmin(slack)) if np.isfinite(slack).any() else 0
    # convexity is checked where the trials actually sampled
    lo, hi = float(H.min()), float(H.max())
    conv = second_difference_check(d.psi, lo, hi) if hi > lo else {"status": HOLDS, "window": [lo, hi]}
    conv["max_volume_drift"] = float(vol_drift.max())
    return JensenReport(trials, seed, V0, base, float(np.nanmin(slack)), int(bad.sum()), conv,
                        GraphSurface(d, H[worst]))


# ---------------------------------------------------------------------------
# Explicit competitor for a non-convex density


def split_weights(weights: Sequence[float], rtol: float = SPLIT_RTOL):
    """Boolean mask of a subset carrying half the total weight, or None.

    Greedy largest-first assignment is tried first; for at most
    ``EXHAUSTIVE_SPLIT_MAX`` cells every subset is then examined.
    """
    w = np.asarray(weights, dtype=float)
    W = w.sum()
    tol = rtol * W
    mask = np.zeros(w.size, dtype=bool)
    load = [0.0, 0.0]
    for k in np.argsort(-w, kind="stable"):
        side = 0 if load[0] <= load[1] else 1
        load[side] += w[k]
        mask[k] = side == 0
    if abs(load[0] - load[1]) <= 2 * tol:
        return mask
    if w.size > EXHAUSTIVE_SPLIT_MAX:
        return None
    sums = np.zeros(1)
    for x in w:
        sums = np.concatenate([sums, sums + x])
    hit = np.flatnonzero(np.abs(2 * sums - W) <= 2 * tol)
    if hit.size == 0:
        return None
    code = int(hit[0])
    return np.array([(code >> k) & 1 == 1 for k in range(w.size)])


@dataclass(frozen=True)
class Counterexample(_Report):
    competitor: GraphSurface
    fiber_height: float
    fiber_perimeter: float
    competitor_perimeter: float
    volume_gap: float

    @property
    def ok(self) -> bool:
        return True

    @property
    def ratio(self) -> float:
        return self.competitor_perimeter / self.fiber_perimeter

    def to_dict(self):
        return {"mode": "counterexample", "fiber_height": self.fiber_height,
                "fiber_volume": self.competitor.space.total_weight * self.fiber_height,
                "fiber_perimeter": self.fiber_perimeter,
                "competitor_volume": self.competitor.volume,
                "competitor_perimeter": self.competitor_perimeter, "perimeter_ratio": self.ratio,
                "volume_gap": self.volume_gap}

    def worst_csv(self) -> str:
        return self.competitor.to_csv()


def nonconvex_counterexample(d: DiscreteFiberSpace, r0: float, r1: float):
    """Two half-fibers at r0 and r1 against the fiber at their midpoint.

    Returns a :class:`Counterexample`, or a :class:`Refusal` when the density
    is midpoint-convex there or the weights cannot be halved.
    """
    if not r0 < r1:
        raise VerifierError("need r0 < r1")
    if not (d.contains(r0) and d.contains(r1)):
        raise VerifierError("r0 and r1 must lie inside the model interval")
    mid = 0.5 * (r0 + r1)
    p0, p1, pm = (float(v) for v in d.psi(np.array([r0, r1, mid])))
    chord = 0.5 * (p0 + p1)
    if not pm > chord * (1 + 1e-12):
        return Refusal("density is midpoint-convex on [r0, r1]", "midpoint inequality",
                       {"psi_mid": pm, "chord_mid": chord})
    mask = split_weights(d.weights)
    if mask is None:
        return Refusal("weights cannot be split into two halves of equal measure", "weight split",
                       {"weights": d.weights.tolist()})
    h = np.where(mask, r0, r1)
    comp = GraphSurface(d, h)
    W = d.total_weight
    fiber_p = W * pm
    comp_p = comp.vertical_perimeter
    gap = comp.volume - W * mid
    assert abs(gap) <= 1e-8 * W * max(1.0, abs(r0), abs(r1)), "competitor volume mismatch"
    assert comp_p < fiber_p, "competitor does not beat the fiber"
    return Counterexample(comp, mid, fiber_p, comp_p, gap)


# ---------------------------------------------------------------------------
# Axisymmetric perturbations of a sphere


@functools.lru_cache(maxsize=8)
def _leggauss(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


@dataclass(frozen=True, eq=False)
class RevolutionSurface:
    """Radial graph rho(theta) = scale * r_star * (1 + amplitude * noise(cos theta)).

    ``coefficients`` define the polynomial noise in cos(theta), normalized so
    that |noise| <= 1 on [0, pi]. Integrals over theta use Gauss-Legendre
    nodes, exact for the smooth polynomial profile up to quadrature order.
    """

    space: SpaceSpec
    r_star: float
    amplitude: float
    coefficients: np.ndarray
    scale: float = 1.0
    nodes: int = 96

    def _angles(self):
        x, w = _leggauss(self.nodes)
        theta = 0.5 * math.pi * (x + 1.0)
        return theta, 0.5 * math.pi * w

    def _noise(self, theta):
        c = np.cos(theta)
        coef = self.coefficients
        val = np.polynomial.polynomial.polyval(c, coef)
        dval = np.polynomial.polynomial.polyval(c, np.polynomial.polynomial.polyder(coef)) * (-np.sin(theta))
        return val, dval

    def radius(self, theta):
        val, _ = self._noise(np.asarray(theta, dtype=float))
        return self.scale * self.r_star * (1.0 + self.amplitude * val)

    def _profile(self):
        theta, wq = self._angles()
        val, dval = self._noise(theta)
        rho = self.scale * self.r_star * (1.0 + self.amplitude * val)
        drho = self.scale * self.r_star * self.amplitude * dval
        return theta, wq, rho, drho

    def volume_offset(self) -> float:
        """Weighted volume enclosed minus that of the sphere of radius r_star."""
        theta, wq, rho, _ = self._profile()
        n = self.space.n
        # thin shells around r_star with a smooth integrand: a fixed rule suffices
        shell = gauss_legendre(self.space.volume_element, self.r_star, rho, order=SHELL_ORDER)
        shell = shell / self.space.fiber_measure
        return sphere_measure(n - 1) * float(np.sum(wq * shell * np.sin(theta) ** (n - 2)))

    def perimeter(self) -> float:
        theta, wq, rho, drho = self._profile()
        n = self.space.n
        psi = E.evaluate(self.space.psi_s, rho)
        integrand = psi * rho ** (n - 2) * np.sqrt(rho ** 2 + drho ** 2) * np.sin(theta) ** (n - 2)
        return sphere_measure(n - 1) * float(np.sum(wq * integrand))

    def to_csv(self, out=None, points: int = 181) -> str:
        theta = np.linspace(0.0, math.pi, points)
        rho = self.radius(theta)
        buf = io.StringIO()
        buf.write("theta,rho\n")
        for t, r in zip(theta, rho):
            buf.write(f"{_csv_number(t)},{_csv_number(r)}\n")
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


@dataclass(frozen=True)
class PerturbationReport(_Report):
    trials: int
    seed: int
    r_star: float
    amplitude: float
    sphere_perimeter: float
    min_slack: float
    max_abs_slack: float
    violations: int
    discarded: int
    asserting: bool
    worst: Optional[RevolutionSurface] = field(repr=False, default=None)

    @property
    def ok(self) -> bool:
        return not self.asserting or self.violations == 0

    def to_dict(self):
        return {"mode": "perturb", "trials": self.trials, "seed": self.seed, "r_star": self.r_star,
                "amplitude": self.amplitude, "sphere_perimeter": self.sphere_perimeter,
                "min_slack": self.min_slack, "max_abs_slack": self.max_abs_slack,
                "violations": self.violations, "discarded": self.discarded,
                "mode_of_use": "asserting" if self.asserting else "informational"}

    def worst_csv(self) -> str:
        return "" if self.worst is None else self.worst.to_csv()


def _noise_coefficients(rng: np.random.Generator, degree: int) -> np.ndarray:
    coef = rng.standard_normal(degree + 1)
    grid = np.cos(np.linspace(0.0, math.pi, 721))
    peak = np.max(np.abs(np.polynomial.polynomial.polyval(grid, coef)))
    # normalize on a fine grid, with a small margin for values between samples
    return coef / (peak * 1.001) if peak > 0 else coef


def sphere_is_certified(space: SpaceSpec, r_star: float) -> bool:
    """Whether the classifier certifies the sphere of radius r_star among same-volume competitors."""
    rep = classify(space)
    for t in rep.certified:
        if t.conclusion_mode == ALL_VOLUMES:
            return True
        if t.conclusion_mode == HALF_VOLUME and t.volume_range:
            return True
    return False


def perturb_sphere(space: SpaceSpec, r_star: float, trials: int, amplitude: float, seed: int = 0,
                   degree: int = 4, nodes: int = 96, certified: Optional[bool] = None) -> PerturbationReport:
    """Random axisymmetric competitors with the volume of the sphere of radius r_star.

    When ``certified`` is None the classifier decides whether negative slack
    counts as a violation (asserting mode) or is only reported.
    """
    if not is_punctured_euclidean(space):
        raise VerifierError("sphere perturbation needs the punctured Euclidean preset")
    if not (space.A < r_star < space.B):
        raise VerifierError("r_star must be an interior radius")
    if not 0 <= amplitude < 1:
        raise VerifierError("amplitude must lie in [0, 1)")
    if certified is None:
        certified = sphere_is_certified(space, r_star)
    P0 = float(fiber_area(space, r_star))
    min_slack, max_abs, worst, violations, discarded = math.inf, 0.0, None, 0, 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        coef = _noise_coefficients(rng, degree)
        surf = RevolutionSurface(space, r_star, amplitude, coef, 1.0, nodes)
        if amplitude > 0:
            def gap(c):
                return RevolutionSurface(space, r_star, amplitude, coef, c, nodes).volume_offset()
            lo, hi = 1.0 / (1.0 + amplitude), 1.0 / (1.0 - amplitude)
            try:
                g_lo, g_hi = gap(lo), gap(hi)
                if not (g_lo <= 0 <= g_hi):
                    raise ValueError("volume not bracketed")
                c = brentq(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            except (ValueError, ArithmeticError):
                discarded += 1
                continue
            surf = RevolutionSurface(space, r_star, amplitude, coef, c, nodes)
        slack = surf.perimeter() - P0
        if slack < min_slack:
            min_slack, worst = slack, surf
        max_abs = max(max_abs, abs(slack))
        if certified and slack < -1e-9 * P0:
            violations += 1
    return PerturbationReport(trials, seed, r_star, amplitude, P0, min_slack, max_abs, violations,
                              discarded, bool(certified), worst)
