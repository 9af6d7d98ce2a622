"""Fiber area as a function of enclosed volume, and what it certifies.

The profile F sends the volume bounded by a fiber to the fiber's area. Its
convexity, its lower convex envelope and the minorant constructions built
from it are the evidence consumed by the classifier.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import expr as E
from .geometry import FinitenessReport, SpaceSpec, fiber_area, radial_grid
from .quadrature import (FINITE, INFINITE, LIM_FINITE, LIM_NEG_INF, LIM_POS_INF, IntegralResult,
                         adaptive_integrate, approach_values, improper_integral, sequence_limit)

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "inconclusive"

CONVEXITY_RTOL = 1e-7
CONTACT_RTOL = 1e-6
_EPS = np.finfo(float).eps


def tri(ok: Optional[bool]) -> str:
    return INCONCLUSIVE if ok is None else (HOLDS if ok else FAILS)


# ---------------------------------------------------------------------------
# Profile curve


def _eval_safe(e: E.Expr, r: np.ndarray) -> np.ndarray:
    """Evaluate pointwise, NaN where the expression cannot be evaluated."""
    try:
        return np.asarray(E.evaluate(e, r), dtype=float)
    except E.EvaluationError:
        out = np.full(r.shape, np.nan)
        for i, x in enumerate(r):
            try:
                out[i] = E.evaluate(e, float(x))
            except E.EvaluationError:
                pass
        return out


@dataclass(frozen=True)
class ProfileDerivatives:
    """Symbolic pieces of F'(V) and F''(V) in terms of r.

    With f = psi_S g^(n-1) and v = psi_V g^(n-1):
    F'(V) = f'/v and F''(V) = (f'' v - f' v') / (omega v^3).
    """

    f: E.DerivedExpr
    v: E.DerivedExpr

    @classmethod
    def of(cls, space: SpaceSpec) -> "ProfileDerivatives":
        return cls(E.DerivedExpr.of(space.fiber_expr()), E.DerivedExpr.of(space.volume_expr()))

    def slope(self, r):
        return _eval_safe(self.f.first, np.atleast_1d(r)) / _eval_safe(self.v.value, np.atleast_1d(r))

    def curvature(self, r, omega: float):
        """(F'' , tolerance scale) at radii r."""
        r = np.atleast_1d(r)
        f1 = _eval_safe(self.f.first, r)
        f2 = _eval_safe(self.f.second, r)
        v0 = _eval_safe(self.v.value, r)
        v1 = _eval_safe(self.v.first, r)
        with np.errstate(all="ignore"):
            den = omega * v0 ** 3
            a, b = f2 * v0, f1 * v1
            return (a - b) / den, (np.abs(a) + np.abs(b)) / np.abs(den)

    def log_curvature(self, r):
        """((log f)'', tolerance scale) at radii r."""
        r = np.atleast_1d(r)
        f0 = _eval_safe(self.f.value, r)
        f1 = _eval_safe(self.f.first, r)
        f2 = _eval_safe(self.f.second, r)
        with np.errstate(all="ignore"):
            a, b = f2 / f0, (f1 / f0) ** 2
            return a - b, np.abs(a) + b


@dataclass(frozen=True, eq=False)
class ProfileCurve:
    """Sampled F(V) with finite-difference and closed-form derivatives.

    ``V`` is the signed volume from the base point. ``V_abs`` is the volume
    measured from the end A, present when that volume is finite;
    ``volume_below`` = (first radius, volume between A and it). When
    ``per_unit_fiber`` is set, areas and volumes are divided by the fiber
    measure.
    """

    space: SpaceSpec
    radii: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    Fpp: np.ndarray
    Fp_exact: np.ndarray
    Fpp_exact: np.ndarray
    Fpp_scale: np.ndarray
    V_abs: Optional[np.ndarray]
    volume_below: tuple
    per_unit_fiber: bool = False
    partial: bool = False
    notes: tuple = ()
    grid: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.radii.size)

    @property
    def scale(self) -> float:
        return 1.0 / self.space.fiber_measure if self.per_unit_fiber else 1.0

    def coordinates(self, absolute: bool = False) -> np.ndarray:
        if not absolute:
            return self.V
        if self.V_abs is None:
            raise ValueError("volume at A is not finite; no absolute parameterization")
        return self.V_abs

    def volume_at(self, r: float, absolute: bool = False) -> float:
        """Volume coordinate of the fiber at radius r (interior of the sampled range)."""
        x = self.coordinates(absolute)
        i = int(np.clip(np.searchsorted(self.radii, r) - 1, 0, self.size - 2))
        val, _ = adaptive_integrate(self.space.volume_element, [self.radii[i]], [r], rtol=1e-13)
        return float(x[i] + self.scale * val[0])

    def radius_at(self, V0: float, absolute: bool = False) -> float:
        """Radius of the fiber bounding volume V0, inverted inside the sampled range."""
        x = self.coordinates(absolute)
        if not x[0] <= V0 <= x[-1]:
            raise ValueError(f"volume {V0} outside the sampled range [{x[0]}, {x[-1]}]")
        i = int(np.searchsorted(x, V0))
        if i < self.size and x[i] == V0:
            return float(self.radii[i])
        i -= 1
        lo, hi = self.radii[i], self.radii[i + 1]
        fn = lambda r: self.volume_at(r, absolute) - V0
        return float(brentq(fn, lo, hi, xtol=1e-300, rtol=4 * _EPS, maxiter=200))

    def insert_volume(self, V0: float, absolute: bool = False) -> tuple["ProfileCurve", int]:
        """Profile with the fiber bounding V0 added as a sample, and its index."""
        r0 = self.radius_at(V0, absolute)
        if r0 in self.radii:
            return self, int(np.searchsorted(self.radii, r0))
        radii = np.sort(np.append(self.radii, r0))
        p = build_profile(self.space, radii=radii, per_unit_fiber=self.per_unit_fiber,
                          volume_below=self.volume_below)
        return p, int(np.searchsorted(radii, r0))

    def to_csv(self, out=None, absolute: bool = False) -> str:
        """Write the ``V,F,Fp,Fpp`` table; returns the text."""
        buf = io.StringIO()
        buf.write("V,F,Fp,Fpp\n")
        for row in zip(self.coordinates(absolute), self.F, self.Fp, self.Fpp):
            buf.write(",".join(_csv_number(v) for v in row) + "\n")
        text = buf.getvalue()
        if out is not None:
            if hasattr(out, "write"):
                out.write(text)
            else:
                with open(out, "w", newline="") as fh:
                    fh.write(text)
        return text


def _csv_number(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def finite_differences(dV: np.ndarray, F: np.ndarray):
    """Three-point first and second derivatives on a nonuniform grid.

    ``dV`` holds the spacing between consecutive samples. End samples get NaN.
    """
    n = F.size
    Fp = np.full(n, np.nan)
    Fpp = np.full(n, np.nan)
    if n < 3:
        return Fp, Fpp
    h1, h2 = dV[:-1], dV[1:]
    f0, f1, f2 = F[:-2], F[1:-1], F[2:]
    with np.errstate(all="ignore"):
        Fp[1:-1] = (-h2 / (h1 * (h1 + h2))) * f0 + ((h2 - h1) / (h1 * h2)) * f1 + (h1 / (h2 * (h1 + h2))) * f2
        Fpp[1:-1] = 2.0 * (f0 / (h1 * (h1 + h2)) - f1 / (h1 * h2) + f2 / (h2 * (h1 + h2)))
    return Fp, Fpp


def build_profile(space: SpaceSpec, *, radii: Optional[Sequence[float]] = None,
                  per_rung: int = 8, log_step: float = 0.2, per_unit_fiber: bool = False,
                  volume_below: Optional[tuple] = None) -> ProfileCurve:
    """Sample F(V) on the refinement grid of ``space`` (or on explicit radii)."""
    notes = []
    if radii is None:
        r = radial_grid(space, per_rung=per_rung, log_step=log_step)
        grid = {"kind": "adaptive", "per_rung": per_rung, "log_step": log_step, "points": int(r.size)}
    else:
        r = np.unique(np.asarray(radii, dtype=float))
        if r.size < 2:
            raise ValueError("a profile needs at least two radii")
        if r[0] <= space.A or r[-1] >= space.B:
            raise ValueError("radii must be interior to the interval")
        grid = {"kind": "explicit", "points": int(r.size)}
    scale = 1.0 / space.fiber_measure if per_unit_fiber else 1.0
    omega = 1.0 if per_unit_fiber else space.fiber_measure

    dV, _ = adaptive_integrate(space.volume_element, r[:-1], r[1:], rtol=1e-13)
    dV = dV * scale
    k = int(np.argmin(np.abs(r - space.base_point)))
    V = np.empty_like(r)
    if r[k] == space.base_point:
        V[k] = 0.0
    else:
        v0, _ = adaptive_integrate(space.volume_element, [space.base_point], [r[k]], rtol=1e-13)
        V[k] = scale * float(v0[0])
    V[k + 1:] = V[k] + np.cumsum(dV[k:])
    V[:k] = V[k] - np.cumsum(dV[:k][::-1])[::-1]

    if volume_below is None or volume_below[0] != r[0]:
        piece = improper_integral(space.volume_element, float(r[0]), space.A, rtol=space.tol)
        volume_below = (float(r[0]), IntegralResult(piece.kind, abs(piece.value), piece.error, piece.note))
    below = volume_below[1]
    V_abs = None
    if below.kind == FINITE:
        V_abs = scale * below.value + np.concatenate([[0.0], np.cumsum(dV)])

    F = scale * np.asarray(fiber_area(space, r), dtype=float)
    Fp, Fpp = finite_differences(dV, F)
    der = ProfileDerivatives.of(space)
    Fp_exact = der.slope(r)
    Fpp_exact, Fpp_scale = der.curvature(r, omega)
    partial = not (np.all(np.isfinite(V)) and np.all(np.isfinite(F)) and np.all(dV > 0))
    if partial:
        notes.append("non-finite or non-increasing samples; curve is partial")
    return ProfileCurve(space, r, V, dV, F, Fp, Fpp, Fp_exact, Fpp_exact, Fpp_scale, V_abs,
                        volume_below, per_unit_fiber, partial, tuple(notes), grid)


# ---------------------------------------------------------------------------
# Convexity


def slope_jumps(x: np.ndarray, y: np.ndarray, dx: Optional[np.ndarray] = None):
    """Jumps of consecutive chord slopes and their noise tolerances.

    Returns (jump, tol) for the interior samples 1..n-2. A jump below -tol
    is a convexity violation at that sample.
    """
    if dx is None:
        dx = np.diff(x)
    with np.errstate(all="ignore"):
        sig = np.diff(y) / dx
        jump = sig[1:] - sig[:-1]
        ymax = np.maximum(np.abs(y[:-2]), np.maximum(np.abs(y[1:-1]), np.abs(y[2:])))
        floor = 8 * _EPS * ymax * (1.0 / dx[:-1] + 1.0 / dx[1:])
        floor += 8 * _EPS * (np.abs(sig[1:]) + np.abs(sig[:-1]))
        tol = CONVEXITY_RTOL * (np.abs(sig[1:]) + np.abs(sig[:-1])) + floor
    return jump, tol


def _violations(jump: np.ndarray, tol: np.ndarray) -> np.ndarray:
    """Interior indices (into the sample array) of convexity violations."""
    bad = jump < -tol
    # isolated violations within ten times the noise tolerance are noise
    if bad.any():
        neighbours = np.zeros_like(bad)
        neighbours[1:] |= bad[:-1]
        neighbours[:-1] |= bad[1:]
        noise = bad & ~neighbours & (np.abs(jump) <= 10 * tol)
        bad &= ~noise
    bad &= np.isfinite(jump)
    return np.flatnonzero(bad) + 1


@dataclass(frozen=True)
class ConvexityVerdict:
    convex_everywhere: str
    eventually_convex_from: Optional[float]
    eventually_convex_index: Optional[int]
    log_convex_in_r: str
    violations: tuple
    closed_form: dict

    def to_dict(self):
        return {
            "convex_everywhere": self.convex_everywhere,
            "eventually_convex_from": self.eventually_convex_from,
            "log_convex_in_r": self.log_convex_in_r,
            "violations": [list(v) for v in self.violations[:20]],
            "violation_count": len(self.violations),
            "closed_form": self.closed_form,
        }


def check_convexity(p: ProfileCurve, absolute: bool = False) -> ConvexityVerdict:
    """Second-difference convexity test of F(V), log-convexity in r, closed-form cross-check."""
    if p.size < 5:
        raise ValueError("convexity check needs at least 5 samples")
    x = p.coordinates(absolute)
    jump, tol = slope_jumps(x, p.F, p.dV)
    bad = _violations(jump, tol)
    h = 0.5 * (p.dV[:-1] + p.dV[1:])
    viol = tuple((float(x[i]), float(jump[i - 1] / h[i - 1])) for i in bad)
    finite = bool(np.all(np.isfinite(jump)))
    if bad.size:
        convex = FAILS
    elif p.partial or not finite:
        convex = INCONCLUSIVE
    else:
        convex = HOLDS
    if bad.size == 0:
        start_idx: Optional[int] = 0
    else:
        last = int(bad[-1])
        start_idx = last if last < p.size - 3 else None
    start = None if start_idx is None else float(x[start_idx])

    with np.errstate(all="ignore"):
        logF = np.log(p.F)
    ljump, ltol = slope_jumps(p.radii, logF)
    ltol = ltol + 8 * _EPS * np.maximum(1.0, np.abs(logF[1:-1])) * (
        1.0 / np.diff(p.radii)[:-1] + 1.0 / np.diff(p.radii)[1:])
    lbad = _violations(ljump, ltol)
    log_convex = FAILS if lbad.size else (INCONCLUSIVE if p.partial else HOLDS)

    return ConvexityVerdict(convex, start, start_idx, log_convex, viol, closed_form_check(p))


def closed_form_check(p: ProfileCurve) -> dict:
    """Closed-form convexity criteria evaluated on the profile's radii."""
    der = ProfileDerivatives.of(p.space)
    crit, crit_scale = der.log_curvature(p.radii)
    ok = np.isfinite(crit)
    if not ok.any():
        return {"available": False}
    with np.errstate(all="ignore"):
        tol_all = 1e-9 * np.where(ok, crit_scale, 0.0) + 64 * _EPS / p.radii ** 2
    log_convex = bool(np.all(crit[ok] >= -tol_all[ok]))
    curv_ok = np.isfinite(p.Fpp_exact)
    convex_exact = bool(np.all(p.Fpp_exact[curv_ok] >= -1e-9 * p.Fpp_scale[curv_ok]))
    # smallest sampled radius beyond which the log-convexity criterion holds
    neg = np.flatnonzero(ok & (crit < -tol_all))
    if neg.size == 0:
        from_r = float(p.radii[0])
    else:
        from_r = float(p.radii[neg[-1] + 1]) if neg[-1] + 1 < p.size else None
    # agreement between the finite-difference and closed-form signs
    jump, tol_fd = slope_jumps(p.V, p.F, p.dV)
    fd_sign = np.sign(np.where(np.abs(jump) > 10 * tol_fd, jump, 0.0))
    cf = p.Fpp_exact[1:-1]
    cf_sign = np.sign(np.where(np.abs(cf) > 1e-6 * p.Fpp_scale[1:-1], cf, 0.0))
    both = (fd_sign != 0) & (cf_sign != 0)
    disagreements = int(np.sum(both & (fd_sign != cf_sign)))
    return {
        "available": True,
        "log_convex": tri(log_convex if ok.all() else (False if not log_convex else None)),
        "convex": tri(convex_exact if curv_ok.all() else (False if not convex_exact else None)),
        "criterion_min": float(np.min(crit[ok])),
        "log_convex_from_radius": from_r,
        "sign_disagreements": disagreements,
    }


# ---------------------------------------------------------------------------
# Lower convex envelope


def _orient(o, a, b) -> int:
    """Sign of the cross product (a - o) x (b - o), exact when close to zero."""
    dx1, dy1 = a[0] - o[0], a[1] - o[1]
    dx2, dy2 = b[0] - o[0], b[1] - o[1]
    c = dx1 * dy2 - dy1 * dx2
    mag = abs(dx1 * dy2) + abs(dy1 * dx2)
    if abs(c) > 1e-9 * mag:
        return 1 if c > 0 else -1
    fo = (Fraction(o[0]), Fraction(o[1]))
    fa = (Fraction(a[0]), Fraction(a[1]))
    fb = (Fraction(b[0]), Fraction(b[1]))
    ce = (fa[0] - fo[0]) * (fb[1] - fo[1]) - (fa[1] - fo[1]) * (fb[0] - fo[0])
    return (ce > 0) - (ce < 0)


def lower_hull(x: Sequence[float], y: Sequence[float]) -> list:
    """Indices of the lower convex hull of points sorted by strictly increasing x."""
    hull: list = []
    pts = list(zip(map(float, x), map(float, y)))
    for i, p in enumerate(pts):
        while len(hull) >= 2 and _orient(pts[hull[-2]], pts[hull[-1]], p) <= 0:
            hull.pop()
        hull.append(i)
    return hull


@dataclass(frozen=True)
class Envelope:
    """Piecewise-linear convex minorant: hull vertices plus optional end rays."""

    V: np.ndarray
    F: np.ndarray
    left_slope: Optional[float] = None
    right_slope: Optional[float] = None
    anchored: bool = False

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.F) / np.diff(self.V)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        y = np.interp(x, self.V, self.F)
        left = x < self.V[0]
        right = x > self.V[-1]
        ls = np.nan if self.left_slope is None else self.left_slope
        rs = np.nan if self.right_slope is None else self.right_slope
        y = np.where(left, self.F[0] + ls * (x - self.V[0]), y)
        y = np.where(right, self.F[-1] + rs * (x - self.V[-1]), y)
        return y

    def limit_left(self) -> float:
        """Limit of the envelope toward the far left (through the ray if any)."""
        if self.left_slope is None or self.left_slope == 0:
            return float(self.F[0])
        return math.inf if self.left_slope < 0 else -math.inf

    def limit_right(self) -> float:
        if self.right_slope is None or self.right_slope == 0:
            return float(self.F[-1])
        return math.inf if self.right_slope > 0 else -math.inf

    def contact(self, x, y, rtol: float = CONTACT_RTOL) -> np.ndarray:
        """Samples where the envelope touches (x, y) within relative tolerance."""
        y = np.asarray(y, dtype=float)
        with np.errstate(invalid="ignore"):
            return (y - self(x)) <= rtol * np.abs(y)

    def to_dict(self, max_vertices: int = 50):
        idx = np.unique(np.linspace(0, self.V.size - 1, min(self.V.size, max_vertices)).astype(int))
        return {
            "vertices": int(self.V.size),
            "sample_vertices": [[float(self.V[i]), float(self.F[i])] for i in idx],
            "left_slope": self.left_slope,
            "right_slope": self.right_slope,
            "anchored_at_zero": self.anchored,
        }


class SlopeBoundError(ValueError):
    """Slope bounds that no convex minorant can meet."""


def envelope_points(V, F, anchor_at_zero: bool = False,
                    slope_bounds: tuple = (None, None)) -> Envelope:
    """Lower convex envelope of sample points (V_i, F_i).

    With ``anchor_at_zero`` the point (0, 0) is added on the left. Slope
    bounds (lo, hi) clip the hull so that it leaves its first vertex with a
    ray of slope lo and its last with a ray of slope hi.
    """
    V = np.asarray(V, dtype=float)
    F = np.asarray(F, dtype=float)
    if anchor_at_zero:
        if V.size and V[0] <= 0:
            raise ValueError("anchoring needs strictly positive volumes")
        V = np.concatenate([[0.0], V])
        F = np.concatenate([[0.0], F])
    idx = lower_hull(V, F)
    hv, hf = V[idx], F[idx]
    lo, hi = slope_bounds
    if lo is not None and hi is not None and lo > hi:
        raise SlopeBoundError(f"left slope bound {lo:g} exceeds right slope bound {hi:g}")
    slopes = np.diff(hf) / np.diff(hv) if hv.size > 1 else np.zeros(0)
    first, last = 0, hv.size - 1
    if hi is not None:
        above = np.flatnonzero(slopes > hi)
        if above.size:
            last = int(above[0])
    if lo is not None:
        below = np.flatnonzero(slopes[:last] < lo)
        if below.size:
            first = int(below[-1]) + 1
    return Envelope(hv[first:last + 1].copy(), hf[first:last + 1].copy(),
                    None if lo is None else float(lo), None if hi is None else float(hi),
                    anchor_at_zero)


def envelope(p: ProfileCurve, anchor_at_zero: bool = False, absolute: Optional[bool] = None,
             slope_bounds: tuple = (None, None)) -> Envelope:
    """Lower convex envelope of a profile's samples.

    Anchoring uses the volume measured from A (the anchor is volume zero).
    """
    if absolute is None:
        absolute = anchor_at_zero
    return envelope_points(p.coordinates(absolute), p.F, anchor_at_zero, slope_bounds)


# ---------------------------------------------------------------------------
# Minorant certificates


@dataclass(frozen=True)
class Refusal:
    reason: str
    failed: str = ""
    evidence: dict = field(default_factory=dict)

    ok = False

    def to_dict(self):
        return {"refused": True, "reason": self.reason, "failed": self.failed,
                "evidence": self.evidence}


@dataclass(frozen=True)
class MinorantCertificate:
    kind: str
    V0: float
    radius: float
    witness: dict
    gap: float
    boundary: dict
    grid_points: int

    ok = True

    def to_dict(self):
        return {"kind": self.kind, "V0": self.V0, "radius": self.radius, "gap": self.gap,
                "boundary": self.boundary, "witness": self.witness,
                "verified_at_grid_points": self.grid_points}


def _slope_limit(p: ProfileCurve, end: float):
    """Limit of F'(V) as the fiber approaches ``end``; zero limits are snapped to 0."""
    der = ProfileDerivatives.of(p.space)
    _, vals, frontier = approach_values(lambda r: der.slope(r), p.space.base_point, end)
    lim = sequence_limit(vals, frontier)
    if lim.kind == LIM_FINITE:
        scale = float(np.max(np.abs(vals[np.isfinite(vals)]))) if vals.size else 1.0
        value = 0.0 if abs(lim.value) <= 1e-7 * scale else lim.value
        return lim.kind, value
    return lim.kind, lim.value


def end_slope(p: ProfileCurve, side: str) -> float:
    """F' at the first or last sample: closed form if available, else the end chord."""
    i = 0 if side == "left" else -1
    if np.isfinite(p.Fp_exact[i]):
        return float(p.Fp_exact[i])
    if side == "left":
        return float((p.F[1] - p.F[0]) / p.dV[0])
    return float((p.F[-1] - p.F[-2]) / p.dV[-1])


def _right_bound(p: ProfileCurve):
    kind, lim = _slope_limit(p, p.space.B)
    if kind == LIM_POS_INF:
        return end_slope(p, "right"), kind
    if kind == LIM_FINITE:
        return min(end_slope(p, "right"), lim), kind
    if kind == LIM_NEG_INF:
        return None, kind
    return None, kind


def _left_bound(p: ProfileCurve):
    kind, lim = _slope_limit(p, p.space.A)
    if kind == LIM_NEG_INF:
        return end_slope(p, "left"), kind
    if kind == LIM_FINITE:
        return max(end_slope(p, "left"), lim), kind
    return None, kind


def minorant_case(fin: FinitenessReport) -> tuple:
    """Which single-fiber construction the finiteness report allows: (case, reason)."""
    a, b, tot = fin.volume_at_A, fin.volume_at_B, fin.total_volume
    if tot.kind == INFINITE and a.kind == FINITE:
        return 1, ""
    if a.kind == INFINITE and b.kind == INFINITE:
        return 2, ""
    if INCONCLUSIVE in (a.kind, b.kind, tot.kind):
        return None, "finiteness of the volumes is inconclusive"
    return None, "needs infinite total volume with finite volume at A, or infinite volume at both ends"


def minorant_envelope(p: ProfileCurve, case: int):
    """Envelope used by the single-fiber certificates, or a Refusal."""
    if case == 1:
        if p.V_abs is None:
            return Refusal("volume at A is not finite", "finite volume at A")
        hi, kind = _right_bound(p)
        if hi is None:
            return Refusal(f"limit of F' toward B is {kind}", "slope limit at B")
        return envelope_points(p.V_abs, p.F, anchor_at_zero=True, slope_bounds=(None, hi))
    hi, kind_hi = _right_bound(p)
    lo, kind_lo = _left_bound(p)
    if hi is None or lo is None:
        return Refusal(f"limits of F' toward the ends: A {kind_lo}, B {kind_hi}", "slope limits")
    try:
        return envelope_points(p.V, p.F, slope_bounds=(lo, hi))
    except SlopeBoundError as exc:
        return Refusal(str(exc), "slope limits")


def certify_fiber(p: ProfileCurve, fin: FinitenessReport, V0: float):
    """Certificate that the fiber bounding V0 minimizes, or a Refusal.

    Case 1 (finite volume at A, infinite total): V0 is the volume from A and
    the minorant is anchored at (0, 0). Case 2 (infinite volume at both ends):
    V0 is the signed volume from the base point and the minorant must have
    positive limits at both ends.
    """
    case, why = minorant_case(fin)
    if case is None:
        return Refusal(why, "volume preconditions")
    absolute = case == 1
    try:
        q, i0 = p.insert_volume(V0, absolute=absolute)
    except ValueError as exc:
        return Refusal(str(exc), "V0 in sampled range")
    env = minorant_envelope(q, case)
    if isinstance(env, Refusal):
        return env
    x = q.coordinates(absolute)
    F0 = float(q.F[i0])
    gap = F0 - float(env(x[i0]))
    boundary = {}
    if case == 1:
        boundary["limit_at_zero_volume"] = 0.0
    else:
        left, right = env.limit_left(), env.limit_right()
        boundary = {"limit_left": left, "limit_right": right,
                    "area_limit_A": fin.area_limit_A.kind, "area_limit_B": fin.area_limit_B.kind}
        if not (left > 0 and right > 0):
            return Refusal("minorant does not stay positive at both volume ends", "positive end limits",
                           boundary)
        if not (fin.area_limit_A.is_positive and fin.area_limit_B.is_positive):
            return Refusal("fiber area limits are not both positive", "positive end limits", boundary)
    if gap > CONTACT_RTOL * abs(F0):
        return Refusal(f"envelope lies {gap:.3g} below F at V0", "contact",
                       {"gap": gap, "relative_gap": gap / abs(F0)})
    kind = "thm2_7_case1" if case == 1 else "thm2_7_case2"
    return MinorantCertificate(kind, float(V0), float(q.radii[i0]), env.to_dict(), gap, boundary, q.size)


def contact_set(p: ProfileCurve, fin: FinitenessReport):
    """Grid samples certified by the single-fiber construction.

    Returns (case, mask, envelope) or a Refusal. One envelope serves every
    sample, so this is the batch form of :func:`certify_fiber`.
    """
    case, why = minorant_case(fin)
    if case is None:
        return Refusal(why, "volume preconditions")
    env = minorant_envelope(p, case)
    if isinstance(env, Refusal):
        return env
    x = p.coordinates(case == 1)
    mask = env.contact(x, p.F)
    if case == 2:
        if not (env.limit_left() > 0 and env.limit_right() > 0
                and fin.area_limit_A.is_positive and fin.area_limit_B.is_positive):
            mask[:] = False
    return case, mask, env


def contact_intervals(x: np.ndarray, mask: np.ndarray) -> list:
    """Maximal runs of certified samples as [first, last] volume pairs."""
    runs = []
    i = 0
    n = mask.size
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            runs.append([float(x[i]), float(x[j])])
            i = j + 1
        else:
            i += 1
    return runs


@dataclass(frozen=True)
class LargeFiberCertificate:
    threshold: float
    radius: float
    index: int
    line_slope: float
    tangent: dict
    grid_points: int

    ok = True
    kind = "cor2_8"

    def to_dict(self):
        return {"kind": self.kind, "V_threshold": self.threshold, "radius": self.radius,
                "line_through_origin_slope": self.line_slope, "tangent": self.tangent,
                "verified_at_grid_points": self.grid_points}


def certify_large_fibers(p: ProfileCurve, fin: FinitenessReport,
                         verdict: Optional[ConvexityVerdict] = None):
    """Smallest grid volume above which every fiber is certified, or a Refusal.

    Builds the three-piece minorant: a line through the origin below F, a
    tangent line at V0 with nonnegative intercept, then F itself.
    """
    if fin.total_volume.kind != INFINITE:
        return Refusal("total volume is not infinite", "infinite total volume")
    if fin.volume_at_A.kind != FINITE or p.V_abs is None:
        return Refusal("volume at A is not finite", "finite volume at A")
    if verdict is None:
        verdict = check_convexity(p, absolute=True)
    if verdict.eventually_convex_index is None:
        return Refusal("profile is not eventually convex on the grid", "eventually convex")
    W, F = p.V_abs, p.F
    ratio = F / W
    j_min = int(np.argmin(ratio))
    m = float(ratio[j_min])
    if not m > 0 or j_min in (0, p.size - 1):
        return Refusal("no positive-slope line through the origin stays below F "
                       "(inf of F/V not attained inside the grid)", "line through origin",
                       {"inf_F_over_V": m, "at_index": j_min})
    kind, _ = _slope_limit(p, p.space.B)
    if kind != LIM_POS_INF:
        return Refusal(f"F' does not grow without bound (limit {kind})", "F' -> infinity")
    slope = np.where(np.isfinite(p.Fp_exact), p.Fp_exact, p.Fp)
    start = max(verdict.eventually_convex_index, 1)
    good = np.zeros(p.size, dtype=bool)
    for j in range(start, p.size - 1):
        s = slope[j]
        if not (np.isfinite(s) and s > m and s * W[j] >= F[j]):
            continue
        v_cross = (s * W[j] - F[j]) / (s - m)
        seg = (W >= v_cross) & (W <= W[j])
        line = F[j] + s * (W[seg] - W[j])
        if np.all(line <= F[seg] * (1 + 1e-7) + 1e-300):
            good[j] = True
    tail_bad = np.flatnonzero(~good[start:p.size - 1])
    first = start + (int(tail_bad[-1]) + 1 if tail_bad.size else 0)
    if first >= p.size - 1:
        return Refusal("no tangent line with nonnegative intercept stays below F on the grid",
                       "tangent line")
    s = float(slope[first])
    return LargeFiberCertificate(
        threshold=float(W[first]), radius=float(p.radii[first]), index=first, line_slope=m,
        tangent={"V0": float(W[first]), "slope": s, "intercept_V": float(W[first] - F[first] / s),
                 "meets_origin_line_at": float((s * W[first] - F[first]) / (s - m))},
        grid_points=p.size)
