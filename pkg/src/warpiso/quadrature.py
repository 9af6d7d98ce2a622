"""Quadrature and limit estimation with honest tri-state outcomes.

Finite pieces are integrated by vectorized adaptive Gauss-Legendre bisection.
Improper endpoints are approached along a geometric ladder of rungs; the
sequence of rung integrals ("tails") decides between convergence, divergence
and an inconclusive answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .expr import EvaluationError

FINITE = "finite"
INFINITE = "infinite"
INCONCLUSIVE = "inconclusive"

# Magnitudes outside [TINY, BIG] count as the numeric frontier of a space.
BIG = 1e120
TINY = 1e-120

GROWTH_STEPS = 8
FRONTIER_GROWTH_STEPS = 3


@lru_cache(maxsize=None)
def _gl_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gauss_legendre(f: Callable, a, b, order: int = 20) -> np.ndarray:
    """Fixed-order Gauss-Legendre rule applied to every interval [a_i, b_i]."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    x, w = _gl_nodes(order)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(f(nodes), dtype=float).reshape(nodes.shape)
    return half * (vals @ w)


def _presplit(a: np.ndarray, b: np.ndarray):
    """Cut intervals spanning many octaves at powers of two.

    Plain bisection cannot localize mass concentrated near the small end of
    an interval like [1e-3, 1e12]; geometric pieces can.
    """
    owner = np.arange(a.size)
    same_sign = (a * b > 0)
    with np.errstate(all="ignore"):
        ratio = np.abs(b) / np.abs(a)
        ratio = np.where(same_sign, np.maximum(ratio, 1.0 / ratio), 1.0)
    wide = same_sign & (ratio > 4.0)
    if not wide.any():
        return owner, a.copy(), b.copy()
    los, his, owners = [a[~wide]], [b[~wide]], [owner[~wide]]
    for i in np.flatnonzero(wide):
        small, large = (a[i], b[i]) if abs(a[i]) < abs(b[i]) else (b[i], a[i])
        k = int(math.ceil(math.log2(ratio[i])))
        cuts = small * 2.0 ** np.arange(k + 1, dtype=float)
        cuts[-1] = large
        cuts = np.unique(np.clip(cuts, min(small, large), max(small, large)))
        los.append(cuts[:-1])
        his.append(cuts[1:])
        owners.append(np.full(cuts.size - 1, i))
    flip = np.concatenate(owners)
    lo, hi = np.concatenate(los), np.concatenate(his)
    # preserve the orientation of reversed intervals
    rev = a[flip] > b[flip]
    lo, hi = np.where(rev, hi, lo), np.where(rev, lo, hi)
    return flip, lo, hi


def adaptive_integrate(f: Callable, a, b, rtol: float = 1e-12, atol: float = 0.0,
                       order: int = 20, max_depth: int = 40, max_active: int = 1 << 16):
    """Integrate f over each [a_i, b_i]; returns (values, error_estimates).

    A piece is accepted when the whole-piece rule and the sum over its two
    halves agree to rtol relative, either to the piece itself or to its width
    share of the owning interval's magnitude (so sign changes cannot force
    endless bisection). Pieces still active beyond ``max_active`` are accepted
    as they stand and their disagreement is reported as error.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    total = np.zeros(a.shape)
    error = np.zeros(a.shape)
    owner, lo, hi = _presplit(a, b)
    whole = gauss_legendre(f, lo, hi, order) if a.size else np.zeros(0)
    magnitude = np.zeros(a.shape)
    np.add.at(magnitude, owner, np.abs(whole))
    span = np.abs(b - a)
    for depth in range(max_depth + 1):
        if lo.size == 0:
            break
        mid = 0.5 * (lo + hi)
        left = gauss_legendre(f, lo, mid, order)
        right = gauss_legendre(f, mid, hi, order)
        halves = left + right
        diff = np.abs(halves - whole)
        with np.errstate(invalid="ignore", divide="ignore"):
            share = magnitude[owner] * np.abs(hi - lo) / span[owner]
        ok = diff <= np.maximum(atol, rtol * np.maximum(np.abs(halves), np.nan_to_num(share)))
        if depth == max_depth or 2 * np.count_nonzero(~ok) > max_active:
            ok[:] = True
        np.add.at(total, owner[ok], halves[ok])
        np.add.at(error, owner[ok], diff[ok])
        keep = ~ok
        owner = np.concatenate([owner[keep], owner[keep]])
        lo, hi = np.concatenate([lo[keep], mid[keep]]), np.concatenate([mid[keep], hi[keep]])
        whole = np.concatenate([left[keep], right[keep]])
    return total, error


@dataclass(frozen=True)
class IntegralResult:
    """Outcome of a (possibly improper) integral.

    ``kind`` is one of finite / infinite / inconclusive. ``value`` is the
    signed estimate (+-inf when infinite, nan when inconclusive).
    """

    kind: str
    value: float
    error: float = 0.0
    note: str = ""

    @property
    def is_finite(self) -> bool:
        return self.kind == FINITE

    @property
    def is_infinite(self) -> bool:
        return self.kind == INFINITE

    @property
    def is_inconclusive(self) -> bool:
        return self.kind == INCONCLUSIVE

    def __float__(self):
        return float(self.value)

    def to_dict(self):
        return {"kind": self.kind, "value": _json_float(self.value),
                "error": _json_float(self.error), "note": self.note}


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def ladder_point(start: float, end: float, k: float) -> float:
    """k-th point of the geometric ladder from ``start`` toward ``end``.

    Toward a finite endpoint the distance halves per rung; toward an infinite
    one the offset from ``start`` doubles (scaled by max(1, |start|)).
    """
    if math.isinf(end):
        d = max(1.0, abs(start))
        return start + math.copysign(d * (2.0 ** k - 1.0), end)
    return end + (start - end) * 2.0 ** (-k)


def _values_ok(v) -> bool:
    v = np.abs(np.asarray(v, dtype=float))
    return bool(np.all(np.isfinite(v)) and np.all(v <= BIG) and np.all(v >= TINY))


def improper_integral(f: Callable, start: float, end: float, *, rtol: float = 1e-9,
                      max_rungs: int = 200, cell_rtol: float = 1e-12) -> IntegralResult:
    """Integrate ``f`` from ``start`` to ``end`` (signed), ``end`` possibly improper.

    Convergence: the rung integrals decay with a stable geometric ratio and the
    extrapolated remainder is known to ``rtol`` relative. Divergence: the rung
    integrals stop shrinking for GROWTH_STEPS consecutive rungs (or for
    FRONTIER_GROWTH_STEPS rungs before the integrand leaves the representable
    range). Anything else is inconclusive.
    """
    if start == end:
        return IntegralResult(FINITE, 0.0, 0.0)
    sign = 1.0 if end > start else -1.0
    total = 0.0
    tails: list[float] = []
    ratios: list[float] = []
    growth = 0
    settled = 0
    frontier = False
    for k in range(max_rungs):
        r0 = ladder_point(start, end, k)
        r1 = ladder_point(start, end, k + 1)
        if r1 == r0 or (not math.isinf(end) and r1 == end):
            frontier = True
            break
        try:
            if not _values_ok(f(np.array([r1]))):
                frontier = True
                break
            val, _ = adaptive_integrate(f, [min(r0, r1)], [max(r0, r1)], rtol=cell_rtol)
        except (ValueError, ArithmeticError):
            frontier = True
            break
        t = abs(float(val[0]))
        if not math.isfinite(t) or t > BIG:
            frontier = True
            break
        total += sign * float(val[0])
        if tails:
            prev = tails[-1]
            if t >= prev * (1.0 - 1e-12) and t > 0:
                growth += 1
            else:
                growth = 0
            if prev > 0:
                ratios.append(t / prev)
        tails.append(t)
        if growth >= GROWTH_STEPS:
            return IntegralResult(INFINITE, sign * math.inf, math.inf,
                                  f"rung integrals non-decreasing for {growth} rungs")
        if t == 0.0 and len(tails) > 1:
            return IntegralResult(FINITE, total, 0.0, "integrand vanished")
        if len(ratios) >= 2:
            rho, rho_prev = ratios[-1], ratios[-2]
            if rho < 1.0 - 1e-3:
                remainder = t * rho / (1.0 - rho)
                err = t * abs(rho - rho_prev) / (1.0 - rho) ** 2 + 1e-15 * abs(total)
                if err <= rtol * abs(total + sign * remainder):
                    settled += 1
                    if settled >= 2:
                        return IntegralResult(FINITE, total + sign * remainder, err)
                else:
                    settled = 0
            else:
                settled = 0
    if frontier:
        if growth >= FRONTIER_GROWTH_STEPS:
            return IntegralResult(INFINITE, sign * math.inf, math.inf,
                                  "rung integrals grew until the integrand left the representable range")
        if tails:
            t = tails[-1]
            if t <= rtol * abs(total) * 1e-3:
                return IntegralResult(FINITE, total, t, "integrand negligible at the numeric frontier")
            if ratios and ratios[-1] < 1.0 - 1e-3:
                rho = ratios[-1]
                remainder = t * rho / (1.0 - rho)
                if remainder <= rtol * abs(total):
                    return IntegralResult(FINITE, total + sign * remainder, remainder)
        return IntegralResult(INCONCLUSIVE, math.nan, math.nan, "numeric frontier reached before a decision")
    return IntegralResult(INCONCLUSIVE, math.nan, math.nan, f"no decision after {max_rungs} rungs")


# ---------------------------------------------------------------------------
# Limits along geometric sequences

LIM_FINITE = "finite"
LIM_POS_INF = "+inf"
LIM_NEG_INF = "-inf"
LIM_INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class LimitResult:
    kind: str
    value: float
    error: float = 0.0
    points: int = 0

    def to_dict(self):
        return {"kind": self.kind, "value": _json_float(self.value),
                "error": _json_float(self.error), "points": self.points}


def _trailing_growth(vals: np.ndarray) -> int:
    """Number of trailing positive increments that do not shrink."""
    d = np.diff(vals)
    run = 0
    k = d.size - 1
    while k >= 0 and d[k] > 0:
        run += 1
        if k >= 1 and d[k - 1] > 0 and d[k] < d[k - 1] * (1.0 - 1e-9):
            break
        k -= 1
    return run


def sequence_limit(values, frontier: bool, scale: float | None = None) -> LimitResult:
    """Classify the limit of a sequence sampled along a geometric approach.

    Infinite when the trailing increments keep one sign and do not shrink
    for GROWTH_STEPS steps (FRONTIER_GROWTH_STEPS if the sequence ended at the
    numeric frontier). Finite when Aitken-extrapolated estimates stabilize.
    """
    vals = np.asarray([v for v in values if np.isfinite(v)], dtype=float)
    n = vals.size
    if n == 0:
        return LimitResult(LIM_INCONCLUSIVE, math.nan, math.nan, 0)
    if scale is None:
        scale = float(np.max(np.abs(vals))) if n else 1.0
    need = FRONTIER_GROWTH_STEPS if frontier else GROWTH_STEPS
    if n >= 3:
        up = _trailing_growth(vals)
        down = _trailing_growth(-vals)
        if up >= need:
            return LimitResult(LIM_POS_INF, math.inf, math.inf, n)
        if down >= need:
            return LimitResult(LIM_NEG_INF, -math.inf, math.inf, n)
    if n == 1:
        return LimitResult(LIM_INCONCLUSIVE, math.nan, math.nan, n)
    if n == 2:
        if vals[1] == vals[0]:
            return LimitResult(LIM_FINITE, float(vals[1]), 0.0, n)
        return LimitResult(LIM_INCONCLUSIVE, math.nan, math.nan, n)
    est = []
    for k in range(2, n):
        d1 = vals[k] - vals[k - 1]
        d0 = vals[k - 1] - vals[k - 2]
        denom = d1 - d0
        if d1 == 0.0:
            est.append(vals[k])
        elif denom == 0.0 or abs(denom) <= 1e-14 * (abs(d1) + abs(d0)):
            est.append(math.nan)
        else:
            est.append(vals[k] - d1 * d1 / denom)
    est = np.asarray(est)
    tol_abs = 1e-7 * scale
    for k in range(est.size - 1, 0, -1):
        a, b = est[k], est[k - 1]
        if np.isfinite(a) and np.isfinite(b):
            if abs(a - b) <= 1e-6 * abs(a) + tol_abs:
                return LimitResult(LIM_FINITE, float(a), float(abs(a - b)), n)
            break
    # a sequence collapsing into the zero band is a zero limit
    if np.all(np.abs(vals[-3:]) <= tol_abs) and abs(vals[-1]) <= abs(vals[-2]) <= abs(vals[-3]):
        return LimitResult(LIM_FINITE, float(vals[-1]), float(abs(vals[-1])), n)
    return LimitResult(LIM_INCONCLUSIVE, math.nan, math.nan, n)


def approach_values(f: Callable, start: float, end: float, *, min_points: int = 12,
                    max_points: int = 60, refinements: int = 5):
    """Sample f along a geometric ladder from ``start`` toward ``end``.

    Returns (points, values, frontier). The ladder ratio is refined (square
    root per step) until at least ``min_points`` samples precede the frontier.
    """
    for level in range(refinements + 1):
        step = 2.0 ** (-level)
        pts, vals = [], []
        frontier = False
        for j in range(int(max_points * 2 ** level) + 1):
            r = ladder_point(start, end, j * step)
            if pts and r == pts[-1]:
                frontier = True
                break
            try:
                v = float(np.asarray(f(np.array([r])), dtype=float)[0])
            except (ValueError, ArithmeticError):
                frontier = True
                break
            if not math.isfinite(v) or abs(v) > BIG:
                frontier = True
                break
            if v != 0 and abs(v) < TINY:
                frontier = True
                pts.append(r)
                vals.append(v)
                break
            pts.append(r)
            vals.append(v)
            if not math.isinf(end) and abs(r - end) <= 1e-300:
                frontier = True
                break
        if not frontier or len(pts) >= min_points:
            return np.asarray(pts), np.asarray(vals), frontier
    return np.asarray(pts), np.asarray(vals), frontier


def limit_at(f: Callable, start: float, end: float, scale: float | None = None) -> LimitResult:
    """Limit of f(r) as r approaches ``end`` from ``start``."""
    _, vals, frontier = approach_values(f, start, end)
    return sequence_limit(vals, frontier, scale)
