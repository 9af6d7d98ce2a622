"""Warped products (A, B) x_g L with product density.

Only the total measure of the fiber L enters: a fiber at radius r has area
omega * psi_S(r) * g(r)^(n-1) and the annulus between r0 and r1 has volume
omega * int_{r0}^{r1} psi_V(t) g(t)^(n-1) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import expr as E
from .quadrature import (BIG, FINITE, INCONCLUSIVE, INFINITE, LIM_FINITE, LIM_POS_INF, TINY,
                         IntegralResult, LimitResult, adaptive_integrate, improper_integral,
                         ladder_point, limit_at)

EUCLIDEAN_PUNCTURED = "euclidean_punctured"

ZERO = "zero"
POSITIVE = "positive"


class SpaceError(ValueError):
    """The data does not describe a valid warped product with density."""


def sphere_measure(n: int) -> float:
    """(n-1)-dimensional measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass(frozen=True)
class SpaceSpec:
    n: int
    interval: tuple
    warp: E.Expr
    psi_s: E.Expr
    psi_v: E.Expr
    fiber_measure: float
    base_point: float
    preset: Optional[str] = None
    tol: float = 1e-9

    def __post_init__(self):
        for name in ("warp", "psi_s", "psi_v"):
            object.__setattr__(self, name, E.as_expr(getattr(self, name)))
        A, B = (float(v) for v in self.interval)
        object.__setattr__(self, "interval", (A, B))
        object.__setattr__(self, "fiber_measure", float(self.fiber_measure))
        object.__setattr__(self, "base_point", float(self.base_point))
        if int(self.n) != self.n or self.n < 2:
            raise SpaceError(f"dimension must be an integer >= 2, got {self.n}")
        if not A < B:
            raise SpaceError(f"empty interval ({A}, {B})")
        if not A < self.base_point < B:
            raise SpaceError(f"base point {self.base_point} outside ({A}, {B})")
        if not (self.fiber_measure > 0 and math.isfinite(self.fiber_measure)):
            raise SpaceError("fiber measure must be a positive finite number")
        self._check_positive()

    @property
    def A(self) -> float:
        return self.interval[0]

    @property
    def B(self) -> float:
        return self.interval[1]

    def _check_positive(self):
        pts = [self.base_point]
        for end in (self.A, self.B):
            pts += [ladder_point(self.base_point, end, k) for k in range(1, 7)]
        for name in ("warp", "psi_s", "psi_v"):
            e = getattr(self, name)
            for r in pts:
                try:
                    v = E.evaluate(e, r)
                except E.DensityOverflowError:
                    continue
                except E.EvaluationError as exc:
                    raise SpaceError(f"{name} cannot be evaluated at r={r:g}: {exc}") from exc
                if not v > 0:
                    raise SpaceError(f"{name} must be positive on the interval; {name}({r:g}) = {v:g}")

    # -- densities on the interval ------------------------------------------

    def fiber_area(self, r):
        return fiber_area(self, r)

    def volume_element(self, r):
        return self.fiber_measure * E.evaluate(self.psi_v, r) * E.evaluate(self.warp, r) ** (self.n - 1)

    def horizontal_element(self, r):
        return E.evaluate(self.psi_s, r) * E.evaluate(self.warp, r) ** (self.n - 2)

    def fiber_expr(self) -> E.Expr:
        """psi_S * g^(n-1), the fiber area per unit fiber measure."""
        return E.mul(self.psi_s, E.power(self.warp, E.Num(float(self.n - 1))))

    def volume_expr(self) -> E.Expr:
        """psi_V * g^(n-1), the volume element per unit fiber measure."""
        return E.mul(self.psi_v, E.power(self.warp, E.Num(float(self.n - 1))))

    def describe(self) -> dict:
        return {
            "dimension": self.n,
            "interval": [_fmt_end(self.A), _fmt_end(self.B)],
            "warp": E.to_text(self.warp),
            "surface_density": E.to_text(self.psi_s),
            "volume_density": E.to_text(self.psi_v),
            "fiber_measure": self.fiber_measure,
            "base_point": self.base_point,
            "preset": self.preset,
        }


def _fmt_end(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def euclidean_punctured(n: int, surface_density, volume_density=None,
                        base_point: float = 1.0, tol: float = 1e-9) -> SpaceSpec:
    """R^n minus the origin as (0, inf) x_r S^(n-1) with radial densities."""
    psi_s = E.as_expr(surface_density)
    psi_v = psi_s if volume_density is None else E.as_expr(volume_density)
    return SpaceSpec(n=n, interval=(0.0, math.inf), warp=E.R, psi_s=psi_s, psi_v=psi_v,
                     fiber_measure=sphere_measure(n), base_point=base_point,
                     preset=EUCLIDEAN_PUNCTURED, tol=tol)


def is_punctured_euclidean(space: SpaceSpec) -> bool:
    if space.preset == EUCLIDEAN_PUNCTURED:
        return True
    return (space.interval == (0.0, math.inf) and space.warp == E.R
            and math.isclose(space.fiber_measure, sphere_measure(space.n), rel_tol=1e-12))


def is_simple(space: SpaceSpec) -> bool:
    """True when the surface and volume densities coincide."""
    if space.psi_s == space.psi_v:
        return True
    pts = np.array([ladder_point(space.base_point, end, k)
                    for end in (space.A, space.B) for k in range(0, 5)])
    try:
        a = E.evaluate(space.psi_s, pts)
        b = E.evaluate(space.psi_v, pts)
    except E.EvaluationError:
        return False
    return bool(np.allclose(a, b, rtol=1e-13, atol=0.0))


def reflect(space: SpaceSpec) -> SpaceSpec:
    """The same space with the interval reflected, r -> -r."""
    minus_r = E.Neg(E.R)
    return SpaceSpec(n=space.n, interval=(-space.B, -space.A),
                     warp=E.substitute(space.warp, minus_r),
                     psi_s=E.substitute(space.psi_s, minus_r),
                     psi_v=E.substitute(space.psi_v, minus_r),
                     fiber_measure=space.fiber_measure, base_point=-space.base_point,
                     preset=None, tol=space.tol)


def _interior(space: SpaceSpec, r) -> np.ndarray:
    x = np.asarray(r, dtype=float)
    if np.any(~(x > space.A)) or np.any(~(x < space.B)):
        raise ValueError(f"radius outside the open interval ({space.A}, {space.B})")
    return x


def fiber_area(space: SpaceSpec, r):
    """omega * psi_S(r) * g(r)^(n-1) at interior radii."""
    x = _interior(space, r)
    out = space.fiber_measure * E.evaluate(space.psi_s, x) * E.evaluate(space.warp, x) ** (space.n - 1)
    return float(out) if np.ndim(r) == 0 else out


def annulus_volume(space: SpaceSpec, r0: float, r1: float) -> IntegralResult:
    """Signed weighted volume between the fibers at r0 and r1.

    Endpoints may be A or B (improper integrals). The result is negative when
    r1 < r0.
    """
    for r in (r0, r1):
        if not space.A <= r <= space.B:
            raise ValueError(f"radius {r} outside [{space.A}, {space.B}]")
    if r0 == r1:
        return IntegralResult(FINITE, 0.0, 0.0)
    if r0 > r1:
        res = annulus_volume(space, r1, r0)
        return IntegralResult(res.kind, -res.value, res.error, res.note)
    f = space.volume_element
    improper_lo = r0 == space.A
    improper_hi = r1 == space.B
    if not improper_lo and not improper_hi:
        val, err = adaptive_integrate(f, [r0], [r1], rtol=min(space.tol, 1e-12))
        return IntegralResult(FINITE, float(val[0]), float(err[0]))
    if improper_lo and improper_hi:
        a = space.base_point
        left = improper_integral(f, a, r0, rtol=space.tol)
        right = improper_integral(f, a, r1, rtol=space.tol)
        return _sum_results(IntegralResult(left.kind, -left.value, left.error, left.note), right)
    if improper_lo:
        res = improper_integral(f, r1, r0, rtol=space.tol)
        return IntegralResult(res.kind, -res.value, res.error, res.note)
    return improper_integral(f, r0, r1, rtol=space.tol)


def _sum_results(a: IntegralResult, b: IntegralResult) -> IntegralResult:
    if INFINITE in (a.kind, b.kind):
        return IntegralResult(INFINITE, math.inf, math.inf)
    if INCONCLUSIVE in (a.kind, b.kind):
        return IntegralResult(INCONCLUSIVE, math.nan, math.nan)
    return IntegralResult(FINITE, a.value + b.value, a.error + b.error)


@dataclass(frozen=True)
class AreaLimit:
    """Limit of fiber area at an endpoint: zero, positive(value), infinite or inconclusive."""

    kind: str
    value: float = math.nan
    evidence: Optional[LimitResult] = None

    @property
    def is_positive(self) -> bool:
        """Strictly positive limit, counting an infinite limit as positive."""
        return self.kind in (POSITIVE, INFINITE)

    def to_dict(self):
        d = {"kind": self.kind, "value": _fmt_end(self.value) if not math.isnan(self.value) else "nan"}
        if self.evidence is not None:
            d["evidence"] = self.evidence.to_dict()
        return d


def classify_limit(lim: LimitResult, scale: float) -> AreaLimit:
    if lim.kind == LIM_POS_INF:
        return AreaLimit(INFINITE, math.inf, lim)
    if lim.kind == LIM_FINITE:
        if abs(lim.value) < 1e-7 * scale:
            return AreaLimit(ZERO, 0.0, lim)
        if lim.value > 0:
            return AreaLimit(POSITIVE, lim.value, lim)
    return AreaLimit(INCONCLUSIVE, math.nan, lim)


def area_limit(space: SpaceSpec, end: float) -> AreaLimit:
    """Limit of the fiber area as r approaches the endpoint ``end``."""
    f = lambda r: fiber_area(space, r)
    lim = limit_at(f, space.base_point, end)
    scale = fiber_area(space, space.base_point)
    if lim.kind == LIM_FINITE:
        # the largest sample on the approach also sets the scale
        scale = max(scale, abs(lim.value))
    return classify_limit(lim, scale)


@dataclass(frozen=True)
class FinitenessReport:
    volume_at_A: IntegralResult
    volume_at_B: IntegralResult
    total_volume: IntegralResult
    area_limit_A: AreaLimit
    area_limit_B: AreaLimit
    horizontal_integral_to_B: IntegralResult
    horizontal_integral_to_A: IntegralResult

    def to_dict(self):
        return {name: getattr(self, name).to_dict() for name in self.__dataclass_fields__}


def classify_finiteness(space: SpaceSpec) -> FinitenessReport:
    """Volumes at each end, total volume, fiber-area limits and horizontal integrals."""
    a = space.base_point
    f = space.volume_element
    at_A = improper_integral(f, a, space.A, rtol=space.tol)
    at_A = IntegralResult(at_A.kind, abs(at_A.value), at_A.error, at_A.note)
    at_B = improper_integral(f, a, space.B, rtol=space.tol)
    total = _sum_results(at_A, at_B)
    h = space.horizontal_element
    h_B = improper_integral(h, a, space.B, rtol=space.tol)
    h_A = improper_integral(h, a, space.A, rtol=space.tol)
    h_A = IntegralResult(h_A.kind, abs(h_A.value), h_A.error, h_A.note)
    return FinitenessReport(
        volume_at_A=at_A, volume_at_B=at_B, total_volume=total,
        area_limit_A=area_limit(space, space.A), area_limit_B=area_limit(space, space.B),
        horizontal_integral_to_B=h_B, horizontal_integral_to_A=h_A,
    )


def to_simple_density(space: SpaceSpec):
    """Conformal factor psi_V/psi_S and simple density psi_S^n / psi_V^(n-1).

    Rescaling the metric by the factor turns the pair of densities into the
    single returned density without changing any area or volume.
    """
    if space.psi_s == space.psi_v:
        return E.Num(1.0), space.psi_s
    n = float(space.n)
    factor = E.div(space.psi_v, space.psi_s)
    density = E.div(E.power(space.psi_s, E.Num(n)), E.power(space.psi_v, E.Num(n - 1.0)))
    return factor, density


# ---------------------------------------------------------------------------
# Numeric window


def _probe_ok(space: SpaceSpec, r: float) -> bool:
    try:
        vals = (fiber_area(space, r), space.volume_element(r))
    except (E.EvaluationError, ValueError):
        return False
    return all(math.isfinite(v) and TINY <= abs(v) <= BIG for v in vals)


def frontier_ladder(space: SpaceSpec, end: float, max_rungs: Optional[int] = None) -> list:
    """Ladder points from the base point toward ``end`` while values stay representable."""
    if max_rungs is None:
        max_rungs = 40 if math.isinf(end) else 50
    pts = []
    for k in range(1, max_rungs + 1):
        r = ladder_point(space.base_point, end, k)
        if r == end or (pts and r == pts[-1]) or not _probe_ok(space, r):
            break
        pts.append(r)
    return pts


def radial_grid(space: SpaceSpec, per_rung: int = 8, log_step: float = 0.2,
                max_points: int = 40000) -> np.ndarray:
    """Sorted interior radii covering the numeric window of ``space``.

    Ladder rungs toward both ends (ratio 2) are split into ``per_rung`` equal
    pieces, then intervals across which log F or log dV/dr changes by more
    than ``log_step`` are bisected.
    """
    per_rung = max(1, int(per_rung))
    nodes = sorted(frontier_ladder(space, space.A)) + [space.base_point] + frontier_ladder(space, space.B)
    nodes = np.asarray(nodes, dtype=float)
    frac = np.arange(per_rung, dtype=float) / per_rung
    pts = (nodes[:-1, None] + (nodes[1:] - nodes[:-1])[:, None] * frac[None, :]).ravel()
    pts = np.unique(np.append(pts, nodes[-1]))
    for _ in range(60):
        with np.errstate(all="ignore"):
            lf = np.log(np.abs(fiber_area(space, pts)))
            lv = np.log(np.abs(space.volume_element(pts)))
        jump = np.maximum(np.abs(np.diff(lf)), np.abs(np.diff(lv)))
        bad = ~(jump <= log_step)
        bad &= np.diff(pts) > 4 * np.finfo(float).eps * np.abs(pts[1:])
        if not bad.any() or pts.size + int(bad.sum()) > max_points:
            break
        mids = 0.5 * (pts[:-1][bad] + pts[1:][bad])
        pts = np.unique(np.concatenate([pts, mids]))
    return pts
