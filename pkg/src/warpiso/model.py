"""Reduction of a warped product to its one-dimensional model space.

The coordinate s(r) = int_a^r psi_V g^(n-1) dt turns the space into an
interval with volume density 1 whose fibers carry surface density
Psi(s) = psi_S(r(s)) g(r(s))^(n-1). Both s and Psi are per unit fiber
measure, so volumes and fiber areas of the original space are omega times
their model counterparts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as E
from .geometry import SpaceSpec, fiber_area, radial_grid
from .quadrature import FINITE, INFINITE, IntegralResult, adaptive_integrate, improper_integral


class ModelRangeError(ValueError):
    """A model coordinate outside the interval or the tabulated window."""


def _unit_volume_element(space: SpaceSpec):
    psi_v, warp, k = space.psi_v, space.warp, space.n - 1
    return lambda r: E.evaluate(psi_v, r) * E.evaluate(warp, r) ** k


def _unit_fiber(space: SpaceSpec, r):
    return E.evaluate(space.psi_s, r) * E.evaluate(space.warp, r) ** (space.n - 1)


@dataclass(frozen=True, eq=False)
class ModelSpace:
    """Tabulated model space of a :class:`SpaceSpec`.

    ``radii``/``s_table``/``psi_table`` hold the cumulative map on the
    refinement grid; ``end_A``/``end_B`` are the improper integrals from the
    base point to each end (magnitudes), kept symbolic when infinite.
    """

    space: SpaceSpec
    radii: np.ndarray
    s_table: np.ndarray
    psi_table: np.ndarray
    end_A: IntegralResult
    end_B: IntegralResult

    @property
    def s_A(self) -> float:
        return -self.end_A.value if self.end_A.kind == FINITE else (
            -math.inf if self.end_A.kind == INFINITE else math.nan)

    @property
    def s_B(self) -> float:
        return self.end_B.value if self.end_B.kind == FINITE else (
            math.inf if self.end_B.kind == INFINITE else math.nan)

    @property
    def interval(self) -> tuple:
        return (self.s_A, self.s_B)

    # -- maps ----------------------------------------------------------------

    def forward(self, r):
        """s(r), from the nearest table node plus a local integral."""
        x = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(~(x > self.space.A)) or np.any(~(x < self.space.B)):
            raise ModelRangeError("radius outside the open interval")
        idx = np.clip(np.searchsorted(self.radii, x), 1, self.radii.size - 1)
        # pick whichever neighbouring node is closer
        left = self.radii[idx - 1]
        right = self.radii[idx]
        idx = np.where(np.abs(x - left) <= np.abs(right - x), idx - 1, idx)
        node = self.radii[idx]
        lo, hi = np.minimum(node, x), np.maximum(node, x)
        val, _ = adaptive_integrate(_unit_volume_element(self.space), lo, hi, rtol=1e-13)
        out = self.s_table[idx] + np.where(x >= node, val, -val)
        return float(out[0]) if np.ndim(r) == 0 else out

    def inverse(self, s):
        """r(s) by bracketing on the table followed by safeguarded Newton steps."""
        y = np.atleast_1d(np.asarray(s, dtype=float))
        outside = ~((y >= self.s_table[0]) & (y <= self.s_table[-1]))
        if np.any(outside):
            beyond = y[outside]
            if np.any(~(beyond > self.s_A)) or np.any(~(beyond < self.s_B)):
                raise ModelRangeError("model coordinate outside the model interval")
            raise ModelRangeError("model coordinate beyond the tabulated numeric window")
        j = np.clip(np.searchsorted(self.s_table, y), 1, self.s_table.size - 1)
        lo, hi = self.radii[j - 1].copy(), self.radii[j].copy()
        s_lo, s_hi = self.s_table[j - 1], self.s_table[j]
        width = np.where(s_hi > s_lo, s_hi - s_lo, 1.0)
        x = lo + (hi - lo) * np.clip((y - s_lo) / width, 0.0, 1.0)
        x = np.clip(x, lo, hi)
        dens = _unit_volume_element(self.space)
        for _ in range(100):
            fx = self.forward(x) - y
            done = np.abs(fx) <= 4e-16 * np.maximum(np.abs(y), 1e-300) + 1e-300
            lo = np.where(fx < 0, x, lo)
            hi = np.where(fx > 0, x, hi)
            step = fx / dens(x)
            cand = x - step
            inside = (cand > lo) & (cand < hi)
            cand = np.where(inside, cand, 0.5 * (lo + hi))
            tight = ((hi - lo) <= 2 * np.finfo(float).eps * np.abs(x)) | (
                np.abs(step) <= 2 * np.finfo(float).eps * np.abs(x))
            if np.all(done | tight):
                break
            x = np.where(done | tight, x, cand)
        return float(x[0]) if np.ndim(s) == 0 else x

    def psi(self, s):
        """Model surface density Psi(s), evaluated exactly through r(s)."""
        r = self.inverse(s)
        return _unit_fiber(self.space, r)

    def psi_interpolated(self, s):
        """Psi(s) by linear interpolation on the table (cheap, approximate)."""
        return np.interp(s, self.s_table, self.psi_table)

    def to_rows(self):
        """Table rows (r, s, Psi) for export."""
        return list(zip(self.radii.tolist(), self.s_table.tolist(), self.psi_table.tolist()))


def reduce(space: SpaceSpec, per_rung: int = 8, log_step: float = 0.2) -> ModelSpace:
    """Tabulate the model space of ``space`` on its refinement grid."""
    radii = radial_grid(space, per_rung=per_rung, log_step=log_step)
    f = _unit_volume_element(space)
    vals, _ = adaptive_integrate(f, radii[:-1], radii[1:], rtol=1e-13)
    base = int(np.searchsorted(radii, space.base_point))
    assert radii[base] == space.base_point
    s = np.zeros_like(radii)
    s[base + 1:] = np.cumsum(vals[base:])
    s[:base] = -np.cumsum(vals[:base][::-1])[::-1]
    psi = _unit_fiber(space, radii)
    end_A = improper_integral(f, space.base_point, space.A, rtol=space.tol)
    end_A = IntegralResult(end_A.kind, abs(end_A.value), end_A.error, end_A.note)
    end_B = improper_integral(f, space.base_point, space.B, rtol=space.tol)
    return ModelSpace(space, radii, s, psi, end_A, end_B)


@dataclass(frozen=True)
class PreservationReport:
    trials: int
    seed: int
    max_volume_discrepancy: float
    max_area_discrepancy: float
    max_roundtrip_error: float

    @property
    def max_discrepancy(self) -> float:
        return max(self.max_volume_discrepancy, self.max_area_discrepancy)

    def to_dict(self):
        return dict(self.__dict__, max_discrepancy=self.max_discrepancy)


def resolved_cells(model: ModelSpace, margin: float = 1e-6) -> np.ndarray:
    """Indices of table cells whose model coordinate is resolved in floating point.

    Near a finite end the coordinate s(r) sits within a few ulps of s_A or
    s_B and cannot distinguish radii; such cells are excluded.
    """
    s = model.s_table
    ok = np.ones(s.size, dtype=bool)
    for end in (model.s_A, model.s_B):
        if math.isfinite(end):
            ok &= np.abs(s - end) >= margin * max(1.0, abs(end))
    cells = np.flatnonzero(ok[:-1] & ok[1:])
    if cells.size == 0:
        raise ModelRangeError("no resolved cells in the model table")
    return cells


def _random_radii(model: ModelSpace, rng: np.random.Generator, size: int) -> np.ndarray:
    """Radii spread over the resolved window: random cell, uniform inside."""
    cells = resolved_cells(model)
    k = cells[rng.integers(0, cells.size, size=size)]
    u = rng.random(size)
    return model.radii[k] + u * (model.radii[k + 1] - model.radii[k])


def verify_preservation(space: SpaceSpec, model: ModelSpace, trials: int = 100,
                        seed: int = 0) -> PreservationReport:
    """Compare annulus volumes and fiber areas with their model counterparts.

    Discrepancies are relative; a degenerate annulus counts as zero error when
    both sides vanish. Radii are drawn from :func:`resolved_cells`.
    """
    rng = np.random.default_rng(seed)
    omega = space.fiber_measure
    r0 = _random_radii(model, rng, trials)
    r1 = _random_radii(model, rng, trials)
    r0, r1 = np.minimum(r0, r1), np.maximum(r0, r1)
    direct, _ = adaptive_integrate(space.volume_element, r0, r1, rtol=1e-13)
    via_model = omega * (model.forward(r1) - model.forward(r0))
    denom = np.maximum(np.abs(direct), np.abs(via_model))
    vol_err = np.where(denom > 0, np.abs(direct - via_model) / np.where(denom > 0, denom, 1.0), 0.0)

    r = _random_radii(model, rng, trials)
    s = model.forward(r)
    r_back = model.inverse(s)
    area = fiber_area(space, r)
    area_model = omega * model.psi(s)
    area_err = np.abs(area - area_model) / area
    trip = np.abs(r_back - r) / np.maximum(np.abs(r), 1e-300)
    return PreservationReport(trials, seed, float(vol_err.max(initial=0.0)),
                              float(area_err.max(initial=0.0)), float(trip.max(initial=0.0)))
