"""Time-indexed velocity samplers used to drive characteristic traces.

A sampler answers "what is the fluid velocity field at time s" for s inside
its validity range.  Sampling outside the range is a hard error rather than
an extrapolation: characteristic feet must never be integrated against made-up
data.  `stage_fields` turns a sampler into the prefiltered stage array the
sweep kernels consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interp import prefilter_periodic
from .spectral import SpectralGrid, VelocityField


class SamplerRangeError(ValueError):
    """Raised when a velocity sampler is queried outside its time range."""


def _range_slack(t_lo: float, t_hi: float) -> float:
    return 1e-9 * max(1.0, abs(t_lo), abs(t_hi))


@dataclass(frozen=True)
class ConstantVelocity:
    """A velocity field frozen in time; valid for all times."""

    u: VelocityField

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid

    @property
    def t_min(self) -> float:
        return -np.inf

    @property
    def t_max(self) -> float:
        return np.inf

    def velocity(self, s: float) -> VelocityField:
        return self.u


def zero_velocity(grid: SpectralGrid) -> ConstantVelocity:
    return ConstantVelocity(VelocityField.zero(grid))


@dataclass
class LagrangeVelocityPath:
    """Polynomial-in-time velocity path through node fields.

    Interpolates spectral coefficients with the barycentric Lagrange formula
    over the node times; queries must stay within [times[0], times[-1]] up to
    round-off slack.  With the node times being quadrature nodes of a window,
    this is the natural continuous extension of the iterates produced by the
    fixed-point solver.
    """

    times: np.ndarray
    fields: list[VelocityField]
    _bary: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("times must be a 1D array with at least one node")
        if len(self.fields) != self.times.size:
            raise ValueError("one velocity field per time node is required")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("node times must be strictly increasing")
        grid = self.fields[0].grid
        for f in self.fields[1:]:
            if not grid.compatible(f.grid):
                raise ValueError("all fields on a path must share one grid")
        diffs = self.times[:, None] - self.times[None, :]
        np.fill_diagonal(diffs, 1.0)
        self._bary = 1.0 / np.prod(diffs, axis=1)

    @property
    def grid(self) -> SpectralGrid:
        return self.fields[0].grid

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def _check(self, s: float) -> None:
        slack = _range_slack(self.t_min, self.t_max)
        if s < self.t_min - slack or s > self.t_max + slack:
            raise SamplerRangeError(
                f"time {s!r} outside sampled range [{self.t_min!r}, {self.t_max!r}]"
            )

    def velocity(self, s: float) -> VelocityField:
        self._check(s)
        if self.times.size == 1:
            return self.fields[0]
        d = s - self.times
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            return self.fields[int(hit[0])]
        w = self._bary / d
        w = w / np.sum(w)
        hat = w[0] * self.fields[0].hat
        for wi, f in zip(w[1:], self.fields[1:]):
            hat = hat + wi * f.hat
        return VelocityField(self.grid, hat)


def stage_fields(sampler, times: np.ndarray) -> np.ndarray:
    """Prefiltered velocity values at the given times, stacked (K, 2, nx, nx)."""
    times = np.asarray(times, dtype=np.float64)
    grid = sampler.grid
    out = np.empty((times.size, 2, grid.n_x, grid.n_x), dtype=np.float64)
    for k, s in enumerate(times):
        out[k] = prefilter_periodic(sampler.velocity(float(s)).values)
    return out
