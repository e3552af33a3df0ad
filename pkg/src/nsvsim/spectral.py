"""Fourier grid and incompressible velocity-field operations on the periodic square.

Physical fields live on a uniform n_x by n_x grid over [0, L)^2, stored row-major
so the second coordinate varies fastest.  Spectral coefficients use the numpy
rfft2 half-plane layout (conjugate symmetry along the last axis); wavenumbers
are 2*pi/L times integer mode numbers, so the mode (0, 0) wavenumber is exactly
zero.  Quadratic products are dealiased with the two-thirds rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid with cached wavenumber tables.

    Parameters
    ----------
    n_x : int
        Points per axis; must be even and at least 8.
    length : float
        Side length L of the periodic square.
    """

    n_x: int
    length: float = TWO_PI

    def __post_init__(self) -> None:
        if self.n_x < 8 or self.n_x % 2 != 0:
            raise ValueError(f"n_x must be even and >= 8, got {self.n_x}")
        if not self.length > 0.0:
            raise ValueError(f"length must be positive, got {self.length}")

    @cached_property
    def dx(self) -> float:
        return self.length / self.n_x

    @cached_property
    def x(self) -> np.ndarray:
        """1D node coordinates, shared by both axes."""
        return np.arange(self.n_x) * self.dx

    @cached_property
    def modes_1(self) -> np.ndarray:
        """Integer mode numbers along the first (full) spectral axis."""
        return np.fft.fftfreq(self.n_x, d=1.0 / self.n_x).astype(np.int64)

    @cached_property
    def modes_2(self) -> np.ndarray:
        """Integer mode numbers along the second (half-plane) spectral axis."""
        return np.fft.rfftfreq(self.n_x, d=1.0 / self.n_x).astype(np.int64)

    @cached_property
    def k1(self) -> np.ndarray:
        """Wavenumber along axis 0, shaped (n_x, 1) for broadcasting."""
        return (TWO_PI / self.length) * self.modes_1[:, None].astype(np.float64)

    @cached_property
    def k2(self) -> np.ndarray:
        """Wavenumber along axis 1, shaped (1, n_x//2 + 1)."""
        return (TWO_PI / self.length) * self.modes_2[None, :].astype(np.float64)

    @cached_property
    def k_sq(self) -> np.ndarray:
        return self.k1 * self.k1 + self.k2 * self.k2

    @cached_property
    def inv_k_sq(self) -> np.ndarray:
        """1/|k|^2 with the zero mode mapped to 0."""
        ksq = self.k_sq.copy()
        ksq[0, 0] = 1.0
        out = 1.0 / ksq
        out[0, 0] = 0.0
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with both |k_i| <= n_x // 3."""
        cut = self.n_x // 3
        return (np.abs(self.modes_1)[:, None] <= cut) & (np.abs(self.modes_2)[None, :] <= cut)

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each stored half-plane mode in full-plane sums."""
        w = np.full(self.n_x // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0  # Nyquist column is self-conjugate for even n_x
        return np.broadcast_to(w[None, :], (self.n_x, self.n_x // 2 + 1))

    def compatible(self, other: "SpectralGrid") -> bool:
        return self.n_x == other.n_x and self.length == other.length


def to_spectral(values: np.ndarray) -> np.ndarray:
    """Forward real transform over the trailing two axes."""
    return np.fft.rfft2(values, axes=(-2, -1))


def to_physical(hat: np.ndarray, n_x: int) -> np.ndarray:
    """Inverse real transform over the trailing two axes."""
    return np.fft.irfft2(hat, s=(n_x, n_x), axes=(-2, -1))


@dataclass(eq=False)
class VelocityField:
    """Two-component velocity field; the spectral coefficients are canonical.

    `hat` has shape (2, n_x, n_x//2 + 1); the physical samples are materialized
    lazily and cached.  Instances are treated as immutable; operations return
    new fields.
    """

    grid: SpectralGrid
    hat: np.ndarray
    _values: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_physical(cls, grid: SpectralGrid, values: np.ndarray) -> "VelocityField":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (2, grid.n_x, grid.n_x):
            raise ValueError(f"expected shape {(2, grid.n_x, grid.n_x)}, got {values.shape}")
        return cls(grid, to_spectral(values), values.copy())

    @classmethod
    def zero(cls, grid: SpectralGrid) -> "VelocityField":
        return cls(grid, np.zeros((2, grid.n_x, grid.n_x // 2 + 1), dtype=np.complex128))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = to_physical(self.hat, self.grid.n_x)
        return self._values

    def copy(self) -> "VelocityField":
        return VelocityField(self.grid, self.hat.copy())

    def divergence_max(self) -> float:
        """Max-norm of div u, evaluated spectrally."""
        div_hat = 1j * (self.grid.k1 * self.hat[0] + self.grid.k2 * self.hat[1])
        return float(np.abs(to_physical(div_hat, self.grid.n_x)).max())


@dataclass(eq=False)
class ScalarField:
    """Scalar samples on the same grid layout (used for vorticity)."""

    grid: SpectralGrid
    values: np.ndarray

    @property
    def hat(self) -> np.ndarray:
        return to_spectral(self.values)


def mode_energy_sum(grid: SpectralGrid, hat: np.ndarray, multiplier: np.ndarray | float = 1.0) -> float:
    """Full-plane sum of multiplier * |hat|^2 scaled to a physical integral.

    With numpy's unnormalized transforms this equals the integral over the
    square of the squared field (summed over leading components), i.e. the
    Parseval value of sum_k multiplier(k) |c_k|^2 * L^2.
    """
    n4 = float(grid.n_x) ** 4
    dens = (hat.real * hat.real + hat.imag * hat.imag) * multiplier
    if dens.ndim == 3:
        dens = dens.sum(axis=0)
    return float((grid.length ** 2 / n4) * (dens * grid.parseval_weights).sum())


def leray_project(u: VelocityField) -> VelocityField:
    """Divergence-free projection, applied mode by mode (identity at k = 0)."""
    g = u.grid
    k_dot = g.k1 * u.hat[0] + g.k2 * u.hat[1]
    factor = k_dot * g.inv_k_sq
    hat = np.stack((u.hat[0] - g.k1 * factor, u.hat[1] - g.k2 * factor))
    return VelocityField(g, hat)


def heat_propagate(u: VelocityField, tau: float) -> VelocityField:
    """Apply the heat semigroup e^{tau * Laplacian} with the exact multiplier."""
    if tau < 0.0:
        raise ValueError(f"heat_propagate requires tau >= 0, got {tau}")
    decay = np.exp(-u.grid.k_sq * tau)
    return VelocityField(u.grid, u.hat * decay)


def nonlinear_term(u: VelocityField) -> VelocityField:
    """Projected advection P(u . grad u), dealiased with the two-thirds rule."""
    g = u.grid
    hat_d = u.hat * g.dealias_mask
    vel = to_physical(hat_d, g.n_x)
    adv = np.empty_like(vel)
    for i in range(2):
        gi1 = to_physical(1j * g.k1 * hat_d[i], g.n_x)
        gi2 = to_physical(1j * g.k2 * hat_d[i], g.n_x)
        adv[i] = vel[0] * gi1 + vel[1] * gi2
    adv_hat = to_spectral(adv) * g.dealias_mask
    return leray_project(VelocityField(g, adv_hat))


def curl(u: VelocityField) -> ScalarField:
    """Scalar vorticity d1 u2 - d2 u1, evaluated spectrally."""
    g = u.grid
    w_hat = 1j * (g.k1 * u.hat[1] - g.k2 * u.hat[0])
    return ScalarField(g, to_physical(w_hat, g.n_x))


def taylor_green(t: float, grid: SpectralGrid, amplitude: float = 1.0) -> VelocityField:
    """Decaying cellular flow (sin x1 cos x2, -cos x1 sin x2) e^{-2t}.

    Exact for the unforced fluid because the advection term is a pure
    gradient; only valid on the 2*pi square.
    """
    if abs(grid.length - TWO_PI) > 1e-12 * TWO_PI:
        raise ValueError(f"taylor_green requires length = 2*pi, got {grid.length}")
    x1 = grid.x[:, None]
    x2 = grid.x[None, :]
    a = amplitude * np.exp(-2.0 * t)
    vals = np.stack((np.sin(x1) * np.cos(x2) * a, -np.cos(x1) * np.sin(x2) * a))
    return VelocityField.from_physical(grid, vals)
