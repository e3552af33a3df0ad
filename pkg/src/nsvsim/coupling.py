"""Window-by-window fixed-point integrator for the coupled system.

Each window [t, t + eps] solves the mild (Duhamel) form of the fluid equation

    u(t + s) = e^{s Laplace} u(t) + int_0^s e^{(s - sigma) Laplace} P N(sigma) d sigma,
    N = -P(u . grad u) + P(-rho u + j),

by Picard iteration on the pair (velocity path, distribution path) sampled at
Gauss-Lobatto nodes of the window.  The time integral is evaluated as an exact
product quadrature: the forcing is replaced by its Lagrange interpolant
through the nodes and the polynomial-times-heat-kernel moments are integrated
mode by mode in closed form, so the only quadrature error is the interpolation
error of N in time.

The iteration is the literal fixed-point map: the new velocity path is the
Duhamel image of the previous pair, and the new distribution path is the
transport solve along the previous velocity path (`jacobi` sweep; the
`gauss_seidel` variant transports along the freshly updated path instead).
Increments are measured in the solution-space norm

    ||u||_X = sup_s (||u||_{L2}^2 + ||grad u||_{L2}^2)^{1/2}
              + (int ||Laplace u||_{L2}^2 ds)^{1/2},

with the time integral evaluated by the window's Gauss-Lobatto weights.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .sampling import LagrangeVelocityPath
from .spectral import (
    SpectralGrid,
    VelocityField,
    heat_propagate,
    leray_project,
    mode_energy_sum,
    nonlinear_term,
    to_spectral,
)
from .vlasov import DistributionFunction, MomentSet, compute_moments, semi_lagrangian_step

log = logging.getLogger(__name__)

MAX_WINDOW_HALVINGS = 5


class ConvergenceError(RuntimeError):
    """Picard iteration failed even after repeated window halving."""

    def __init__(self, message: str, state: "SimState"):
        super().__init__(message)
        self.state = state


@dataclass
class SimState:
    """Coupled state at one instant."""

    u: VelocityField
    f: DistributionFunction
    t: float = 0.0

    def __post_init__(self) -> None:
        if not self.u.grid.compatible(self.f.grid.space):
            raise ValueError("fluid and kinetic states live on different spatial grids")
        self.f.time = self.t

    def copy(self) -> "SimState":
        return SimState(self.u.copy(), self.f.copy(), self.t)


@dataclass
class PicardConfig:
    window: float = 0.01
    tol: float = 1e-10
    max_iter: int = 12
    quadrature_nodes: int = 5
    sweep: str = "jacobi"
    char_substep: float | None = None
    boundary_warn: float = 1e-8

    def __post_init__(self) -> None:
        if not self.window > 0:
            raise ValueError(f"window must be positive, got {self.window}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 2 <= self.quadrature_nodes <= 12:
            raise ValueError(
                f"quadrature_nodes must lie in [2, 12], got {self.quadrature_nodes}"
            )
        if self.sweep not in ("jacobi", "gauss_seidel"):
            raise ValueError(f"sweep must be 'jacobi' or 'gauss_seidel', got {self.sweep!r}")


@dataclass
class StepReport:
    """Outcome of one window solve."""

    t_start: float
    window: float
    iterations: int
    increments: list[float]
    converged: bool

    @property
    def contraction_factors(self) -> list[float]:
        out = []
        for a, b in zip(self.increments, self.increments[1:]):
            out.append(b / a if a > 0 else 0.0)
        return out

    @property
    def contraction_last(self) -> float:
        factors = self.contraction_factors
        return factors[-1] if factors else 0.0


@lru_cache(maxsize=32)
def gauss_lobatto(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto nodes and weights on [0, 1] (exact through degree 2m - 3)."""
    if m < 2:
        raise ValueError(f"Gauss-Lobatto rule needs at least 2 nodes, got {m}")
    if m == 2:
        x = np.array([-1.0, 1.0])
    else:
        # interior nodes are the roots of P'_{m-1}
        coeffs = np.zeros(m)
        coeffs[m - 1] = 1.0
        dcoeffs = legendre.legder(coeffs)
        x = np.concatenate(([-1.0], np.sort(legendre.legroots(dcoeffs)), [1.0]))
    coeffs = np.zeros(m)
    coeffs[m - 1] = 1.0
    pm1 = legendre.legval(x, coeffs)
    w = 2.0 / (m * (m - 1) * pm1 ** 2)
    return (x + 1.0) / 2.0, w / 2.0


def lagrange_monomial_coeffs(nodes: np.ndarray) -> np.ndarray:
    """C[p, j] with ell_j(s) = sum_p C[p, j] s^p for the given nodes."""
    nodes = np.asarray(nodes, dtype=np.float64)
    m = nodes.size
    vander = nodes[:, None] ** np.arange(m)[None, :]
    return np.linalg.inv(vander)


def poly_exp_integrals(tau: float, z: np.ndarray, pmax: int) -> np.ndarray:
    """J_p(tau, z) = int_0^tau e^{-z (tau - s)} s^p ds for p = 0..pmax.

    Evaluated by a stable hybrid: a Taylor series in z*tau on the left branch
    (where the upward recursion would cancel) and the exact upward recursion
    J_p = (tau^p - p J_{p-1}) / z on the right branch.
    """
    z = np.asarray(z, dtype=np.float64)
    out = np.empty((pmax + 1,) + z.shape, dtype=np.float64)
    if tau == 0.0:
        out[:] = 0.0
        return out
    zt = z * tau
    small = zt <= 5.0
    if np.any(small):
        zt_s = zt[small]
        for p in range(pmax + 1):
            term = np.full(zt_s.shape, 1.0 / (p + 1))
            acc = term.copy()
            for n in range(1, 60):
                term = term * (-zt_s) / (n + p + 1)
                acc += term
                if np.all(np.abs(term) <= 1e-20 * np.abs(acc)):
                    break
            out[p][small] = acc * tau ** (p + 1)
    if np.any(~small):
        zl = z[~small]
        prev = -np.expm1(-zt[~small]) / zl
        out[0][~small] = prev
        for p in range(1, pmax + 1):
            prev = (tau ** p - p * prev) / zl
            out[p][~small] = prev
    return out


_weights_cache: dict[tuple, tuple] = {}


def heat_history_weights(grid: SpectralGrid, eps: float, m: int):
    """Per-mode quadrature weights W[i, j] for the windowed Duhamel integral.

    W[i, j](k) = int_0^{tau_i eps} e^{-|k|^2 (tau_i eps - s)} ell_j(s / eps) ds,
    so that u_hat(t + tau_i eps) = e^{-|k|^2 tau_i eps} u_hat(t)
                                   + sum_j W[i, j](k) N_hat_j.
    Returns (nodes, gl_weights, W) with W of shape (m, m, n_x, n_x // 2 + 1).
    """
    key = (grid.n_x, grid.length, float(eps), m)
    hit = _weights_cache.get(key)
    if hit is not None:
        return hit
    nodes, glw = gauss_lobatto(m)
    c = lagrange_monomial_coeffs(nodes)
    z = (grid.k_sq * eps).ravel()
    w = np.zeros((m, m, z.size))
    for i in range(m):
        tau = float(nodes[i])
        if tau == 0.0:
            continue
        j_ints = poly_exp_integrals(tau, z, m - 1)
        for j in range(m):
            w[i, j] = eps * np.tensordot(c[:, j], j_ints, axes=(0, 0))
    w = w.reshape(m, m, *grid.k_sq.shape)
    result = (nodes, glw, w)
    if len(_weights_cache) >= 32:
        _weights_cache.pop(next(iter(_weights_cache)))
    _weights_cache[key] = result
    return result


def drag_force(mom: MomentSet, u: VelocityField) -> np.ndarray:
    """Momentum exchange density -rho u + j on the spatial grid."""
    if not mom.space.compatible(u.grid):
        raise ValueError("moments and velocity live on different grids")
    return -mom.rho[None, :, :] * u.values + mom.current


def forcing_hat(u: VelocityField, mom: MomentSet) -> np.ndarray:
    """Spectral coefficients of P N = P(-(u . grad u) - rho u + j), dealiased."""
    adv = nonlinear_term(u)
    drag = to_spectral(drag_force(mom, u)) * u.grid.dealias_mask
    return leray_project(VelocityField(u.grid, drag)).hat - adv.hat


def duhamel_update(grid: SpectralGrid, u0: VelocityField, n_hats: list[np.ndarray],
                   eps: float, m: int) -> list[VelocityField]:
    """Apply the windowed Duhamel formula to a sampled forcing path."""
    nodes, _, w = heat_history_weights(grid, eps, m)
    out = []
    for i in range(m):
        hat = heat_propagate(u0, eps * float(nodes[i])).hat.copy()
        for j in range(m):
            hat += w[i, j] * n_hats[j]
        out.append(VelocityField(grid, hat))
    return out


def path_x_norm(grid: SpectralGrid, hats: list[np.ndarray], eps: float,
                glw: np.ndarray) -> float:
    """Discrete solution-space norm of a velocity path sampled at the nodes."""
    sup_part = 0.0
    l2t = 0.0
    for i, hat in enumerate(hats):
        e0 = mode_energy_sum(grid, hat)
        e1 = mode_energy_sum(grid, hat, grid.k_sq)
        e2 = mode_energy_sum(grid, hat, grid.k_sq ** 2)
        sup_part = max(sup_part, math.sqrt(e0 + e1))
        l2t += glw[i] * e2
    return sup_part + math.sqrt(eps * l2t)


def _kinetic_path(f0: DistributionFunction, times: np.ndarray,
                  fields: list[VelocityField], cfg: PicardConfig) -> tuple[list, list]:
    """Transport f0 to every interior node time along the given velocity path.

    Each node is reached by a single backward solve from the window start, so
    interpolation error does not compound across nodes inside a window.
    """
    sampler = LagrangeVelocityPath(times, fields)
    f_path = [f0]
    mom_path = [compute_moments(f0)]
    for s in times[1:]:
        fs = semi_lagrangian_step(
            f0, sampler, float(s) - f0.time,
            substep=cfg.char_substep, boundary_warn=cfg.boundary_warn,
        )
        f_path.append(fs)
        mom_path.append(compute_moments(fs))
    return f_path, mom_path


def picard_solve(state: SimState, cfg: PicardConfig, window: float | None = None
                 ) -> tuple[SimState, StepReport]:
    """Solve one window by fixed-point iteration.

    Returns the converged end-of-window state and a report.  On failure the
    report has converged=False and the input state is left untouched.
    """
    eps = cfg.window if window is None else window
    if not eps > 0:
        raise ValueError(f"window must be positive, got {eps}")
    grid = state.u.grid
    m = cfg.quadrature_nodes
    nodes, glw, _ = heat_history_weights(grid, eps, m)
    times = state.t + eps * nodes
    f_zero = state.f.is_zero()

    # zeroth iterate: the freely decaying fluid path and its transported dust
    u_path = [heat_propagate(state.u, eps * float(s)) for s in nodes]
    if f_zero:
        f_path = [state.f] * m
        mom_path = [compute_moments(state.f)] * m
    else:
        f_path, mom_path = _kinetic_path(state.f, times, u_path, cfg)

    increments: list[float] = []
    converged = False
    for it in range(1, cfg.max_iter + 1):
        n_hats = [forcing_hat(u_path[j], mom_path[j]) for j in range(m)]
        new_u_path = duhamel_update(grid, state.u, n_hats, eps, m)
        delta = path_x_norm(
            grid, [a.hat - b.hat for a, b in zip(new_u_path, u_path)], eps, glw
        )
        increments.append(delta)
        if delta <= cfg.tol:
            u_path = new_u_path
            converged = True
            break
        if not f_zero and it < cfg.max_iter:
            drive = new_u_path if cfg.sweep == "gauss_seidel" else u_path
            if it == 1 and cfg.sweep == "jacobi":
                pass  # f was already transported along this same zeroth path
            else:
                f_path, mom_path = _kinetic_path(state.f, times, drive, cfg)
        u_path = new_u_path

    report = StepReport(
        t_start=state.t, window=eps, iterations=len(increments),
        increments=increments, converged=converged,
    )
    if not converged:
        return state, report

    # one consistency transport along the converged velocity path
    if f_zero:
        f_end = DistributionFunction(state.f.grid, state.f.values.copy(), state.t + eps)
    else:
        sampler = LagrangeVelocityPath(times, u_path)
        f_end = semi_lagrangian_step(
            state.f, sampler, eps,
            substep=cfg.char_substep, boundary_warn=cfg.boundary_warn,
        )
    new_state = SimState(u_path[-1], f_end, state.t + eps)
    return new_state, report


def advance(state: SimState, t_end: float, cfg: PicardConfig, on_window=None) -> SimState:
    """March the state to t_end window by window.

    A window that fails to converge is retried at half the width, up to
    MAX_WINDOW_HALVINGS times; after a halved window succeeds the schedule
    returns to the configured width.  Exhausting the retries raises
    ConvergenceError carrying the last good state.
    """
    tiny = 1e-12 * max(1.0, abs(t_end))
    while t_end - state.t > tiny:
        base = min(cfg.window, t_end - state.t)
        for attempt in range(MAX_WINDOW_HALVINGS + 1):
            w = base / 2 ** attempt
            new_state, report = picard_solve(state, cfg, w)
            if report.converged:
                if attempt:
                    log.info("window at t=%.6g converged after halving to %.3g",
                             state.t, w)
                state = new_state
                if on_window is not None:
                    on_window(state, report)
                break
            log.warning(
                "window [%.6g, %.6g] did not converge in %d iterations "
                "(last increment %.3e); halving",
                state.t, state.t + w, report.iterations,
                report.increments[-1] if report.increments else float("nan"),
            )
        else:
            raise ConvergenceError(
                f"no convergence at t={state.t!r} even with window "
                f"{base / 2 ** MAX_WINDOW_HALVINGS!r}", state,
            )
    return state
