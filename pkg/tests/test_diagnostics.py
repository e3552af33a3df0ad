"""Diagnostics tests against closed-form states.

The decaying vortex gives every quantity here in closed form: energy
2 pi^2 e^{-4t}, enstrophy-weighted norms scaling with |k|^2 = 2, zero
advection of its own vorticity.  Gaussian distributions on a wide velocity
box give the drag dissipation rate analytically.  Ledger math is checked by
feeding exact states and comparing against hand integrals.
"""

import math

import numpy as np
import pytest

from nsvsim.coupling import SimState, StepReport
from nsvsim.diagnostics import (
    CSV_COLUMNS,
    EnergyLedger,
    conservation_report,
    drag_dissipation_rate,
    energy_identity_residual,
    fluid_momentum,
    monotonicity_slack,
    particle_functional,
    sobolev_norms,
    vorticity_residual,
)
from nsvsim.spectral import SpectralGrid, VelocityField, taylor_green
from nsvsim.vlasov import DistributionFunction, PhaseGrid, compute_moments

TAU = 2.0 * math.pi
PI2 = math.pi**2


def tg_state(t: float, grid: SpectralGrid, phase: PhaseGrid) -> SimState:
    return SimState(taylor_green(t, grid), DistributionFunction.zero(phase), t)


def dummy_report(t_start: float, window: float) -> StepReport:
    return StepReport(t_start=t_start, window=window, iterations=1,
                      increments=[0.0], converged=True)


def gaussian_distribution(mean, sigma=1.0):
    grid = PhaseGrid(SpectralGrid(8), n_v=96, v_max=8.0)

    def fn(x1, x2, v1, v2):
        r2 = (v1 - mean[0]) ** 2 + (v2 - mean[1]) ** 2
        return (1.0 + 0.3 * np.cos(x1) + 0.0 * x2) * np.exp(-r2 / (2 * sigma**2)) / (TAU * sigma**2)

    return grid, DistributionFunction.from_function(grid, fn)


class TestNorms:
    def test_decaying_vortex_sobolev_ladder(self):
        grid = SpectralGrid(32)
        l2, h1, h2 = sobolev_norms(taylor_green(0.0, grid))
        # single shell |k|^2 = 2: each derivative order doubles the integral
        assert l2 == pytest.approx(2.0 * PI2, rel=1e-12)
        assert h1 == pytest.approx(4.0 * PI2, rel=1e-12)
        assert h2 == pytest.approx(8.0 * PI2, rel=1e-12)

    def test_decay_factor(self):
        grid = SpectralGrid(32)
        l2_t, _, _ = sobolev_norms(taylor_green(0.3, grid))
        assert l2_t == pytest.approx(2.0 * PI2 * math.exp(-4.0 * 0.3), rel=1e-12)

    def test_fluid_momentum(self):
        grid = SpectralGrid(16)
        assert fluid_momentum(taylor_green(0.0, grid)) == pytest.approx([0.0, 0.0], abs=1e-13)
        values = np.empty((2, 16, 16))
        values[0], values[1] = 0.25, -1.5
        u = VelocityField.from_physical(grid, values)
        assert fluid_momentum(u) == pytest.approx(np.array([0.25, -1.5]) * TAU**2, rel=1e-13)


class TestDragDissipation:
    def test_gaussian_closed_form(self):
        mean = (1.0, 0.5)
        sigma = 1.0
        grid, f = gaussian_distribution(mean, sigma)
        mom = compute_moments(f)
        values = np.empty((2, 8, 8))
        values[0], values[1] = 0.4, -0.2
        u = VelocityField.from_physical(grid.space, values)
        # 2 integral rho |u - vbar|^2 + 2 sigma^2 per unit mass
        gap2 = (0.4 - mean[0]) ** 2 + (-0.2 - mean[1]) ** 2
        exact = 2.0 * mom.M0 * (gap2 + 2.0 * sigma**2)
        assert drag_dissipation_rate(u, mom) == pytest.approx(exact, rel=1e-9)

    def test_nonnegative_even_for_mismatched_flow(self):
        grid, f = gaussian_distribution((0.0, 0.0))
        mom = compute_moments(f)
        values = np.zeros((2, 8, 8))
        values[0] = 3.0 * np.sin(grid.space.x)[:, None]
        u = VelocityField.from_physical(grid.space, values)
        assert drag_dissipation_rate(u, mom) >= 0.0

    def test_particle_functional(self):
        grid, f = gaussian_distribution((1.0, 0.5))
        mom = compute_moments(f)
        assert particle_functional(mom) == pytest.approx(mom.M0 + mom.M2, rel=1e-14)


class TestEnergyLedger:
    def run_exact(self, dt: float, steps: int, n_x: int = 32) -> EnergyLedger:
        grid = SpectralGrid(n_x)
        phase = PhaseGrid(grid, n_v=9, v_max=3.0)
        ledger = EnergyLedger.start(tg_state(0.0, grid, phase))
        for k in range(1, steps + 1):
            t = k * dt
            ledger.record(tg_state(t, grid, phase), dummy_report(t - dt, dt))
        return ledger

    def test_fluid_energy_column_tracks_closed_form(self):
        ledger = self.run_exact(dt=0.01, steps=5)
        for row in ledger.rows:
            assert row.fluid_energy == pytest.approx(2.0 * PI2 * math.exp(-4.0 * row.t), rel=1e-12)

    def test_viscous_integral_matches_hand_quadrature(self):
        dt, steps = 0.002, 25
        ledger = self.run_exact(dt=dt, steps=steps)
        t = steps * dt
        exact = 2.0 * PI2 * (1.0 - math.exp(-4.0 * t))
        assert ledger.rows[-1].visc_dissipation == pytest.approx(exact, rel=1e-4)
        assert ledger.rows[-1].drag_dissipation == 0.0

    def test_residual_shrinks_at_second_order(self):
        coarse = self.run_exact(dt=0.01, steps=4)
        fine = self.run_exact(dt=0.005, steps=8)
        _, rel_coarse = energy_identity_residual(coarse)
        _, rel_fine = energy_identity_residual(fine)
        assert rel_coarse < 1e-2
        assert rel_coarse / rel_fine > 3.5

    def test_first_row_residual_is_zero(self):
        ledger = self.run_exact(dt=0.01, steps=2)
        assert ledger.rows[0].energy_residual == 0.0
        assert ledger.rows[0].t == 0.0

    def test_monotone_decay_has_zero_slack(self):
        ledger = self.run_exact(dt=0.01, steps=5)
        assert monotonicity_slack(ledger) == 0.0

    def test_rejects_non_advancing_time(self):
        grid = SpectralGrid(16)
        phase = PhaseGrid(grid, n_v=9, v_max=3.0)
        ledger = EnergyLedger.start(tg_state(0.0, grid, phase))
        with pytest.raises(ValueError):
            ledger.record(tg_state(0.0, grid, phase), dummy_report(0.0, 0.0))

    def test_accumulator_roundtrip_resumes_bit_exactly(self):
        grid = SpectralGrid(16)
        phase = PhaseGrid(grid, n_v=9, v_max=3.0)
        dt = 0.01
        full = EnergyLedger.start(tg_state(0.0, grid, phase))
        for k in range(1, 7):
            full.record(tg_state(k * dt, grid, phase), dummy_report((k - 1) * dt, dt))

        half = EnergyLedger.start(tg_state(0.0, grid, phase))
        for k in range(1, 4):
            half.record(tg_state(k * dt, grid, phase), dummy_report((k - 1) * dt, dt))
        resumed = EnergyLedger.from_accumulators(half.accumulator_vector())
        for k in range(4, 7):
            resumed.record(tg_state(k * dt, grid, phase), dummy_report((k - 1) * dt, dt))

        tail = [r.astuple() for r in resumed.rows]
        # full.rows[0] is the start row at t = 0, so the tail begins at index 4
        assert tail == [r.astuple() for r in full.rows[4:]]

    def test_csv_columns_match_row_layout(self):
        ledger = self.run_exact(dt=0.01, steps=1)
        assert len(ledger.rows[0].astuple()) == len(CSV_COLUMNS)
        assert CSV_COLUMNS[0] == "t"


class TestConservationReport:
    def test_free_kinetic_fields(self):
        grid, f = gaussian_distribution((1.0, 0.5))
        u = VelocityField.zero(grid.space)
        ref = SimState(u, f.copy(), 0.0)
        state = SimState(u, f.copy(), 0.25)
        rep = conservation_report(state, ref)
        assert rep.mass_drift == 0.0
        assert rep.linf_bound == pytest.approx(f.linf() * math.exp(0.5), rel=1e-13)
        assert rep.max_principle_ok
        assert rep.momentum_total == pytest.approx(mom_total(ref), rel=1e-12)

    def test_grid_mismatch_rejected(self):
        grid_a = PhaseGrid(SpectralGrid(8), n_v=9, v_max=3.0)
        grid_b = PhaseGrid(SpectralGrid(8), n_v=11, v_max=3.0)
        a = SimState(VelocityField.zero(grid_a.space), DistributionFunction.zero(grid_a))
        b = SimState(VelocityField.zero(grid_b.space), DistributionFunction.zero(grid_b))
        with pytest.raises(ValueError, match="grids"):
            conservation_report(a, b)


def mom_total(state: SimState) -> np.ndarray:
    return fluid_momentum(state.u) + compute_moments(state.f).M1


class TestVorticityResidual:
    def test_exact_decay_pair_has_tiny_residual(self):
        grid = SpectralGrid(32)
        phase = PhaseGrid(grid, n_v=9, v_max=3.0)
        dt = 1e-3
        before = tg_state(0.1, grid, phase)
        after = tg_state(0.1 + dt, grid, phase)
        res, scale = vorticity_residual(before, after)
        # |omega| = 2 e^{-2t} |sin sin|, so the L2 norm is 2 pi e^{-2t}
        assert scale == pytest.approx(
            2.0 * math.pi * math.exp(-2.0 * (0.1 + dt / 2)), rel=1e-3
        )
        assert res < 1e-4 * scale

    def test_centered_difference_is_second_order(self):
        grid = SpectralGrid(32)
        phase = PhaseGrid(grid, n_v=9, v_max=3.0)
        res = {}
        for dt in (2e-3, 1e-3):
            before = tg_state(0.1, grid, phase)
            after = tg_state(0.1 + dt, grid, phase)
            res[dt], _ = vorticity_residual(before, after)
        assert res[2e-3] / res[1e-3] == pytest.approx(4.0, rel=0.05)
