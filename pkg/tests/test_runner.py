"""End-to-end run orchestration tests on small grids.

The decaying vortex gives an exact fluid-energy column to check the CSV
against; reruns and snapshot-resumed runs must agree to the byte, since the
CSV is the reproducibility contract of the whole pipeline.
"""

import math
import os

import numpy as np
import pytest

from nsvsim.config import RunConfig
from nsvsim.runner import (
    CSV_NAME,
    EXIT_NO_CONVERGENCE,
    EXIT_OK,
    FINAL_SNAPSHOT,
    LAST_GOOD_SNAPSHOT,
    format_row,
    resume,
    run,
)
from nsvsim.snapshot import read_snapshot

HEADER = (
    "t, fluid_energy, particle_functional, visc_dissipation, drag_dissipation, "
    "energy_residual, mass, mass_drift, linf_f, linf_bound, m6, picard_iters, "
    "contraction_last"
)


def fluid_only_config(**overrides) -> RunConfig:
    base = dict(n_x=32, n_v=9, v_max=3.0, kinetic="zero", t_end=0.05, window=0.01)
    base.update(overrides)
    return RunConfig(**base)


def coupled_config(**overrides) -> RunConfig:
    base = dict(n_x=16, n_v=17, v_max=6.0, t_end=0.03, window=0.01,
                quadrature_nodes=3, char_substep=0.01)
    base.update(overrides)
    return RunConfig(**base)


def read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


class TestFluidOnlyRun:
    def test_energy_column_tracks_exact_decay(self, tmp_path):
        result = run(fluid_only_config(), output_dir=str(tmp_path))
        assert result.exit_code == EXIT_OK
        lines = read_lines(result.csv_path)
        assert lines[0] == HEADER
        assert len(lines) == 1 + 6  # t = 0 plus five windows
        for line in lines[1:]:
            cells = line.split(", ")
            t, energy = float(cells[0]), float(cells[1])
            exact = 2.0 * math.pi**2 * math.exp(-4.0 * t)
            assert energy == pytest.approx(exact, rel=1e-8)

    def test_final_snapshot_written_and_loadable(self, tmp_path):
        result = run(fluid_only_config(), output_dir=str(tmp_path))
        assert result.snapshot_path == str(tmp_path / FINAL_SNAPSHOT)
        snap = read_snapshot(result.snapshot_path)
        assert snap.state.t == pytest.approx(0.05, abs=1e-14)
        assert "ledger" in snap.arrays

    def test_snapshot_final_can_be_disabled(self, tmp_path):
        result = run(fluid_only_config(snapshot_final=False), output_dir=str(tmp_path))
        assert result.snapshot_path is None
        assert not (tmp_path / FINAL_SNAPSHOT).exists()

    def test_cadence_thins_rows_but_keeps_endpoint(self, tmp_path):
        result = run(fluid_only_config(cadence=2), output_dir=str(tmp_path))
        lines = read_lines(result.csv_path)
        times = [float(line.split(", ")[0]) for line in lines[1:]]
        assert times == pytest.approx([0.0, 0.02, 0.04, 0.05])

    def test_periodic_snapshots(self, tmp_path):
        run(fluid_only_config(snapshot_every=2), output_dir=str(tmp_path))
        names = sorted(p.name for p in tmp_path.glob("state-*.snap"))
        assert names == ["state-000002.snap", "state-000004.snap"]
        snap = read_snapshot(tmp_path / "state-000002.snap")
        assert snap.state.t == pytest.approx(0.02)


class TestCoupledRun:
    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = coupled_config()
        a = run(cfg, output_dir=str(tmp_path / "a"))
        b = run(cfg, output_dir=str(tmp_path / "b"))
        with open(a.csv_path, "rb") as fa, open(b.csv_path, "rb") as fb:
            assert fa.read() == fb.read()

    def test_resume_continues_the_same_trajectory(self, tmp_path):
        cfg = coupled_config(t_end=0.03)
        straight = run(cfg, output_dir=str(tmp_path / "straight"))

        half = run(coupled_config(t_end=0.01), output_dir=str(tmp_path / "half"))
        resumed = resume(half.snapshot_path, until=0.03, output_dir=str(tmp_path / "resumed"))

        assert resumed.exit_code == EXIT_OK
        gap = np.max(np.abs(resumed.state.u.hat - straight.state.u.hat))
        scale = np.max(np.abs(straight.state.u.hat))
        assert gap <= 1e-12 * scale
        assert np.array_equal(resumed.state.f.values, straight.state.f.values) or (
            np.max(np.abs(resumed.state.f.values - straight.state.f.values))
            <= 1e-12 * straight.state.f.linf()
        )
        # the resumed CSV holds exactly the post-resume rows, byte-equal to
        # the corresponding rows of the uninterrupted run
        tail = read_lines(resumed.csv_path)
        full = read_lines(straight.csv_path)
        assert tail[0] == HEADER
        assert tail[1:] == full[-len(tail[1:]):]

    def test_resume_rejects_backward_target(self, tmp_path):
        half = run(coupled_config(t_end=0.01), output_dir=str(tmp_path))
        with pytest.raises(ValueError, match="not beyond"):
            resume(half.snapshot_path, until=0.01)

    def test_resume_requires_ledger_accumulators(self, tmp_path):
        from nsvsim.config import render_config
        from nsvsim.snapshot import write_snapshot

        half = run(coupled_config(t_end=0.01), output_dir=str(tmp_path))
        bare = tmp_path / "bare.snap"
        write_snapshot(bare, half.state, render_config(coupled_config(t_end=0.01)))
        with pytest.raises(ValueError, match="ledger"):
            resume(str(bare), until=0.02)


class TestNonConvergence:
    def test_failure_saves_last_good_state_and_reports(self, tmp_path):
        cfg = coupled_config(max_iter=1, tol=1e-14)
        result = run(cfg, output_dir=str(tmp_path))
        assert result.exit_code == EXIT_NO_CONVERGENCE
        assert "no convergence" in result.message
        assert result.snapshot_path == str(tmp_path / LAST_GOOD_SNAPSHOT)
        snap = read_snapshot(result.snapshot_path)
        assert snap.state.t == result.state.t
        lines = read_lines(result.csv_path)
        assert lines[0] == HEADER and len(lines) >= 2  # header plus the t=0 row


class TestRowFormat:
    def test_seventeen_digit_floats_and_integer_iterations(self, tmp_path):
        result = run(fluid_only_config(), output_dir=str(tmp_path))
        row = result.ledger.rows[-1]
        text = format_row(row)
        cells = text.split(", ")
        assert len(cells) == 13
        iters = cells[11]
        assert iters == str(int(row.picard_iters)) and "." not in iters
        assert float(cells[1]) == row.fluid_energy  # .17g is lossless for doubles

    def test_output_directory_defaults_to_config(self, tmp_path):
        cfg = fluid_only_config(directory=str(tmp_path / "from-config"))
        result = run(cfg)
        assert result.csv_path == str(tmp_path / "from-config" / CSV_NAME)
        assert os.path.exists(result.csv_path)
