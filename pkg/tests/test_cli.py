"""Command-line interface tests: argument wiring, exit codes, error surfaces."""

import pytest

from nsvsim.cli import build_parser, main
from nsvsim.runner import CSV_NAME

FLUID_ONLY = (
    "grid.n_x = 16\n"
    "kinetic.n_v = 9\n"
    "kinetic.v_max = 3.0\n"
    "time.t_end = 0.02\n"
    "time.window = 0.01\n"
    "initial_data.kinetic = zero\n"
)

COUPLED_STUCK = (
    "grid.n_x = 16\n"
    "kinetic.n_v = 17\n"
    "time.t_end = 0.02\n"
    "time.window = 0.01\n"
    "picard.max_iter = 1\n"
    "picard.tol = 1e-14\n"
    "picard.quadrature_nodes = 3\n"
    "picard.char_substep = 0.01\n"
)


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestRunCommand:
    def test_successful_run_returns_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FLUID_ONLY)
        out = tmp_path / "out"
        assert main(["run", cfg, "--output-dir", str(out)]) == 0
        assert (out / CSV_NAME).exists()
        assert "run finished at t = 0.02" in capsys.readouterr().out

    def test_bad_config_returns_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "grid.n_x = 17\ntime.t_end = 1.0\n")
        assert main(["run", cfg]) == 2
        assert "grid.n_x" in capsys.readouterr().err

    def test_missing_config_file_returns_two(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "absent.cfg")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_non_convergence_returns_three(self, tmp_path, capsys):
        cfg = write_config(tmp_path, COUPLED_STUCK)
        out = tmp_path / "out"
        assert main(["run", cfg, "--output-dir", str(out)]) == 3
        captured = capsys.readouterr()
        assert "stopped early" in captured.err
        assert (out / "last-good.snap").exists()


class TestResumeCommand:
    def test_resume_continues_run(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FLUID_ONLY)
        out = tmp_path / "out"
        assert main(["run", cfg, "--output-dir", str(out)]) == 0
        later = tmp_path / "later"
        code = main(["resume", str(out / "final.snap"), "--until", "0.04",
                     "--output-dir", str(later)])
        assert code == 0
        assert "resumed to t = 0.04" in capsys.readouterr().out
        assert (later / CSV_NAME).exists()

    def test_backward_target_returns_two(self, tmp_path, capsys):
        cfg = write_config(tmp_path, FLUID_ONLY)
        out = tmp_path / "out"
        main(["run", cfg, "--output-dir", str(out)])
        code = main(["resume", str(out / "final.snap"), "--until", "0.01"])
        assert code == 2
        assert "not beyond" in capsys.readouterr().err

    def test_garbage_snapshot_returns_two(self, tmp_path, capsys):
        bad = tmp_path / "junk.snap"
        bad.write_bytes(b"not a snapshot at all")
        assert main(["resume", str(bad), "--until", "1.0"]) == 2
        assert "error:" in capsys.readouterr().err


class TestParser:
    def test_subcommand_is_required(self, capsys):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args([])
        assert info.value.code == 2

    def test_verify_takes_config_and_output_dir(self):
        args = build_parser().parse_args(["verify", "x.cfg", "--output-dir", "report-dir"])
        assert args.command == "verify"
        assert args.config == "x.cfg" and args.output_dir == "report-dir"

    def test_resume_requires_until(self, capsys):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["resume", "x.snap"])

    def test_log_level_choices(self):
        args = build_parser().parse_args(["run", "x.cfg", "--log-level", "DEBUG"])
        assert args.log_level == "DEBUG"
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run", "x.cfg", "--log-level", "CHATTY"])
