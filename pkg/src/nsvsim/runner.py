"""Run orchestration: initial data, time marching, CSV series, checkpoints.

A run advances window by window, appending one CSV row every `output.cadence`
windows (and always at the final time).  Values are written with 17
significant digits, so a repeated run with the same configuration produces a
byte-identical file.  Snapshots carry the state, the canonical config text,
and the ledger accumulators, so a resumed run continues the dissipation
integrals exactly where the interrupted one stopped.

Non-convergence after the window-halving retries is a reportable outcome, not
a crash: the last good state is flushed to `last-good.snap`, the CSV keeps
the rows recorded so far, and the result carries exit code 3.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass

from .config import RunConfig, render_config
from .coupling import ConvergenceError, SimState, StepReport, advance
from .diagnostics import CSV_COLUMNS, EnergyLedger, LedgerRow
from .initial_data import make_initial_data
from .snapshot import Snapshot, read_snapshot, write_snapshot

log = logging.getLogger(__name__)

CSV_NAME = "diagnostics.csv"
FINAL_SNAPSHOT = "final.snap"
LAST_GOOD_SNAPSHOT = "last-good.snap"

EXIT_OK = 0
EXIT_NO_CONVERGENCE = 3


@dataclass
class RunResult:
    state: SimState
    ledger: EnergyLedger
    csv_path: str
    snapshot_path: str | None
    exit_code: int
    message: str = ""


def format_row(row: LedgerRow) -> str:
    parts = []
    for name, value in zip(CSV_COLUMNS, row.astuple()):
        if name == "picard_iters":
            parts.append(str(int(value)))
        else:
            parts.append(format(float(value), ".17g"))
    return ", ".join(parts)


def _csv_header() -> str:
    return ", ".join(CSV_COLUMNS)


class _CsvWriter:
    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8", newline="\n")
        self._fh.write(_csv_header() + "\n")

    def write(self, row: LedgerRow) -> None:
        self._fh.write(format_row(row) + "\n")

    def close(self) -> None:
        self._fh.close()


def _march(
    state: SimState,
    t_end: float,
    cfg: RunConfig,
    config_text: str,
    ledger: EnergyLedger,
    out_dir: str,
    csv: _CsvWriter,
) -> RunResult:
    """March `state` to t_end, recording rows and snapshots; shared by run/resume."""
    windows_done = 0

    def on_window(new_state: SimState, report: StepReport) -> None:
        nonlocal windows_done
        windows_done += 1
        due = windows_done % cfg.cadence == 0
        at_end = new_state.t >= t_end - 1e-12 * max(1.0, abs(t_end))
        if due or at_end:
            row = ledger.record(new_state, report)
            csv.write(row)
        if cfg.snapshot_every > 0 and windows_done % cfg.snapshot_every == 0:
            name = os.path.join(out_dir, f"state-{windows_done:06d}.snap")
            write_snapshot(name, new_state, config_text, {"ledger": ledger.accumulator_vector()})

    snapshot_path: str | None = None
    try:
        state = advance(state, t_end, cfg.picard(), on_window=on_window)
    except ConvergenceError as exc:
        state = exc.state
        snapshot_path = os.path.join(out_dir, LAST_GOOD_SNAPSHOT)
        write_snapshot(snapshot_path, state, config_text, {"ledger": ledger.accumulator_vector()})
        csv.close()
        log.error("%s; last good state saved to %s", exc, snapshot_path)
        return RunResult(
            state=state,
            ledger=ledger,
            csv_path=csv.path,
            snapshot_path=snapshot_path,
            exit_code=EXIT_NO_CONVERGENCE,
            message=str(exc),
        )
    csv.close()

    if cfg.snapshot_final:
        snapshot_path = os.path.join(out_dir, FINAL_SNAPSHOT)
        write_snapshot(snapshot_path, state, config_text, {"ledger": ledger.accumulator_vector()})
    return RunResult(
        state=state,
        ledger=ledger,
        csv_path=csv.path,
        snapshot_path=snapshot_path,
        exit_code=EXIT_OK,
    )


def run(cfg: RunConfig, output_dir: str | None = None) -> RunResult:
    out_dir = output_dir if output_dir is not None else cfg.directory
    os.makedirs(out_dir, exist_ok=True)
    config_text = render_config(cfg)

    state, report = make_initial_data(cfg)
    ledger = EnergyLedger.start(state)
    if report.measured_mass > 0.0:
        log.info(
            "starting run: t_end %.6g, window %.6g, initial mass %.6e, linf %.6e",
            cfg.t_end,
            cfg.window,
            report.measured_mass,
            report.linf,
        )
    csv = _CsvWriter(os.path.join(out_dir, CSV_NAME))
    csv.write(ledger.rows[0])
    return _march(state, cfg.t_end, cfg, config_text, ledger, out_dir, csv)


def resume(snapshot_path: str, until: float, output_dir: str | None = None) -> RunResult:
    snap: Snapshot = read_snapshot(snapshot_path)
    if "ledger" not in snap.arrays:
        raise ValueError(
            f"snapshot {snapshot_path} carries no ledger accumulators; cannot resume"
        )
    if until <= snap.state.t:
        raise ValueError(
            f"resume target {until} is not beyond the snapshot time {snap.state.t}"
        )
    cfg = dataclasses.replace(snap.config, t_end=until)
    out_dir = output_dir if output_dir is not None else cfg.directory
    os.makedirs(out_dir, exist_ok=True)
    config_text = render_config(cfg)

    ledger = EnergyLedger.from_accumulators(snap.arrays["ledger"])
    log.info("resuming from %s at t = %.6g until %.6g", snapshot_path, snap.state.t, until)
    csv = _CsvWriter(os.path.join(out_dir, CSV_NAME))
    return _march(snap.state, until, cfg, config_text, ledger, out_dir, csv)
