"""Shutter-release experiments and parameter sweeps."""
from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io, observables
from .config import ExperimentConfig, dump_config
from .dynamics import EvolutionPlan, NumericalError, evolve
from .grid import sample_potential
from .groundstate import GroundStateResult, normalized_gradient_flow

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """Failure in one stage of a run; `exit_code` follows the CLI convention."""

    def __init__(self, stage: str, message: str, exit_code: int = 2):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code


@dataclass
class RunResult:
    config: ExperimentConfig
    ground: GroundStateResult
    record: observables.TrajectoryRecord
    plateaux: observables.PlateauReport
    j0: float
    out_dir: Path | None = None

    @property
    def N_final(self) -> float:
        return self.record.N[-1]


def _plateau_kwargs(config: ExperimentConfig) -> dict:
    kwargs = {}
    if config.plateau_window > 0:
        kwargs["window"] = config.plateau_window
    if config.plateau_threshold > 0:
        kwargs["threshold"] = config.plateau_threshold
    return kwargs


def ground_state(config: ExperimentConfig) -> GroundStateResult:
    grid = config.grid()
    potential = sample_potential(config.potential_spec(shutter_closed=True), grid)
    return normalized_gradient_flow(potential, config.beta, config.imag_dt, config.imag_tol, config.imag_max_iter)


def _write_status(out_dir: Path, status: str, stage: str = "", message: str = ""):
    (out_dir / "status.json").write_text(json.dumps({"status": status, "stage": stage, "message": message}))


def run_single(config: ExperimentConfig, out_dir=None) -> RunResult:
    """Ground state with the shutter closed, release, evolve, analyse.

    With `out_dir` the run writes config.txt, trajectory.csv, plateaux.csv,
    summary.json, status.json and snapshots/; a failed run leaves
    status.json marked incomplete with the failing stage.
    """
    config.validate()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "config.txt").write_text(dump_config(config))
            _write_status(out, "incomplete", "setup")
        except OSError as exc:
            raise StageError("setup", f"cannot prepare output directory: {exc}", 3) from exc

    stage = "ground"
    try:
        try:
            ground = ground_state(config)
        except (NumericalError, ValueError) as exc:
            raise StageError(stage, str(exc)) from exc
        if out is not None and config.write_snapshots:
            try:
                io.write_snapshot(out / "snapshots" / "ground.bin", ground.wavefunction, config.beta)
            except OSError as exc:
                raise StageError(stage, f"writing ground state: {exc}", 3) from exc

        stage = "evolve"
        potential = sample_potential(config.potential_spec(shutter_closed=False), ground.wavefunction.grid)
        plan = EvolutionPlan(config.dt, config.t_end, config.snapshot_times, config.observer_stride)
        snap_dir = out / "snapshots" if (out is not None and config.write_snapshots) else None
        try:
            record = evolve(ground.wavefunction, potential, config.beta, plan,
                            probes=config.probes, snapshot_dir=snap_dir)
        except NumericalError as exc:
            raise StageError(stage, str(exc)) from exc
        except OSError as exc:
            raise StageError(stage, str(exc), 3) from exc

        stage = "analyse"
        if len(record) >= 4:
            j0, report = observables.stationary_current(record, **_plateau_kwargs(config))
        else:
            j0, report = float("nan"), observables.PlateauReport()
        result = RunResult(config, ground, record, report, j0, out)

        if out is not None:
            stage = "write"
            try:
                io.write_trajectory(out / "trajectory.csv", record)
                io.write_plateaux(out / "plateaux.csv", report)
                summary = {
                    "mu": ground.mu, "energy": ground.energy, "ground_iterations": ground.iterations,
                    "j0": j0, "N_final": result.N_final,
                    "plateaux": [list(iv) for iv in report.intervals],
                    "snapshots": [{"requested": e.requested_time, "time": e.time, "path": e.path}
                                  for e in record.snapshots],
                }
                (out / "summary.json").write_text(json.dumps(summary, indent=2))
                _write_status(out, "complete")
            except OSError as exc:
                raise StageError(stage, str(exc), 3) from exc
        return result
    except StageError as exc:
        if out is not None:
            try:
                _write_status(out, "incomplete", exc.stage, str(exc))
            except OSError:
                pass
        raise


@dataclass
class SweepRow:
    axis: str
    value: float
    j0: float = float("nan")
    t0: float = float("nan")
    plateau: tuple = (float("nan"), float("nan"))
    N_final: float = float("nan")
    intervals: list = field(default_factory=list)
    error: str = ""
    trajectory: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    def as_csv(self):
        return [self.axis, self.value, self.j0, self.t0, self.plateau[0], self.plateau[1], self.N_final]


@dataclass
class SweepResult:
    axis: str
    rows: list

    @property
    def values(self):
        return np.array([r.value for r in self.rows])

    @property
    def j0(self):
        return np.array([r.j0 for r in self.rows])


def _sweep_point(args) -> SweepRow:
    config, axis, value, out_dir = args
    row = SweepRow(axis, float(value))
    point_dir = None
    if out_dir is not None:
        point_dir = Path(out_dir) / f"{axis}_{value:.6g}"
        row.trajectory = str(point_dir / "trajectory.csv")
    try:
        result = run_single(config.with_value(axis, value), point_dir)
    except Exception as exc:  # noqa: BLE001 - failures are recorded per row
        log.error("sweep point %s=%g failed: %s", axis, value, exc)
        row.error = str(exc)
        return row
    row.j0 = result.j0
    row.N_final = result.N_final
    row.intervals = list(result.plateaux.intervals)
    if result.plateaux.intervals:
        k = int(np.argmax(result.plateaux.durations))
        row.plateau = result.plateaux.intervals[k]
        row.t0 = result.plateaux.t0[k]
    return row


def run_sweep(config: ExperimentConfig, out_dir=None, workers: int | None = None) -> SweepResult:
    """One independent run per sweep value; rows keep the order of sweep.values."""
    config.validate()
    if not config.sweep_axis:
        raise ValueError("config has no sweep axis")
    axis = config.sweep_axis
    if workers is None:
        workers = config.workers or os.cpu_count() or 1
    jobs = [(config, axis, value, out_dir) for value in config.sweep_values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]
    result = SweepResult(axis, rows)
    if out_dir is not None:
        out = Path(out_dir)
        io.write_table(out / "sweep.csv", io.SWEEP_COLUMNS, (r.as_csv() for r in rows))
        failed = [r for r in rows if not r.ok]
        if failed:
            io.write_table(out / "sweep_failures.csv", ["axis", "value", "error"],
                           ((r.axis, r.value, r.error) for r in failed))
    return result
