"""
Trajectory and report files.

Trajectories are written as CSV with the columns of :data:`CSV_COLUMNS`, agent-major
then time-minor, every float printed with ``repr`` so that reading the file back
yields bitwise-equal values. A top-down XY plot is written as SVG.
"""
import csv
from pathlib import Path
from typing import Literal

import matplotlib
import numpy as np
from loguru import logger
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle
from pydantic import BaseModel, ConfigDict

from stlfleet.exceptions import StlFleetBadParamException, StlFleetDimensionMismatchException
from stlfleet.missions import WORKSPACE, Environment
from stlfleet.planner import PlanResult, PlanStatus, SolverDiagnostics, ValidationReport
from stlfleet.trajectory import Trace

CSV_COLUMNS = ("t", "agent", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az")

_REGION_COLORS = {"goal": "tab:green", "obstacle": "tab:red", "pole": "tab:blue"}


class RunReport(BaseModel):
    """Contents of ``report.json``."""

    model_config = ConfigDict(frozen=True)

    mission: str
    status: PlanStatus
    validation: ValidationReport
    diagnostics: SolverDiagnostics | None = None


def write_trajectory_csv(trace: Trace, path: str | Path) -> Path:
    """
    Write a trace as CSV.

    :param trace: The trace.
    :param path: Destination file.
    :return: The path written.
    """
    path = Path(path)
    times = trace.times
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for a, agent in enumerate(trace.agents):
            for i in range(trace.n_samples):
                values = (*trace.positions[i, a], *trace.velocities[i, a], *trace.accelerations[i, a])
                writer.writerow([repr(float(times[i])), agent, *(repr(float(v)) for v in values)])
    logger.debug("wrote {} rows to {}", trace.n_samples * len(trace.agents), path)
    return path


def read_trajectory_csv(path: str | Path, ts: float | None = None) -> Trace:
    """
    Read a trace written by :func:`write_trajectory_csv`.

    :param path: Source file.
    :param ts: Sampling period; inferred from the second time stamp when omitted.
    :return: The trace.
    :raises StlFleetBadParamException: If the header is not :data:`CSV_COLUMNS`.
    :raises StlFleetDimensionMismatchException: If agents have different sample counts or times.
    """
    rows: dict[str, list[list[float]]] = {}
    with Path(path).open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader, ()))
        if header != CSV_COLUMNS:
            raise StlFleetBadParamException(f"unexpected CSV header {header}, expected {CSV_COLUMNS}")
        for row in reader:
            if len(row) != len(CSV_COLUMNS):
                raise StlFleetDimensionMismatchException(f"row {row} has {len(row)} fields")
            rows.setdefault(row[1], []).append([float(row[0]), *map(float, row[2:])])
    if not rows:
        raise StlFleetDimensionMismatchException(f"{path} holds no samples")
    tables = [np.array(table) for table in rows.values()]
    times = tables[0][:, 0]
    if any(table.shape != tables[0].shape or not np.array_equal(table[:, 0], times) for table in tables):
        raise StlFleetDimensionMismatchException("agents have different sample times")
    if ts is None:
        if len(times) < 2:
            raise StlFleetDimensionMismatchException("cannot infer the sampling period from a single sample")
        ts = float(times[1] - times[0])
    data = np.stack(tables, axis=1)
    return Trace(ts, tuple(rows), data[:, :, 1:4], data[:, :, 4:7], data[:, :, 7:10])


def _add_box(ax, name: str, box, color: str, fill: bool = True) -> None:
    ax.add_patch(
        Rectangle(
            (box.lo[0], box.lo[1]),
            box.hi[0] - box.lo[0],
            box.hi[1] - box.lo[1],
            facecolor=color if fill else "none",
            edgecolor=color,
            alpha=0.3 if fill else 1.0,
            gid=f"region-{name}",
        )
    )


def write_svg(trace: Trace, environment: Environment | None, path: str | Path) -> Path:
    """
    Plot the XY projection of every agent path with the mission regions.

    Each agent path is an element with id ``agent-<name>``. The plot limits are the
    workspace footprint, or the trace extent without an environment.

    :param trace: The trace.
    :param environment: Regions to draw.
    :param path: Destination file.
    :return: The path written.
    """
    path = Path(path)
    with matplotlib.rc_context({"svg.hashsalt": "stlfleet", "svg.fonttype": "none"}):
        fig = Figure(figsize=(6, 6))
        ax = fig.add_subplot()
        if environment is not None:
            ws = environment.workspace
            ax.set_xlim(ws.lo[0], ws.hi[0])
            ax.set_ylim(ws.lo[1], ws.hi[1])
            _add_box(ax, WORKSPACE, ws, "black", fill=False)
            for name, box in environment.goals.items():
                _add_box(ax, name, box, _REGION_COLORS["goal"])
            for name, box in environment.obstacles.items():
                _add_box(ax, name, box, _REGION_COLORS["obstacle"])
            for index, box in enumerate(environment.poles, start=1):
                _add_box(ax, f"pole{index}", box, _REGION_COLORS["pole"])
        for a, agent in enumerate(trace.agents):
            ax.plot(trace.positions[:, a, 0], trace.positions[:, a, 1], label=agent, gid=f"agent-{agent}")
        ax.set_aspect("equal")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.legend(loc="upper right")
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("wrote plot to {}", path)
    return path


def write_report(report: RunReport, path: str | Path) -> Path:
    """Write a run report as JSON."""
    path = Path(path)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    logger.debug("wrote report to {}", path)
    return path


def export_trajectories(
    r: PlanResult, fmt: Literal["csv", "svg"], path: str | Path, environment: Environment | None = None
) -> Path:
    """
    Export the trace of a plan.

    :param r: The plan.
    :param fmt: ``csv`` or ``svg``.
    :param path: Destination file.
    :param environment: Regions drawn in the SVG plot.
    :return: The path written.
    :raises StlFleetBadParamException: For an unknown format.
    """
    if fmt == "csv":
        return write_trajectory_csv(r.trace, path)
    if fmt == "svg":
        return write_svg(r.trace, environment, path)
    raise StlFleetBadParamException(f"unknown export format '{fmt}'")
