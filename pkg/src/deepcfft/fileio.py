"""CSV/JSON serialization for trajectories, problem instances, and reports.

Trajectories round-trip bit-faithfully through decimal text with 17
significant digits.  Instance documents reference the trajectory CSV by name
and carry every scalar needed to reassemble the problem.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .lti import Setpoint, Trajectory
from .solvers import SolveReport

_FMT = "%.17g"


def save_trajectory_csv(path, traj: Trajectory) -> None:
    """One row per time step; header names the state and input columns."""
    n = traj.states.shape[1]
    m = traj.inputs.shape[1]
    header = [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for k in range(traj.length):
            row = [_FMT % v for v in traj.states[k]] + [_FMT % v for v in traj.inputs[k]]
            writer.writerow(row)


def load_trajectory_csv(path) -> Trajectory:
    """Reads a trajectory written by save_trajectory_csv."""
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        n = sum(1 for name in header if name.startswith("x_"))
        m = len(header) - n
        if n == 0 or m == 0 or header != (
            [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)]
        ):
            raise ValueError(f"{path}: not a trajectory CSV (header {header[:4]}...)")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows)
    return Trajectory(states=data[:, :n], inputs=data[:, n:])


def save_instance_json(
    path,
    *,
    n: int,
    m: int,
    horizon: int,
    signal_length: int,
    seed: int,
    trajectory_csv: str,
    x0,
    setpoint: Setpoint | None = None,
    q_weight=None,
    r_weight=None,
    extra: dict | None = None,
) -> None:
    """Writes the problem-instance document next to its trajectory CSV."""
    doc = {
        "n": n,
        "m": m,
        "horizon": horizon,
        "signal_length": signal_length,
        "seed": seed,
        "trajectory_csv": trajectory_csv,
        "x0": [float(v) for v in np.asarray(x0)],
    }
    if setpoint is not None:
        doc["setpoint"] = {
            "x_s": [float(v) for v in setpoint.x_s],
            "u_s": [float(v) for v in setpoint.u_s],
        }
    if q_weight is not None:
        doc["q_weight"] = [float(v) for v in np.asarray(q_weight).ravel()]
    if r_weight is not None:
        doc["r_weight"] = [float(v) for v in np.asarray(r_weight).ravel()]
    if extra:
        doc.update(extra)
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2)
        handle.write("\n")


def load_instance(path):
    """Loads an instance document plus its trajectory.

    Returns:
        (doc dict, Trajectory, x0, Setpoint or None, q_weight or None,
        r_weight or None); weight matrices are reshaped from row-major lists.
    """
    path = Path(path)
    with open(path) as handle:
        doc = json.load(handle)
    traj = load_trajectory_csv(path.parent / doc["trajectory_csv"])
    x0 = np.array(doc["x0"], dtype=float)
    setpoint = None
    if "setpoint" in doc:
        setpoint = Setpoint(
            x_s=np.array(doc["setpoint"]["x_s"], dtype=float),
            u_s=np.array(doc["setpoint"]["u_s"], dtype=float),
        )
    n, m = doc["n"], doc["m"]
    q_weight = None
    if "q_weight" in doc:
        q_weight = np.array(doc["q_weight"], dtype=float).reshape(n, n)
    r_weight = None
    if "r_weight" in doc:
        r_weight = np.array(doc["r_weight"], dtype=float).reshape(m, m)
    return doc, traj, x0, setpoint, q_weight, r_weight


def save_report_csv(path, report: SolveReport) -> None:
    """One row per recorded iterate: outer_k, inner_j, residual, grad, alpha, time."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            ["outer_k", "inner_j", "residual_norm", "grad_norm", "alpha", "elapsed_s"]
        )
        for rec in report.records:
            writer.writerow(
                [
                    rec.outer,
                    rec.inner,
                    _FMT % rec.residual_norm,
                    _FMT % rec.grad_norm,
                    _FMT % rec.alpha,
                    _FMT % rec.elapsed_s,
                ]
            )


def save_report_json(path, report: SolveReport) -> None:
    """Run summary: totals, status, config echo, final residual."""
    doc = {
        "status": report.status,
        "residual_norm": report.residual_norm,
        "total_inner": report.total_inner,
        "total_outer": report.total_outer,
        "total_matvecs": report.total_matvecs,
        "elapsed_s": report.elapsed_s,
        "config": report.config,
    }
    with open(path, "w") as handle:
        json.dump(doc, handle, indent=2)
        handle.write("\n")


def write_csv(path, header: list, rows: list) -> None:
    """Small helper for study CSVs: formats floats at full precision."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_FMT % v if isinstance(v, float) else v for v in row]
            )
