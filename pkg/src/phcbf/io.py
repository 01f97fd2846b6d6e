"""Trajectory CSV serialisation.

Fixed column schema (header mandatory):

    t, q_1..q_n, p_1..p_n, u_1..u_m, H, Ke, V, h, psi, active, p_inj, p_diss

States are written in mechanical (q, p) split form, so the state dimension
must be even.  Floats round-trip exactly via repr-precision formatting.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .simulate import Trajectory


def csv_columns(dof: int, m: int) -> list[str]:
    return (["t"]
            + [f"q_{i + 1}" for i in range(dof)]
            + [f"p_{i + 1}" for i in range(dof)]
            + [f"u_{i + 1}" for i in range(m)]
            + ["H", "Ke", "V", "h", "psi", "active", "p_inj", "p_diss"])


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> Path:
    """Write one trajectory to CSV under the fixed schema."""
    if traj.n % 2 != 0:
        raise ValueError(f"state dimension {traj.n} is not an even (q, p) split")
    dof = traj.n // 2
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_columns(dof, traj.m))
        for i in range(len(traj)):
            row = ([f"{traj.t[i]:.17g}"]
                   + [f"{v:.17g}" for v in traj.x[i]]
                   + [f"{v:.17g}" for v in traj.u[i]]
                   + [f"{traj.H[i]:.17g}", f"{traj.Ke[i]:.17g}", f"{traj.V[i]:.17g}",
                      f"{traj.h[i]:.17g}", f"{traj.psi[i]:.17g}",
                      str(int(traj.active[i])),
                      f"{traj.p_inj[i]:.17g}", f"{traj.p_diss[i]:.17g}"])
            writer.writerow(row)
    return path


def read_trajectory_csv(path: str | Path) -> Trajectory:
    """Load a trajectory written by :func:`write_trajectory_csv`."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    dof = sum(1 for c in header if c.startswith("q_"))
    m = sum(1 for c in header if c.startswith("u_"))
    expected = csv_columns(dof, m)
    if header != expected:
        raise ValueError(f"unexpected CSV header in {path}: {header}")
    data = np.array([[float(v) for v in row] for row in rows])
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"malformed CSV body in {path}")
    col = {name: i for i, name in enumerate(header)}
    x = data[:, 1:1 + 2 * dof]
    u = data[:, 1 + 2 * dof:1 + 2 * dof + m]
    return Trajectory(
        t=data[:, col["t"]], x=x, u=u,
        H=data[:, col["H"]], Ke=data[:, col["Ke"]], V=data[:, col["V"]],
        h=data[:, col["h"]], psi=data[:, col["psi"]],
        active=data[:, col["active"]].astype(bool),
        p_inj=data[:, col["p_inj"]], p_diss=data[:, col["p_diss"]],
        meta={"source": str(path)})
