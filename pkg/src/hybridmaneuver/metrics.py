"""Velocity RMSE and turning-circle geometry."""
from __future__ import annotations

import math

import numpy as np

from .rollout import Trajectory


def rmse(predicted: Trajectory, truth: Trajectory) -> tuple[float, float, float]:
    """Per-channel RMSE of (u, v, r) over all samples."""
    a = np.asarray(predicted.states if isinstance(predicted, Trajectory) else predicted, dtype=float)
    b = np.asarray(truth.states if isinstance(truth, Trajectory) else truth, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"trajectory length mismatch: {a.shape} vs {b.shape}")
    err = np.sqrt(np.mean((a - b) ** 2, axis=0))
    return tuple(float(e) for e in err)


def fit_circle(x, y) -> tuple[float, float, float]:
    """Kasa algebraic least-squares circle fit, returns (xc, yc, R).

    Coordinates are centred before solving to keep the normal equations well
    conditioned far from the origin.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError("need at least 3 points to fit a circle")
    x0, y0 = x.mean(), y.mean()
    xs, ys = x - x0, y - y0
    A = np.column_stack([2 * xs, 2 * ys, np.ones_like(xs)])
    b = xs**2 + ys**2
    (xc, yc, c), *_ = np.linalg.lstsq(A, b, rcond=None)
    return float(xc + x0), float(yc + y0), float(math.sqrt(c + xc**2 + yc**2))


def _heading_change(traj: Trajectory) -> np.ndarray:
    psi = np.asarray(traj.psi if isinstance(traj, Trajectory) else traj, dtype=float)
    return np.abs(psi - psi[0])


def turning_diameter(traj: Trajectory, skip: float = 2 * math.pi, min_total: float = 3 * math.pi) -> float:
    """Diameter of the steady turn, fitted to samples past the first revolution.

    Raises ValueError("no steady turn ...") when the heading never changes by
    ``min_total`` radians (540 degrees by default).
    """
    change = _heading_change(traj)
    total = float(change.max()) if change.size else 0.0
    if total < min_total:
        raise ValueError(
            f"no steady turn: heading changes by {math.degrees(total):.1f} deg, "
            f"need {math.degrees(min_total):.0f}"
        )
    mask = change >= skip
    _, _, radius = fit_circle(traj.x[mask], traj.y[mask])
    return 2.0 * radius


def revolution_diameters(traj: Trajectory) -> list[float]:
    """Circle-fit diameter of each complete revolution, in order."""
    change = _heading_change(traj)
    n_rev = int(change.max() // (2 * math.pi))
    out = []
    for k in range(n_rev):
        mask = (change >= 2 * math.pi * k) & (change <= 2 * math.pi * (k + 1))
        out.append(2.0 * fit_circle(traj.x[mask], traj.y[mask])[2])
    return out
