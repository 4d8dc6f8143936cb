"""Least-squares identification of the physical model coefficients.

Both channels are linear in their coefficients, so identification is a
regularised linear regression of finite-difference accelerations on the
monomials of the sway/yaw polynomials (and of the resistance polynomial for
surge).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .model import (
    SURGE_TERMS,
    SWAY_TERMS,
    YAW_TERMS,
    ControlInput,
    NondimScheme,
    SurgeCoeffs,
    SwayYawCoeffs,
    VesselParams,
    jet_thrust,
)
from .trials import TrialLog, moving_average


class IdentificationError(ValueError):
    """Raised when the data cannot determine the requested coefficients."""


@dataclass(frozen=True)
class RidgeConfig:
    lam: float = 1e-4
    standardize: bool = True
    smooth: int = 0  # moving-average window on velocities before differencing; 0 disables

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"ridge lambda must be >= 0, got {self.lam}")
        if self.smooth < 0:
            raise ValueError(f"smoothing window must be >= 0, got {self.smooth}")


@dataclass(frozen=True)
class RegressionProblem:
    design: np.ndarray
    targets: np.ndarray
    term_names: tuple

    def __post_init__(self):
        if self.design.ndim != 2 or self.design.shape[0] != self.targets.shape[0]:
            raise ValueError(
                f"design {self.design.shape} and targets {self.targets.shape} disagree on the number of rows"
            )
        if self.design.shape[1] != len(self.term_names):
            raise ValueError(f"{self.design.shape[1]} columns but {len(self.term_names)} term names")

    def __add__(self, other: "RegressionProblem") -> "RegressionProblem":
        if self.term_names != other.term_names:
            raise ValueError("cannot stack problems with different terms")
        return RegressionProblem(
            np.vstack([self.design, other.design]), np.concatenate([self.targets, other.targets]), self.term_names
        )


def differentiate_log(log: TrialLog, smooth: int = 0) -> np.ndarray:
    """SI accelerations (du, dv, dr) with the same length as the log.

    Fourth-order central differences where five samples are available,
    second-order central differences next to the ends and second-order
    one-sided differences at the two end samples.
    """
    if len(log) < 3:
        raise IdentificationError(f"need at least 3 samples to differentiate, got {len(log)}")
    states = moving_average(log.states, smooth)
    acc = np.gradient(states, log.dt, axis=0, edge_order=2)
    if len(states) >= 5:
        acc[2:-2] = (8.0 * (states[3:-1] - states[1:-3]) - (states[4:] - states[:-4])) / (12.0 * log.dt)
    return acc


def sway_design(u, v, r, delta) -> np.ndarray:
    u, v, r, delta = (np.asarray(a, dtype=float) for a in (u, v, r, delta))
    return np.column_stack([v, r, delta, r**3, v * r * delta, u * r, np.ones_like(u)])


def yaw_design(u, v, r, delta) -> np.ndarray:
    u, v, r, delta = (np.asarray(a, dtype=float) for a in (u, v, r, delta))
    return np.column_stack(
        [r, delta, r**3, v * r * delta, u * r, r * delta**2, v * r**2, np.ones_like(u)]
    )


def _prime_series(log: TrialLog, scheme: NondimScheme, smooth: int):
    states = moving_average(log.states, smooth)
    acc = differentiate_log(log, smooth)
    lin = scheme.U_ref**2 / scheme.L
    up = states[:, 0] / scheme.U_ref
    vp = states[:, 1] / scheme.U_ref
    rp = states[:, 2] * scheme.L / scheme.U_ref
    accp = np.column_stack([acc[:, 0] / lin, acc[:, 1] / lin, acc[:, 2] * scheme.L / lin])
    return up, vp, rp, accp


def usable_rows(log: TrialLog) -> np.ndarray:
    """Samples whose control is constant across their five-point differencing stencil."""
    if len(log) == 0:
        raise IdentificationError("empty trial log")
    ctrl = log.controls
    n = len(log)
    mask = np.zeros(n, dtype=bool)
    if n >= 5:
        centre = ctrl[2:-2]
        mask[2:-2] = np.all(
            [np.all(ctrl[2 + k : n - 2 + k] == centre, axis=1) for k in (-2, -1, 1, 2)], axis=0
        )
    return mask


def _build(log: TrialLog, scheme: NondimScheme, smooth: int, channel: int):
    if len(log) < 3:
        raise IdentificationError(f"trial log too short for regression ({len(log)} samples)")
    up, vp, rp, accp = _prime_series(log, scheme, smooth)
    delta = log.controls[:, 0]
    mask = usable_rows(log)
    design_fn, names = (sway_design, SWAY_TERMS) if channel == 1 else (yaw_design, YAW_TERMS)
    X = design_fn(up[mask], vp[mask], rp[mask], delta[mask])
    return RegressionProblem(X, accp[mask, channel], names)


def build_sway_regressors(log: TrialLog, scheme: NondimScheme = NondimScheme(), smooth: int = 0) -> RegressionProblem:
    return _build(log, scheme, smooth, 1)


def build_yaw_regressors(log: TrialLog, scheme: NondimScheme = NondimScheme(), smooth: int = 0) -> RegressionProblem:
    return _build(log, scheme, smooth, 2)


def _collinear_columns(X: np.ndarray, names: Sequence[str]) -> list[str]:
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag[0] * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    return [names[i] for i in piv[rank:]]


def fit_ridge(problem: RegressionProblem, cfg: RidgeConfig = RidgeConfig()) -> np.ndarray:
    """Minimise ``||X c - y||^2 + lam ||c||^2`` through a Cholesky solve of the normal equations.

    With ``cfg.standardize`` the penalty acts on coefficients of unit-variance
    columns; the returned vector is always in the original column units.
    """
    X = np.asarray(problem.design, dtype=float)
    y = np.asarray(problem.targets, dtype=float)
    if X.shape[0] == 0:
        raise IdentificationError("regression problem has no rows")
    names = problem.term_names
    std = X.std(axis=0)
    is_const = np.ptp(X, axis=0) == 0
    for j, name in enumerate(names):
        if is_const[j]:
            if not name.endswith("_0"):
                raise IdentificationError(f"insufficient excitation: column {name!r} is constant")
        elif std[j] <= 1e-6:
            raise IdentificationError(f"insufficient excitation: column {name!r} has std {std[j]:.3g}")

    scale = np.ones(X.shape[1])
    if cfg.standardize:
        scale = np.where(is_const, np.abs(X[0]) if len(X) else 1.0, std)
        scale[scale == 0] = 1.0
    Xs = X / scale
    if cfg.lam == 0:
        dependent = _collinear_columns(Xs, names)
        if dependent:
            raise IdentificationError(f"design is rank deficient; collinear columns: {dependent}")
    A = Xs.T @ Xs + cfg.lam * np.eye(X.shape[1])
    b = Xs.T @ y
    try:
        factor = scipy.linalg.cho_factor(A)
    except np.linalg.LinAlgError as exc:
        raise IdentificationError(
            f"normal equations not positive definite; collinear columns: {_collinear_columns(Xs, names)}"
        ) from exc
    return scipy.linalg.cho_solve(factor, b) / scale


def _as_list(logs) -> list[TrialLog]:
    return [logs] if isinstance(logs, TrialLog) else list(logs)


def identify_sway_yaw(
    logs: TrialLog | Iterable[TrialLog],
    cfg: RidgeConfig = RidgeConfig(),
    scheme: NondimScheme = NondimScheme(),
) -> SwayYawCoeffs:
    """Fit the sway and yaw channels separately; they share no coefficients."""
    logs = _as_list(logs)
    sway = build_sway_regressors(logs[0], scheme, cfg.smooth)
    yaw = build_yaw_regressors(logs[0], scheme, cfg.smooth)
    for log in logs[1:]:
        sway = sway + build_sway_regressors(log, scheme, cfg.smooth)
        yaw = yaw + build_yaw_regressors(log, scheme, cfg.smooth)
    return SwayYawCoeffs.from_arrays(fit_ridge(sway, cfg), fit_ridge(yaw, cfg))


def straight_line_rows(log: TrialLog, scheme: NondimScheme, r_tol: float = 0.02) -> np.ndarray:
    """Usable samples with zero steering and small prime yaw rate."""
    rp = log.states[:, 2] * scheme.L / scheme.U_ref
    return usable_rows(log) & (log.controls[:, 0] == 0.0) & (np.abs(rp) < r_tol)


def build_surge_regressors(
    logs: TrialLog | Iterable[TrialLog], params: VesselParams, cfg: RidgeConfig = RidgeConfig(), r_tol: float = 0.02
) -> RegressionProblem:
    scheme = params.nondim
    rows, targets = [], []
    for log in _as_list(logs):
        if len(log) < 3:
            raise IdentificationError(f"trial log too short for regression ({len(log)} samples)")
        up, vp, rp, accp = _prime_series(log, scheme, cfg.smooth)
        mask = straight_line_rows(log, scheme, r_tol)
        ctrl = log.controls[mask]
        thrust = np.array([jet_thrust(ControlInput(d, n), params.jet, scheme.rho) for d, n in ctrl])
        m = params.mass_prime
        y = accp[mask, 0] * params.surge_denominator - thrust / scheme.force_scale - m * vp[mask] * rp[mask]
        u = up[mask]
        rows.append(np.column_stack([u, u**2, u**3]))
        targets.append(y)
    design = np.vstack(rows) if rows else np.empty((0, 3))
    return RegressionProblem(design, np.concatenate(targets) if targets else np.empty(0), SURGE_TERMS)


def identify_surge(
    straight_line_logs: TrialLog | Iterable[TrialLog],
    params: VesselParams,
    cfg: RidgeConfig = RidgeConfig(),
    min_range: float = 0.2,
    r_tol: float = 0.02,
) -> SurgeCoeffs:
    """Resistance polynomial from straight runs; added mass and jet constants come from ``params``."""
    problem = build_surge_regressors(straight_line_logs, params, cfg, r_tol)
    u = problem.design[:, 0] if len(problem.design) else np.zeros(0)
    span = float(np.ptp(u)) if u.size else 0.0
    if span < min_range:
        raise IdentificationError(
            f"insufficient excitation: straight-line surge speed spans {span:.3g} (prime), need {min_range}"
        )
    x_u, x_uu, x_uuu = fit_ridge(problem, cfg)
    return SurgeCoeffs(x_udot=params.surge.x_udot, x_u=float(x_u), x_uu=float(x_uu), x_uuu=float(x_uuu))


class SwayYawIdentifier(BaseEstimator, RegressorMixin):
    """Ridge identification of the lumped sway/yaw polynomials.

    ``X`` columns are prime ``u, v, r`` and steering ``delta`` (rad); ``y``
    columns are the prime sway and yaw accelerations.
    """

    def __init__(self, lam=1e-4, standardize=True):
        self.lam = lam
        self.standardize = standardize

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        if X.shape[1] != 4 or y.ndim != 2 or y.shape[1] != 2:
            raise ValueError(f"expected X with 4 columns and y with 2, got {X.shape} and {y.shape}")
        cfg = RidgeConfig(lam=self.lam, standardize=self.standardize)
        cols = X.T
        sway = fit_ridge(RegressionProblem(sway_design(*cols), y[:, 0], SWAY_TERMS), cfg)
        yaw = fit_ridge(RegressionProblem(yaw_design(*cols), y[:, 1], YAW_TERMS), cfg)
        self.coef_ = SwayYawCoeffs.from_arrays(sway, yaw)
        self.n_features_in_ = 4
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        cols = X.T
        return np.column_stack([sway_design(*cols) @ self.coef_.sway, yaw_design(*cols) @ self.coef_.yaw])
