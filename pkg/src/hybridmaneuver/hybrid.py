"""Residual hybrid model: physical one-step prediction plus a learned correction.

The network sees the physical model's next-step velocities, the steering
angle and ``cos/sin`` of the heading, and its output is added to the
physical prediction, so an all-zero network reproduces the physical model
exactly. A pure data-driven baseline with the same network maps measured
state directly to accelerations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .model import ControlInput, MotionState, VesselParams, from_prime, physical_step, to_prime
from .network import N_FEATURES, Adam, FfnWeights, ffn_forward, mse_loss_and_grad
from .trials import TrialLog, moving_average

# estimator input columns: prime u, v, r, heading (rad), steering (rad), impeller speed (rpm)
INPUT_COLUMNS = ("u", "v", "r", "psi", "delta", "n")


def trig_features(psi: float) -> tuple[float, float]:
    return math.cos(psi), math.sin(psi)


class FeatureVector(NamedTuple):
    u_phy: float
    v_phy: float
    r_phy: float
    delta: float
    cos_psi: float
    sin_psi: float


class TrainingSample(NamedTuple):
    feature: FeatureVector
    target: tuple  # measured next-step (u, v, r), prime units


@dataclass
class FeatureScaler:
    """Affine input standardisation and per-channel output scale.

    Outputs are only scaled, never shifted, so a zero network output stays
    exactly zero after de-standardisation.
    """

    x_mean: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    x_std: np.ndarray = field(default_factory=lambda: np.ones(N_FEATURES))
    y_scale: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        self.x_mean = np.asarray(self.x_mean, dtype=float)
        self.x_std = np.asarray(self.x_std, dtype=float)
        self.y_scale = np.asarray(self.y_scale, dtype=float)
        if np.any(self.x_std <= 0) or np.any(self.y_scale <= 0):
            raise ValueError("scaler standard deviations must be positive")

    @classmethod
    def fit(cls, features: np.ndarray, targets: np.ndarray) -> "FeatureScaler":
        x_std = features.std(axis=0)
        y_scale = targets.std(axis=0)
        x_std[x_std == 0] = 1.0
        y_scale[y_scale == 0] = 1.0
        return cls(features.mean(axis=0), x_std, y_scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.x_mean) / self.x_std

    def fold(self, weights: FfnWeights) -> FfnWeights:
        """Network on raw features with de-standardised output, equal to scaling around ``weights`` up to rounding.

        A zero output layer stays exactly zero.
        """
        w1 = weights.w1 / self.x_std[:, None]
        b1 = weights.b1 - (self.x_mean / self.x_std) @ weights.w1
        return FfnWeights(w1, b1, weights.w2, weights.b2, weights.w3 * self.y_scale, weights.b3 * self.y_scale)

    def to_dict(self) -> dict:
        return {"x_mean": self.x_mean.tolist(), "x_std": self.x_std.tolist(), "y_scale": self.y_scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(d["x_mean"], d["x_std"], d["y_scale"])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    iterations: int = 800
    batch_size: int = 64
    lam: float = 0.01
    seed: int = 0
    hidden: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    standardize: bool = True
    unit: str = "steps"  # "steps": one Adam update per iteration; "epochs": full passes
    # centred moving-average window applied to logged velocities before pairing; 0 or 1 disables
    smooth: int = 9

    def __post_init__(self):
        for name in ("learning_rate", "iterations", "batch_size", "hidden", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"TrainConfig.{name} must be positive, got {getattr(self, name)}")
        if self.lam < 0:
            raise ValueError(f"TrainConfig.lam must be >= 0, got {self.lam}")
        if self.smooth < 0:
            raise ValueError(f"TrainConfig.smooth must be >= 0, got {self.smooth}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.unit not in ("steps", "epochs"):
            raise ValueError(f"unit must be 'steps' or 'epochs', got {self.unit!r}")


def physical_features(params: VesselParams, states: np.ndarray, psi, controls: np.ndarray, dt: float, solver="euler"):
    """Physical next-step predictions and raw network inputs for prime ``states``.

    Returns ``(phys, features)`` with shapes (N, 3) and (N, 6).
    """
    states = np.atleast_2d(states)
    controls = np.atleast_2d(controls)
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    phys = np.array(
        [
            physical_step(MotionState(*s), ControlInput(*c), params, dt, solver)
            for s, c in zip(states, controls)
        ]
    ).reshape(-1, 3)
    features = np.column_stack([phys, controls[:, 0], np.cos(psi), np.sin(psi)])
    return phys, features


def hybrid_predict(
    params: VesselParams,
    weights: FfnWeights,
    state: MotionState,
    psi: float,
    control: ControlInput,
    dt: float,
    scaler: FeatureScaler | None = None,
    solver: str = "euler",
) -> MotionState:
    """Next-step prime velocities: physical one-step prediction plus network residual."""
    scaler = scaler or FeatureScaler()
    phy = physical_step(state, control, params, dt, solver)
    c, s = trig_features(psi)
    x = np.array([phy.u, phy.v, phy.r, control[0], c, s])
    residual = ffn_forward(weights, scaler.transform(x)) * scaler.y_scale
    return MotionState(phy.u + residual[0], phy.v + residual[1], phy.r + residual[2])


def _batch_arrays(batch: Sequence[TrainingSample]):
    if len(batch) == 0:
        raise ValueError("empty batch")
    feats = np.array([tuple(b.feature) for b in batch], dtype=float)
    targets = np.array([tuple(b.target) for b in batch], dtype=float)
    return feats, targets


def _scaled_residual_targets(features, targets, scaler):
    return (targets - features[:, :3]) / scaler.y_scale


def loss(weights: FfnWeights, batch: Sequence[TrainingSample], lam: float, scaler: FeatureScaler | None = None) -> float:
    """Mean squared (scaled) next-step error plus ``lam/2`` times the squared weight-matrix norms."""
    scaler = scaler or FeatureScaler()
    feats, targets = _batch_arrays(batch)
    value, _ = mse_loss_and_grad(weights, scaler.transform(feats), _scaled_residual_targets(feats, targets, scaler), lam)
    return value


def loss_gradient(
    weights: FfnWeights, batch: Sequence[TrainingSample], lam: float, scaler: FeatureScaler | None = None
) -> FfnWeights:
    scaler = scaler or FeatureScaler()
    feats, targets = _batch_arrays(batch)
    _, grads = mse_loss_and_grad(weights, scaler.transform(feats), _scaled_residual_targets(feats, targets, scaler), lam)
    return grads


def fit_network(x: np.ndarray, target: np.ndarray, cfg: TrainConfig, init: FfnWeights | None = None):
    """Adam on ``mean ||f(x) - target||^2 + lam/2 ||W||^2`` with seeded shuffled mini-batches.

    Inputs and targets must already be scaled. Returns ``(weights, trace)``;
    ``trace[k]`` is the full-data loss after ``k`` updates.
    """
    n = len(x)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    weights = init.copy() if init is not None else FfnWeights.init(cfg.hidden, rng)
    opt = Adam(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    batch = min(cfg.batch_size, n)
    steps = cfg.iterations if cfg.unit == "steps" else cfg.iterations * int(math.ceil(n / batch))

    trace = [mse_loss_and_grad(weights, x, target, cfg.lam)[0]]
    order = rng.permutation(n)
    pos = 0
    for k in range(steps):
        if pos + batch > n:
            order = rng.permutation(n)
            pos = 0
        idx = order[pos : pos + batch]
        pos += batch
        batch_loss, grads = mse_loss_and_grad(weights, x[idx], target[idx], cfg.lam)
        if not math.isfinite(batch_loss):
            raise FloatingPointError(f"non-finite training loss at step {k} (batch loss {batch_loss})")
        opt.step(weights, grads)
        trace.append(mse_loss_and_grad(weights, x, target, cfg.lam)[0])
    return weights, np.asarray(trace)


def train(dataset: Sequence[TrainingSample], cfg: TrainConfig = TrainConfig()):
    """Fit the residual network on teacher-forced one-step samples.

    Returns ``(weights, scaler, trace)``.
    """
    feats, targets = _batch_arrays(dataset)
    residual = targets - feats[:, :3]
    scaler = FeatureScaler.fit(feats, residual) if cfg.standardize else FeatureScaler()
    weights, trace = fit_network(scaler.transform(feats), residual / scaler.y_scale, cfg)
    return weights, scaler, trace


def pure_datadriven_forward(
    weights: FfnWeights, state: MotionState, psi: float, control: ControlInput, scaler: FeatureScaler | None = None
) -> tuple[float, float, float]:
    """Prime accelerations predicted directly from measured state, steering and heading."""
    scaler = scaler or FeatureScaler()
    c, s = trig_features(psi)
    x = np.array([state[0], state[1], state[2], control[0], c, s])
    a = ffn_forward(weights, scaler.transform(x)) * scaler.y_scale
    return float(a[0]), float(a[1]), float(a[2])


def one_step_pairs(logs: TrialLog | Sequence[TrialLog], params: VesselParams, smooth: int = 0):
    """Consecutive-sample pairs from logs: inputs ``(N, 6)`` as INPUT_COLUMNS and prime next states ``(N, 3)``.

    ``smooth`` applies a centred moving average to the logged velocities first.
    Measurement noise on the teacher-forced inputs otherwise biases the fitted
    correction towards the training mean, which compounds over long rollouts.
    """
    if isinstance(logs, TrialLog):
        logs = [logs]
    scheme = params.nondim
    xs, ys = [], []
    for log in logs:
        s = moving_average(log.states, smooth)
        prime = np.column_stack([s[:, 0] / scheme.U_ref, s[:, 1] / scheme.U_ref, s[:, 2] * scheme.L / scheme.U_ref])
        x = np.column_stack([prime[:-1], log.poses[:-1, 2], log.controls[:-1]])
        xs.append(x)
        ys.append(prime[1:])
    return np.vstack(xs), np.vstack(ys)


class _NetworkRegressor(BaseEstimator, RegressorMixin):
    def __init__(
        self,
        vessel=None,
        hidden=10,
        learning_rate=1e-3,
        n_iter=800,
        batch_size=64,
        lam=0.01,
        dt=0.1,
        solver="euler",
        standardize=True,
        random_state=0,
    ):
        self.vessel = vessel
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.n_iter = n_iter
        self.batch_size = batch_size
        self.lam = lam
        self.dt = dt
        self.solver = solver
        self.standardize = standardize
        self.random_state = random_state

    @property
    def params(self) -> VesselParams:
        return self.vessel if self.vessel is not None else VesselParams()

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            iterations=self.n_iter,
            batch_size=self.batch_size,
            lam=self.lam,
            seed=self.random_state,
            hidden=self.hidden,
            standardize=self.standardize,
        )

    def _check_input(self, X, y=None):
        if y is None:
            X = check_array(X)
        else:
            X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
            y = np.atleast_2d(y)
            if y.shape[1] != 3:
                raise ValueError(f"y must have 3 columns (u, v, r), got {y.shape[1]}")
        if X.shape[1] != len(INPUT_COLUMNS):
            raise ValueError(f"X must have columns {INPUT_COLUMNS}, got {X.shape[1]} columns")
        if np.any(X[:, 5] < 0):
            raise ValueError("impeller speed column must be non-negative")
        return X, y

    def _fit_scaled(self, feats, targets):
        cfg = self._train_config()
        self.scaler_ = FeatureScaler.fit(feats, targets) if self.standardize else FeatureScaler()
        self.weights_, self.loss_curve_ = fit_network(
            self.scaler_.transform(feats), targets / self.scaler_.y_scale, cfg
        )
        self.n_features_in_ = len(INPUT_COLUMNS)
        return self

    def _inference_weights(self) -> FfnWeights:
        # folded once per (weights, scaler) pair; rollouts call this every step
        key = (id(self.weights_), id(self.scaler_))
        cached = getattr(self, "_folded", None)
        if cached is None or cached[0] != key:
            self._folded = (key, self.scaler_.fold(self.weights_))
        return self._folded[1]

    @classmethod
    def from_weights(cls, vessel: VesselParams, weights: FfnWeights, scaler: FeatureScaler | None = None, **kw):
        est = cls(vessel=vessel, hidden=weights.hidden, **kw)
        est.weights_ = weights
        est.scaler_ = scaler or FeatureScaler()
        est.loss_curve_ = np.empty(0)
        est.n_features_in_ = len(INPUT_COLUMNS)
        return est


class HybridResidualRegressor(_NetworkRegressor):
    """Physical one-step model with a trained residual network on top.

    ``fit(X, y)`` takes measured prime ``u, v, r``, heading, steering and
    impeller speed at step ``k`` (see ``INPUT_COLUMNS``) and the measured
    prime velocities at step ``k + 1``. ``predict`` returns next-step prime
    velocities. ``predict_next`` works in SI units for :func:`rollout`.
    """

    def _features(self, X):
        return physical_features(self.params, X[:, :3], X[:, 3], X[:, 4:6], self.dt, self.solver)

    def fit(self, X, y):
        X, y = self._check_input(X, y)
        phys, feats = self._features(X)
        return self._fit_scaled(feats, y - phys)

    def residual(self, X):
        check_is_fitted(self, "weights_")
        X, _ = self._check_input(X)
        _, feats = self._features(X)
        return ffn_forward(self.weights_, self.scaler_.transform(feats)) * self.scaler_.y_scale

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X, _ = self._check_input(X)
        phys, feats = self._features(X)
        return phys + ffn_forward(self.weights_, self.scaler_.transform(feats)) * self.scaler_.y_scale

    def predict_next(self, state, psi, control, dt):
        params = self.params
        scheme = params.nondim
        phy = physical_step(to_prime(state, scheme), control, params, dt, self.solver)
        x = np.array([phy.u, phy.v, phy.r, control[0], math.cos(psi), math.sin(psi)])
        res = ffn_forward(self._inference_weights(), x).tolist()
        return from_prime(MotionState(phy.u + res[0], phy.v + res[1], phy.r + res[2]), scheme)


class PureDataDrivenRegressor(_NetworkRegressor):
    """Black-box baseline: the same network maps measured state to prime accelerations.

    ``y`` holds prime accelerations (per unit prime time); ``predict_next``
    integrates them with explicit Euler.
    """

    def fit(self, X, y):
        X, y = self._check_input(X, y)
        return self._fit_scaled(self._features(X), y)

    def _features(self, X):
        return np.column_stack([X[:, :3], X[:, 4], np.cos(X[:, 3]), np.sin(X[:, 3])])

    def predict(self, X):
        check_is_fitted(self, "weights_")
        X, _ = self._check_input(X)
        return ffn_forward(self.weights_, self.scaler_.transform(self._features(X))) * self.scaler_.y_scale

    def predict_next(self, state, psi, control, dt):
        scheme = self.params.nondim
        s = to_prime(state, scheme)
        a = ffn_forward(self._inference_weights(), np.array([s.u, s.v, s.r, control[0], math.cos(psi), math.sin(psi)])).tolist()
        h = dt / scheme.time_scale
        return from_prime(MotionState(s.u + h * a[0], s.v + h * a[1], s.r + h * a[2]), scheme)


def acceleration_targets(X: np.ndarray, y_next: np.ndarray, params: VesselParams, dt: float) -> np.ndarray:
    """Forward-difference prime accelerations matching one explicit Euler step of ``dt`` seconds."""
    return (np.asarray(y_next) - np.asarray(X)[:, :3]) / (dt / params.nondim.time_scale)
