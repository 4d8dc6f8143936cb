"""Synthetic free-running trials: a disturbed "truth" vessel and its 10 Hz logs.

The truth vessel is the physical model integrated with RK4 on a fine grid,
with three environmental effects layered on top:

* a constant earth-frame current that advects the hull (kinematic drift),
* sinusoidal wave forcing added to the prime sway and yaw accelerations,
* i.i.d. Gaussian noise on the logged velocities.

Logged velocities are ground-referenced, i.e. the body-frame projection of
the current is included, so the drift shows up as heading-periodic
oscillation of the measured u and v.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from .maneuver import ManeuverController, ManeuverSpec
from .model import (
    ControlInput,
    MotionState,
    Pose,
    StateDeriv,
    VesselParams,
    from_prime,
    physical_rhs_prime,
    rk4_step,
    to_prime,
)
from .rollout import Trajectory

COLUMNS = ("t", "x", "y", "psi", "u", "v", "r", "delta", "n")


@dataclass(frozen=True)
class DisturbanceSpec:
    current_speed: float = 0.2
    current_dir: float = math.pi / 4
    wave_amp_v: float = 0.002
    wave_amp_r: float = 0.002
    wave_freq: float = 0.8
    noise_std_u: float = 0.01
    noise_std_v: float = 0.01
    noise_std_r: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.current_speed < 0:
            raise ValueError(f"current_speed must be >= 0, got {self.current_speed}")
        for name in ("noise_std_u", "noise_std_v", "noise_std_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def calm(cls, seed: int = 0) -> "DisturbanceSpec":
        """No current, no waves, no noise."""
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, seed)

    @property
    def current_vector(self) -> tuple[float, float]:
        return (self.current_speed * math.cos(self.current_dir), self.current_speed * math.sin(self.current_dir))


@dataclass
class TrialLog:
    """Uniformly sampled record of ``t, x, y, psi, u, v, r, delta, n`` in SI units."""

    dt: float
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(COLUMNS):
            raise ValueError(f"TrialLog data must have shape (N, {len(COLUMNS)}), got {self.data.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(self.data)):
            bad = int(np.argwhere(~np.isfinite(self.data))[0, 0])
            raise ValueError(f"non-finite value in log row {bad}")
        if len(self.data) > 1:
            steps = np.diff(self.data[:, 0])
            if np.max(np.abs(steps - self.dt)) > 1e-6 * max(1.0, self.dt):
                raise ValueError("log timestamps are not uniformly spaced at dt")

    def __len__(self):
        return len(self.data)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    @property
    def times(self):
        return self.data[:, 0]

    @property
    def states(self) -> np.ndarray:
        return self.data[:, 4:7]

    @property
    def poses(self) -> np.ndarray:
        return self.data[:, 1:4]

    @property
    def controls(self) -> np.ndarray:
        return self.data[:, 7:9]

    def check_steering(self, delta_max: float) -> None:
        worst = float(np.max(np.abs(self.controls[:, 0]))) if len(self) else 0.0
        if worst > delta_max + 1e-12:
            raise ValueError(f"steering {math.degrees(worst):.2f} deg exceeds limit {math.degrees(delta_max):.2f} deg")

    def to_trajectory(self) -> Trajectory:
        return Trajectory(self.times.copy(), self.states.copy(), self.poses.copy(), self.controls.copy())


def moving_average(x: np.ndarray, window: int) -> np.ndarray:
    """Centred moving average along axis 0 over ``2 * (window // 2) + 1`` samples.

    Near the ends the window is truncated to the available samples.
    """
    x = np.asarray(x, dtype=float)
    if window <= 1:
        return x
    half = window // 2
    c = np.concatenate([np.zeros((1,) + x.shape[1:]), np.cumsum(x, axis=0)])
    n = len(x)
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    width = (hi - lo).reshape((n,) + (1,) * (x.ndim - 1))
    return (c[hi] - c[lo]) / width


def wave_forcing(dist: DisturbanceSpec, t: float) -> tuple[float, float]:
    s = math.sin(dist.wave_freq * t)
    return dist.wave_amp_v * s, dist.wave_amp_r * s


def truth_step(
    state: MotionState,
    pose: Pose,
    control: ControlInput,
    params: VesselParams,
    dist: DisturbanceSpec,
    t: float,
    dt: float,
) -> tuple[MotionState, Pose]:
    """One RK4 step of the disturbed vessel; wave forcing is sampled at ``t``."""
    scheme = params.nondim
    wv, wr = wave_forcing(dist, t)

    def rhs(s, c):
        d = physical_rhs_prime(s, c, params)
        return StateDeriv(d.du, d.dv + wv, d.dr + wr)

    nxt = from_prime(rk4_step(rhs, to_prime(state, scheme), control, dt / scheme.time_scale), scheme)
    u, v, r = state
    x, y, psi = pose
    cx, cy = dist.current_vector
    c, s = math.cos(psi), math.sin(psi)
    new_pose = Pose(x + dt * (u * c - v * s + cx), y + dt * (u * s + v * c + cy), psi + dt * r)
    return nxt, new_pose


def measured_velocity(state: MotionState, psi: float, dist: DisturbanceSpec) -> MotionState:
    """Ground-referenced body velocities: hull velocity plus the current seen in the body frame."""
    cx, cy = dist.current_vector
    c, s = math.cos(psi), math.sin(psi)
    return MotionState(state[0] + c * cx + s * cy, state[1] - s * cx + c * cy, state[2])


def generate_trial(
    maneuver: ManeuverSpec,
    params: VesselParams,
    dist: DisturbanceSpec,
    duration: float | None = None,
    seed: int | None = None,
    dt: float = 0.1,
    substeps: int = 10,
    init_state: MotionState = MotionState(0.0, 0.0, 0.0),
    init_pose: Pose = Pose(0.0, 0.0, 0.0),
) -> TrialLog:
    """Simulate the truth vessel under ``maneuver`` and log it every ``dt`` seconds.

    Steering is updated at the logging rate from the true heading and held
    over the ``substeps`` integration steps in between. ``seed`` (default
    ``dist.seed``) drives only the measurement noise.
    """
    if duration is None:
        duration = maneuver.approach + maneuver.duration
    if duration < 10.0:
        raise ValueError(f"trial duration must be at least 10 s, got {duration}")
    maneuver.check_limits(params.delta_max)
    seed = dist.seed if seed is None else seed
    n_samples = int(round(duration / dt)) + 1
    h = dt / substeps

    controller = ManeuverController(maneuver)
    state = MotionState(*map(float, init_state))
    pose = Pose(*map(float, init_pose))
    rows = np.empty((n_samples, len(COLUMNS)))
    for k in range(n_samples):
        t = k * dt
        control = controller(t, pose.psi)
        meas = measured_velocity(state, pose.psi, dist)
        rows[k] = (t, pose.x, pose.y, pose.psi, meas.u, meas.v, meas.r, control.delta, control.n)
        if k == n_samples - 1:
            break
        for j in range(substeps):
            state, pose = truth_step(state, pose, control, params, dist, t + j * h, h)

    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((n_samples, 3)) * (dist.noise_std_u, dist.noise_std_v, dist.noise_std_r)
    rows[:, 4:7] += noise
    meta = {
        "maneuver": asdict(maneuver),
        "disturbance": asdict(dist),
        "noise_seed": int(seed),
        "truth_solver": f"rk4, {substeps} substeps per sample",
        "drift_model": "stationary drift attributed entirely to a constant current",
    }
    return TrialLog(dt, rows, meta)


STANDARD_TRAIN = OrderedDict(
    [
        ("random_steering", dict(kind="random", duration=600.0, hold=10.0)),
        ("turning_25_stbd", dict(kind="turning", delta_deg=25.0, duration=420.0)),
        ("turning_15_port", dict(kind="turning", delta_deg=-15.0, duration=420.0)),
    ]
)
STANDARD_TEST = OrderedDict(
    [
        ("turning_23_stbd", dict(kind="turning", delta_deg=23.0, duration=420.0)),
        ("turning_30_stbd", dict(kind="turning", delta_deg=30.0, duration=420.0)),
        ("turning_20_port", dict(kind="turning", delta_deg=-20.0, duration=420.0)),
        ("zigzag", dict(kind="zigzag", duration=300.0)),
    ]
)


def _derive_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([int(seed), *key]).generate_state(1)[0])


def standard_maneuvers(n_cmd: float = 5000.0, seed: int = 0, approach: float = 20.0) -> "OrderedDict[str, tuple[str, ManeuverSpec]]":
    """Maneuver programs of the standard train/test split, keyed by trial name."""
    out = OrderedDict()
    for split, table in (("train", STANDARD_TRAIN), ("test", STANDARD_TEST)):
        for i, (name, cfg) in enumerate(table.items()):
            cfg = dict(cfg)
            delta = math.radians(cfg.pop("delta_deg", 0.0))
            key = (0 if split == "train" else 1, i)
            spec = ManeuverSpec(
                n_cmd=n_cmd,
                delta_cmd=delta,
                approach=approach,
                seed=_derive_seed(seed, 2, *key),
                **cfg,
            )
            out[name] = (split, spec)
    return out


def standard_dataset(
    params: VesselParams,
    dist: DisturbanceSpec,
    seed: int = 0,
    n_cmd: float = 5000.0,
) -> "OrderedDict[str, tuple[str, TrialLog]]":
    """Three training and four test trials, each with its own noise seed."""
    out = OrderedDict()
    for i, (name, (split, spec)) in enumerate(standard_maneuvers(n_cmd, seed).items()):
        noise_seed = _derive_seed(seed, 1, i)
        log = generate_trial(spec, params, dist, seed=noise_seed)
        log.meta.update(name=name, split=split)
        out[name] = (split, log)
    return out
