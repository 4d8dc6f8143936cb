"""Closed-loop multi-step prediction and planar pose kinematics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .maneuver import ManeuverController, ManeuverSpec
from .model import (
    ControlInput,
    MotionState,
    Pose,
    VesselParams,
    from_prime,
    physical_step,
    to_prime,
)


class StepModel(Protocol):
    """Anything that maps the SI state at ``t`` to the SI state at ``t + dt``."""

    def predict_next(self, state: MotionState, psi: float, control: ControlInput, dt: float) -> MotionState:
        ...


@dataclass(frozen=True)
class PhysicalModel:
    params: VesselParams
    solver: str = "euler"

    def predict_next(self, state, psi, control, dt):
        scheme = self.params.nondim
        nxt = physical_step(to_prime(state, scheme), control, self.params, dt, self.solver)
        return from_prime(nxt, scheme)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (N, 3) u, v, r
    poses: np.ndarray  # (N, 3) x, y, psi
    controls: np.ndarray  # (N, 2) delta, n
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.times)
        for name in ("states", "poses", "controls"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"Trajectory.{name} has {len(getattr(self, name))} rows, expected {n}")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("Trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def u(self):
        return self.states[:, 0]

    @property
    def v(self):
        return self.states[:, 1]

    @property
    def r(self):
        return self.states[:, 2]

    @property
    def x(self):
        return self.poses[:, 0]

    @property
    def y(self):
        return self.poses[:, 1]

    @property
    def psi(self):
        return self.poses[:, 2]


def integrate_pose(state: MotionState, pose: Pose, dt: float) -> Pose:
    u, v, r = state
    x, y, psi = pose
    c, s = math.cos(psi), math.sin(psi)
    return Pose(x + dt * (u * c - v * s), y + dt * (u * s + v * c), psi + dt * r)


def rollout(
    model: StepModel,
    init_state: MotionState,
    init_pose: Pose,
    maneuver: ManeuverSpec | Sequence[ControlInput] | np.ndarray,
    dt: float = 0.1,
    steps: int | None = None,
    velocity_bound: float | None = None,
    t0: float = 0.0,
) -> Trajectory:
    """Iterate ``model`` from an initial condition.

    ``maneuver`` is either a :class:`ManeuverSpec` (steering computed in the
    loop from the model's own heading) or a recorded control sequence that is
    replayed sample by sample. When any velocity component leaves
    ``velocity_bound`` (SI units, applied to u, v and to r scaled by 1 s) or
    becomes non-finite, the run stops early with ``diverged=True``. The bound
    defaults to ten times the model's reference speed.
    """
    if velocity_bound is None:
        params = getattr(model, "params", None)
        velocity_bound = 10.0 * params.nondim.U_ref if params is not None else math.inf
    if isinstance(maneuver, ManeuverSpec):
        controller = ManeuverController(maneuver)
        if steps is None:
            steps = int(round((maneuver.approach + maneuver.duration) / dt))
        replay = None
    else:
        replay = [ControlInput(float(c[0]), float(c[1])) for c in maneuver]
        if steps is None:
            steps = len(replay) - 1
        if len(replay) < steps + 1:
            raise ValueError(f"control sequence has {len(replay)} samples, need {steps + 1}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")

    state = MotionState(*map(float, init_state))
    pose = Pose(*map(float, init_pose))
    times, states, poses, controls = [], [], [], []
    diverged = False
    for k in range(steps + 1):
        t = t0 + k * dt
        control = replay[k] if replay is not None else controller(t - t0, pose.psi)
        # flat float lists: no per-step tuples kept alive for the garbage collector to scan
        times.append(t)
        states.extend(state)
        poses.extend(pose)
        controls.extend(control)
        if k == steps:
            break
        nxt = model.predict_next(state, pose.psi, control, dt)
        # written so that NaN fails the test as well
        if not (abs(nxt[0]) <= velocity_bound and abs(nxt[1]) <= velocity_bound and abs(nxt[2]) <= velocity_bound):
            diverged = True
            break
        pose = integrate_pose(state, pose, dt)
        state = MotionState(*nxt)
    return Trajectory(
        np.asarray(times),
        np.asarray(states, dtype=float).reshape(-1, 3),
        np.asarray(poses, dtype=float).reshape(-1, 3),
        np.asarray(controls, dtype=float).reshape(-1, 2),
        diverged=diverged,
    )
