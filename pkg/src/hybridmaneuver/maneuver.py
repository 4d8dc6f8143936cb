"""Maneuver definitions and the steering controllers that realise them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ControlInput

KINDS = ("turning", "zigzag", "random", "straight")


@dataclass(frozen=True)
class ManeuverSpec:
    """A steering program: a straight approach at ``delta=0`` followed by the maneuver.

    ``delta_cmd`` is signed: positive turns to starboard, negative to port.
    """

    kind: str
    n_cmd: float = 5000.0
    duration: float = 300.0
    delta_cmd: float = 0.0
    approach: float = 20.0
    zigzag_delta: float = math.radians(30.0)
    zigzag_switch: float = math.radians(20.0)
    hold: float = 10.0
    amplitude: float = math.radians(30.0)
    seed: int = 0
    # straight runs only: impeller speed during the approach, before stepping to n_cmd
    n_start: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown maneuver kind {self.kind!r}; expected one of {KINDS}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.approach < 0:
            raise ValueError(f"approach must be non-negative, got {self.approach}")
        if self.n_cmd < 0:
            raise ValueError(f"n_cmd must be non-negative, got {self.n_cmd}")
        if self.kind == "random" and not self.hold > 0:
            raise ValueError("random steering needs a positive hold interval")

    def check_limits(self, delta_max: float) -> None:
        limits = {
            "turning": abs(self.delta_cmd),
            "zigzag": abs(self.zigzag_delta),
            "random": abs(self.amplitude),
            "straight": 0.0,
        }
        if limits[self.kind] > delta_max + 1e-12:
            raise ValueError(
                f"{self.kind} maneuver commands {math.degrees(limits[self.kind]):.2f} deg, "
                f"beyond the {math.degrees(delta_max):.2f} deg steering limit"
            )


def zigzag_controller(psi: float, psi_ref: float, current_delta: float, spec: ManeuverSpec) -> ControlInput:
    """Heading-triggered switching between ``+zigzag_delta`` and ``-zigzag_delta``."""
    amp = abs(spec.zigzag_delta)
    dpsi = psi - psi_ref
    delta = current_delta
    if delta >= 0 and dpsi >= spec.zigzag_switch:
        delta = -amp
    elif delta < 0 and dpsi <= -spec.zigzag_switch:
        delta = amp
    elif delta == 0:
        delta = amp
    return ControlInput(delta, spec.n_cmd)


def random_steering_sequence(spec: ManeuverSpec, dt: float, steps: int) -> list[ControlInput]:
    """Piecewise-constant uniform random steering, one segment per ``hold`` seconds."""
    if spec.hold < dt:
        raise ValueError(f"hold interval {spec.hold} shorter than dt {dt}")
    rng = np.random.default_rng(spec.seed)
    n_segments = int(math.ceil(steps * dt / spec.hold)) + 1
    values = rng.uniform(-spec.amplitude, spec.amplitude, size=n_segments)
    seq = []
    for k in range(steps):
        seg = int(math.floor(k * dt / spec.hold + 1e-9))
        seq.append(ControlInput(float(values[seg]), spec.n_cmd))
    return seq


class ManeuverController:
    """Closed-loop steering for one run.

    Called once per control sample with the elapsed time and current heading;
    keeps the zigzag switching state between calls.
    """

    def __init__(self, spec: ManeuverSpec):
        self.spec = spec
        self._delta = 0.0
        self._psi_ref = None
        self._random = None
        if spec.kind == "random":
            rng = np.random.default_rng(spec.seed)
            n_segments = int(math.ceil(spec.duration / spec.hold)) + 1
            self._random = rng.uniform(-spec.amplitude, spec.amplitude, size=n_segments)

    def __call__(self, t: float, psi: float) -> ControlInput:
        spec = self.spec
        if t < spec.approach - 1e-9:
            if spec.kind == "straight" and spec.n_start is not None:
                return ControlInput(0.0, spec.n_start)
            return ControlInput(0.0, spec.n_cmd)
        tm = t - spec.approach
        if spec.kind == "turning":
            return ControlInput(spec.delta_cmd, spec.n_cmd)
        if spec.kind == "straight":
            return ControlInput(0.0, spec.n_cmd)
        if spec.kind == "random":
            seg = min(int(math.floor(tm / spec.hold + 1e-9)), len(self._random) - 1)
            return ControlInput(float(self._random[seg]), spec.n_cmd)
        if self._psi_ref is None:
            self._psi_ref = psi
        control = zigzag_controller(psi, self._psi_ref, self._delta, spec)
        self._delta = control.delta
        return control
