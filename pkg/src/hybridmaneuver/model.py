"""Simplified 3-DOF maneuvering model of a water-jet surface vehicle.

Surge is a resistance polynomial plus jet thrust; sway and yaw accelerations
are lumped polynomials whose coefficients already contain the inertia terms.
All hydrodynamic coefficients live in the prime system defined by
:class:`NondimScheme`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np


class MotionState(NamedTuple):
    """Body-frame velocities: surge ``u``, sway ``v`` (m/s), yaw rate ``r`` (rad/s)."""

    u: float
    v: float
    r: float


class Pose(NamedTuple):
    """Earth-frame position (north ``x``, east ``y``) and unwrapped heading ``psi``."""

    x: float
    y: float
    psi: float


class ControlInput(NamedTuple):
    delta: float  # steering angle, rad
    n: float  # impeller speed, rpm


class StateDeriv(NamedTuple):
    du: float
    dv: float
    dr: float


@dataclass(frozen=True)
class NondimScheme:
    """SNAME-style prime system with a fixed reference speed."""

    L: float = 7.5
    U_ref: float = 5.0
    rho: float = 1000.0

    def __post_init__(self):
        for name in ("L", "U_ref", "rho"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"NondimScheme.{name} must be positive, got {value!r}")

    @cached_property
    def force_scale(self) -> float:
        return 0.5 * self.rho * self.L**2 * self.U_ref**2

    @cached_property
    def mass_scale(self) -> float:
        return 0.5 * self.rho * self.L**3

    @cached_property
    def time_scale(self) -> float:
        return self.L / self.U_ref


@dataclass(frozen=True)
class SurgeCoeffs:
    x_udot: float = -0.0072
    x_u: float = -0.04130
    x_uu: float = 0.01600
    x_uuu: float = -0.00022


SWAY_TERMS = ("v_v", "v_r", "v_delta", "v_rrr", "v_vrdelta", "v_ur", "v_0")
YAW_TERMS = ("r_r", "r_delta", "r_rrr", "r_vrdelta", "r_ur", "r_rdd", "r_vrr", "r_0")
SURGE_TERMS = ("x_u", "x_uu", "x_uuu")


@dataclass(frozen=True)
class SwayYawCoeffs:
    """Lumped sway (7) and yaw (8) coefficients. Defaults are the identified JH7500 set."""

    v_v: float = -0.10667
    v_r: float = -0.00304
    v_delta: float = 0.10280
    v_rrr: float = -4.54642
    v_vrdelta: float = 2.15718
    v_ur: float = 0.00020
    v_0: float = 0.00183
    r_r: float = -0.86381
    r_delta: float = 0.23587
    r_rrr: float = -3.09984
    r_vrdelta: float = -3.33673
    r_ur: float = 0.12056
    r_rdd: float = 0.07598
    r_vrr: float = 9.66080
    r_0: float = 0.00227

    def __post_init__(self):
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ValueError(f"coefficient {f.name} is not finite")

    @property
    def sway(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in SWAY_TERMS])

    @property
    def yaw(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in YAW_TERMS])

    @classmethod
    def from_arrays(cls, sway, yaw) -> "SwayYawCoeffs":
        sway = np.asarray(sway, dtype=float)
        yaw = np.asarray(yaw, dtype=float)
        if sway.shape != (len(SWAY_TERMS),) or yaw.shape != (len(YAW_TERMS),):
            raise ValueError(f"expected 7 sway and 8 yaw coefficients, got {sway.shape} and {yaw.shape}")
        kw = dict(zip(SWAY_TERMS, map(float, sway)))
        kw.update(zip(YAW_TERMS, map(float, yaw)))
        return cls(**kw)

    @classmethod
    def zeros(cls) -> "SwayYawCoeffs":
        return cls(**{f.name: 0.0 for f in fields(cls)})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class JetParams:
    alpha: float = 0.95
    area: float = 0.016
    a: float = 0.0075
    b: float = -7.0
    jet_count: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"jet alpha must be in (0, 1], got {self.alpha}")
        if not self.area > 0:
            raise ValueError(f"nozzle area must be positive, got {self.area}")
        if int(self.jet_count) != self.jet_count or self.jet_count < 1:
            raise ValueError(f"jet_count must be an integer >= 1, got {self.jet_count}")


@dataclass(frozen=True)
class VesselParams:
    mass: float = 3000.0
    surge: SurgeCoeffs = field(default_factory=SurgeCoeffs)
    swayyaw: SwayYawCoeffs = field(default_factory=SwayYawCoeffs)
    jet: JetParams = field(default_factory=JetParams)
    nondim: NondimScheme = field(default_factory=NondimScheme)
    delta_max: float = math.radians(30.0)

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not self.delta_max > 0:
            raise ValueError(f"delta_max must be positive, got {self.delta_max}")
        if not self.surge_denominator > 0:
            raise ValueError(
                f"m' - X_udot' = {self.surge_denominator:.6g} must be positive "
                f"(m'={self.mass_prime:.6g}, X_udot'={self.surge.x_udot})"
            )

    @cached_property
    def mass_prime(self) -> float:
        return self.mass / self.nondim.mass_scale

    @cached_property
    def surge_denominator(self) -> float:
        return self.mass_prime - self.surge.x_udot

    @cached_property
    def thrust_gain_prime(self) -> float:
        """Prime jet thrust per (jet velocity)^2 at zero steering."""
        jet = self.jet
        return jet.jet_count * jet.alpha * self.nondim.rho * jet.area / self.nondim.force_scale

    def replace(self, **changes) -> "VesselParams":
        from dataclasses import replace

        return replace(self, **changes)


def to_prime(state: MotionState, scheme: NondimScheme) -> MotionState:
    u, v, r = state
    return MotionState(u / scheme.U_ref, v / scheme.U_ref, r * scheme.L / scheme.U_ref)


def from_prime(state: MotionState, scheme: NondimScheme) -> MotionState:
    u, v, r = state
    return MotionState(u * scheme.U_ref, v * scheme.U_ref, r * scheme.U_ref / scheme.L)


def deriv_from_prime(d: StateDeriv, scheme: NondimScheme) -> StateDeriv:
    lin = scheme.U_ref**2 / scheme.L
    return StateDeriv(d[0] * lin, d[1] * lin, d[2] * lin / scheme.L)


def deriv_to_prime(d: StateDeriv, scheme: NondimScheme) -> StateDeriv:
    lin = scheme.U_ref**2 / scheme.L
    return StateDeriv(d[0] / lin, d[1] / lin, d[2] * scheme.L / lin)


def jet_velocity(n: float, jet: JetParams) -> float:
    return max(0.0, jet.a * n + jet.b)


def jet_thrust(control: ControlInput, jet: JetParams, rho: float) -> float:
    """Total water-jet surge force in newtons. No reverse thrust is modelled."""
    delta, n = control
    if n < 0:
        raise ValueError(f"impeller speed must be non-negative, got {n}")
    vj = jet_velocity(n, jet)
    return jet.jet_count * jet.alpha * rho * jet.area * vj * vj * math.cos(delta)


def surge_accel(state: MotionState, control: ControlInput, params: VesselParams) -> float:
    """Prime surge acceleration for a prime-unit ``state``."""
    u, v, r = state
    c = params.surge
    x_hull = c.x_u * u + c.x_uu * u * u + c.x_uuu * u * u * u
    delta, n = control
    if n < 0:
        raise ValueError(f"impeller speed must be non-negative, got {n}")
    vj = jet_velocity(n, params.jet)
    x_jet = params.thrust_gain_prime * vj * vj * math.cos(delta)
    return (x_hull + x_jet + params.mass_prime * v * r) / params.surge_denominator


def sway_yaw_accel(state: MotionState, control: ControlInput, coeffs: SwayYawCoeffs) -> tuple[float, float]:
    u, v, r = state
    d = control[0]
    c = coeffs
    vr = v * r
    dv = (
        c.v_v * v
        + c.v_r * r
        + c.v_delta * d
        + c.v_rrr * r * r * r
        + c.v_vrdelta * vr * d
        + c.v_ur * u * r
        + c.v_0
    )
    dr = (
        c.r_r * r
        + c.r_delta * d
        + c.r_rrr * r * r * r
        + c.r_vrdelta * vr * d
        + c.r_ur * u * r
        + c.r_rdd * r * d * d
        + c.r_vrr * vr * r
        + c.r_0
    )
    return dv, dr


def _check_finite(state, control):
    total = state[0] + state[1] + state[2] + control[0] + control[1]
    if not math.isfinite(total):
        raise ValueError(f"non-finite input: state={tuple(state)!r}, control={tuple(control)!r}")


def physical_rhs_prime(state: MotionState, control: ControlInput, params: VesselParams) -> StateDeriv:
    _check_finite(state, control)
    du = surge_accel(state, control, params)
    dv, dr = sway_yaw_accel(state, control, params.swayyaw)
    return StateDeriv(du, dv, dr)


def physical_rhs(state: MotionState, control: ControlInput, params: VesselParams) -> StateDeriv:
    """SI-unit accelerations of the physical model."""
    scheme = params.nondim
    d = physical_rhs_prime(to_prime(state, scheme), control, params)
    return deriv_from_prime(d, scheme)


Rhs = Callable[[np.ndarray, ControlInput], "np.ndarray | tuple"]


def _is_record(state) -> bool:
    return type(state) is MotionState or (isinstance(state, tuple) and hasattr(state, "_fields"))


def _axpy(state, h, k):
    """``state + h * k`` keeping the record type of ``state``."""
    if len(state) == 3:
        return type(state)(state[0] + h * k[0], state[1] + h * k[1], state[2] + h * k[2])
    return type(state)._make([s + h * d for s, d in zip(state, k)])


def euler_step(rhs: Rhs, state, control, dt: float):
    """Explicit Euler step; ``control`` is held over the step."""
    if dt == 0:
        return state
    if _is_record(state):
        return _axpy(state, dt, rhs(state, control))
    s = np.asarray(state, dtype=float)
    return s + dt * np.asarray(rhs(s, control), dtype=float)


def rk4_step(rhs: Rhs, state, control, dt: float):
    """Classical fourth-order Runge-Kutta step with zero-order-held control.

    Accepts a named tuple (stepped element-wise in plain floats) or an array.
    """
    if dt == 0:
        return state
    half = 0.5 * dt
    if _is_record(state):
        k1 = rhs(state, control)
        k2 = rhs(_axpy(state, half, k1), control)
        k3 = rhs(_axpy(state, half, k2), control)
        k4 = rhs(_axpy(state, dt, k3), control)
        w = dt / 6.0
        return type(state)(
            *[s + w * (a + 2.0 * b + 2.0 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4)]
        )
    s = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(s, control), dtype=float)
    k2 = np.asarray(rhs(s + half * k1, control), dtype=float)
    k3 = np.asarray(rhs(s + half * k2, control), dtype=float)
    k4 = np.asarray(rhs(s + dt * k3, control), dtype=float)
    return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


SOLVERS = {"euler": euler_step, "rk4": rk4_step}


def physical_step(
    state: MotionState, control: ControlInput, params: VesselParams, dt: float, solver: str = "euler"
) -> MotionState:
    """Advance a prime-unit state by ``dt`` seconds of physical time."""
    step = SOLVERS[solver]
    dt_prime = dt / params.nondim.time_scale
    if type(state) is not MotionState:
        state = MotionState(*state)
    return step(lambda s, c: physical_rhs_prime(s, c, params), state, control, dt_prime)


def zero_hydrodynamics(params: VesselParams) -> VesselParams:
    """Same vessel with every hydrodynamic coefficient set to zero (added mass kept)."""
    surge = SurgeCoeffs(x_udot=params.surge.x_udot, x_u=0.0, x_uu=0.0, x_uuu=0.0)
    return params.replace(surge=surge, swayyaw=SwayYawCoeffs.zeros())
