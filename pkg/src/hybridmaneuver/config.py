"""Run configuration: one TOML document, parsed strictly into frozen dataclasses."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
import typing
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .hybrid import TrainConfig
from .maneuver import KINDS, ManeuverSpec
from .model import VesselParams
from .trials import STANDARD_TEST, STANDARD_TRAIN, DisturbanceSpec

# Fields holding angles. In TOML they may be given in radians (a number) or
# as a string with an explicit unit, e.g. "25deg" or "0.4rad".
ANGLE_FIELDS = frozenset({"delta_max", "delta", "zigzag_delta", "zigzag_switch", "amplitude", "current_dir"})


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IdentificationConfig:
    lam: float = 1e-4
    standardize: bool = True
    smooth: int = 0
    source: tuple = ("random_steering",)  # training trials used for the sway/yaw regression
    identify_surge: bool = False
    surge_min_range: float = 0.2
    surge_r_tol: float = 0.02

    def __post_init__(self):
        if not self.source:
            raise ConfigError("identification.source must name at least one trial")


@dataclass(frozen=True)
class EvaluationConfig:
    solver: str = "euler"
    velocity_bound: float = 0.0  # SI; 0 means ten times the reference speed

    def __post_init__(self):
        if self.solver not in ("euler", "rk4"):
            raise ConfigError(f"evaluation.solver must be 'euler' or 'rk4', got {self.solver!r}")
        if self.velocity_bound < 0:
            raise ConfigError("evaluation.velocity_bound must be >= 0")


@dataclass(frozen=True)
class ManeuverEntry:
    name: str
    split: str
    kind: str
    delta: float = 0.0
    duration: float = 300.0
    hold: float = 10.0
    amplitude: float = math.radians(30.0)
    zigzag_delta: float = math.radians(30.0)
    zigzag_switch: float = math.radians(20.0)

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise ConfigError(f"maneuver {self.name!r}: split must be 'train' or 'test', got {self.split!r}")
        if self.kind not in KINDS:
            raise ConfigError(f"maneuver {self.name!r}: unknown kind {self.kind!r}")


def _standard_entries() -> tuple:
    out = []
    for split, table in (("train", STANDARD_TRAIN), ("test", STANDARD_TEST)):
        for name, spec in table.items():
            spec = dict(spec)
            delta = math.radians(spec.pop("delta_deg", 0.0))
            out.append(ManeuverEntry(name=name, split=split, delta=delta, **spec))
    return tuple(out)


@dataclass(frozen=True)
class ManeuverSet:
    n_cmd: float = 5000.0
    approach: float = 20.0
    log_dt: float = 0.1
    truth_substeps: int = 10
    entries: tuple = field(default_factory=_standard_entries)

    def __post_init__(self):
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate maneuver names in {names}")
        if not any(e.split == "train" for e in self.entries):
            raise ConfigError("no training maneuvers configured")
        if not self.log_dt > 0 or self.truth_substeps < 1:
            raise ConfigError("log_dt must be positive and truth_substeps >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    vessel: VesselParams = field(default_factory=VesselParams)
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    maneuvers: ManeuverSet = field(default_factory=ManeuverSet)
    identification: IdentificationConfig = field(default_factory=IdentificationConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)

    def with_seed(self, seed: int | None) -> "RunConfig":
        return self if seed is None else dataclasses.replace(self, seed=int(seed))

    def maneuver_specs(self) -> "dict[str, tuple[str, ManeuverSpec]]":
        """Steering programs keyed by trial name; per-trial seeds derive from the run seed."""
        from .trials import _derive_seed

        out = {}
        ms = self.maneuvers
        for i, e in enumerate(ms.entries):
            spec = ManeuverSpec(
                kind=e.kind,
                n_cmd=ms.n_cmd,
                duration=e.duration,
                delta_cmd=e.delta,
                approach=ms.approach,
                zigzag_delta=e.zigzag_delta,
                zigzag_switch=e.zigzag_switch,
                hold=e.hold,
                amplitude=e.amplitude,
                seed=_derive_seed(self.seed, 2, i),
            )
            out[e.name] = (e.split, spec)
        return out

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def parse_angle(value, where: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected an angle, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        text = value.strip().lower()
        for suffix, factor in (("deg", math.pi / 180.0), ("rad", 1.0)):
            if text.endswith(suffix):
                try:
                    return float(text[: -len(suffix)]) * factor
                except ValueError:
                    break
        raise ConfigError(f"{where}: cannot read angle {value!r}; use radians or a 'deg'/'rad' suffix")
    raise ConfigError(f"{where}: expected an angle, got {type(value).__name__}")


def _coerce(value, tp, where: str):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{where}: expected a table")
        return _build(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if origin is typing.Union or type(tp).__name__ == "UnionType":
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return _coerce(value, args[0], where)
    if tp is tuple or origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array")
        return tuple(value)
    return value


def _build(cls, table: dict, where: str):
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(table) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for key, value in table.items():
        path = f"{where}.{key}" if where else key
        if key in ANGLE_FIELDS:
            kwargs[key] = parse_angle(value, path)
        elif cls is ManeuverSet and key == "entries":
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected an array of tables")
            kwargs[key] = tuple(_coerce(v, ManeuverEntry, f"{path}[{i}]") for i, v in enumerate(value))
        else:
            kwargs[key] = _coerce(value, hints[key], path)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where or 'root'}]: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "")


def load_config(path: str | Path | None) -> RunConfig:
    """Parse a TOML run configuration; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data)


__all__ = [
    "ANGLE_FIELDS",
    "ConfigError",
    "EvaluationConfig",
    "IdentificationConfig",
    "ManeuverEntry",
    "ManeuverSet",
    "RunConfig",
    "config_from_dict",
    "load_config",
    "parse_angle",
]

