"""File formats: trial-log CSV, JSON documents and the model bundle."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .hybrid import FeatureScaler
from .model import SURGE_TERMS, SurgeCoeffs, SwayYawCoeffs, VesselParams
from .network import FfnWeights
from .trials import COLUMNS, TrialLog

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ""


def write_trial_csv(path: str | Path, log: TrialLog, config_hash: str | None = None) -> None:
    """SI units, radians; one row per sample. Floats are written with ``repr`` so they round-trip exactly."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write(",".join(COLUMNS) + "\n")
        for row in log.data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_trial_csv(path: str | Path, meta: dict | None = None, dt: float | None = None) -> TrialLog:
    """Parse a trial log; errors name the offending line.

    ``dt`` defaults to the mean spacing of the time column, which must be uniform.
    """
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read trial log {path}: {exc}") from exc
    rows = []
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields_ = line.split(",")
        if not header_seen:
            if tuple(f.strip() for f in fields_) != COLUMNS:
                raise FormatError(f"{path}:{lineno}: expected header {','.join(COLUMNS)}, got {line!r}")
            header_seen = True
            continue
        if len(fields_) != len(COLUMNS):
            raise FormatError(f"{path}:{lineno}: expected {len(COLUMNS)} fields, got {len(fields_)}")
        try:
            values = [float(f) for f in fields_]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in values):
            raise FormatError(f"{path}:{lineno}: non-finite value")
        rows.append(values)
    if not header_seen:
        raise FormatError(f"{path}: missing header")
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least two samples, got {len(rows)}")
    data = np.array(rows)
    steps = np.diff(data[:, 0])
    dt = float(np.mean(steps)) if dt is None else float(dt)
    if not dt > 0 or np.max(np.abs(steps - dt)) > 1e-6 * max(1.0, dt):
        raise FormatError(f"{path}: time column is not uniformly sampled")
    try:
        return TrialLog(dt, data, dict(meta or {}))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline, no NaN."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))


def read_json(path: str | Path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def write_table_csv(path: str | Path, header: list[str], rows, config_hash: str | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


@dataclass
class ModelBundle:
    """Identified physical coefficients plus, once trained, the two networks.

    Each network's feature scaler is present exactly when its weights are.
    """

    surge: SurgeCoeffs
    swayyaw: SwayYawCoeffs
    hybrid: FfnWeights | None = None
    hybrid_scaler: FeatureScaler | None = None
    baseline: FfnWeights | None = None
    baseline_scaler: FeatureScaler | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for w, s in (("hybrid", "hybrid_scaler"), ("baseline", "baseline_scaler")):
            if (getattr(self, w) is None) != (getattr(self, s) is None):
                raise ValueError(f"{w} weights and {s} must be given together")

    def vessel(self, base: VesselParams) -> VesselParams:
        return base.replace(surge=self.surge, swayyaw=self.swayyaw)

    def with_networks(self, hybrid, hybrid_scaler, baseline, baseline_scaler, **meta) -> "ModelBundle":
        return replace(
            self,
            hybrid=hybrid,
            hybrid_scaler=hybrid_scaler,
            baseline=baseline,
            baseline_scaler=baseline_scaler,
            meta={**self.meta, **meta},
        )

    def coefficients_dict(self) -> dict:
        surge = {k: getattr(self.surge, k) for k in ("x_udot",) + SURGE_TERMS}
        return {"format": FORMAT_VERSION, "surge": surge, "sway_yaw": self.swayyaw.as_dict(), "meta": self.meta}

    def weights_dict(self) -> dict:
        if self.hybrid is None:
            raise ValueError("bundle has no trained networks")
        return {
            "format": FORMAT_VERSION,
            "hybrid": {"weights": self.hybrid.to_dict(), "scaler": self.hybrid_scaler.to_dict()},
            "baseline": {"weights": self.baseline.to_dict(), "scaler": self.baseline_scaler.to_dict()},
            "meta": self.meta,
        }

    @classmethod
    def from_dicts(cls, coefficients: dict, weights: dict | None = None) -> "ModelBundle":
        try:
            surge = SurgeCoeffs(**coefficients["surge"])
            swayyaw = SwayYawCoeffs(**coefficients["sway_yaw"])
            meta = dict(coefficients.get("meta", {}))
            if weights is None:
                return cls(surge, swayyaw, meta=meta)
            nets = {}
            for key in ("hybrid", "baseline"):
                nets[key] = FfnWeights.from_dict(weights[key]["weights"])
                nets[key + "_scaler"] = FeatureScaler.from_dict(weights[key]["scaler"])
            meta.update(weights.get("meta", {}))
            return cls(surge, swayyaw, meta=meta, **nets)
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed model bundle: {exc}") from exc


def save_bundle(directory: str | Path, bundle: ModelBundle) -> None:
    directory = Path(directory)
    write_json(directory / "coefficients.json", bundle.coefficients_dict())
    if bundle.hybrid is not None:
        write_json(directory / "weights.json", bundle.weights_dict())


def load_bundle(directory: str | Path, require_weights: bool = False) -> ModelBundle:
    directory = Path(directory)
    coefficients = read_json(directory / "coefficients.json")
    weights_path = directory / "weights.json"
    if require_weights and not weights_path.exists():
        raise FormatError(f"{weights_path} not found; run 'train' first")
    weights = read_json(weights_path) if weights_path.exists() else None
    return ModelBundle.from_dicts(coefficients, weights)
