"""The generate -> identify -> train -> evaluate chain, in memory.

The CLI persists each stage's output; tests call these functions directly.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass

from . import __version__
from .config import RunConfig
from .hybrid import HybridResidualRegressor, PureDataDrivenRegressor, acceleration_targets, one_step_pairs
from .identification import RidgeConfig, identify_surge, identify_sway_yaw
from .io import ModelBundle
from .metrics import rmse, turning_diameter
from .model import SURGE_TERMS, MotionState, Pose
from .rollout import PhysicalModel, Trajectory, rollout
from .trials import TrialLog, _derive_seed, generate_trial

MODELS = ("physical", "hybrid", "baseline")
CHANNELS = ("u", "v", "r")


def provenance(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.digest(), "seed": cfg.seed, "version": __version__}


def generate(cfg: RunConfig) -> "OrderedDict[str, tuple[str, TrialLog]]":
    """Synthetic trial logs for every configured maneuver, keyed by name."""
    out = OrderedDict()
    for i, (name, (split, spec)) in enumerate(cfg.maneuver_specs().items()):
        log = generate_trial(
            spec,
            cfg.vessel,
            cfg.disturbance,
            seed=_derive_seed(cfg.seed, 1, i),
            dt=cfg.maneuvers.log_dt,
            substeps=cfg.maneuvers.truth_substeps,
        )
        log.meta.update(name=name, split=split)
        out[name] = (split, log)
    return out


def split_logs(logs, split: str) -> "OrderedDict[str, TrialLog]":
    return OrderedDict((name, log) for name, (s, log) in logs.items() if s == split)


def _relative(estimate: float, truth: float) -> float | None:
    return None if truth == 0 else (estimate - truth) / truth


def identify(cfg: RunConfig, train_logs: "dict[str, TrialLog]") -> tuple[ModelBundle, dict]:
    """Ridge identification of the physical model; returns the bundle and a comparison report."""
    idc = cfg.identification
    missing = [n for n in idc.source if n not in train_logs]
    if missing:
        raise KeyError(f"identification source trial(s) not found: {missing}")
    ridge = RidgeConfig(lam=idc.lam, standardize=idc.standardize, smooth=idc.smooth)
    swayyaw = identify_sway_yaw([train_logs[n] for n in idc.source], ridge, cfg.vessel.nondim)
    if idc.identify_surge:
        surge = identify_surge(
            list(train_logs.values()), cfg.vessel, ridge, min_range=idc.surge_min_range, r_tol=idc.surge_r_tol
        )
    else:
        surge = cfg.vessel.surge
    meta = {**provenance(cfg), "method": "ridge", "lam": idc.lam, "source": list(idc.source)}
    bundle = ModelBundle(surge, swayyaw, meta=meta)

    truth_sy = cfg.vessel.swayyaw.as_dict()
    rows = {}
    for name, value in swayyaw.as_dict().items():
        rows[name] = {"identified": value, "truth": truth_sy[name], "rel_error": _relative(value, truth_sy[name])}
    for name in SURGE_TERMS:
        value, truth = getattr(surge, name), getattr(cfg.vessel.surge, name)
        rows[name] = {"identified": value, "truth": truth, "rel_error": _relative(value, truth)}
    return bundle, {**meta, "coefficients": rows, "surge_identified": idc.identify_surge}


def train(cfg: RunConfig, bundle: ModelBundle, train_logs: "dict[str, TrialLog]") -> tuple[ModelBundle, dict]:
    """Fit the residual network and the pure data-driven baseline on all training logs."""
    tc = cfg.training
    vessel = bundle.vessel(cfg.vessel)
    dt = cfg.maneuvers.log_dt
    X, y = one_step_pairs(list(train_logs.values()), vessel, smooth=tc.smooth)
    common = dict(
        vessel=vessel,
        hidden=tc.hidden,
        learning_rate=tc.learning_rate,
        n_iter=tc.iterations,
        batch_size=tc.batch_size,
        lam=tc.lam,
        dt=dt,
        solver=cfg.evaluation.solver,
        standardize=tc.standardize,
        random_state=_derive_seed(cfg.seed, 3, tc.seed),
    )
    hybrid = HybridResidualRegressor(**common).fit(X, y)
    baseline = PureDataDrivenRegressor(**common).fit(X, acceleration_targets(X, y, vessel, dt))
    traces = {"hybrid": hybrid.loss_curve_, "baseline": baseline.loss_curve_}
    out = bundle.with_networks(
        hybrid.weights_,
        hybrid.scaler_,
        baseline.weights_,
        baseline.scaler_,
        **provenance(cfg),
        training={"lam": tc.lam, "iterations": tc.iterations, "batch_size": tc.batch_size, "samples": len(X)},
    )
    return out, traces


def build_models(cfg: RunConfig, bundle: ModelBundle) -> "OrderedDict[str, object]":
    vessel = bundle.vessel(cfg.vessel)
    solver = cfg.evaluation.solver
    dt = cfg.maneuvers.log_dt
    models = OrderedDict(physical=PhysicalModel(vessel, solver))
    if bundle.hybrid is not None:
        models["hybrid"] = HybridResidualRegressor.from_weights(
            vessel, bundle.hybrid, bundle.hybrid_scaler, dt=dt, solver=solver
        )
        models["baseline"] = PureDataDrivenRegressor.from_weights(vessel, bundle.baseline, bundle.baseline_scaler, dt=dt)
    return models


def replay(model, log: TrialLog, velocity_bound: float | None = None) -> Trajectory:
    """Roll ``model`` out from the log's first sample under the log's recorded controls."""
    return rollout(
        model,
        MotionState(*log.states[0]),
        Pose(*log.poses[0]),
        log.controls,
        dt=log.dt,
        velocity_bound=velocity_bound,
        t0=float(log.times[0]),
    )


def _diameter(traj: Trajectory):
    try:
        return turning_diameter(traj)
    except ValueError:
        return None


def _prefix(traj: Trajectory, n: int) -> Trajectory:
    return Trajectory(traj.times[:n], traj.states[:n], traj.poses[:n], traj.controls[:n], traj.diverged)


@dataclass
class Evaluation:
    report: dict
    trajectories: "OrderedDict[str, OrderedDict[str, Trajectory]]"  # maneuver -> model (and "truth") -> trajectory


def evaluate(cfg: RunConfig, bundle: ModelBundle, test_logs: "dict[str, TrialLog]") -> Evaluation:
    """Per-maneuver RMSE and turning-diameter comparison of every available model.

    A diverged rollout is reported with ``diverged: true``; its RMSE covers the
    steps completed before divergence.
    """
    bound = cfg.evaluation.velocity_bound or None
    models = build_models(cfg, bundle)
    maneuvers = OrderedDict()
    trajectories = OrderedDict()
    totals = {m: 0.0 for m in models}
    for name, log in test_logs.items():
        truth = log.to_trajectory()
        is_turn = log.meta.get("maneuver", {}).get("kind") == "turning" or name.startswith("turning")
        truth_d = _diameter(truth) if is_turn else None
        entry = {"kind": "turning" if is_turn else log.meta.get("maneuver", {}).get("kind", "unknown")}
        if is_turn:
            entry["truth_diameter"] = truth_d
        trajectories[name] = OrderedDict(truth=truth)
        results = OrderedDict()
        for mname, model in models.items():
            traj = replay(model, log, bound)
            trajectories[name][mname] = traj
            n = len(traj)
            err = rmse(traj, _prefix(truth, n))
            res = {
                "rmse": dict(zip(CHANNELS, map(float, err))),
                "diverged": bool(traj.diverged),
                "steps_completed": n - 1,
            }
            if is_turn:
                d = _diameter(traj) if not traj.diverged else None
                res["diameter"] = d
                res["diameter_rel_error"] = abs(d - truth_d) / truth_d if (d is not None and truth_d) else None
            results[mname] = res
            if not traj.diverged:
                totals[mname] += float(sum(err))
        entry["models"] = results
        maneuvers[name] = entry
    report = {
        **provenance(cfg),
        "maneuvers": maneuvers,
        "total_rmse": {m: (v if math.isfinite(v) else None) for m, v in totals.items()},
        "diverged": sorted({f"{n}/{m}" for n, e in maneuvers.items() for m, r in e["models"].items() if r["diverged"]}),
    }
    return Evaluation(report, trajectories)


def step_table(trajectories: "OrderedDict[str, Trajectory]"):
    """Header and rows of an aligned per-step CSV: truth and each model's pose and velocities."""
    truth = trajectories["truth"]
    header = ["t"]
    for key in trajectories:
        header += [f"{key}_{c}" for c in ("x", "y", "psi", "u", "v", "r")]
    header.append("delta")
    rows = []
    for k in range(len(truth)):
        row = [float(truth.times[k])]
        for traj in trajectories.values():
            if k < len(traj):
                row += [float(v) for v in traj.poses[k]] + [float(v) for v in traj.states[k]]
            else:
                row += [math.nan] * 6
        row.append(float(truth.controls[k, 0]))
        rows.append(row)
    return header, rows


def format_tables(report: dict) -> str:
    """Human-readable RMSE and turning-diameter tables."""
    lines = []
    models = [m for m in MODELS if any(m in e["models"] for e in report["maneuvers"].values())]
    lines.append("Rollout RMSE (u, v in m/s; r in rad/s)")
    lines.append(f"{'maneuver':<18} {'model':<10} {'u':>10} {'v':>10} {'r':>10}  note")
    for name, entry in report["maneuvers"].items():
        for m in models:
            res = entry["models"][m]
            e = res["rmse"]
            note = f"diverged after {res['steps_completed']} steps" if res["diverged"] else ""
            lines.append(f"{name:<18} {m:<10} {e['u']:>10.4f} {e['v']:>10.4f} {e['r']:>10.5f}  {note}")
    turns = {n: e for n, e in report["maneuvers"].items() if e["kind"] == "turning"}
    if turns:
        lines.append("")
        lines.append("Turning diameter (m) and relative error")
        head = f"{'maneuver':<18} {'truth':>9}" + "".join(f" {m:>20}" for m in models)
        lines.append(head)
        for name, entry in turns.items():
            td = entry.get("truth_diameter")
            row = f"{name:<18} {td:>9.1f}" if td is not None else f"{name:<18} {'n/a':>9}"
            for m in models:
                res = entry["models"][m]
                d, e = res.get("diameter"), res.get("diameter_rel_error")
                cell = f"{d:.1f} ({100 * e:.2f}%)" if d is not None and e is not None else "n/a"
                row += f" {cell:>20}"
            lines.append(row)
    return "\n".join(lines)


def run(cfg: RunConfig):
    """Whole chain in memory. Returns ``(logs, bundle, identification_report, traces, evaluation)``."""
    logs = generate(cfg)
    train_logs = split_logs(logs, "train")
    bundle, ident = identify(cfg, train_logs)
    bundle, traces = train(cfg, bundle, train_logs)
    evaluation = evaluate(cfg, bundle, split_logs(logs, "test"))
    return logs, bundle, ident, traces, evaluation


__all__ = [
    "CHANNELS",
    "MODELS",
    "Evaluation",
    "build_models",
    "evaluate",
    "format_tables",
    "generate",
    "identify",
    "replay",
    "run",
    "split_logs",
    "step_table",
    "train",
]
