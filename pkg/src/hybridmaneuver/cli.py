"""Command-line entry point: ``hybridmaneuver {gen,identify,train,rollout,evaluate,run}``.

Every command reads the run configuration (``--config``, TOML; defaults when
omitted), applies the ``--seed`` override and works inside ``--out``. Later
stages read the files written by earlier ones from the same directory.
"""
from __future__ import annotations

import argparse
import logging
import sys
from collections import OrderedDict
from pathlib import Path

from . import __version__, pipeline
from .config import ANGLE_FIELDS, ConfigError, RunConfig, load_config, parse_angle
from .identification import IdentificationError
from .io import FormatError, load_bundle, read_json, read_trial_csv, save_bundle, write_json, write_table_csv, write_trial_csv
from .maneuver import ManeuverSpec
from .model import MotionState, Pose
from .rollout import rollout

log = logging.getLogger("hybridmaneuver")


class CommandError(RuntimeError):
    pass


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json"


def _check_hash(doc: dict, cfg: RunConfig, what: str, force: bool) -> None:
    found = doc.get("config_hash") if isinstance(doc, dict) else None
    if found != cfg.digest() and not force:
        raise CommandError(
            f"{what} was produced with config hash {found}, current config is {cfg.digest()}; "
            "rerun the earlier stage or pass --force"
        )


def _load_logs(out: Path, cfg: RunConfig, force: bool, split: str | None = None) -> "OrderedDict[str, object]":
    path = _manifest_path(out)
    if not path.exists():
        raise CommandError(f"{path} not found; run 'gen' first")
    manifest = read_json(path)
    _check_hash(manifest, cfg, str(path), force)
    logs = OrderedDict()
    for entry in manifest["trials"]:
        if split is not None and entry["split"] != split:
            continue
        meta = {"name": entry["name"], "split": entry["split"], "maneuver": entry["maneuver"]}
        logs[entry["name"]] = read_trial_csv(out / entry["file"], meta, entry["dt"])
    return logs


def cmd_gen(cfg: RunConfig, out: Path, args) -> None:
    logs = pipeline.generate(cfg)
    digest = cfg.digest()
    trials = []
    for name, (split, trial) in logs.items():
        rel = f"logs/{name}.csv"
        write_trial_csv(out / rel, trial, digest)
        trials.append(
            {
                "name": name,
                "split": split,
                "file": rel,
                "samples": len(trial),
                "dt": trial.dt,
                "noise_seed": trial.meta["noise_seed"],
                "maneuver": trial.meta["maneuver"],
            }
        )
        log.info("wrote %s (%d samples, %s)", rel, len(trial), split)
    manifest = {
        **pipeline.provenance(cfg),
        "config": cfg.to_dict(),
        "trials": trials,
        "drift_model": "stationary drift attributed entirely to a constant current",
    }
    write_json(_manifest_path(out), manifest)
    print(f"generated {len(trials)} trial logs in {out}")


def _identification_table(report: dict) -> str:
    lines = [f"{'coefficient':<12} {'identified':>12} {'truth':>12} {'rel. error':>11}"]
    for name, row in report["coefficients"].items():
        rel = row["rel_error"]
        rel_s = f"{100 * rel:10.2f}%" if rel is not None else f"{'n/a':>11}"
        lines.append(f"{name:<12} {row['identified']:>12.5f} {row['truth']:>12.5f} {rel_s}")
    return "\n".join(lines)


def cmd_identify(cfg: RunConfig, out: Path, args) -> None:
    train_logs = _load_logs(out, cfg, args.force, "train")
    bundle, report = pipeline.identify(cfg, train_logs)
    save_bundle(out, bundle)
    write_json(out / "identification.json", report)
    print(_identification_table(report))


def cmd_train(cfg: RunConfig, out: Path, args) -> None:
    train_logs = _load_logs(out, cfg, args.force, "train")
    bundle = load_bundle(out)
    _check_hash(bundle.meta, cfg, "coefficients.json", args.force)
    bundle, traces = pipeline.train(cfg, bundle, train_logs)
    save_bundle(out, bundle)
    rows = [(k, float(h), float(b)) for k, (h, b) in enumerate(zip(traces["hybrid"], traces["baseline"]))]
    write_table_csv(out / "loss_trace.csv", ["step", "hybrid", "baseline"], rows, cfg.digest())
    h, b = traces["hybrid"], traces["baseline"]
    print(f"hybrid loss {h[0]:.5g} -> {h[-1]:.5g}; baseline loss {b[0]:.5g} -> {b[-1]:.5g} (lambda={cfg.training.lam})")


def parse_maneuver(text: str, cfg: RunConfig) -> tuple[str, ManeuverSpec]:
    """A configured maneuver name, or ``kind:key=value,...`` with angles as ``25deg``."""
    specs = cfg.maneuver_specs()
    if text in specs:
        return text, specs[text][1]
    kind, _, rest = text.partition(":")
    kw = {"n_cmd": cfg.maneuvers.n_cmd, "approach": cfg.maneuvers.approach}
    aliases = {"delta": "delta_cmd"}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        key = key.strip()
        if not eq:
            raise CommandError(f"maneuver option {item!r} is not key=value")
        if key in ANGLE_FIELDS:
            kw[aliases.get(key, key)] = parse_angle(value.strip(), f"maneuver {key}")
        elif key == "seed":
            kw[key] = int(value)
        else:
            try:
                kw[aliases.get(key, key)] = float(value)
            except ValueError as exc:
                raise CommandError(f"maneuver option {key}: {exc}") from exc
    try:
        spec = ManeuverSpec(kind=kind.strip(), **kw)
    except TypeError as exc:
        raise CommandError(f"bad maneuver {text!r}: {exc}") from exc
    return text.replace(":", "_").replace(",", "_").replace("=", "-"), spec


def cmd_rollout(cfg: RunConfig, out: Path, args) -> None:
    bundle = load_bundle(out, require_weights=args.model != "physical")
    _check_hash(bundle.meta, cfg, "model bundle", args.force)
    models = pipeline.build_models(cfg, bundle)
    label, spec = parse_maneuver(args.maneuver, cfg)
    spec.check_limits(cfg.vessel.delta_max)
    traj = rollout(models[args.model], MotionState(0.0, 0.0, 0.0), Pose(0.0, 0.0, 0.0), spec, dt=cfg.maneuvers.log_dt)
    header = ["t", "x", "y", "psi", "u", "v", "r", "delta", "n"]
    rows = [
        (float(t), *map(float, p), *map(float, s), *map(float, c))
        for t, p, s, c in zip(traj.times, traj.poses, traj.states, traj.controls)
    ]
    path = out / "rollouts" / f"{label}_{args.model}.csv"
    write_table_csv(path, header, rows, cfg.digest())
    status = "diverged" if traj.diverged else "completed"
    print(f"{args.model} rollout of {args.maneuver}: {status}, {len(traj) - 1} steps -> {path}")


def cmd_evaluate(cfg: RunConfig, out: Path, args) -> None:
    test_logs = _load_logs(out, cfg, args.force, "test")
    bundle = load_bundle(out, require_weights=True)
    _check_hash(bundle.meta, cfg, "model bundle", args.force)
    ev = pipeline.evaluate(cfg, bundle, test_logs)
    write_json(out / "report.json", ev.report)
    for name, trajs in ev.trajectories.items():
        header, rows = pipeline.step_table(trajs)
        write_table_csv(out / "eval" / f"{name}.csv", header, rows, cfg.digest())
    print(pipeline.format_tables(ev.report))


def cmd_run(cfg: RunConfig, out: Path, args) -> None:
    for fn in (cmd_gen, cmd_identify, cmd_train, cmd_evaluate):
        fn(cfg, out, args)


COMMANDS = {
    "gen": (cmd_gen, "generate synthetic trial logs and a manifest"),
    "identify": (cmd_identify, "identify sway/yaw (and optionally surge) coefficients from the training logs"),
    "train": (cmd_train, "train the residual network and the pure data-driven baseline"),
    "rollout": (cmd_rollout, "closed-loop rollout of one model under a maneuver"),
    "evaluate": (cmd_evaluate, "compare all models on the test logs; writes report.json"),
    "run": (cmd_run, "gen, identify, train and evaluate in sequence"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridmaneuver", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="TOML run configuration (defaults if omitted)")
        p.add_argument("--out", type=Path, default=Path("run"), help="working/output directory (default: ./run)")
        p.add_argument("--seed", type=int, default=None, help="override the configured global seed")
        p.add_argument("--force", action="store_true", help="accept artifacts produced under a different config")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "rollout":
            p.add_argument("--model", choices=pipeline.MODELS, default="physical")
            p.add_argument(
                "--maneuver",
                required=True,
                help="configured maneuver name, or e.g. 'turning:delta=25deg,duration=300'",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](cfg, args.out, args)
    except (ConfigError, FormatError, IdentificationError, CommandError, KeyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
