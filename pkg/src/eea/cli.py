"""Command-line entry point: ``eea <subcommand> [flags]``.

Experiment subcommands write the raw per-episode CSV, a ``-summary.csv``
with mean and standard error per episode, and a ``.config`` sidecar that
echoes the effective configuration. ``verify`` checks the equivalent-effect
reduction of a tabular MDP file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from importlib import resources
from pathlib import Path

from .harness import (
    ConfigError,
    build_config,
    load_config_file,
    pretrain_predprey_models,
    run_experiment,
    summarize,
    write_csv,
    write_summary_csv,
)
from .harness.experiments import predprey_models_dir
from .mdp import assumption_audit, build_reduced_mdp, check_homomorphism, check_value_equivalence, load_mdp
from .models import exact_models

SUMMARY_METRIC = {"maze-q": "steps", "maze-plan": "return", "cartpole": "return", "predprey": "steps"}
VERIFY_GAP = 1e-8


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _run_flags(p):
    p.add_argument("--agent", choices=("baseline", "eea"))
    p.add_argument("--seeds", type=int)
    p.add_argument("--episodes", type=int, help="episodes per seed (maze --planning: checkpoints)")
    p.add_argument("--hyp-action", type=int)
    p.add_argument("--out", help="raw CSV path (default ./results/<experiment>-<agent>.csv)")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--optimizer", choices=("sgd", "adam", "rmsprop"))
    p.add_argument("--master-seed", type=int)
    p.add_argument("--workers", type=int, help="worker processes for seeds")
    p.add_argument("--timing", action="store_true", default=None, help="record wall-clock ms per episode")
    p.add_argument("--models-dir", help="predator-prey model snapshot directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eea", description="Equivalent-effect abstraction experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("maze", help="tabular Q-learning or Q-planning on the Dyna maze")
    p.add_argument("--planning", action="store_true", help="random-sample one-step Q-planning")
    p.add_argument("--checkpoint-every", type=int, help="planning backups between greedy checks")
    p.add_argument("--allow-self-predecessor", action="store_true", default=None)
    _run_flags(p)

    for name, text in (("cartpole", "DQN on cartpole"), ("predprey", "DQN on predator-prey")):
        _run_flags(sub.add_parser(name, help=text))

    p = sub.add_parser("pretrain-models", help="fit predator-prey forward/backward models")
    p.add_argument("--out", help="snapshot directory (default ./results/models/predprey)")
    p.add_argument("--config")
    p.add_argument("--optimizer", choices=("sgd", "adam", "rmsprop"))
    p.add_argument("--master-seed", type=int)
    p.add_argument("--steps", type=int, help="random-policy steps")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("verify", help="check the reduction of a tabular MDP file")
    p.add_argument("mdp", help="MDP text file, or 'maze' for the bundled Dyna maze")
    p.add_argument("--hyp-action", type=int, help="hypothetical action (default 0; 2 for 'maze')")
    p.add_argument("--tolerance", type=float, default=1e-10, help="value-iteration tolerance")
    p.add_argument("--allow-self-predecessor", action="store_true")
    return parser


def _experiment_name(args, file_values) -> str:
    if args.command == "maze":
        if args.planning:
            return "maze-plan"
        return file_values.get("experiment") if file_values.get("experiment") in ("maze-q", "maze-plan") else "maze-q"
    return args.command


def _config_from_args(args):
    file_values = load_config_file(args.config) if args.config else {}
    agent_over = {"optimizer": args.optimizer} if getattr(args, "optimizer", None) else {}
    return build_config(
        file_values,
        experiment=_experiment_name(args, file_values),
        agent=args.agent,
        seeds=args.seeds,
        episodes=args.episodes,
        hyp_action=args.hyp_action,
        out=args.out,
        master_seed=args.master_seed,
        workers=args.workers,
        timing=args.timing,
        models_dir=args.models_dir,
        checkpoint_every=getattr(args, "checkpoint_every", None),
        allow_self_predecessor=getattr(args, "allow_self_predecessor", None),
        agent_overrides=agent_over,
    )


def output_paths(raw: Path):
    return raw, raw.with_name(raw.stem + "-summary.csv"), raw.with_name(raw.stem + ".config")


def cmd_experiment(args) -> int:
    cfg = _config_from_args(args)
    raw, summary_path, sidecar = output_paths(Path(cfg.out) if cfg.out else cfg.default_out())
    cfg.out = str(raw)
    records = run_experiment(cfg)
    write_csv(records, raw)
    write_summary_csv(summarize(records, SUMMARY_METRIC[cfg.experiment]), summary_path)
    try:
        sidecar.write_text(cfg.dumps(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {sidecar}: {exc}") from exc
    print(f"wrote {len(records)} records to {raw}")
    return 0


def cmd_pretrain(args) -> int:
    file_values = load_config_file(args.config) if args.config else {}
    file_values.pop("experiment", None)
    agent_over = {"optimizer": args.optimizer} if args.optimizer else {}
    cfg = build_config(
        file_values,
        experiment="predprey",
        master_seed=args.master_seed,
        pretrain_steps=args.steps,
        pretrain_epochs=args.epochs,
        models_dir=args.out,
        agent_overrides=agent_over,
    )
    directory = predprey_models_dir(cfg)
    pretrain_predprey_models(cfg, directory)
    print(f"wrote forward and backward models to {directory}")
    return 0


def bundled_maze_path():
    return resources.files("eea").joinpath("data", "dyna_maze.mdp")


def cmd_verify(args) -> int:
    if args.mdp == "maze":
        source = bundled_maze_path()
        a_hyp = 2 if args.hyp_action is None else args.hyp_action
    else:
        source = Path(args.mdp)
        a_hyp = 0 if args.hyp_action is None else args.hyp_action
    try:
        mdp = load_mdp(source)
    except OSError as exc:
        return _fail(f"cannot read {source}: {exc.strerror or exc}")
    except ValueError as exc:
        return _fail(f"{source}: {exc}")
    if not 0 <= a_hyp < mdp.action_count:
        return _fail(f"hypothetical action {a_hyp} outside 0..{mdp.action_count - 1}")

    audit = assumption_audit(mdp, a_hyp, args.allow_self_predecessor)
    if not mdp.is_deterministic:
        print(audit.format())
        return _fail("transitions are not deterministic; exact models are undefined")
    fwd, bwd = exact_models(mdp, args.allow_self_predecessor)
    try:
        reduced, hmap = build_reduced_mdp(mdp, fwd, bwd, a_hyp)
    except ValueError as exc:
        return _fail(str(exc))
    report = check_homomorphism(mdp, reduced, hmap)
    gap = check_value_equivalence(mdp, reduced, hmap, args.tolerance)
    slots = len(hmap.storage_slots(mdp.terminal))
    print(report.format())
    print(f"value-equivalence gap: {gap:.3g}")
    print(f"storage slots: {slots} of {mdp.state_count * mdp.action_count}")
    print(audit.format())
    if not report.ok:
        return _fail(
            f"not a homomorphism: {len(report.transition_violations)} transition and "
            f"{len(report.reward_violations)} reward violations"
        )
    if gap >= VERIFY_GAP:
        return _fail(f"value-equivalence gap {gap:.3g} exceeds {VERIFY_GAP:g}")
    return 0


def _fail(reason: str) -> int:
    print(f"error: {reason}", file=sys.stderr)
    return 1


COMMANDS = {
    "maze": cmd_experiment,
    "cartpole": cmd_experiment,
    "predprey": cmd_experiment,
    "pretrain-models": cmd_pretrain,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
