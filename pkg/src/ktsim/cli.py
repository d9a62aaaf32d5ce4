"""Command-line entry points: data generation, training, batch simulation,
reporting, replay verification, and the interactive session server."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import bkt, dkt, experiment, modelio, pfa, training
from .scenario import Scenario, default_scenario, read_episode_logs, validate_scenario

SIM_CONDITIONS = ("bkt", "pfa", "dkt", experiment.ORACLE_CONDITION)


def _load_scenario(path: str | None) -> Scenario:
    if path is None:
        return default_scenario()
    with open(path, "r", encoding="utf-8") as fh:
        scenario = Scenario.from_json(fh.read())
    errors = validate_scenario(scenario)
    if errors:
        raise SystemExit(f"invalid scenario {path}: {'; '.join(errors)}")
    return scenario


def cmd_gen_data(args) -> int:
    scenario = _load_scenario(args.scenario)
    dataset = training.generate_dataset(
        args.n, scenario, args.seed, stop_at_mastery=not args.full_length
    )
    training.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} trajectories to {args.out}")
    return 0


def cmd_train(args) -> int:
    scenario = _load_scenario(args.scenario)
    dataset = training.load_dataset(args.data, master_seed=args.seed)
    train_set, test_set = training.split_dataset(dataset, seed=args.seed)

    if args.model == "bkt":
        model, _ = bkt.fit_em(
            training.skill_sequences(train_set.trajectories, scenario), seed=args.seed
        )
    elif args.model == "pfa":
        model, _ = pfa.fit_mle(train_set.attempt_lists(), scenario)
    elif args.model == "dkt":
        config = training.replication_dkt_config(args.seed)
        if args.hidden_size is not None:
            config = dataclasses.replace(config, hidden_size=args.hidden_size)
        if args.epochs is not None:
            config = dataclasses.replace(config, max_epochs=args.epochs)
        if args.patience is not None:
            config = dataclasses.replace(config, patience=args.patience)
        model, _ = dkt.fit_bptt(train_set.attempt_lists(), scenario.num_tasks, config)
    else:
        raise SystemExit(f"unknown model {args.model}")

    modelio.save_model(model, args.out)
    accuracy = training.evaluate_accuracy(model, test_set, scenario)
    report = {
        "model": args.model,
        "out": str(args.out),
        "train_students": len(train_set),
        "test_students": len(test_set),
        "test_accuracy": accuracy,
    }
    print(json.dumps(report, indent=2))
    return 0


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = None
    if args.model != experiment.ORACLE_CONDITION:
        model = modelio.load_model(modelio.default_model_path(args.models_dir, args.model))
    result, logs = experiment.run_condition(args.model, model, args.n, scenario, args.seed)

    log_path = out_dir / f"{args.model}.jsonl"
    with open(log_path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.to_json_line() + "\n")
    scenario_path = out_dir / "scenario.json"
    if not scenario_path.exists():
        scenario_path.write_text(scenario.to_json(), encoding="utf-8")
    print(json.dumps(result.summary(), indent=2))
    return 0


def cmd_report(args) -> int:
    in_dir = Path(args.in_dir)
    scenario_path = in_dir / "scenario.json"
    if args.scenario is not None:
        scenario = _load_scenario(args.scenario)
    elif scenario_path.exists():
        scenario = Scenario.from_json(scenario_path.read_text(encoding="utf-8"))
    else:
        scenario = default_scenario()

    results = {}
    master_seed = 0
    for path in sorted(in_dir.glob("*.jsonl")):
        logs = read_episode_logs(path)
        if not logs:
            continue
        condition = logs[0].condition
        master_seed = logs[0].rng_seed[0]
        metrics = [experiment.episode_metrics(log, scenario) for log in logs]
        results[condition] = experiment.ConditionResult(condition, scenario.max_steps, metrics)
    if not results:
        raise SystemExit(f"no episode logs found in {in_dir}")
    summary = experiment.emit_report(results, scenario, master_seed, args.out)
    for name in sorted(summary["conditions"]):
        row = summary["conditions"][name]
        print(
            f"{name}: median_stop={row['median_steps_to_stop']} "
            f"median_mastery={row['median_steps_to_mastery']} "
            f"premature={row['premature_rate']:.3f} capped={row['cap_rate']:.3f}"
        )
    return 0


def cmd_replay(args) -> int:
    scenario = _load_scenario(args.scenario)
    models = {}
    if args.models_dir is not None:
        models = modelio.load_models_dir(args.models_dir)
    failures = 0
    logs = read_episode_logs(args.log)
    for i, log in enumerate(logs):
        model = models.get(log.condition)
        mismatches = experiment.replay_episode_log(log, scenario, model)
        if mismatches:
            failures += 1
            print(f"log {i} ({log.condition}): MISMATCH: {'; '.join(mismatches)}")
        else:
            print(f"log {i} ({log.condition}): ok ({log.steps_to_stop} steps)")
    print(f"replayed {len(logs)} episodes, {failures} mismatched")
    return 1 if failures else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    scenario = _load_scenario(args.scenario)
    models = modelio.load_models_dir(args.models_dir)
    app = create_app(models, scenario, log_path=args.log, master_seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ktsim")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="simulate random-choice training students")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", default=None)
    p.add_argument(
        "--full-length",
        action="store_true",
        help="run every episode to the step cap instead of stopping at mastery",
    )
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="fit one model family and report held-out accuracy")
    p.add_argument("--data", required=True)
    p.add_argument("--model", choices=("bkt", "pfa", "dkt"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-size", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="run closed-loop episodes for one condition")
    p.add_argument("--model", choices=SIM_CONDITIONS, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--models-dir", default="models")
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="aggregate episode logs into a report")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scenario", default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("replay", help="verify persisted logs replay exactly")
    p.add_argument("--log", required=True)
    p.add_argument("--scenario", default=None)
    p.add_argument("--models-dir", default=None)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("serve", help="run the interactive session service")
    p.add_argument("--models-dir", required=True)
    p.add_argument("--scenario", default=None)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log", default="sessions.jsonl")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
