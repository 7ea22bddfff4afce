"""Command line entry points: gen, train, predict, recommend, simulate, serve.

Exit codes: 0 on success, 1 for usage errors (bad flags, missing
arguments), 2 for data errors (unreadable CSV, empty dataset, unknown
task, cyclic dependencies, corrupt model or log files).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

from hqrec import hqr, simgen
from hqrec.app.service import create_app
from hqrec.app.store import QueueStore, TaskQueueSpec, patient_from_json
from hqrec.forest.model import (
    ForestModel,
    TrainConfig,
    load_model,
    predict,
    save_model,
    train_forest,
)
from hqrec.records import (
    MODE_INTER_ARRIVAL,
    MODE_INTERVAL,
    NO_DOCTOR,
    TIMESTAMP_FORMAT,
    ColumnFormat,
    DataError,
    Gender,
    build_dataset,
    clean_and_derive,
    parse_records,
)

CSV_HEADER = (
    "patient_card_no",
    "gender",
    "age",
    "task_name",
    "department",
    "doctor_name",
    "start_time",
    "end_time",
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as exit code 1."""

    def error(self, message: str):  # noqa: A003 - argparse API
        raise _UsageError(f"{self.prog}: error: {message}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="hqrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = sub.add_parser("gen", help="generate a synthetic treatment-log CSV")
    gen.add_argument("--out", required=True, help="output CSV path")
    gen.add_argument("--days", type=int, default=30)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument(
        "--noise", type=float, default=None,
        help="override every task's corrupted-row fraction",
    )

    train = sub.add_parser("train", help="train a model for one task from a CSV")
    train.add_argument("--input", required=True, help="treatment-log CSV")
    train.add_argument("--task", required=True, help="task name to train on")
    train.add_argument("--out", required=True, help="model file to write")
    train.add_argument("--trees", type=int, default=100)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--min-leaf", type=int, default=50)
    train.add_argument("--max-depth", type=int, default=16)
    train.add_argument("--bins", type=int, default=8)
    train.add_argument("--epsilon", type=float, default=0.20)
    train.add_argument(
        "--weighting-mode", choices=("normalized", "literal"), default="normalized"
    )
    train.add_argument("--workers", type=int, default=1)
    train.add_argument(
        "--no-denoise", action="store_true", help="disable leaf denoising (ablation)"
    )
    train.add_argument(
        "--no-weighting", action="store_true",
        help="disable accuracy weighting (ablation)",
    )
    train.add_argument(
        "--inter-arrival", action="append", default=[], metavar="TASK",
        help="derive TASK durations from gaps between consecutive rows "
        "(repeatable; default: payment)",
    )

    pred = sub.add_parser("predict", help="predict treatment seconds for one patient")
    pred.add_argument("--model", required=True)
    pred.add_argument("--gender", required=True, choices=("male", "female"))
    pred.add_argument("--age", required=True, type=int)
    pred.add_argument("--department", default="")
    pred.add_argument("--doctor", default=NO_DOCTOR)
    pred.add_argument(
        "--when", default=None,
        help=f"timestamp '{TIMESTAMP_FORMAT.replace('%', '%%')}' (default: now)",
    )

    rec = sub.add_parser("recommend", help="order a patient's tasks by predicted wait")
    rec.add_argument("--models-dir", required=True)
    rec.add_argument("--queues", required=True, help="queue snapshot JSON")
    rec.add_argument("--request", required=True, help="task request JSON")

    sim = sub.add_parser("simulate", help="compare hqr vs fixed-order queueing")
    sim.add_argument("--patients", type=int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--levels", default="2,3,4,5,6", help="tasks-per-patient levels")
    sim.add_argument("--days", type=int, default=30, help="history days for training")
    sim.add_argument("--trees", type=int, default=10)
    sim.add_argument("--out", default=None, help="CSV path (default: stdout)")

    serve = sub.add_parser("serve", help="run the HTTP queue service")
    serve.add_argument("--models-dir", required=True)
    serve.add_argument("--queues", required=True, help="queue config JSON")
    serve.add_argument("--log", default=None, help="mutation log path (JSONL)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument(
        "--port", type=int, default=None,
        help="listen port (default: PORT env var or 8080)",
    )
    serve.add_argument("--when", default=None, help="freeze the service clock")
    return parser


def _parse_when(raw: str | None) -> datetime:
    if raw is None:
        return datetime.now()
    try:
        return datetime.strptime(raw, TIMESTAMP_FORMAT)
    except ValueError:
        raise DataError(f"bad timestamp {raw!r}, expected {TIMESTAMP_FORMAT}") from None


def _cmd_gen(args) -> int:
    config = simgen.GeneratorConfig(seed=args.seed, days=args.days)
    if args.noise is not None:
        config = config.with_noise(args.noise)
    records = simgen.generate_history(config)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            end = r.start_time + timedelta(seconds=r.duration_s)
            writer.writerow(
                (
                    r.patient_card_no,
                    r.gender.value,
                    r.age,
                    r.task,
                    r.department,
                    r.doctor,
                    r.start_time.strftime(TIMESTAMP_FORMAT),
                    end.strftime(TIMESTAMP_FORMAT),
                )
            )
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def _read_rows(path: str) -> list[Sequence[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def _cmd_train(args) -> int:
    rows, errors = parse_records(_read_rows(args.input), ColumnFormat())
    for index, reason in errors[:5]:
        print(f"row {index}: {reason}", file=sys.stderr)
    if errors:
        print(f"{len(errors)} malformed rows skipped", file=sys.stderr)
    tasks_present = {row.task_name for row in rows if row.task_name is not None}
    inter_arrival = set(args.inter_arrival or ["payment"])
    modes = {
        task: MODE_INTER_ARRIVAL if task in inter_arrival else MODE_INTERVAL
        for task in tasks_present
    }
    records, stats = clean_and_derive(rows, modes)
    print(stats.report(), file=sys.stderr)
    selected = [r for r in records if r.task == args.task]
    if not selected:
        raise DataError(f"no usable rows for task {args.task!r} in {args.input}")
    data = build_dataset(selected)
    config = TrainConfig(
        k=args.trees,
        min_leaf=args.min_leaf,
        max_depth=args.max_depth,
        bins=args.bins,
        accuracy_epsilon=args.epsilon,
        weighting_mode=args.weighting_mode,
        seed=args.seed,
        denoise=not args.no_denoise,
        weighting=not args.no_weighting,
    )
    model = train_forest(data, config, workers=max(1, args.workers))
    model.task = args.task
    save_model(model, args.out)
    weights = [w for _, w in model.trees]
    print(
        f"trained {config.k} trees on {data.n} rows "
        f"(mean weight {sum(weights) / len(weights):.3f}) -> {args.out}"
    )
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    when = _parse_when(args.when)
    seconds = hqr.predict_patient_time(
        model,
        hqr.PatientDescriptor("cli", Gender(args.gender), args.age),
        hqr.QueueContext(department=args.department, doctor=args.doctor, when=when),
    )
    print(f"predicted treatment time: {seconds:.0f} s ({seconds / 60.0:.1f} min)")
    return 0


def _load_models_dir(path: str) -> dict[str, ForestModel]:
    directory = Path(path)
    if not directory.is_dir():
        raise DataError(f"model directory {path!r} does not exist")
    models: dict[str, ForestModel] = {}
    for file in sorted(directory.glob("*.model")):
        model = load_model(file)
        models[model.task or file.stem] = model
    if not models:
        raise DataError(f"no .model files in {path!r}")
    return models


def _load_json(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict):
        raise DataError(f"{path}: expected a JSON object")
    return payload


def _queue_config(path: str) -> tuple[dict[str, TaskQueueSpec], dict[str, list], datetime]:
    payload = _load_json(path)
    specs: dict[str, TaskQueueSpec] = {}
    initial: dict[str, list] = {}
    for entry in payload.get("tasks", []):
        try:
            spec = TaskQueueSpec(
                task_id=entry["task_id"],
                department=entry.get("department", ""),
                doctor=entry.get("doctor", NO_DOCTOR),
                windows=int(entry.get("windows", 1)),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: bad task entry ({exc})") from None
        specs[spec.task_id] = spec
        initial[spec.task_id] = [
            patient_from_json(p) for p in entry.get("patients", [])
        ]
    if not specs:
        raise DataError(f"{path}: no tasks configured")
    return specs, initial, _parse_when(payload.get("when"))


def _cmd_recommend(args) -> int:
    models = _load_models_dir(args.models_dir)
    specs, initial, when = _queue_config(args.queues)
    request_payload = _load_json(args.request)
    patient = patient_from_json(request_payload.get("patient") or {})
    tasks = request_payload.get("tasks")
    if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
        raise DataError(f"{args.request}: tasks must be a list of task names")
    deps = tuple(
        (pair[0], pair[1]) for pair in request_payload.get("dependencies", [])
    )
    queues = {
        task_id: hqr.QueueState(
            task_id=task_id,
            context=hqr.QueueContext(spec.department, spec.doctor, when),
            windows=spec.windows,
            patients=tuple(initial[task_id]),
        )
        for task_id, spec in specs.items()
    }
    plan = hqr.recommend(
        models, queues, hqr.TaskRequest(patient=patient, tasks=tuple(tasks), dependencies=deps)
    )
    for position, entry in enumerate(plan.entries, start=1):
        print(
            f"{position}. {entry.task_id}: {entry.predicted_wait_s / 60.0:.1f} min wait, "
            f"{entry.queue_length} in queue"
        )
    return 0


def _cmd_simulate(args) -> int:
    try:
        levels = [int(level) for level in args.levels.split(",") if level.strip()]
    except ValueError:
        raise DataError(f"bad levels {args.levels!r}") from None
    if not levels:
        raise DataError("no levels given")
    gen = simgen.GeneratorConfig(seed=args.seed, days=args.days)
    history = simgen.generate_history(gen)
    models: dict[str, ForestModel] = {}
    for profile in gen.tasks:
        rows = [r for r in history if r.task == profile.task_id]
        data = build_dataset(rows)
        model = train_forest(data, TrainConfig(k=args.trees, seed=args.seed))
        model.task = profile.task_id
        models[profile.task_id] = model
    rows = simgen.compare_policies(
        models,
        simgen.SimConfig(patients=args.patients, seed=args.seed),
        gen,
        levels=levels,
    )
    table = simgen.comparison_csv(rows)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
        print(f"wrote comparison to {args.out}")
    else:
        print(table, end="")
    return 0


def _seed_store(store: QueueStore, initial: dict[str, list]) -> None:
    for task_id, patients in initial.items():
        for patient in patients:
            store.mutate(task_id, "enqueue", patient=patient)
            if patient.status == hqr.STATUS_IN_SERVICE:
                # The config says this patient already occupies a window.
                store.mutate(task_id, "start_service", patient_id=patient.patient_id)


def _cmd_serve(args) -> int:
    import uvicorn

    models = _load_models_dir(args.models_dir)
    specs, initial, when = _queue_config(args.queues)
    missing = sorted(set(specs) - set(models))
    if missing:
        raise DataError(f"no model for tasks: {', '.join(missing)}")
    store = QueueStore(specs, log_path=args.log)
    if store.revision == 0:
        # Fresh store: seed the configured patients. A replayed log already
        # contains its own enqueues, so skip seeding then.
        _seed_store(store, initial)
    clock = (lambda: when) if args.when is not None else None
    app = create_app(models, store, clock=clock)
    port = args.port if args.port is not None else int(os.environ.get("PORT", "8080"))
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "recommend": _cmd_recommend,
    "simulate": _cmd_simulate,
    "serve": _cmd_serve,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help paths
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"hqrec {args.command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
