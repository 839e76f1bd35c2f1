"""Operator command line: build pipelines, serve, replay, benchmark.

Every subcommand is a thin wrapper over the core modules; exit codes are
0 success, 2 usage, 3 data error, 4 runtime error. The only environment
variable honored is VEXPLORE_LOG (a logging level name).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import ingest, mining, simindex, store, synth
from .errors import DataFormatError, ParameterError, VexploreError
from .explore import Session, SessionParams
from .replay import export_session, load_script, run_bench, run_script, script_params

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vexplore", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="clean CSVs and build the binarized dataset")
    p.add_argument("--actions", required=True)
    p.add_argument("--demographics", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mine", help="mine closed groups from a dataset directory")
    p.add_argument("--dataset", required=True)
    p.add_argument("--minsup", type=int, default=None)

    p = sub.add_parser("index", help="build the similarity index over mined groups")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fraction", type=float, default=0.1)

    p = sub.add_parser("serve", help="run the HTTP exploration service")
    p.add_argument("--dataset", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", default=None, help="directory for uploaded datasets")

    p = sub.add_parser("replay", help="drive a session from a replay script")
    p.add_argument("--dataset", required=True)
    p.add_argument("--script", required=True)
    p.add_argument("--deterministic", action="store_true", help="no step budget, fixed tie-breaks")
    p.add_argument("--export", default=None, help="write the final session export here")

    p = sub.add_parser("bench", help="latency benchmark over random exploration steps")
    p.add_argument("--dataset", required=True)
    p.add_argument("--budget-ms", type=float, default=100.0)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--users", type=int, default=300)
    p.add_argument("--attributes", type=int, default=4)
    p.add_argument("--items", type=int, default=80)
    p.add_argument("--zipf", type=float, default=1.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cohorts", type=int, default=12)
    p.add_argument("--cohort-size", type=int, default=40)
    p.add_argument("--cohort-items", type=int, default=3)
    return parser


def _load_stack(dataset_dir: str, fraction: float | None = None):
    ds = store.load_dataset(dataset_dir)
    groups = store.load_groups(ds, dataset_dir)
    index = store.load_index(ds, groups, dataset_dir, fraction)
    return ds, groups, index


def cmd_ingest(args) -> int:
    schema, value_range = ingest.load_schema_file(args.schema)
    loaded = ingest.load_actions(args.actions, value_range)
    profiles = ingest.load_demographics(args.demographics, schema)
    dataset = ingest.build_dataset(loaded.records, profiles, schema)
    out = store.save_dataset(dataset, args.out)
    print(
        json.dumps(
            {
                "dataset": str(out),
                "digest": dataset.digest,
                "users": dataset.n_users,
                "tokens": dataset.n_tokens,
                "actions": len(dataset.actions),
                "dropped_action_rows": loaded.dropped,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_mine(args) -> int:
    dataset = store.load_dataset(args.dataset)
    minsup = args.minsup if args.minsup is not None else mining.default_minsup(dataset.n_users)
    groups = mining.mine_closed_groups(dataset, minsup)
    store.save_groups(groups, dataset, args.dataset)
    if len(groups) == 0:
        logging.warning("minsup %d produced no groups (universe %d)", minsup, dataset.n_users)
    print(json.dumps({"groups": len(groups), "minsup": minsup, "digest": dataset.digest}, indent=2))
    return EXIT_OK


def cmd_index(args) -> int:
    dataset = store.load_dataset(args.dataset)
    groups = store.load_groups(dataset, args.dataset)
    index = simindex.build_index(groups, args.fraction)
    store.save_index(index, dataset, groups, args.dataset)
    lengths = [len(row) for row in index.neighbors]
    print(
        json.dumps(
            {
                "groups": len(groups),
                "fraction": args.fraction,
                "max_list_length": max(lengths) if lengths else 0,
                "digest": dataset.digest,
            },
            indent=2,
        )
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server.app import create_app

    app = create_app(preload={"default": Path(args.dataset)}, data_dir=args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_replay(args) -> int:
    raw = Path(args.script).read_text(encoding="utf-8")
    steps = load_script(raw)
    overrides = script_params(raw)
    if args.deterministic:
        overrides = dict(overrides, budget_ms=None)
    params = SessionParams.from_dict(overrides)
    ds, groups, index = _load_stack(args.dataset)
    session = Session(ds, groups, index, params)
    reports = run_script(session, steps)
    for entry in reports:
        if args.deterministic:
            entry.pop("elapsed_ms", None)  # keep deterministic output byte-stable
        print(json.dumps(entry))
    memo = {
        "groups": [
            {"gid": gid, "descriptor": groups[gid].decode_descriptor(ds), "support": groups[gid].support}
            for gid in session.memo.groups
        ],
        "users": list(session.memo.users),
    }
    print(json.dumps({"memo": memo}, indent=2))
    if args.export:
        Path(args.export).write_text(export_session(session), encoding="utf-8")
    return EXIT_OK


def cmd_bench(args) -> int:
    ds, groups, index = _load_stack(args.dataset)
    report = run_bench(ds, groups, index, budget_ms=args.budget_ms, steps=args.steps, seed=args.seed)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_synth(args) -> int:
    params = synth.SynthParams(
        users=args.users,
        attributes=args.attributes,
        items=args.items,
        zipf=args.zipf,
        seed=args.seed,
        cohorts=args.cohorts,
        cohort_size=args.cohort_size,
        cohort_items=args.cohort_items,
    )
    paths = synth.write_files(params, args.out)
    print(json.dumps({name: str(p) for name, p in paths.items()}, indent=2))
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest,
    "mine": cmd_mine,
    "index": cmd_index,
    "serve": cmd_serve,
    "replay": cmd_replay,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("VEXPLORE_LOG", "WARNING").upper())
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except (DataFormatError,) as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return EXIT_DATA
    except VexploreError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return EXIT_RUNTIME if not isinstance(exc, ParameterError) else EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
