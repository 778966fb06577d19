"""Command line entry points.

Configuration comes from an optional YAML file plus key=value overrides,
later sources winning:

    labelloop run-al --config runs/base.yaml al=huds al.query_size=0.02
    labelloop benchmark --strategies random,coreset --seeds 0,1,2
    labelloop serve --port 8765
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import DEFAULT_SEEDS, emit_report, make_synthetic_task, run_benchmark
from .config import (
    load_config_file,
    merge,
    parse_override,
    resolve_config,
    validate_config,
)
from .errors import ConfigError, LabelLoopError
from .orchestrator import run_active_learning


def _collect_doc(config_path: str | None, overrides: list[str]) -> dict:
    doc: dict = {}
    if config_path:
        doc = load_config_file(config_path)
    pairs = dict(parse_override(item) for item in overrides)
    return merge(doc, pairs)


def _cmd_run_al(args: argparse.Namespace) -> int:
    doc = _collect_doc(args.config, args.overrides)
    config = resolve_config(doc)
    result = run_active_learning(config, args.run_dir, resume=args.resume)
    print(
        json.dumps(
            {
                "stop_reason": result.stop_reason,
                "iterations": result.iterations,
                "labeled_count": result.labeled_count,
                "model_ref": result.model_ref,
                "run_dir": str(result.run_dir),
            },
            indent=2,
        )
    )
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    doc = _collect_doc(args.config, args.overrides)
    errors = validate_config(doc)
    if errors:
        for err in errors:
            print(f"{err['field']}: {err['message']}", file=sys.stderr)
        return 1
    print("configuration is valid")
    return 0


def _cmd_benchmark(args: argparse.Namespace) -> int:
    doc = _collect_doc(args.config, args.overrides)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not strategies:
        print("no strategies given", file=sys.stderr)
        return 1
    seeds = (
        [int(s) for s in args.seeds.split(",") if s.strip()]
        if args.seeds
        else list(DEFAULT_SEEDS)
    )
    task = None
    if args.synthetic:
        task = make_synthetic_task(
            num_clusters=args.clusters, per_cluster=args.per_cluster
        )
        doc.setdefault("labeller", "oracle")
        doc.setdefault("evaluation.metrics", [])
        doc.setdefault("al.test_fraction", 0.0)
    out_dir = Path(args.out_dir)
    curves = run_benchmark(
        doc,
        strategies,
        seeds,
        work_dir=out_dir / "runs",
        task=task,
        keep_runs=args.keep_runs,
    )
    metrics = (
        ["cluster_coverage"]
        if args.synthetic
        else [m.strip() for m in args.metrics.split(",") if m.strip()]
    )
    emit_report(
        curves, metrics, out_dir / "curves.csv", out_dir / "summary.json"
    )
    incomplete = [c for c in curves if not c.complete]
    print(f"wrote {out_dir / 'curves.csv'} and {out_dir / 'summary.json'}")
    if incomplete:
        for curve in incomplete:
            print(
                f"warning: {curve.strategy}/seed{curve.seed} did not finish",
                file=sys.stderr,
            )
        return 1
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    from . import server

    argv = ["--host", args.host, "--port", str(args.port), "--work-dir", args.work_dir]
    if args.ui_dir:
        argv += ["--ui-dir", args.ui_dir]
    server.main(argv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="labelloop",
        description="active-learning annotation orchestration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run-al", help="run the annotation loop")
    run_p.add_argument("--config", help="YAML config file")
    run_p.add_argument("--run-dir", default="run", help="run directory")
    run_p.add_argument(
        "--resume", action="store_true", help="resume from the run directory"
    )
    run_p.add_argument("overrides", nargs="*", help="key=value overrides")
    run_p.set_defaults(fn=_cmd_run_al)

    val_p = sub.add_parser("validate", help="check a configuration")
    val_p.add_argument("--config", help="YAML config file")
    val_p.add_argument("overrides", nargs="*", help="key=value overrides")
    val_p.set_defaults(fn=_cmd_validate)

    bench_p = sub.add_parser("benchmark", help="compare strategies over seeds")
    bench_p.add_argument("--config", help="YAML config file")
    bench_p.add_argument(
        "--strategies", default="random", help="comma-separated strategy ids"
    )
    bench_p.add_argument("--seeds", default="", help="comma-separated seeds")
    bench_p.add_argument("--out-dir", default="bench", help="report directory")
    bench_p.add_argument(
        "--metrics", default="relaxed_exact_match", help="metrics for the report"
    )
    bench_p.add_argument(
        "--synthetic",
        action="store_true",
        help="use the built-in synthetic clustering task",
    )
    bench_p.add_argument("--clusters", type=int, default=20)
    bench_p.add_argument("--per-cluster", type=int, default=10)
    bench_p.add_argument(
        "--keep-runs", action="store_true", help="keep per-run directories"
    )
    bench_p.add_argument("overrides", nargs="*", help="key=value overrides")
    bench_p.set_defaults(fn=_cmd_benchmark)

    serve_p = sub.add_parser("serve", help="start the control API server")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8765)
    serve_p.add_argument("--work-dir", default="runs")
    serve_p.add_argument("--ui-dir", default=None)
    serve_p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        for err in exc.field_errors or [{"field": "", "message": str(exc)}]:
            print(f"{err['field']}: {err['message']}", file=sys.stderr)
        return 2
    except LabelLoopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
