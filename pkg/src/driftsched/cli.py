"""Command-line entry point.

Run a bundled preset or a config file, fan replications out to a worker
pool, and emit final metrics, traces, plot-ready series, and figures:

    driftsched --preset fig2-tradeoff --out results/
    driftsched --config scenario.ini --slots 20000 --out results/ --format json
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from .configio import ConfigError, apply_overrides, parse_config
from .engine import ExperimentRun, collect_experiment
from .output import emit
from .presets import PRESET_NAMES, expand_preset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftsched",
        description=(
            "Slotted-time scheduling simulator for mixed deadline and "
            "minimum-throughput users under average-power budgets."
        ),
    )
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", choices=PRESET_NAMES, help="bundled experiment")
    source.add_argument("--config", metavar="PATH", help="config file (INI or JSON)")
    parser.add_argument(
        "--scheduler",
        choices=("dpc", "ldf"),
        help="filter a preset's configs / override a file config's scheduler",
    )
    parser.add_argument("--v", type=float, help="penalty weight for DPC configs")
    parser.add_argument("--slots", type=int, help="horizon in slots")
    parser.add_argument("--seed", type=int, help="base experiment seed")
    parser.add_argument("--replications", type=int, help="replications per config")
    parser.add_argument("--trace-every", type=int, help="trace sampling stride")
    parser.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="output format"
    )
    parser.add_argument("--out", default="driftsched-out", help="output directory")
    parser.add_argument(
        "--workers", type=int, default=None, help="worker processes (default: cpu count)"
    )
    parser.add_argument(
        "--plot",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="render figures alongside the data files",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.preset:
            configs = expand_preset(
                args.preset,
                v=args.v,
                slots=args.slots,
                seed=args.seed,
                replications=args.replications,
                trace_every=args.trace_every,
            )
            if args.scheduler:
                configs = apply_overrides(
                    configs, scheduler=args.scheduler, from_preset=True
                )
        else:
            configs = parse_config(args.config)
            configs = apply_overrides(
                configs,
                scheduler=args.scheduler,
                v=args.v,
                slots=args.slots,
                seed=args.seed,
                replications=args.replications,
                trace_every=args.trace_every,
            )
    except (ConfigError, ValueError) as exc:
        print(f"driftsched: error: {exc}", file=sys.stderr)
        return 2

    total_runs = sum(c.replications for c in configs)
    print(f"running {len(configs)} config(s), {total_runs} run(s) total")
    runs: list[ExperimentRun] = []
    started = time.perf_counter()
    import os

    workers = args.workers if args.workers is not None else (os.cpu_count() or 1)
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for config in configs:
            t0 = time.perf_counter()
            runs.append(collect_experiment(config, executor=pool, workers=workers))
            print(
                f"  {config.label}: {config.replications} replication(s) "
                f"in {time.perf_counter() - t0:.1f}s"
            )
    finally:
        if pool is not None:
            pool.shutdown()

    written = emit(
        runs, args.out, fmt=args.format, preset=args.preset, plot=args.plot
    )
    print(f"finished in {time.perf_counter() - started:.1f}s; wrote:")
    for path in written:
        print(f"  {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
