"""Command-line front end: run scenarios, plot curves, validate layouts."""

from __future__ import annotations

import argparse
import glob
import os
import re
import sys
from dataclasses import replace

from .experiments import (
    METRICS,
    ScenarioConfig,
    _read_records_csv,
    aggregate,
    emit_plot,
    load_config,
    run_scenario,
    scenario_preset,
)
from .layout import LayoutError, load_layout


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factoryrl",
        description="Smart-factory multi-agent RL experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one scenario and write records")
    run.add_argument("--scenario", type=int, choices=(1, 2, 3, 4))
    run.add_argument("--config", help="JSON scenario config (overrides preset fields)")
    run.add_argument("--agents", type=int, dest="agents")
    run.add_argument("--episodes", type=int)
    run.add_argument("--seeds", type=int, help="number of independent seeds")
    run.add_argument("--scheme", action="append", help="repeatable; reward scheme name")
    run.add_argument("--algo", action="append", help="repeatable; dqn, vdn, or qmix")
    run.add_argument("--layout", help="JSON layout file")
    run.add_argument("--step-limit", type=int, dest="step_limit")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=1, help="parallel run workers")

    plot = sub.add_parser("plot", help="plot recorded training curves as SVG")
    plot.add_argument("--in", dest="in_dir", required=True, help="directory with records_*.csv")
    plot.add_argument("--metric", required=True, choices=sorted(METRICS))
    plot.add_argument("--out", required=True, help="output SVG file")
    plot.add_argument("--smooth", type=int, default=1, help="moving-average window")

    validate = sub.add_parser("validate-layout", help="check a layout document")
    validate.add_argument("file", help="JSON layout file")
    return parser


def _cmd_run(args) -> int:
    if args.config:
        cfg = load_config(args.config)
    elif args.scenario:
        cfg = scenario_preset(args.scenario)
    else:
        print("run needs --scenario or --config", file=sys.stderr)
        return 2
    changes = {}
    if args.scenario and args.config:
        changes["scenario"] = args.scenario
    if args.agents:
        changes["n_agents"] = args.agents
    if args.episodes:
        changes["episodes"] = args.episodes
    if args.seeds:
        changes["seeds"] = args.seeds
    if args.scheme:
        changes["schemes"] = tuple(args.scheme)
    if args.algo:
        changes["algorithms"] = tuple(args.algo)
    if args.step_limit:
        changes["step_limit"] = args.step_limit
    if args.layout:
        changes["layout"] = load_layout(args.layout)
    if changes:
        changes.setdefault("scenario", None)  # overrides detach preset invariants
        cfg = replace(cfg, **changes)
    cfg.validate()
    results = run_scenario(cfg, out_dir=args.out, workers=args.workers)
    episodes = cfg.episodes * len(results)
    print(f"wrote {len(results)} runs ({episodes} episodes) to {args.out}")
    return 0


_RECORD_RE = re.compile(r"records_(?P<algo>[a-z]+)_(?P<scheme>[^_]+)_seed(?P<seed>\d+)\.csv$")


def _cmd_plot(args) -> int:
    files = sorted(glob.glob(os.path.join(args.in_dir, "records_*.csv")))
    series: dict[tuple[str, str], dict[int, str]] = {}
    for path in files:
        match = _RECORD_RE.search(os.path.basename(path))
        if match:
            key = (match["algo"], match["scheme"])
            series.setdefault(key, {})[int(match["seed"])] = path
    if not series:
        print(f"no records_*.csv found in {args.in_dir}", file=sys.stderr)
        return 1
    curves = {}
    for (algo, scheme), by_seed in sorted(series.items()):
        per_seed = [_read_records_csv(by_seed[s]) for s in sorted(by_seed)]
        if len(per_seed) < 2:
            print(f"skipping {algo}/{scheme}: need >= 2 seeds for a CI", file=sys.stderr)
            continue
        curves[(args.metric, scheme, algo)] = aggregate(per_seed, args.metric)
    if not curves:
        print("nothing to plot", file=sys.stderr)
        return 1
    emit_plot(curves, args.out, metric=args.metric, smooth=args.smooth)
    print(f"wrote {args.out} ({len(curves)} series)")
    return 0


def _cmd_validate_layout(args) -> int:
    layout = load_layout(args.file)
    machines = sum(1 for c in layout.cells if c.machine_type is not None)
    print(
        f"OK: {layout.width}x{layout.height} grid, {machines} machines, "
        f"{layout.num_machine_types} types, entry {layout.entry}, exit {layout.exit}"
    )
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "plot":
            return _cmd_plot(args)
        return _cmd_validate_layout(args)
    except (LayoutError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
