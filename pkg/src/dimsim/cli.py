"""Command-line entry point: ``dimsim <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from dimsim import harmony
from dimsim.dim import verify_deadlock_free
from dimsim.experiments import (
    SIMPLIFIED,
    ConfigError,
    aggregate,
    cells_table,
    emit_report,
    load_config,
    parse_ratio,
    ratio_label,
    read_runs_table,
    run_scenario,
    run_sweep,
    summary_text,
)


def _scenario_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="INI scenario file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--density", help="PCU/hr/lane (comma list for sweep)")
    p.add_argument("--controller", help="DIM, FTS, ATS or V2IC (comma list for sweep)")
    p.add_argument("--ratio", help="'balanced' or weights like 4:3:2:1 (comma list for sweep)")
    p.add_argument("--arms", help="number of arms (comma list for sweep)")
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)


def _load(args):
    text = args.config.read_text() if args.config else None
    scenario, grid = load_config(text)
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.seed is not None:
        overrides["seed"] = args.seed
        grid.seeds = [args.seed]
    if args.density:
        grid.densities = [float(x) for x in args.density.split(",")]
        overrides["density"] = grid.densities[0]
    if args.controller:
        grid.controllers = [c.strip().upper() for c in args.controller.split(",")]
        overrides["controller"] = grid.controllers[0]
    if args.ratio:
        grid.ratios = [parse_ratio(r) for r in args.ratio.split(",")]
        overrides["ratio"] = grid.ratios[0]
    if args.arms:
        grid.arms = [int(x) for x in args.arms.split(",")]
        overrides["n_arms"] = grid.arms[0]
    return replace(scenario, **overrides), grid


def cmd_run(args) -> int:
    cfg, _ = _load(args)
    if args.trace:
        with open(args.trace, "w") as fh:
            m = run_scenario(cfg, trace=fh, trace_every=args.trace_every)
    else:
        m = run_scenario(cfg)
    tag = " (simplified reimplementation)" if cfg.controller in SIMPLIFIED else ""
    print(f"controller    {cfg.controller}{tag}")
    print(f"arms          {cfg.n_arms}")
    print(f"density       {cfg.density:g} PCU/hr/lane ({ratio_label(cfg.ratio)})")
    print(f"seed          {cfg.seed}")
    print(f"vehicles      {m.count} measured, {m.unfinished} unfinished at horizon")
    print(f"mean wait     {m.mean_wait:.3f} s")
    print(f"mean travel   {m.mean_travel:.3f} s")
    print(f"throughput    {m.throughput:.1f} veh/hr")
    lanes = "  ".join(f"{chr(ord('a') + i)}={w:.3f}" for i, w in enumerate(m.lane_wait()))
    print(f"lane waits    {lanes}")
    return 0


def cmd_sweep(args) -> int:
    base, grid = _load(args)

    def progress(row):
        status = "ok" if row.ok else row.error
        print(f"  {row.controller:5s} {row.n_arms}-way {row.ratio:9s} {row.density:5g} seed {row.seed}: {status}",
              file=sys.stderr)

    rows = run_sweep(base, grid.densities, grid.controllers, grid.ratios, grid.seeds, grid.arms,
                     progress=progress if args.verbose else None)
    files = emit_report(rows, args.out, arms=sorted(set(grid.arms) | {3, 4, 5}))
    print(cells_table(aggregate(rows)), end="")
    for name, path in files.items():
        print(f"wrote {name}: {path}", file=sys.stderr)
    return 0 if all(r.ok for r in rows) else 1


def cmd_report(args) -> int:
    rows = read_runs_table(args.runs.read_text())
    if not rows:
        raise ConfigError("results table has no rows")
    print(summary_text(aggregate(rows)), end="")
    return 0


def cmd_verify(args) -> int:
    rep = verify_deadlock_free(args.n, harmony.default_harmony(args.n))
    print(rep.summary())
    return 0 if rep.ok else 1


def cmd_gen_harmony(args) -> int:
    H = harmony.default_harmony(args.n) if args.canonical else harmony.generate_harmony(args.n)
    if args.out:
        harmony.save(H, args.out)
    else:
        print(harmony.dumps(H), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dimsim", description="Intersection management simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a single scenario")
    _scenario_flags(p)
    p.add_argument("--trace", type=Path, help="write a per-vehicle trace to this file")
    p.add_argument("--trace-every", type=float, default=1.0, help="trace sampling interval (s)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of scenarios and write a report")
    _scenario_flags(p)
    p.add_argument("--out", type=Path, default=Path("results"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize an existing results table")
    p.add_argument("runs", type=Path, help="runs.tsv produced by sweep")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("verify-deadlock", help="exhaustively check the decision rule")
    p.add_argument("--n", type=int, default=4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen-harmony", help="write a harmony matrix")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--out", type=Path)
    p.add_argument("--canonical", action="store_true",
                   help="use the bundled table where one exists instead of the generator")
    p.set_defaults(func=cmd_gen_harmony)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
