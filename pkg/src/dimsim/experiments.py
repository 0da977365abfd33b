"""Scenarios, metrics, parameter sweeps and report generation."""

from __future__ import annotations

import configparser
import csv
import io
import itertools
import math
import statistics
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from dimsim.baselines import (
    AdaptiveController,
    FixedTimeController,
    V2ICController,
    WebsterInputs,
    published_plan,
    webster_plan,
)
from dimsim.baselines.signals import GREEN_SPLIT_NOTE, GREEN_300_NOTE
from dimsim.dim import DimController, verify_deadlock_free
from dimsim.engine import Engine, EngineConfig, SimulationAbort
from dimsim.harmony import default_harmony
from dimsim.topology import KMH, IntersectionSpec, arm_index, arm_label

CONTROLLERS = ("DIM", "FTS", "ATS", "V2IC")
SIMPLIFIED = {"ATS", "V2IC"}
PAPER_DENSITIES = (150, 200, 250, 300, 350)
NAMED_RATIOS = {"balanced": None, "4:3:2:1": (4, 3, 2, 1), "4:1:4:1": (4, 1, 4, 1)}


class ConfigError(ValueError):
    pass


def parse_ratio(text: str | None) -> tuple[float, ...] | None:
    if text is None or text.strip().lower() in ("", "balanced"):
        return None
    try:
        weights = tuple(float(w) for w in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad ratio {text!r}") from exc
    if any(w <= 0 for w in weights):
        raise ConfigError("ratio weights must be positive")
    return weights


def ratio_label(weights: Sequence[float] | None) -> str:
    if weights is None:
        return "balanced"
    return ":".join(f"{w:g}" for w in weights)


@dataclass(frozen=True)
class ScenarioConfig:
    n_arms: int = 4
    controller: str = "DIM"
    density: float = 350.0
    ratio: tuple[float, ...] | None = None
    # "total": per-lane densities rescaled so their sum is n_arms * density;
    # "weights": each lane gets density * weight.
    ratio_mode: str = "total"
    # "demand" (busiest arm first, ties alphabetical), "alphabetical", or labels like "b,a,c,d"
    priority: str = "demand"
    seed: int = 1
    horizon: float = 3600.0
    warmup: float = 300.0
    dt: float = 0.1
    turn_ratios: tuple[float, ...] | None = None
    signal_timing: str = "webster"
    strict_gate: bool = False
    ats_min_factor: float = 0.5
    ats_max_factor: float = 2.0
    ats_increment: float = 1.0
    ats_skip_empty: bool = False
    v2i_range: float = 200.0
    v2i_slack: float = 1.0
    arm_length: float = 500.0
    red_len: float = 30.0
    yellow_len: float = 6.0
    green_len: float = 2.0
    speed_limit_kmh: float = 40.0
    red_zone_speed_kmh: float = 20.0
    box_radius: float = 10.0
    check_invariants: bool = True

    def __post_init__(self) -> None:
        if self.controller not in CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}; choose from {', '.join(CONTROLLERS)}")
        if self.n_arms < 3:
            raise ConfigError("n_arms must be >= 3")
        if self.density < 0:
            raise ConfigError("density must be non-negative")
        if self.ratio is not None:
            if len(self.ratio) != self.n_arms:
                raise ConfigError(f"ratio needs {self.n_arms} weights")
            if any(w <= 0 for w in self.ratio):
                raise ConfigError("ratio weights must be positive")
        if self.ratio_mode not in ("total", "weights"):
            raise ConfigError("ratio_mode must be 'total' or 'weights'")
        if self.signal_timing not in ("webster", "table"):
            raise ConfigError("signal_timing must be 'webster' or 'table'")
        if not 0 <= self.warmup < self.horizon:
            raise ConfigError("need 0 <= warmup < horizon")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        self.priority_order()

    @property
    def spec(self) -> IntersectionSpec:
        return IntersectionSpec(self.n_arms, self.arm_length, self.red_len, self.yellow_len, self.green_len,
                                self.speed_limit_kmh * KMH, self.red_zone_speed_kmh * KMH, self.box_radius)

    def lane_densities(self) -> list[float]:
        n = self.n_arms
        if self.ratio is None:
            return [float(self.density)] * n
        if self.ratio_mode == "weights":
            return [self.density * w for w in self.ratio]
        total = sum(self.ratio)
        return [n * self.density * w / total for w in self.ratio]

    def priority_order(self) -> tuple[int, ...]:
        n = self.n_arms
        p = self.priority.strip().lower()
        if p == "alphabetical":
            return tuple(range(n))
        if p == "demand":
            w = self.ratio or (1.0,) * n
            return tuple(sorted(range(n), key=lambda a: (-w[a], a)))
        try:
            order = tuple(arm_index(tok.strip()) for tok in p.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad priority {self.priority!r}") from exc
        if sorted(order) != list(range(n)):
            raise ConfigError("priority must list every arm once")
        return order


def build_controller(cfg: ScenarioConfig):
    if cfg.controller == "DIM":
        return DimController(cfg.priority_order(), cfg.strict_gate)
    if cfg.controller == "V2IC":
        return V2ICController(cfg.v2i_range, cfg.v2i_slack)
    if cfg.signal_timing == "table":
        plan = published_plan(cfg.density, cfg.n_arms)
    else:
        plan = webster_plan(WebsterInputs.from_densities(cfg.lane_densities()))
    if cfg.controller == "FTS":
        return FixedTimeController(plan)
    return AdaptiveController(plan, cfg.ats_min_factor, cfg.ats_max_factor, cfg.ats_increment, cfg.ats_skip_empty)


def build_engine(cfg: ScenarioConfig) -> Engine:
    ecfg = EngineConfig(spec=cfg.spec, densities=cfg.lane_densities(), turn_ratios=cfg.turn_ratios,
                        seed=cfg.seed, dt=cfg.dt, check_invariants=cfg.check_invariants)
    return Engine(ecfg, build_controller(cfg), default_harmony(cfg.n_arms))


@dataclass
class Metrics:
    n_arms: int
    travel_times: list[float] = field(default_factory=list)
    waiting_times: list[float] = field(default_factory=list)
    arms: list[int] = field(default_factory=list)
    throughput: float = 0.0
    unfinished: int = 0
    spawned: int = 0
    forced_latches: int = 0
    max_yellow: int = 0

    @property
    def count(self) -> int:
        return len(self.travel_times)

    @property
    def mean_travel(self) -> float:
        return statistics.fmean(self.travel_times) if self.travel_times else 0.0

    @property
    def mean_wait(self) -> float:
        return statistics.fmean(self.waiting_times) if self.waiting_times else 0.0

    def lane_counts(self) -> list[int]:
        counts = [0] * self.n_arms
        for a in self.arms:
            counts[a] += 1
        return counts

    def lane_wait(self) -> list[float]:
        sums = [0.0] * self.n_arms
        for a, w in zip(self.arms, self.waiting_times):
            sums[a] += w
        return [s / c if c else 0.0 for s, c in zip(sums, self.lane_counts())]


def collect_metrics(engine: Engine, warmup: float, horizon: float) -> Metrics:
    m = Metrics(engine.n, spawned=engine.spawned, forced_latches=engine.forced_latches,
                max_yellow=engine.max_yellow)
    exits_in_window = 0
    for r in engine.records:
        if r.exit_time >= warmup:
            exits_in_window += 1
        if r.spawn_time < warmup:
            continue
        m.travel_times.append(r.travel_time)
        m.waiting_times.append(r.wait)
        m.arms.append(r.arm)
    m.unfinished = sum(1 for v in engine.vehicles() if v.spawn_time >= warmup)
    m.unfinished += sum(1 for q in engine.pending for item in q if item[0] >= warmup)
    m.throughput = exits_in_window * 3600.0 / (horizon - warmup)
    return m


def run_scenario(cfg: ScenarioConfig, trace=None, trace_every: float = 1.0) -> Metrics:
    engine = build_engine(cfg)
    if trace is not None:
        engine.enable_trace(trace, trace_every)
    engine.run_until(cfg.horizon)
    return collect_metrics(engine, cfg.warmup, cfg.horizon)


# -- sweeps --------------------------------------------------------------------

@dataclass
class RunSummary:
    n_arms: int
    vehicles: int
    mean_wait: float
    mean_travel: float
    throughput: float
    unfinished: int
    forced_latches: int
    lane_wait: list[float]

    @classmethod
    def of(cls, m: Metrics) -> "RunSummary":
        return cls(m.n_arms, m.count, m.mean_wait, m.mean_travel, m.throughput, m.unfinished,
                   m.forced_latches, m.lane_wait())


@dataclass
class RunRow:
    controller: str
    n_arms: int
    density: float
    ratio: str
    seed: int
    metrics: RunSummary | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.metrics is not None


@dataclass
class Cell:
    controller: str
    n_arms: int
    density: float
    ratio: str
    runs: int
    failures: int
    wait_mean: float
    wait_std: float
    travel_mean: float
    travel_std: float
    throughput_mean: float
    lane_wait: list[float]


def run_sweep(base: ScenarioConfig, densities: Iterable[float], controllers: Iterable[str],
              ratios: Iterable[tuple[float, ...] | None], seeds: Iterable[int],
              arms: Iterable[int] | None = None, progress=None) -> list[RunRow]:
    densities, controllers, ratios, seeds = list(densities), list(controllers), list(ratios), list(seeds)
    arms = [base.n_arms] if arms is None else list(arms)
    if not (densities and controllers and ratios and seeds and arms):
        raise ConfigError("every sweep axis needs at least one value")
    rows = []
    for ctrl, n, ratio, dens, seed in itertools.product(controllers, arms, ratios, densities, seeds):
        row = RunRow(ctrl, n, float(dens), ratio_label(ratio), seed)
        try:
            cfg = replace(base, controller=ctrl, n_arms=n, ratio=ratio, density=float(dens), seed=seed)
            row.metrics = RunSummary.of(run_scenario(cfg))
        except (SimulationAbort, ValueError) as exc:
            row.error = f"{type(exc).__name__}: {exc}".splitlines()[0]
        rows.append(row)
        if progress is not None:
            progress(row)
    return rows


def _std(xs: Sequence[float]) -> float:
    return statistics.stdev(xs) if len(xs) > 1 else 0.0


def aggregate(rows: Sequence[RunRow]) -> list[Cell]:
    groups: dict[tuple, list[RunRow]] = {}
    for r in rows:
        groups.setdefault((r.controller, r.n_arms, r.density, r.ratio), []).append(r)
    cells = []
    for (ctrl, n, dens, ratio), rs in groups.items():
        good = [r.metrics for r in rs if r.ok]
        waits = [m.mean_wait for m in good]
        travels = [m.mean_travel for m in good]
        lanes = [statistics.fmean(m.lane_wait[a] for m in good) if good else math.nan for a in range(n)]
        cells.append(Cell(ctrl, n, dens, ratio, len(good), len(rs) - len(good),
                          statistics.fmean(waits) if good else math.nan, _std(waits),
                          statistics.fmean(travels) if good else math.nan, _std(travels),
                          statistics.fmean(m.throughput for m in good) if good else math.nan, lanes))
    return cells


# -- tables and reports ----------------------------------------------------------

RUN_COLUMNS = ["controller", "n_arms", "density", "ratio", "seed", "status", "vehicles", "mean_wait",
               "mean_travel", "throughput", "unfinished", "forced_latches"] + \
              [f"wait_{arm_label(i)}" for i in range(5)]


def _f(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def _exact(x: float) -> str:
    # shortest text that reads back to the same float
    return repr(float(x))


def runs_table(rows: Sequence[RunRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(RUN_COLUMNS)
    for r in rows:
        base = [r.controller, r.n_arms, f"{r.density:g}", r.ratio, r.seed]
        if not r.ok:
            w.writerow(base + [f"error: {r.error}"] + [""] * (len(RUN_COLUMNS) - 6))
            continue
        m = r.metrics
        lanes = m.lane_wait + [math.nan] * (5 - m.n_arms)
        w.writerow(base + ["ok", m.vehicles, _exact(m.mean_wait), _exact(m.mean_travel), _exact(m.throughput),
                           m.unfinished, m.forced_latches] + [_exact(x) for x in lanes[:5]])
    return buf.getvalue()


def read_runs_table(text: str) -> list[RunRow]:
    """Rebuild run rows (means only) from :func:`runs_table` output."""
    rows = []
    for rec in csv.DictReader(io.StringIO(text), delimiter="\t"):
        row = RunRow(rec["controller"], int(rec["n_arms"]), float(rec["density"]), rec["ratio"], int(rec["seed"]))
        if rec["status"] != "ok":
            row.error = rec["status"].removeprefix("error: ")
        else:
            n = row.n_arms
            row.metrics = RunSummary(n, int(rec["vehicles"]), float(rec["mean_wait"]), float(rec["mean_travel"]),
                                     float(rec["throughput"]), int(rec["unfinished"]),
                                     int(rec["forced_latches"]),
                                     [float(rec[f"wait_{arm_label(i)}"]) for i in range(n)])
        rows.append(row)
    return rows


CELL_COLUMNS = ["controller", "n_arms", "density", "ratio", "runs", "failures", "wait_mean", "wait_std",
                "travel_mean", "travel_std", "throughput_mean", "note"]


def cells_table(cells: Sequence[Cell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, delimiter="\t", lineterminator="\n")
    w.writerow(CELL_COLUMNS)
    for c in cells:
        note = "simplified reimplementation" if c.controller in SIMPLIFIED else ""
        w.writerow([c.controller, c.n_arms, f"{c.density:g}", c.ratio, c.runs, c.failures, _f(c.wait_mean),
                    _f(c.wait_std), _f(c.travel_mean), _f(c.travel_std), _f(c.throughput_mean), note])
    return buf.getvalue()


def _find(cells, ctrl, n=4, dens=350.0, ratio="balanced"):
    for c in cells:
        if (c.controller, c.n_arms, c.density, c.ratio) == (ctrl, n, dens, ratio):
            return c
    return None


def summary_text(cells: Sequence[Cell]) -> str:
    out = ["Simulation summary", "=================="]
    out.append("")
    out.append("Controller means (balanced demand):")
    for c in sorted(cells, key=lambda c: (c.ratio, c.n_arms, c.controller, c.density)):
        tag = "  [simplified reimplementation]" if c.controller in SIMPLIFIED else ""
        out.append(f"  {c.controller:5s} {c.n_arms}-way {c.ratio:9s} {c.density:5g} PCU/h/lane: "
                   f"wait {c.wait_mean:8.2f} +/- {c.wait_std:6.2f} s, travel {c.travel_mean:8.2f} "
                   f"+/- {c.travel_std:6.2f} s ({c.runs} runs, {c.failures} failed){tag}")

    dim, v2i = _find(cells, "DIM"), _find(cells, "V2IC")
    out.append("")
    out.append("Comparisons at 350 PCU/h/lane, 4-way, balanced:")
    if dim and v2i and dim.travel_mean > 0:
        out.append(f"  V2IC / DIM travel time ratio: {v2i.travel_mean / dim.travel_mean:.3f}")
        if v2i.wait_mean > 0:
            out.append(f"  DIM / V2IC waiting time ratio: {dim.wait_mean / v2i.wait_mean:.3f}")
    for other in ("FTS", "ATS"):
        o = _find(cells, other)
        if dim and o and dim.wait_mean > 0:
            out.append(f"  {other} / DIM waiting time ratio: {o.wait_mean / dim.wait_mean:.3f}")
    if not dim:
        out.append("  (no DIM cell at 350 in these results)")

    lane_rows = [c for c in cells if c.controller == "DIM" and c.density == 350 and c.ratio == "balanced"]
    if lane_rows:
        out.append("")
        out.append("Lane-wise mean waiting time (s), DIM at 350 PCU/h/lane:")
        out.append("  arms  " + "  ".join(f"{arm_label(i):>8s}" for i in range(5)))
        for c in sorted(lane_rows, key=lambda c: c.n_arms):
            vals = "  ".join(f"{x:8.3f}" for x in c.lane_wait)
            out.append(f"  {c.n_arms}-way {vals}")

    out.append("")
    out.append("Notes:")
    out.append("  ATS and V2IC are simplified reimplementations of the cited controllers.")
    out.append("  " + GREEN_SPLIT_NOTE)
    out.append("  " + GREEN_300_NOTE)
    return "\n".join(out) + "\n"


def deadlock_text(arms: Iterable[int] = (3, 4, 5)) -> str:
    return "\n".join(verify_deadlock_free(n, default_harmony(n)).summary() for n in arms) + "\n"


def emit_report(rows: Sequence[RunRow], outdir: str | Path, arms: Iterable[int] = (3, 4, 5)) -> dict[str, Path]:
    if not rows:
        raise ValueError("no results to report")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = aggregate(rows)
    files = {
        "runs": outdir / "runs.tsv",
        "cells": outdir / "cells.tsv",
        "summary": outdir / "summary.txt",
        "deadlock": outdir / "deadlock.txt",
    }
    files["runs"].write_text(runs_table(rows))
    files["cells"].write_text(cells_table(cells))
    files["summary"].write_text(summary_text(cells))
    files["deadlock"].write_text(deadlock_text(arms))
    return files


# -- config files ------------------------------------------------------------------

DEFAULT_CONFIG = """\
# Balanced 4-way comparison grid.
[scenario]
n_arms = 4
controller = DIM
density = 350
ratio = balanced
priority = demand
seed = 1
horizon = 3600
warmup = 300
dt = 0.1
signal_timing = webster

[sweep]
controllers = DIM, FTS, ATS, V2IC
densities = 150, 200, 250, 300, 350
ratios = balanced
seeds = 1, 2, 3, 4, 5
arms = 4
"""

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _coerce(name: str, raw: str):
    ftype = {f.name: f.type for f in fields(ScenarioConfig)}[name]
    raw = raw.strip()
    if name in ("ratio", "turn_ratios"):
        if name == "ratio":
            return parse_ratio(raw)
        return None if raw.lower() in ("", "uniform", "none") else tuple(float(x) for x in raw.split(","))
    if ftype == "bool":
        try:
            return _BOOL[raw.lower()]
        except KeyError as exc:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}") from exc
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def scenario_from_mapping(values: dict[str, str], base: ScenarioConfig | None = None) -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for k, v in values.items():
        try:
            kwargs[k] = _coerce(k, v)
        except ValueError as exc:
            raise ConfigError(f"{k}: {exc}") from exc
    return replace(base or ScenarioConfig(), **kwargs)


@dataclass
class SweepGrid:
    controllers: list[str]
    densities: list[float]
    ratios: list[tuple[float, ...] | None]
    seeds: list[int]
    arms: list[int]


def _split(raw: str) -> list[str]:
    return [x.strip() for x in raw.replace(";", ",").split(",") if x.strip()]


def load_config(text: str | None = None) -> tuple[ScenarioConfig, SweepGrid]:
    """Parse an INI-style config; missing keys fall back to the embedded default."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string(DEFAULT_CONFIG)
    if text is not None:
        parser.read_string(text)
    scenario = scenario_from_mapping(dict(parser["scenario"]))
    sw = parser["sweep"]
    grid = SweepGrid(
        controllers=[c.upper() for c in _split(sw["controllers"])],
        densities=[float(x) for x in _split(sw["densities"])],
        ratios=[parse_ratio(x) for x in _split(sw["ratios"])],
        seeds=[int(x) for x in _split(sw["seeds"])],
        arms=[int(x) for x in _split(sw["arms"])],
    )
    return scenario, grid


def scenario_dict(cfg: ScenarioConfig) -> dict:
    d = asdict(cfg)
    d["ratio"] = ratio_label(cfg.ratio)
    return d
