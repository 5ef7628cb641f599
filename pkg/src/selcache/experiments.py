"""Experiment presets, seed sweeps and result files.

Every number written here comes from :mod:`selcache.metrics`,
:mod:`selcache.irm` or :mod:`selcache.tandem`; this module only expands
configurations, runs them and serialises the outcome. Output files carry
no timestamps or timings, so a rerun of the same configuration rewrites
them byte for byte.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from selcache import irm
from selcache.engine import CacheSpec, RunCounters, Scenario, Simulator, big_caches, uniform_caches
from selcache.metrics import MetricsReport, compute_report
from selcache.model import SimulationError
from selcache.selection import DEFAULT_FROZEN_PERIOD
from selcache.tandem import FIRST_POLICIES, run_tandem
from selcache.topology import (
    DEFAULT_DELAY,
    Topology,
    build_abilene,
    build_binary_tree,
    load_topology,
    router_avg,
    shortest_path_routes,
)
from selcache.traffic import TrafficProfile, sample_catalog_sizes

SCHEMA_VERSION = 1
PRESETS = ("tandem-fig3-4", "tree-fig7", "abilene-fig8", "irm-theorem1", "custom")
COMBINATIONS = ("LRU-EQU", "SEL-EQU", "LRU-BIG")
NETWORK_PRESETS = ("tree-fig7", "abilene-fig8", "custom")

DESK_DURATION = 200.0
DESK_SEEDS = (1, 2, 3)
FULL_DURATION = 1000.0
FULL_SEEDS = tuple(range(1, 11))
DESK_TANDEM_REQUESTS = 1_000_000
FULL_TANDEM_REQUESTS = 15_000_000

NETWORK_GRID = (0.05, 0.1, 0.5, 1.0, 2.5, 5.0, 10.0)
TANDEM_GRID = (10, 20, 50, 100)
IRM_ALPHAS = (0.5, 1.0, 1.5)

TREE_CONSUMERS, TREE_CONTENTS, TREE_RATE = 125, 1000, 12.5
ABILENE_CONSUMERS, ABILENE_CONTENTS, ABILENE_RATE = 100, 100, 22.0
ABILENE_ALPHAS = (0.8, 0.9, 1.0, 1.1)

RESULT_COLUMNS = ("schema_version", "preset", "combination", "cache_pct", "seed", "capacity",
                  "hit_net", "h_red", "t_red", "e_avg", "r_entered", "r_producer",
                  "evictions", "slots", "nominations", "content_requests")
SUMMARY_METRICS = ("hit_net", "h_red", "t_red", "e_avg")
CACHE_COLUMNS = ("schema_version", "preset", "combination", "cache_pct", "seed", "router", "role",
                 "policy", "capacity", "requests", "hits", "hit_ratio", "forwarded", "writes",
                 "evictions", "nominations", "collisions", "reselections", "cycles")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """What to run. ``grid`` is a list of cache sizes: percentages of the
    catalog's packet count for network presets, slot counts for the
    tandem preset and capacities ``c`` for the IRM preset."""

    preset: str = "tree-fig7"
    grid: tuple[float, ...] | None = None
    combinations: tuple[str, ...] = COMBINATIONS
    seeds: tuple[int, ...] = DESK_SEEDS
    duration: float = DESK_DURATION
    output: Path = Path("results")
    levels: int = 5
    workers: int = 1
    delay: float = DEFAULT_DELAY
    nw_threshold: int = 1
    frozen_period: float = DEFAULT_FROZEN_PERIOD
    nw_timeout: float | None = None
    check_invariants: bool = True
    requests: int = DESK_TANDEM_REQUESTS
    scenario: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ConfigError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        self.combinations = tuple(self.combinations)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.output = Path(self.output)
        if self.grid is not None:
            self.grid = tuple(float(g) for g in self.grid)
            if not self.grid or any(g <= 0 for g in self.grid):
                raise ConfigError("grid values must be > 0")
        for combo in self.combinations:
            if combo not in COMBINATIONS:
                raise ConfigError(f"unknown combination {combo!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.requests < 1:
            raise ConfigError("requests must be >= 1")

    @property
    def effective_grid(self) -> tuple[float, ...]:
        if self.grid is not None:
            return self.grid
        if self.preset == "tandem-fig3-4":
            return tuple(float(g) for g in TANDEM_GRID)
        if self.preset == "irm-theorem1":
            return (1.0, 2.0, 3.0)
        return NETWORK_GRID

    def full_scaled(self) -> "ExperimentConfig":
        return dataclasses.replace(self, duration=FULL_DURATION, seeds=FULL_SEEDS,
                                   requests=FULL_TANDEM_REQUESTS)


@dataclass
class RunSpec:
    preset: str
    combination: str
    cache_pct: float
    seed: int
    scenario: Scenario

    @property
    def key(self) -> tuple:
        return (self.combination, self.cache_pct, self.seed)

    @property
    def slug(self) -> str:
        return f"{self.combination}_{_fmt_pct(self.cache_pct)}_s{self.seed}"


@dataclass
class ResultRow:
    preset: str
    combination: str
    cache_pct: float
    seed: int
    report: MetricsReport
    counters: RunCounters


@dataclass
class Failure:
    preset: str
    combination: str
    cache_pct: float
    seed: int
    error: str
    diagnostics: dict[str, Any] = field(default_factory=dict)


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def row(self, combination: str, cache_pct: float, seed: int) -> ResultRow:
        for r in self.rows:
            if (r.combination, r.cache_pct, r.seed) == (combination, cache_pct, seed):
                return r
        raise KeyError((combination, cache_pct, seed))

    def mean(self, combination: str, cache_pct: float, metric: str = "hit_net") -> float | None:
        vals = [getattr(r.report, metric) for r in self.rows
                if r.combination == combination and r.cache_pct == cache_pct]
        vals = [v for v in vals if v is not None]
        return statistics.fmean(vals) if vals else None


def _fmt_pct(x: float) -> str:
    return repr(float(x))


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# -- scenario construction --------------------------------------------------

def tree_setup(levels: int, delay: float = DEFAULT_DELAY) -> tuple[Topology, list[TrafficProfile]]:
    topo = build_binary_tree(levels, TREE_CONSUMERS, TREE_CONTENTS, delay)
    return topo, [TrafficProfile(1.0, range(1, TREE_CONTENTS + 1), TREE_RATE)]


def abilene_setup(seed: int, delay: float | None = None) -> tuple[Topology, list[TrafficProfile]]:
    """Abilene with one catalog per producer; each catalog's Zipf exponent
    is drawn per seed from the four traffic types, and a group's total
    content rate is split evenly across catalogs."""
    topo = build_abilene(ABILENE_CONSUMERS, ABILENE_CONTENTS, delay)
    rng = np.random.default_rng([seed, 11])
    alphas = rng.choice(ABILENE_ALPHAS, size=len(topo.producers))
    rate = ABILENE_RATE / len(topo.producers)
    return topo, [TrafficProfile(float(a), p.catalog, rate) for a, p in zip(alphas, topo.producers)]


def custom_setup(doc: dict[str, Any], delay: float) -> tuple[Topology, list[TrafficProfile]]:
    topo_doc = dict(doc.get("topology") or {"kind": "tree", "levels": 5})
    kind = topo_doc.get("kind", "tree")
    hop = float(topo_doc.get("delay", delay))
    if kind == "tree":
        contents = int(topo_doc.get("contents", TREE_CONTENTS))
        topo = build_binary_tree(int(topo_doc.get("levels", 5)), int(topo_doc.get("consumers", TREE_CONSUMERS)),
                                 contents, hop)
    elif kind == "abilene":
        topo = build_abilene(int(topo_doc.get("consumers", ABILENE_CONSUMERS)),
                             int(topo_doc.get("contents_per_producer", ABILENE_CONTENTS)),
                             topo_doc.get("delay"))
    elif kind == "file":
        if "path" not in topo_doc:
            raise ConfigError("file topology needs a 'path'")
        topo = load_topology(topo_doc["path"])
    else:
        raise ConfigError(f"unknown topology kind {kind!r}")
    traffic = doc.get("traffic")
    if traffic is None:
        profiles = [TrafficProfile(1.0, p.catalog, TREE_RATE) for p in topo.producers]
    else:
        profiles = []
        for t in traffic:
            lo, hi = t["catalog"]
            profiles.append(TrafficProfile(float(t.get("alpha", 1.0)), range(int(lo), int(hi) + 1),
                                           float(t["rate"]), float(t.get("mean_size", 100.0)),
                                           float(t.get("cbr", 100.0))))
    return topo, profiles


def _setup(config: ExperimentConfig, seed: int) -> tuple[Topology, list[TrafficProfile]]:
    if config.preset == "tree-fig7":
        return tree_setup(config.levels, config.delay)
    if config.preset == "abilene-fig8":
        return abilene_setup(seed, config.delay)
    return custom_setup(config.scenario, config.delay)


def combination_caches(topo: Topology, combination: str, equ: int, ravg: float) -> dict[int, CacheSpec]:
    if combination == "LRU-EQU":
        return uniform_caches(topo, "LRU", equ)
    if combination == "SEL-EQU":
        return uniform_caches(topo, "COORD", equ)
    if combination == "LRU-BIG":
        return big_caches(topo, "LRU", round_half_up(equ * ravg))
    raise ConfigError(f"unknown combination {combination!r}")


def expand_preset(config: ExperimentConfig) -> list[RunSpec]:
    """One fully resolved scenario per (combination, cache size, seed).

    Analytic presets (tandem, IRM) expand to no network scenarios.
    """
    if config.preset not in NETWORK_PRESETS:
        return []
    specs = []
    for seed in config.seeds:
        topo, profiles = _setup(config, seed)
        sizes = sample_catalog_sizes(profiles, seed)
        total = int(sizes.sum())
        routes = shortest_path_routes(topo)
        ravg = router_avg(routes, _route_weights(topo, profiles, routes))
        for combo in config.combinations:
            for pct in config.effective_grid:
                equ = round_half_up(pct / 100.0 * total)
                sc = Scenario(
                    name=f"{config.preset}:{combo}:{_fmt_pct(pct)}",
                    topology=topo,
                    caches=combination_caches(topo, combo, equ, ravg),
                    profiles=profiles,
                    duration=config.duration,
                    seeds=[seed],
                    content_sizes=sizes,
                    nw_threshold=config.nw_threshold,
                    frozen_period=config.frozen_period,
                    nw_timeout=config.nw_timeout,
                    meta={"equ_capacity": equ, "router_avg": ravg, "catalog_packets": total},
                )
                specs.append(RunSpec(config.preset, combo, pct, seed, sc))
    specs.sort(key=lambda s: (COMBINATIONS.index(s.combination), s.cache_pct, s.seed))
    return specs


def _route_weights(topo: Topology, profiles: Sequence[TrafficProfile], routes) -> dict:
    """Packet-request rate each group sends along every (group, producer)
    route; every group runs the same profiles."""
    owner = topo.producer_of_content()
    rate = [0.0] * len(topo.producers)
    for p in profiles:
        for c, qc in zip(p.catalog, p.popularity().tolist()):
            rate[owner[c - 1]] += p.content_rate * p.mean_size * qc
    return {key: rate[key[1]] for key in routes}


# -- execution --------------------------------------------------------------

def _execute(spec: RunSpec, check: bool) -> ResultRow | Failure:
    try:
        counters = Simulator(spec.scenario, spec.seed, check_invariants=check).run()
    except SimulationError as err:
        return Failure(spec.preset, spec.combination, spec.cache_pct, spec.seed, str(err), err.diagnostics)
    return ResultRow(spec.preset, spec.combination, spec.cache_pct, spec.seed, compute_report(counters), counters)


def run_scenarios(specs: Sequence[RunSpec], workers: int = 1, check: bool = True) -> ResultTable:
    keys = [s.key for s in specs]
    if len(set(keys)) != len(keys):
        raise ConfigError("duplicate (combination, cache_pct, seed) in the expansion")
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_execute, specs, [check] * len(specs)))
    else:
        outcomes = [_execute(s, check) for s in specs]
    table = ResultTable()
    for out in outcomes:
        (table.failures if isinstance(out, Failure) else table.rows).append(out)
    return table


def run_experiment(config: ExperimentConfig) -> ResultTable:
    """Run a preset and write its files under ``config.output``."""
    out = config.output
    out.mkdir(parents=True, exist_ok=True)
    if config.preset == "irm-theorem1":
        table = ResultTable()
        table.files += write_irm(config, out)
        return table
    if config.preset == "tandem-fig3-4":
        table = ResultTable()
        table.files += write_tandem(config, out)
        return table
    table = run_scenarios(expand_preset(config), config.workers, config.check_invariants)
    table.files += write_network(config, table, out)
    return table


# -- serialisation ----------------------------------------------------------

def _cell(v: Any) -> Any:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def _write_csv(path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _write_json(path: Path, doc: Any) -> Path:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, default=str) + "\n")
    return path


def run_document(row: ResultRow) -> dict[str, Any]:
    c = row.counters
    rep = row.report
    return {
        "schema_version": SCHEMA_VERSION,
        "preset": row.preset,
        "combination": row.combination,
        "cache_pct": row.cache_pct,
        "seed": row.seed,
        "duration": c.duration,
        "metrics": {"hit_net": rep.hit_net, "h_red": rep.h_red, "t_red": rep.t_red, "e_avg": rep.e_avg},
        "counters": {
            "r_entered": c.r_entered, "r_producer": c.r_producer, "hop_sum": c.hop_sum,
            "traffic_sum": c.traffic_sum, "content_requests": c.content_requests,
            "nominations": c.nominations, "tokens_written": c.tokens_written, "events": c.events,
            "evictions": c.evictions_total, "slots": c.slots_total,
        },
        "routes": {"lengths": c.route_lengths, "requests": c.route_requests},
        "routers": [dataclasses.asdict(r) for r in c.routers],
        "meta": c.meta,
    }


def write_network(config: ExperimentConfig, table: ResultTable, out: Path) -> list[Path]:
    rows = sorted(table.rows, key=lambda r: (COMBINATIONS.index(r.combination), r.cache_pct, r.seed))
    files = []
    result_rows = []
    cache_rows = []
    for r in rows:
        c, rep = r.counters, r.report
        result_rows.append((SCHEMA_VERSION, r.preset, r.combination, r.cache_pct, r.seed,
                            c.meta.get("equ_capacity"), rep.hit_net, rep.h_red, rep.t_red, rep.e_avg,
                            c.r_entered, c.r_producer, c.evictions_total, c.slots_total,
                            c.nominations, c.content_requests))
        for rc in c.routers:
            cache_rows.append((SCHEMA_VERSION, r.preset, r.combination, r.cache_pct, r.seed, rc.name, rc.role,
                               rc.policy, rc.capacity, rc.requests, rc.hits, rc.hit_ratio, rc.forwarded,
                               rc.writes, rc.evictions, rc.nominations, rc.collisions, rc.reselections,
                               rc.cycles))
    files.append(_write_csv(out / "results.csv", RESULT_COLUMNS, result_rows))
    files.append(_write_csv(out / "caches.csv", CACHE_COLUMNS, cache_rows))
    files.append(_write_csv(out / "summary.csv", summary_columns(), summarize(rows)))
    run_dir = out / "runs"
    run_dir.mkdir(exist_ok=True)
    for r in rows:
        files.append(_write_json(run_dir / f"{r.combination}_{_fmt_pct(r.cache_pct)}_s{r.seed}.json",
                                 run_document(r)))
    failures = sorted(table.failures, key=lambda f: (f.combination, f.cache_pct, f.seed))
    if failures:
        files.append(_write_json(out / "failures.json", [dataclasses.asdict(f) for f in failures]))
    return files


def summary_columns() -> tuple[str, ...]:
    cols = ["schema_version", "preset", "combination", "cache_pct", "n_seeds"]
    for m in SUMMARY_METRICS:
        cols += [f"{m}_mean", f"{m}_std"]
    return tuple(cols)


def summarize(rows: Sequence[ResultRow]) -> list[tuple]:
    """Mean and sample standard deviation per (combination, cache size)."""
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.preset, r.combination, r.cache_pct), []).append(r)
    out = []
    for (preset, combo, pct), rs in sorted(groups.items(), key=lambda kv: (COMBINATIONS.index(kv[0][1]), kv[0][2])):
        line: list[Any] = [SCHEMA_VERSION, preset, combo, pct, len(rs)]
        for m in SUMMARY_METRICS:
            vals = [getattr(r.report, m) for r in rs if getattr(r.report, m) is not None]
            line.append(statistics.fmean(vals) if vals else None)
            line.append(statistics.stdev(vals) if len(vals) > 1 else None)
        out.append(tuple(line))
    return out


def write_tandem(config: ExperimentConfig, out: Path) -> list[Path]:
    """Hit ratios of both caches and the stack distances of the first
    cache's miss stream for every first policy, cache size and seed."""
    seconds = ("RND", "LRU", "FIFO")
    hit_rows, sd_rows, hist_rows = [], [], []
    for c in config.effective_grid:
        cap = int(c)
        if cap != c or cap < 1:
            raise ConfigError("tandem cache sizes must be positive integers")
        for first in FIRST_POLICIES:
            for seed in config.seeds:
                results = run_tandem(first, seconds, cap, requests=config.requests, seed=seed)
                for r in results:
                    hit_rows.append((SCHEMA_VERSION, r.first, r.second, cap, seed, r.requests,
                                     r.first_hit_ratio, r.second_requests, r.second_hit_ratio))
                sd = results[0].miss_sd
                sd_rows.append((SCHEMA_VERSION, first, cap, seed, sd.min_sd, sd.avg_sd, sd.max_sd,
                                sd.defined_count, sd.undefined_count))
                hist_rows += [(SCHEMA_VERSION, first, cap, seed, d, n) for d, n in sd.histogram.items()]
    return [
        _write_csv(out / "tandem.csv", ("schema_version", "first", "second", "capacity", "seed", "requests",
                                        "first_hit_ratio", "second_requests", "second_hit_ratio"), hit_rows),
        _write_csv(out / "sd.csv", ("schema_version", "first", "capacity", "seed", "min_sd", "avg_sd", "max_sd",
                                    "defined", "undefined"), sd_rows),
        _write_csv(out / "sd_histogram.csv", ("schema_version", "first", "capacity", "seed", "sd", "count"),
                   hist_rows),
    ]


def write_irm(config: ExperimentConfig, out: Path) -> list[Path]:
    """Closed-form, Markov-oracle and simulated hit ratios of LRU and the
    selection policy on small Zipf catalogs."""
    rows = []
    for alpha in IRM_ALPHAS:
        for n in range(2, irm.ORACLE_MAX_N):
            q = irm.zipf_popularity(alpha, n)
            for c in config.effective_grid:
                c = int(c)
                if not 1 <= c < n or c > irm.ORACLE_MAX_C:
                    continue
                rows.append((SCHEMA_VERSION, alpha, n, c,
                             irm.hit_ratio_closed_form(q, c, "LRU"),
                             irm.hit_ratio_closed_form(q, c, "SEL"),
                             irm.oracle_hit_ratio(q, c)))
    return [_write_csv(out / "irm.csv", ("schema_version", "alpha", "n", "c", "h_lru_closed", "h_sel_closed",
                                         "h_lru_oracle"), rows)]


def load_config_file(path) -> dict[str, Any]:
    """YAML or JSON mapping of configuration keys."""
    import yaml

    text = Path(path).read_text()
    doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return doc


def default_output() -> Path:
    return Path(os.environ.get("SELCACHE_OUTPUT_DIR", "results"))
