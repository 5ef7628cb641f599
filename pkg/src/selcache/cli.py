"""Command-line entry point: ``selcache run | trace | sd``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from selcache import __version__
from selcache.experiments import (
    COMBINATIONS,
    PRESETS,
    ConfigError,
    ExperimentConfig,
    default_output,
    load_config_file,
    run_experiment,
)

log = logging.getLogger("selcache")

_CONFIG_KEYS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x.rstrip("%")) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _csv_seeds(text: str) -> list[int]:
    """``1,2,3`` or ``1-10``."""
    seeds: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = part.split("-", 1)
                seeds += range(int(lo), int(hi) + 1)
            elif part:
                seeds.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None
    return seeds


def _csv_combinations(text: str) -> list[str]:
    combos = [c.strip().upper() for c in text.split(",") if c.strip()]
    for c in combos:
        if c not in COMBINATIONS:
            raise argparse.ArgumentTypeError(f"unknown combination {c!r}")
    return combos


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="selcache", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment preset and write CSV/JSON results")
    run.add_argument("--preset", choices=PRESETS)
    run.add_argument("--grid", type=_csv_floats,
                     help="cache sizes: percent of catalog packets (network presets), "
                          "slots (tandem) or capacities (irm)")
    run.add_argument("--combinations", type=_csv_combinations, help="subset of " + ",".join(COMBINATIONS))
    run.add_argument("--seeds", type=_csv_seeds, help="e.g. 1,2,3 or 1-10")
    run.add_argument("--duration", type=float, help="simulated seconds per run")
    run.add_argument("--levels", type=int, help="binary tree levels (tree preset)")
    run.add_argument("--requests", type=int, help="requests per tandem run")
    run.add_argument("--workers", type=int, help="parallel processes across runs")
    run.add_argument("--out", type=Path, help="output directory (default $SELCACHE_OUTPUT_DIR or ./results)")
    run.add_argument("--config", type=Path, help="YAML or JSON file with configuration keys")
    run.add_argument("--full-scale", action="store_true",
                     help="1000 s runs over seeds 1-10 (15M requests for the tandem preset)")
    run.add_argument("--no-check", action="store_true", help="skip protocol invariant assertions")

    trace = sub.add_parser("trace", help="write the packet-request workload of a preset as a text trace")
    trace.add_argument("--preset", choices=("tree-fig7", "abilene-fig8"), default="tree-fig7")
    trace.add_argument("--levels", type=int, default=5)
    trace.add_argument("--seed", type=int, default=1)
    trace.add_argument("--duration", type=float, default=10.0)
    trace.add_argument("--out", type=Path, required=True)

    sd = sub.add_parser("sd", help="stack-distance statistics of a trace or id list")
    sd.add_argument("path", type=Path, help="workload trace, or one id per line")
    sd.add_argument("--level", choices=("content", "packet"), default="packet",
                    help="analyse content ids or (content, index) packet ids of a trace")
    sd.add_argument("--histogram", type=Path, help="write the histogram as CSV")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config is not None:
        doc = load_config_file(args.config)
        unknown = set(doc) - _CONFIG_KEYS
        if unknown:
            raise ConfigError(f"{args.config}: unknown keys {sorted(unknown)}")
        values.update(doc)
        if "output" in values:
            values["output"] = Path(values["output"])
    for name in ("preset", "grid", "combinations", "seeds", "duration", "levels", "requests", "workers"):
        v = getattr(args, name)
        if v is not None:
            values[name] = v
    if args.out is not None:
        values["output"] = args.out
    values.setdefault("output", default_output())
    if args.no_check:
        values["check_invariants"] = False
    if values.get("scenario") and "preset" not in values:
        values["preset"] = "custom"
    config = ExperimentConfig(**values)
    if args.full_scale:
        config = config.full_scaled()
    return config


def cmd_run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    log.info("running %s into %s", config.preset, config.output)
    table = run_experiment(config)
    for path in table.files:
        print(path)
    for f in table.failures:
        print(f"FAILED {f.combination} {f.cache_pct}% seed {f.seed}: {f.error}", file=sys.stderr)
    return 0 if table.ok else 1


def cmd_trace(args: argparse.Namespace) -> int:
    from selcache.engine import Scenario, Simulator
    from selcache.experiments import abilene_setup, tree_setup

    if args.preset == "tree-fig7":
        topo, profiles = tree_setup(args.levels)
    else:
        topo, profiles = abilene_setup(args.seed)
    sc = Scenario("trace", topo, {}, profiles, args.duration, seeds=[args.seed])
    Simulator(sc, args.seed).workload.write_trace(args.out)
    print(args.out)
    return 0


def _read_ids(path: Path, level: str) -> list:
    ids = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) == 4:
            ids.append(int(parts[2]) if level == "content" else (int(parts[2]), int(parts[3])))
        elif len(parts) == 1:
            ids.append(parts[0])
        else:
            raise ConfigError(f"{path}: cannot parse {line!r}")
    return ids


def cmd_sd(args: argparse.Namespace) -> int:
    from selcache.metrics import sd_stats, stack_distance_array

    stats = sd_stats(stack_distance_array(_read_ids(args.path, args.level)))
    if stats.absent:
        print(f"no repeated ids ({stats.undefined_count} first occurrences)")
    else:
        print(f"min_sd {stats.min_sd}")
        print(f"avg_sd {stats.avg_sd!r}")
        print(f"max_sd {stats.max_sd}")
        print(f"defined {stats.defined_count}")
        print(f"undefined {stats.undefined_count}")
    if args.histogram is not None:
        with open(args.histogram, "w") as fh:
            fh.write("sd,count\n")
            for d, n in stats.histogram.items():
                fh.write(f"{d},{n}\n")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"run": cmd_run, "trace": cmd_trace, "sd": cmd_sd}
    try:
        return handlers[args.command](args)
    except (ConfigError, OSError, ValueError) as err:
        print(f"selcache: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
