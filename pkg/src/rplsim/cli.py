"""Command-line front end: single runs, sweep grids, and CSV reshaping."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor

from .engine import to_s
from .scenario import ConfigError, load_scenario, scenario_from_dict
from .simulate import RunResult, run_scenario
from .telemetry import TRAFFIC_CLASSES

CSV_COLUMNS = [
    "scenario_id", "topology", "objective", "rx_ratio", "node_count", "seed",
    "duration_s", "warmup_s", "convergence_s", "pdr_total",
    "pdr_high_critical", "pdr_critical", "pdr_low_critical", "pdr_temperature",
    "avg_power_mw", "total_energy_mj", "dio_count", "dis_count",
    "drops_no_route", "drops_mac", "drops_queue", "drops_ttl",
]

CELL_KEYS = ("topology", "rx_ratio", "objective", "node_count")


def _fmt(value: float | None, places: int = 6) -> str:
    return "" if value is None else f"{value:.{places}f}"


def result_to_row(result: RunResult) -> dict[str, str]:
    cfg = result.config
    m = result.metrics
    conv = None if m.convergence_us is None else to_s(m.convergence_us)
    row = {
        "scenario_id": cfg.scenario_id,
        "topology": cfg.topology,
        "objective": cfg.objective,
        "rx_ratio": f"{cfg.rx_success_ratio:g}",
        "node_count": str(cfg.node_count),
        "seed": str(cfg.seed),
        "duration_s": f"{cfg.duration_s:g}",
        "warmup_s": f"{cfg.warmup_s:g}",
        "convergence_s": _fmt(conv),
        "pdr_total": _fmt(m.pdr()),
        "avg_power_mw": _fmt(result.avg_power_mw()),
        "total_energy_mj": _fmt(result.total_energy_mj()),
        "dio_count": str(m.dio_count),
        "dis_count": str(m.dis_count),
        "drops_no_route": str(m.drops_by_cause("no-route")),
        "drops_mac": str(m.drops_by_cause("mac-failure")),
        "drops_queue": str(m.drops_by_cause("queue-overflow")),
        "drops_ttl": str(m.drops_by_cause("ttl")),
    }
    for cls in TRAFFIC_CLASSES:
        row[f"pdr_{cls.replace('-', '_')}"] = _fmt(m.pdr(cls))
    return row


def append_rows(path: str, rows: list[dict[str, str]]) -> None:
    new_file = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        if new_file:
            writer.writeheader()
        writer.writerows(rows)


# ----------------------------------------------------------------------- run

def cmd_run(args) -> int:
    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    result = run_scenario(cfg, trace=args.trace is not None)
    append_rows(args.out, [result_to_row(result)])
    if args.trace is not None:
        result.trace.write_jsonl(args.trace)
    pdr = result.metrics.pdr()
    print(f"{cfg.scenario_id} seed={cfg.seed}: "
          f"pdr={'n/a' if pdr is None else f'{pdr:.4f}'} "
          f"avg_power={result.avg_power_mw():.4f} mW -> {args.out}")
    return 0


# --------------------------------------------------------------------- sweep

def load_sweep(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"sweep file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"sweep file is not valid JSON: {exc}")
    for key in ("node_counts", "objectives", "rx_ratios", "topologies"):
        values = raw.get(key)
        if not isinstance(values, list) or not values:
            raise ConfigError(f"{key}: must be a non-empty list")
    seeds = raw.get("seeds_per_cell", 1)
    if not isinstance(seeds, int) or seeds < 1:
        raise ConfigError(f"seeds_per_cell: must be an integer >= 1 (got {seeds!r})")
    base_seed = raw.get("base_seed", 1)
    if not isinstance(base_seed, int):
        raise ConfigError(f"base_seed: must be an integer (got {base_seed!r})")
    base = raw.get("base", {})
    if not isinstance(base, dict):
        raise ConfigError("base: must be an object of scenario fields")
    return raw


def sweep_tasks(spec: dict) -> list[dict]:
    """Expand a sweep document into per-run scenario dicts, in grid order."""
    base = dict(spec.get("base", {}))
    seeds = spec.get("seeds_per_cell", 1)
    base_seed = spec.get("base_seed", 1)
    tasks = []
    for topology, objective, rx, node_count in itertools.product(
            spec["topologies"], spec["objectives"], spec["rx_ratios"],
            spec["node_counts"]):
        for offset in range(seeds):
            raw = dict(base)
            raw.update(topology=topology, objective=objective,
                       rx_success_ratio=rx, node_count=node_count,
                       seed=base_seed + offset)
            raw.pop("scenario_id", None)
            tasks.append(raw)
    return tasks


def _sweep_worker(task: tuple[int, dict]):
    index, raw = task
    try:
        cfg = scenario_from_dict(raw)
        return index, result_to_row(run_scenario(cfg)), None
    except Exception as exc:
        return index, None, str(exc)


def summarize(rows: list[dict[str, str]]) -> list[dict[str, str]]:
    """Per-cell mean/stddev of PDR and power, cells in first-seen order."""
    cells: dict[tuple, dict[str, list[float]]] = {}
    for row in rows:
        key = tuple(row[k] for k in CELL_KEYS)
        bucket = cells.setdefault(key, {"pdr": [], "power": []})
        if row["pdr_total"]:
            bucket["pdr"].append(float(row["pdr_total"]))
        bucket["power"].append(float(row["avg_power_mw"]))
    out = []
    for key, bucket in cells.items():
        entry = dict(zip(CELL_KEYS, key))
        entry["runs"] = str(len(bucket["power"]))
        for label, values in (("pdr", bucket["pdr"]), ("power", bucket["power"])):
            mean = statistics.mean(values) if values else None
            std = statistics.stdev(values) if len(values) > 1 else 0.0
            entry[f"{label}_mean"] = _fmt(mean)
            entry[f"{label}_stddev"] = _fmt(std if values else None)
        out.append(entry)
    return out


SUMMARY_COLUMNS = list(CELL_KEYS) + ["runs", "pdr_mean", "pdr_stddev",
                                     "power_mean", "power_stddev"]


def cmd_sweep(args) -> int:
    spec = load_sweep(args.spec)
    tasks = list(enumerate(sweep_tasks(spec)))
    results: dict[int, dict[str, str] | None] = {}
    errors: list[tuple[int, str]] = []
    if args.parallel > 1:
        with ProcessPoolExecutor(max_workers=args.parallel) as pool:
            for index, row, error in pool.map(_sweep_worker, tasks,
                                              chunksize=1):
                results[index] = row
                if error is not None:
                    errors.append((index, error))
    else:
        for task in tasks:
            index, row, error = _sweep_worker(task)
            results[index] = row
            if error is not None:
                errors.append((index, error))

    rows = [results[i] for i in sorted(results) if results[i] is not None]
    append_rows(args.out, rows)

    if errors:
        failures_path = args.out + ".failures.csv"
        with open(failures_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["task_index", "config", "error"])
            for index, error in errors:
                writer.writerow([index, json.dumps(tasks[index][1],
                                                   sort_keys=True), error])
                print(f"sweep cell {index} failed: {error}", file=sys.stderr)

    summary = summarize(rows)
    summary_path = args.out + ".summary.csv"
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS,
                                lineterminator="\n")
        writer.writeheader()
        writer.writerows(summary)

    header = " ".join(f"{c:>12}" for c in SUMMARY_COLUMNS)
    print(header)
    for entry in summary:
        print(" ".join(f"{entry[c]:>12}" for c in SUMMARY_COLUMNS))
    print(f"{len(rows)} runs -> {args.out} (summary: {summary_path})")
    return 0 if not errors else 1


# ----------------------------------------------------------------- plot-data

def cmd_plot_data(args) -> int:
    metric = {"pdr": "pdr_total", "power": "avg_power_mw"}[args.figure]
    with open(args.infile, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    cells: dict[tuple, list[float]] = {}
    for row in rows:
        if not row[metric]:
            continue
        key = tuple(row[k] for k in CELL_KEYS)
        cells.setdefault(key, []).append(float(row[metric]))
    out_columns = ["figure"] + list(CELL_KEYS) + ["mean", "stddev", "runs"]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(out_columns)
        for key in sorted(cells, key=lambda k: (k[0], k[1], k[2], int(k[3]))):
            values = cells[key]
            std = statistics.stdev(values) if len(values) > 1 else 0.0
            writer.writerow([args.figure, *key,
                             _fmt(statistics.mean(values)), _fmt(std),
                             len(values)])
    print(f"{len(cells)} cells -> {args.out}")
    return 0


# ---------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rplsim",
        description="Deterministic RPL routing simulator (OF0 vs ETX/MRHOF)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one scenario")
    p_run.add_argument("--config", required=True, help="scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--out", default="results.csv", help="CSV to append to")
    p_run.add_argument("--trace", default=None,
                       help="write the full event trace to this JSONL file")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid of scenarios")
    p_sweep.add_argument("--spec", required=True, help="sweep JSON file")
    p_sweep.add_argument("--parallel", type=int, default=1,
                         help="worker processes (results are order-independent)")
    p_sweep.add_argument("--out", required=True, help="CSV for per-run rows")
    p_sweep.set_defaults(func=cmd_sweep)

    p_plot = sub.add_parser("plot-data",
                            help="reshape run CSV into per-figure long format")
    p_plot.add_argument("--in", dest="infile", required=True)
    p_plot.add_argument("--figure", choices=("pdr", "power"), required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=cmd_plot_data)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
