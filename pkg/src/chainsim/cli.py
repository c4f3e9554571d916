"""Command-line entry point.

Loads a JSON config (optionally expanded from a preset), applies flag
overrides, runs one simulation or a parameter sweep, and writes the report
plus optional trace exports to the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError, SimulationConfig, config_from_dict
from .engine import Simulation

_SWEEP_ALIASES = {
    "degree": "avg_degree",
    "avg_degree": "avg_degree",
    "block_size": "avg_block_size_mb",
    "avg_block_size_mb": "avg_block_size_mb",
    "nodes": "nodes",
    "sim_time": "sim_time_s",
    "sim_time_s": "sim_time_s",
    "tx_rate": "tx_rate_per_s",
    "fixed_delay_mean": "fixed_delay_mean_s",
    "beta": "beta",
    "block_interval": "block_interval_s",
}
_INT_FIELDS = {"nodes"}


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="chainsim",
        description="Deterministic, seedable blockchain network simulator.",
    )
    p.add_argument("--config", help="path to a JSON configuration file")
    p.add_argument("--preset", choices=["bitcoin", "ethereum"], help="built-in parameter set")
    p.add_argument("--seed", type=int, help="master random seed")
    p.add_argument("--output", default="out", help="output directory (default: out)")
    p.add_argument("--sim-time", type=float, dest="sim_time", help="simulated duration in seconds")
    p.add_argument("--nodes", type=int, help="number of nodes")
    p.add_argument("--consensus", choices=["pow", "pos"])
    p.add_argument("--finalization", choices=["longest", "ghost"])
    p.add_argument("--propagation", choices=["cbr", "ethwire", "fixed"])
    p.add_argument(
        "--fixed-delay-mean", type=float, dest="fixed_delay_mean",
        help="mean of the fixed exponential delay model, seconds",
    )
    p.add_argument(
        "--sweep", metavar="KEY=START:END:STEP",
        help="run one simulation per value of KEY (e.g. degree=10:100:10)",
    )
    p.add_argument("--export-topology", action="store_true", help="write edge list")
    p.add_argument("--export-blocks", action="store_true", help="write block trace CSV")
    p.add_argument("--export-txs", action="store_true", help="write transaction trace CSV")
    return p


def _parse_sweep(spec: str):
    try:
        key, rng = spec.split("=", 1)
        start_s, end_s, step_s = rng.split(":")
        start, end, step = float(start_s), float(end_s), float(step_s)
    except ValueError:
        raise ConfigError("sweep", f"expected KEY=START:END:STEP, got {spec!r}")
    field = _SWEEP_ALIASES.get(key)
    if field is None:
        raise ConfigError("sweep", f"unknown sweep key {key!r}")
    if step <= 0 or end < start:
        raise ConfigError("sweep", "need START <= END and STEP > 0")
    values = []
    v = start
    while v <= end + 1e-9:
        values.append(round(v, 9))
        v += step
    return field, values


def _collect_config(args) -> dict:
    doc: dict = {}
    if args.config is not None:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError("config", f"file not found: {path}")
        with open(path) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ConfigError("config", "top-level document must be an object")
        doc.update(loaded)
    if args.preset is not None:
        doc["preset"] = args.preset
    overrides = {
        "seed": args.seed,
        "sim_time_s": args.sim_time,
        "nodes": args.nodes,
        "consensus": args.consensus,
        "finalization": args.finalization,
        "propagation": args.propagation,
        "fixed_delay_mean_s": args.fixed_delay_mean,
    }
    for key, value in overrides.items():
        if value is not None:
            doc[key] = value
    return doc


def _export_topology(sim: Simulation, path: Path) -> None:
    topo = sim.topology
    with open(path, "w") as fh:
        if topo is None:
            return
        for u, v, lat in zip(topo.edges_u, topo.edges_v, topo.edge_latency_s):
            fh.write(f"{u} {v} {lat:.9g}\n")


def _export_blocks(sim: Simulation, path: Path) -> None:
    canonical_ids = {b.id for b in sim.canonical}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["blockId", "parentId", "minerId", "depth", "genTimestamp", "sizeMB", "canonical"])
        for b in sim.blocks:
            if b.parent is None:
                continue
            w.writerow([
                b.id, b.parent.id, b.miner_id, b.depth,
                f"{b.gen_timestamp:.9g}", f"{b.size_mb:.9g}",
                1 if b.id in canonical_ids else 0,
            ])


def _export_txs(sim: Simulation, path: Path) -> None:
    pool = sim.pool
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "timestamp", "sizeMB", "fee"])
        for i in range(pool.count):
            w.writerow([
                i, f"{pool.timestamps[i]:.9g}",
                f"{pool.sizes_mb[i]:.9g}", f"{pool.fees[i]:.9g}",
            ])


def _run_one(doc: dict, out_dir: Path, args, suffix: str = "") -> dict:
    cfg = config_from_dict(doc)
    sim = Simulation(cfg)
    report = sim.run()
    (out_dir / f"report{suffix}.json").write_text(report.to_json() + "\n")
    (out_dir / f"summary{suffix}.txt").write_text(report.summary_text() + "\n")
    if args.export_topology:
        _export_topology(sim, out_dir / f"topology{suffix}.txt")
    if args.export_blocks:
        _export_blocks(sim, out_dir / f"blocks{suffix}.csv")
    if args.export_txs:
        _export_txs(sim, out_dir / f"txs{suffix}.csv")
    return report.to_dict()


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        doc = _collect_config(args)
        out_dir = Path(args.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.sweep:
            field, values = _parse_sweep(args.sweep)
            summary = []
            for value in values:
                point = dict(doc)
                point[field] = int(value) if field in _INT_FIELDS else value
                rep = _run_one(point, out_dir, args, suffix=f"_{field}_{value:g}")
                summary.append({field: point[field], "report": rep})
                print(f"{field}={value:g}: stale_uncle_rate="
                      f"{rep['stale_uncle_rate']}, bpd_p50_s={rep['bpd_p50_s']}")
            (out_dir / "sweep_summary.json").write_text(
                json.dumps(summary, indent=2, sort_keys=True) + "\n"
            )
        else:
            rep = _run_one(doc, out_dir, args)
            print(json.dumps(rep, indent=2, sort_keys=True))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
