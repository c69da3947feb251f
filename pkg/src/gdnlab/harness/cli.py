"""Command-line entry point: ``gdnlab run|aggregate|wl-check|orbits|construct``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .. import constructions, orbits, wl
from ..graph import GraphError, read_graph
from .config import ConfigError, load_run_config
from .runner import aggregate_dir, best_during_training, run_experiment, write_report

log = logging.getLogger("gdnlab")


def _cmd_run(args) -> int:
    cfg = load_run_config(args.config, args.override)
    out = Path(args.out)

    def progress(epoch, scores, train):
        shown = " ".join(f"{k}={v:.4g}" for k, v in sorted(scores.items()))
        log.info("epoch %d %s", epoch, shown)

    records = run_experiment(cfg, out, log=progress)
    from ..envs import ENVS

    best = best_during_training(records, ENVS[cfg.env.env_name].metrics)
    print(json.dumps({"run": cfg.label, "best": best}, sort_keys=True))
    return 0


def _cmd_aggregate(args) -> int:
    rows = aggregate_dir(args.dir)
    if not rows:
        print(f"no run files in {args.dir}", file=sys.stderr)
        return 1
    dest = Path(args.out) if args.out else Path(args.dir) / "aggregate.csv"
    write_report(rows, dest)
    for r in rows:
        ci = "n/a" if r.ci is None else f"{r.ci:.4g}"
        print(f"{r.env},{r.model},{r.augmentation},{r.metric},{r.mean:.4g},{ci},{len(r.seeds)}")
    return 0


def _cmd_wl(args) -> int:
    g1, g2 = read_graph(args.graph1), read_graph(args.graph2)
    same = wl.wl_indistinguishable(g1, g2)
    print("indistinguishable" if same else "distinguishable")
    return 0


def _cmd_orbits(args) -> int:
    g = read_graph(args.graph)
    part = orbits.orbit_partition(g)
    for k, orbit in enumerate(part.orbits):
        print(f"{k}: {' '.join(str(v) for v in sorted(orbit))}")
    return 0


def _cmd_construct(args) -> int:
    g = read_graph(args.graph)
    targets = constructions.read_targets(args.targets)
    if args.mode == "rni":
        labels = constructions.assign_labels_rni(g, targets, np.random.default_rng(args.seed))
    else:
        labels = constructions.assign_labels_uid(g, targets)
    for i, lab in enumerate(labels):
        print(f"{i} {' '.join(f'{x:g}' for x in np.atleast_1d(lab))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gdnlab", description="graph decision network experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train and evaluate one configuration")
    r.add_argument("--config", required=True)
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out", default="runs")
    r.set_defaults(func=_cmd_run)

    a = sub.add_parser("aggregate", help="best-during-training per seed, then mean and 95%% CI")
    a.add_argument("dir")
    a.add_argument("--out")
    a.set_defaults(func=_cmd_aggregate)

    w = sub.add_parser("wl-check", help="1-WL test on two graph files")
    w.add_argument("graph1")
    w.add_argument("graph2")
    w.set_defaults(func=_cmd_wl)

    o = sub.add_parser("orbits", help="automorphism orbits of a graph file")
    o.add_argument("graph")
    o.set_defaults(func=_cmd_orbits)

    c = sub.add_parser("construct", help="assign orbit target labels by claim rounds")
    c.add_argument("--mode", choices=("rni", "uid"), required=True)
    c.add_argument("--graph", required=True)
    c.add_argument("--targets", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_cmd_construct)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, GraphError, constructions.ConstructionError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
