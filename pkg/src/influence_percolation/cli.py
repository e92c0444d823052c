"""``influence-percolation`` command-line interface.

Exit status is 0 on success, 2 on usage errors and 1 on runtime failures.
Every command that reads a configuration echoes the resolved keys to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from .dynamics import run_simulation
from .errors import InfluencePercolationError, UsageError
from .graph import (
    Graph,
    estimate_block_probs,
    generate_sbm,
    load_partitioned_edge_list,
    read_edge_list,
    read_gml_partition,
    read_labels,
    write_edge_list,
    write_labels,
)
from .meanfield import meanfield_trajectory, percolation_threshold
from .outputs import emit_outputs, write_json
from .sweep import check_writable, run_sweep

OUT_ENV = "INFLUENCE_PERCOLATION_OUT"

logger = logging.getLogger("influence_percolation")

# command -> config key that --seed sets
_SEED_KEYS = {"generate": "sbm.seed", "simulate": "scenario.seed", "sweep": "sweep.seed"}


def _scenario_options(p: argparse.ArgumentParser, seed: bool = True, workers: bool = False) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="start from a built-in scenario")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    p.add_argument("--beta", type=float, help="social temperature")
    p.add_argument("--theta", type=float, help="inverse temperature of the softmax update")
    if seed:
        p.add_argument("--seed", type=int, help="random seed")
    if workers:
        p.add_argument("--workers", type=int, help="worker processes (default: all CPUs)")
    p.add_argument("--out-dir", help=f"output directory (default: ${OUT_ENV} or the current directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="influence-percolation",
        description="Softmax opinion dynamics on block-model graphs and their mean-field percolation thresholds.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("generate", help="sample a block-model graph and save it as JSON")
    _scenario_options(p)
    p.add_argument("--out", help="graph file (default: <out-dir>/graph.json)")

    p = sub.add_parser("ingest", help="clean a labelled edge list into a graph file")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--edges", help="edge list, one 'u w' pair per line")
    src.add_argument("--gml", help="GML file with a label attribute on every node")
    p.add_argument("--labels", help="node labels, one 'node label' pair per line (with --edges)")
    p.add_argument("--label-attr", default="value", help="GML node attribute holding the block label")
    p.add_argument("--min-degree", type=int, default=2, help="drop nodes with fewer neighbours (default 2)")
    p.add_argument("--single-pass", action="store_true", help="prune low-degree nodes once instead of repeatedly")
    p.add_argument("--out", required=True, help="graph file to write")
    p.add_argument("--export", help="also write <EXPORT>.edges and <EXPORT>.labels text files")

    p = sub.add_parser("estimate", help="fit p_in and p_out to a labelled graph")
    p.add_argument("graph", help="graph file written by generate or ingest")
    p.add_argument("--method", choices=("pair", "edge_fraction", "both"), default="both")

    p = sub.add_parser("simulate", help="run the stochastic dynamics once")
    _scenario_options(p)
    p.add_argument("--engine", choices=("numba", "python"), help="event loop implementation")

    p = sub.add_parser("threshold", help="mean-field percolation threshold report")
    _scenario_options(p, seed=False)
    p.add_argument("--k-star", type=int, help="candidate whose threshold is wanted (1-based)")
    p.add_argument("--save", action="store_true", help="also write threshold.json to the output directory")

    p = sub.add_parser("trajectory", help="mean-field PPV trajectory as CSV")
    _scenario_options(p, seed=False)

    p = sub.add_parser("sweep", help="simulate a grid of seed fractions and betas")
    _scenario_options(p, workers=True)
    p.add_argument("--replicas", type=int, help="runs per grid point")
    return parser


def _resolve(args) -> dict:
    file_conf = cfgmod.load_config_file(args.config) if args.config else {}
    overrides = dict(cfgmod.parse_assignment(s) for s in args.overrides)
    flags = {
        "scenario.beta": args.beta,
        "scenario.theta": args.theta,
        "output.dir": args.out_dir,
    }
    if getattr(args, "seed", None) is not None:
        flags[_SEED_KEYS[args.command]] = args.seed
    if getattr(args, "workers", None) is not None:
        flags["sweep.workers"] = args.workers
    if getattr(args, "replicas", None) is not None:
        flags["sweep.replicas"] = args.replicas
    if getattr(args, "engine", None) is not None:
        flags["scenario.engine"] = args.engine
    if getattr(args, "k_star", None) is not None:
        flags["threshold.k_star"] = args.k_star
    defaults = dict(file_conf)
    if "output.dir" not in defaults and os.environ.get(OUT_ENV):
        defaults["output.dir"] = os.environ[OUT_ENV]
    conf = cfgmod.resolve(args.preset, defaults, overrides, flags)
    conf.setdefault("output.dir", ".")
    print("# resolved configuration", file=sys.stderr)
    print(cfgmod.format_resolved(conf), file=sys.stderr)
    return conf


def _out_dir(conf) -> Path:
    d = Path(str(conf["output.dir"]))
    check_writable(d)
    return d


def _graph(conf) -> Graph:
    params = cfgmod.build_sbm(conf)
    if params is not None:
        return generate_sbm(params, int(conf.get("sbm.seed", 0)))
    g = cfgmod.load_graph(conf)
    if g is None:
        raise UsageError("missing graph: set sbm.* keys, graph.file, or a preset")
    return g


def cmd_generate(args) -> int:
    conf = _resolve(args)
    params = cfgmod.build_sbm(conf)
    if params is None:
        raise UsageError("missing required key 'sbm.n'")
    g = generate_sbm(params, int(conf["sbm.seed"]))
    out = Path(args.out) if args.out else _out_dir(conf) / "graph.json"
    g.save(out)
    print(f"wrote {out}: n={g.n} m={g.m} blocks={g.block_sizes.tolist()}")
    return 0


def cmd_ingest(args) -> int:
    if args.gml:
        if args.labels:
            raise UsageError("--labels cannot be combined with --gml")
        edges, labels = read_gml_partition(args.gml, args.label_attr)
    else:
        if not args.labels:
            raise UsageError("--edges needs --labels")
        edges, labels = read_edge_list(args.edges), read_labels(args.labels)
    g = load_partitioned_edge_list(edges, labels, min_degree=args.min_degree, iterative=not args.single_pass)
    g.save(args.out)
    if args.export:
        write_edge_list(g, f"{args.export}.edges")
        write_labels(g, f"{args.export}.labels")
    s = g.ingest_stats
    report = {"n": g.n, "m": g.m, "blocks": g.block_sizes.tolist(), "labels": list(s.block_labels),
              "self_loops": s.self_loops, "duplicate_edges": s.duplicate_edges,
              "pruned_nodes": s.pruned_nodes, "pruned_edges": s.pruned_edges, "pruning_rounds": s.pruning_rounds}
    print(json.dumps(report, indent=2))
    return 0


def cmd_estimate(args) -> int:
    g = Graph.load(args.graph)
    methods = ("pair", "edge_fraction") if args.method == "both" else (args.method,)
    report = {m: estimate_block_probs(g, m).to_dict() for m in methods}
    print(json.dumps(report, indent=2))
    return 0


def cmd_simulate(args) -> int:
    conf = _resolve(args)
    scenario = cfgmod.build_scenario(conf)
    out = _out_dir(conf)
    g = _graph(conf)
    res = run_simulation(g, scenario, engine=str(conf["scenario.engine"]))
    emit_outputs(res, "csv", out / "trajectory.csv")
    emit_outputs(res, "json", out / "simulation.json")
    fr = res.fractions
    print(f"events={res.event_count} time={res.final_time:.6g} stopped_early={res.stopped_early}")
    print("votes " + " ".join(f"{k + 1}:{v}" for k, v in enumerate(res.votes.tolist())))
    print("fractions " + " ".join(f"{k + 1}:{v:.4f}" for k, v in enumerate(fr.tolist())))
    return 0


def cmd_threshold(args) -> int:
    conf = _resolve(args)
    sc, k_star = cfgmod.build_meanfield(conf)
    res = percolation_threshold(sc, k_star)
    report = res.to_dict()
    print(json.dumps(report, indent=2, sort_keys=True))
    if not res.assumptions_met:
        logger.warning("nonnegative-influence margin is negative (%.6g); monotonicity is not guaranteed", res.condition_margin)
    print("threshold = " + ("infeasible" if res.threshold is None else f"{res.threshold:.6f}"))
    if args.save:
        write_json(report, _out_dir(conf) / "threshold.json")
    return 0


def cmd_trajectory(args) -> int:
    conf = _resolve(args)
    sc, _ = cfgmod.build_meanfield(conf)
    traj = meanfield_trajectory(sc, int(conf["trajectory.max_iters"]), float(conf["trajectory.eps"]))
    path = _out_dir(conf) / "meanfield_trajectory.csv"
    emit_outputs(traj, "csv", path)
    final = " ".join(f"{k + 1}:{v:.6f}" for k, v in enumerate(traj.h[-1].tolist()))
    print(f"wrote {path}: iterations={traj.iterations} converged={traj.converged} final h {final}")
    return 0


def cmd_sweep(args) -> int:
    conf = _resolve(args)
    spec = cfgmod.build_sweep(conf)
    spec.output = _out_dir(conf)
    result = run_sweep(spec)
    for beta in spec.betas:
        theory = result.theory.get(beta)
        if not result.is_2d:
            measured, step = result.measured_threshold(beta)
            print(f"beta={beta:g} theory={theory if theory is None else round(theory, 6)} "
                  f"measured={measured} (grid step {step})")
    print(f"wrote {spec.output}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "threshold": cmd_threshold,
    "trajectory": cmd_trajectory,
    "sweep": cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"influence-percolation {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (InfluencePercolationError, OSError) as exc:
        print(f"influence-percolation {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
