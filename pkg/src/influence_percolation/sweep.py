"""Parameter sweeps over seed fractions and beta, with replicas.

Each (grid point, replica) task gets its own random stream derived from
``(master_seed, grid_index, replica_index)``, so results do not depend on
how tasks are spread over worker processes or on skipped points.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from .dynamics import ScenarioConfig, run_simulation
from .errors import ParameterError
from .graph import BlockModelParams, Graph, estimate_block_probs, generate_sbm
from .meanfield import MeanFieldScenario, percolation_threshold

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-12


@dataclass(frozen=True)
class Axis:
    """Seed fraction of ``candidate`` in ``block`` (0-based) swept over ``values``."""

    block: int
    candidate: int
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ParameterError("sweep axis grid is empty")

    @property
    def label(self) -> str:
        return f"block_seed_fractions.{self.block + 1}.{self.candidate + 1}"


@dataclass
class SweepSpec:
    scenario: ScenarioConfig
    axis1: Axis
    betas: tuple[float, ...]
    replicas: int = 1
    master_seed: int = 0
    axis2: Axis | None = None
    sbm: BlockModelParams | None = None
    graph: Graph | None = None
    workers: int | None = None
    k_star: int | None = None
    estimator: str = "pair"
    output: str | Path | None = None
    engine: str = "numba"

    def __post_init__(self) -> None:
        if (self.sbm is None) == (self.graph is None):
            raise ParameterError("a sweep needs exactly one of an SBM description or a graph")
        self.betas = tuple(float(b) for b in self.betas)
        if not self.betas:
            raise ParameterError("beta grid is empty")
        if int(self.replicas) != self.replicas or self.replicas < 1:
            raise ParameterError("replicas must be a positive integer")
        if self.k_star is None:
            self.k_star = self.axis1.candidate

    @property
    def n_blocks(self) -> int:
        return self.sbm.b if self.sbm is not None else self.graph.n_blocks

    def block_sizes(self) -> np.ndarray:
        return self.sbm.block_sizes() if self.sbm is not None else self.graph.block_sizes

    @property
    def n(self) -> int:
        return self.sbm.n if self.sbm is not None else self.graph.n

    def grid(self) -> list[tuple[float, float, float | None]]:
        """(beta, axis1 value, axis2 value) in the order grid indices are assigned."""
        second = self.axis2.values if self.axis2 is not None else (None,)
        return list(product(self.betas, self.axis1.values, second))


@dataclass
class SweepPoint:
    index: int
    beta: float
    axis1: float
    axis2: float | None
    skipped: str | None = None
    n_undecided: int = 0
    fractions: np.ndarray | None = None
    fraction_min: np.ndarray | None = None
    fraction_max: np.ndarray | None = None
    winner: int | None = None
    event_counts: tuple[int, ...] = ()
    replicas: int = 0


@dataclass
class SweepResult:
    points: list[SweepPoint]
    K: int
    axis1_label: str
    axis2_label: str | None
    k_star: int
    theory: dict[float, float | None] = field(default_factory=dict)
    parameters: dict = field(default_factory=dict)

    @property
    def is_2d(self) -> bool:
        return self.axis2_label is not None

    def measured_threshold(self, beta: float, level: float = 0.99) -> tuple[float | None, float | None]:
        """Smallest axis-1 value whose mean vote fraction for ``k_star`` reaches ``level``.

        Returned with the grid step as its uncertainty.
        """
        pts = [p for p in self.points if p.beta == beta and p.skipped is None]
        pts.sort(key=lambda p: p.axis1)
        xs = sorted({p.axis1 for p in self.points if p.beta == beta})
        step = float(np.round(np.min(np.diff(xs)), 12)) if len(xs) > 1 else None
        for p in pts:
            if p.fractions[self.k_star] >= level:
                return p.axis1, step
        return None, step


def _point_seeds(spec: SweepSpec, a1: float, a2: float | None) -> dict[tuple[int, int], float]:
    seeds = dict(spec.scenario.block_seed_fractions)
    seeds[(spec.axis1.block, spec.axis1.candidate)] = a1
    if spec.axis2 is not None:
        seeds[(spec.axis2.block, spec.axis2.candidate)] = a2
    return seeds


def _feasibility(spec: SweepSpec, seeds: dict[tuple[int, int], float]) -> tuple[str | None, int]:
    sizes = spec.block_sizes()
    n = spec.n
    per_block: dict[int, float] = {}
    for (b, _), v in seeds.items():
        per_block[b] = per_block.get(b, 0.0) + v
    for b, total in per_block.items():
        if total > sizes[b] / n + FEAS_TOL:
            return f"infeasible: seeds {total:.6g} exceed block {b + 1} fraction {sizes[b] / n:.6g}", 0
    seeded = sum(int(sizes[b]) for b in spec.scenario.whole_block_seeds)
    seeded += sum(int(np.floor(v * n + 0.5)) for v in seeds.values())
    n_u = n - seeded
    if n_u <= 0:
        return "no undecided voters", 0
    return None, n_u


def _run_task(task):
    spec, index, replica, beta, seeds = task
    stream = np.random.SeedSequence(spec.master_seed, spawn_key=(index, replica))
    if spec.sbm is not None:
        graph = generate_sbm(spec.sbm, np.random.default_rng(np.random.SeedSequence(spec.master_seed, spawn_key=(index, replica, 2))))
    else:
        graph = spec.graph
    cfg = replace(spec.scenario, beta=beta, block_seed_fractions=seeds, rng_seed=stream)
    res = run_simulation(graph, cfg, engine=spec.engine)
    return index, replica, res.votes, res.n_undecided, res.event_count


def _theory(spec: SweepSpec, beta: float) -> float | None:
    """Mean-field threshold for ``k_star`` in the last block, if the scenario has that shape."""
    b = spec.n_blocks
    last = b - 1
    K = spec.scenario.K
    if K != b - 1 or spec.axis1.block != last:
        return None
    if spec.sbm is not None:
        params = spec.sbm
    else:
        est = estimate_block_probs(spec.graph, spec.estimator)
        params = BlockModelParams(spec.graph.n, b, est.p_in_hat, est.p_out_hat, est.rho_hat)
    whole = dict(spec.scenario.whole_block_seeds)
    sizes = spec.block_sizes()
    for blk in range(b - 1):
        if blk not in whole:
            if sizes[blk]:
                return None
            whole[blk] = 0  # empty block: contributes nothing whoever owns it
    if last in whole:
        return None
    seeds = [0.0] * K
    for (blk, k), v in spec.scenario.block_seed_fractions.items():
        if blk == last and k != spec.k_star:
            seeds[k] = v
    if spec.axis2 is not None and spec.axis2.candidate != spec.k_star:
        seeds[spec.axis2.candidate] = 0.0
    try:
        sc = MeanFieldScenario(
            params, beta, spec.scenario.theta, tuple(seeds), spec.scenario.initial_ppv, whole
        )
    except ParameterError:
        return None
    res = percolation_threshold(sc, spec.k_star)
    return res.threshold


def check_writable(path: str | Path) -> None:
    """Raise ``OSError`` unless files can be created at ``path`` (a directory)."""
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    probe = p / ".write-probe"
    with open(probe, "w") as fh:
        fh.write("")
    probe.unlink()


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Simulate every feasible grid point ``spec.replicas`` times and aggregate."""
    if spec.output is not None:
        check_writable(spec.output)
    points: list[SweepPoint] = []
    tasks = []
    for index, (beta, a1, a2) in enumerate(spec.grid()):
        seeds = _point_seeds(spec, a1, a2)
        reason, n_u = _feasibility(spec, seeds)
        points.append(SweepPoint(index, beta, a1, a2, skipped=reason, n_undecided=n_u))
        if reason is None:
            tasks.extend((spec, index, r, beta, seeds) for r in range(spec.replicas))
    workers = spec.workers if spec.workers is not None else (os.cpu_count() or 1)
    if workers <= 1 or len(tasks) <= 1:
        outcomes = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_task, tasks, chunksize=1))
    K = spec.scenario.K
    by_point: dict[int, list] = {}
    for index, replica, votes, n_u, events in outcomes:
        by_point.setdefault(index, []).append((replica, votes, n_u, events))
    for p in points:
        runs = sorted(by_point.get(p.index, []), key=lambda r: r[0])
        if not runs:
            continue
        fr = np.array([votes / n_u for _, votes, n_u, _ in runs])
        p.fractions = fr.mean(axis=0)
        p.fraction_min = fr.min(axis=0)
        p.fraction_max = fr.max(axis=0)
        p.winner = int(np.argmax(p.fractions))
        p.event_counts = tuple(int(r[3]) for r in runs)
        p.replicas = len(runs)
        logger.info(
            "point %d beta=%g axis1=%g%s: fractions %s",
            p.index, p.beta, p.axis1, "" if p.axis2 is None else f" axis2={p.axis2:g}", np.round(p.fractions, 4),
        )
    theory = {beta: _theory(spec, beta) for beta in spec.betas}
    result = SweepResult(
        points=points,
        K=K,
        axis1_label=spec.axis1.label,
        axis2_label=spec.axis2.label if spec.axis2 is not None else None,
        k_star=spec.k_star,
        theory=theory,
        parameters=sweep_parameters(spec),
    )
    if spec.output is not None:
        from .outputs import write_sweep

        write_sweep(result, spec.output)
    return result


def sweep_parameters(spec: SweepSpec) -> dict:
    out = {
        "scenario": {k: v for k, v in spec.scenario.to_dict().items() if k not in ("rng_seed", "beta")},
        "axis1": {"name": spec.axis1.label, "values": list(spec.axis1.values)},
        "axis2": None if spec.axis2 is None else {"name": spec.axis2.label, "values": list(spec.axis2.values)},
        "betas": list(spec.betas),
        "replicas": spec.replicas,
        "master_seed": spec.master_seed,
        "k_star": spec.k_star + 1,
        "estimator": spec.estimator,
    }
    if spec.sbm is not None:
        s = spec.sbm
        out["sbm"] = {"n": s.n, "b": s.b, "p_in": s.p_in, "p_out": s.p_out, "rho": list(s.rho)}
    else:
        out["graph"] = {"n": spec.graph.n, "m": spec.graph.m, "blocks": spec.graph.block_sizes.tolist()}
    return out
