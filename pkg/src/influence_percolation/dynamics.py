"""Poisson-clock softmax opinion dynamics.

Every undecided voter carries a rate-1 Poisson clock. The superposition of
those clocks is a single Poisson process of rate N_u (the number of
undecided voters) whose ticks each belong to a uniformly random undecided
voter, which is how events are scheduled here. On a tick the voter computes
its combined influence ``z_u`` and reweights its preferences by
``exp(theta * z_u)``. At the end every undecided voter votes for its most
preferred candidate (ties go to the lowest index).
"""

from __future__ import annotations

import logging
import time
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .errors import MutationError, ParameterError, PlacementError, ValidationError
from .graph import Graph
from .influence import (
    PROB_TOL,
    InfluenceModel,
    PreferenceState,
    apply_preference_change,
    combined_influence,
)

logger = logging.getLogger(__name__)


@dataclass
class ScenarioConfig:
    """Everything a single run needs besides the graph.

    Block and candidate indices are 0-based. ``block_seed_fractions[(b, k)]``
    is the number of seeds candidate ``k`` places in block ``b`` as a fraction
    of n; ``whole_block_seeds[b] = k`` makes every voter of block ``b`` a seed
    of ``k``. ``early_stop`` is ``(eps, window_events)``; a window of ``None``
    means 5 N_u events. ``stride`` (trajectory sampling, in events) defaults
    to N_u.
    """

    K: int
    theta: float
    T: float
    beta: float
    initial_ppv: tuple[float, ...] | None = None
    block_seed_fractions: Mapping[tuple[int, int], float] = field(default_factory=dict)
    whole_block_seeds: Mapping[int, int] = field(default_factory=dict)
    rng_seed: int | np.random.SeedSequence | None = 0
    early_stop: tuple[float, int | None] | None = (1e-6, None)
    stride: int | None = None
    rebuild_every: int | None = None

    def __post_init__(self) -> None:
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError(f"K must be a positive integer, got {self.K!r}")
        self.K = int(self.K)
        if not self.theta > 0:
            raise ParameterError(f"theta must be > 0, got {self.theta!r}")
        if not self.T > 0:
            raise ParameterError(f"T must be > 0, got {self.T!r}")
        if not self.beta >= 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta!r}")
        if self.initial_ppv is None:
            self.initial_ppv = tuple([1.0 / self.K] * self.K)
        ppv = np.asarray(self.initial_ppv, dtype=float)
        if ppv.shape != (self.K,) or np.any(ppv < 0) or abs(ppv.sum() - 1.0) > PROB_TOL:
            raise ParameterError(f"initial_ppv must be a length-{self.K} probability vector")
        self.initial_ppv = tuple(ppv.tolist())
        self.block_seed_fractions = {(int(b), int(k)): float(v) for (b, k), v in self.block_seed_fractions.items()}
        self.whole_block_seeds = {int(b): int(k) for b, k in self.whole_block_seeds.items()}
        for (b, k), v in self.block_seed_fractions.items():
            if not 0 <= k < self.K:
                raise ParameterError(f"block_seed_fractions: candidate {k} out of range")
            if not 0 <= v <= 1:
                raise ParameterError(f"block_seed_fractions: fraction for block {b}, candidate {k} must lie in [0, 1]")
        for b, k in self.whole_block_seeds.items():
            if not 0 <= k < self.K:
                raise ParameterError(f"whole_block_seeds: candidate {k} out of range")
            if any(bb == b for bb, _ in self.block_seed_fractions):
                raise ParameterError(f"block {b} is fully seeded and also has seed fractions")
        if self.early_stop is not None:
            eps, window = self.early_stop
            if not eps > 0 or (window is not None and window < 1):
                raise ParameterError("early_stop needs eps > 0 and a positive window")

    def to_dict(self) -> dict:
        seed = self.rng_seed
        if isinstance(seed, np.random.SeedSequence):
            seed = {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
        return {
            "K": self.K,
            "theta": self.theta,
            "T": self.T,
            "beta": self.beta,
            "initial_ppv": list(self.initial_ppv),
            "block_seed_fractions": {f"{b}.{k}": v for (b, k), v in sorted(self.block_seed_fractions.items())},
            "whole_block_seeds": {str(b): k for b, k in sorted(self.whole_block_seeds.items())},
            "rng_seed": seed,
            "early_stop": list(self.early_stop) if self.early_stop is not None else None,
            "stride": self.stride,
        }


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def derive_stream(seed, *key: int) -> np.random.Generator:
    """Independent generator for the sub-task ``key`` of ``seed``.

    Derivation is positional, so it does not depend on how many other
    streams were drawn before.
    """
    ss = _seed_sequence(seed)
    child = np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(key))
    return np.random.default_rng(child)


def init_scenario(g: Graph, cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> PreferenceState:
    """Place seeded voters and give everybody else the initial PPV."""
    if rng is None:
        rng = derive_stream(cfg.rng_seed, 0)
    n, K = g.n, cfg.K
    seeded = np.full(n, -1, dtype=np.int64)
    for b, k in sorted(cfg.whole_block_seeds.items()):
        if not 0 <= b < g.n_blocks:
            raise PlacementError(f"whole_block_seeds: block {b} does not exist")
        seeded[g.block_of == b] = k
    by_block: dict[int, list[tuple[int, float]]] = {}
    for (b, k), frac in sorted(cfg.block_seed_fractions.items()):
        if not 0 <= b < g.n_blocks:
            raise PlacementError(f"block_seed_fractions: block {b} does not exist")
        by_block.setdefault(b, []).append((k, frac))
    for b, wanted in by_block.items():
        members = g.nodes_in_block(b)
        counts = [int(np.floor(frac * n + 0.5)) for _, frac in wanted]
        if sum(counts) > len(members):
            raise PlacementError(
                f"block_seed_fractions: {sum(counts)} seeds requested in block {b} of size {len(members)}"
            )
        chosen = rng.permutation(members)
        start = 0
        for (k, _), c in zip(wanted, counts):
            seeded[chosen[start : start + c]] = k
            start += c
    h = np.tile(np.asarray(cfg.initial_ppv, dtype=np.float64), (n, 1))
    pinned = seeded >= 0
    h[pinned] = 0.0
    h[np.flatnonzero(pinned), seeded[pinned]] = 1.0
    return PreferenceState(g, h, seeded, cfg.rebuild_every)


def softmax_update(h_u: np.ndarray, z_u: np.ndarray, theta: float) -> np.ndarray:
    """h_k exp(theta z_k) / sum_l h_l exp(theta z_l), evaluated with a max shift."""
    h_u = np.asarray(h_u, dtype=np.float64)
    z_u = np.asarray(z_u, dtype=np.float64)
    pos = h_u > 0
    if not pos.any():
        raise ValidationError("preference vector is all zero")
    x = theta * z_u
    shift = x[pos].max()
    w = np.where(pos, np.exp(np.where(pos, x - shift, 0.0)) * h_u, 0.0)
    return w / w.sum()


def schedule_events(rng: np.random.Generator, t0: float, n_u: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Next ``count`` ticks of ``n_u`` rate-1 clocks after ``t0``.

    Returns the tick times (gaps are Exp(n_u)) and, for each tick, the
    position in the undecided list of the voter whose clock rang.
    """
    ticks = t0 + np.cumsum(rng.exponential(1.0 / n_u, count))
    picks = rng.integers(0, n_u, count)
    return ticks, picks


@dataclass
class EventRecord:
    """Per-event trace: the voter, its combined influence and its PPV before/after."""

    voters: np.ndarray
    z: np.ndarray
    before: np.ndarray
    after: np.ndarray


def run_events(
    model: InfluenceModel,
    state: PreferenceState,
    voters: np.ndarray,
    theta: float,
    engine: str = "numba",
    record: bool = False,
) -> EventRecord | None:
    """Apply one update per entry of ``voters``, in order, mutating ``state``.

    ``engine="python"`` goes through :func:`combined_influence`,
    :func:`softmax_update` and :func:`apply_preference_change`;
    ``engine="numba"`` runs the compiled equivalent.
    """
    voters = np.ascontiguousarray(voters, dtype=np.int64)
    n_ev, K = len(voters), state.K
    rec = EventRecord(voters.copy(), np.empty((n_ev, K)), np.empty((n_ev, K)), np.empty((n_ev, K))) if record else None
    if engine == "python":
        for e, u in enumerate(voters):
            z = combined_influence(model, state, int(u))
            new = softmax_update(state.h[u], z, theta)
            if rec is not None:
                rec.z[e], rec.before[e], rec.after[e] = z, state.h[u], new
            apply_preference_change(state, int(u), new)
        return rec
    if engine != "numba":
        raise ParameterError(f"unknown engine {engine!r}")
    if n_ev and np.any(state.seeded[voters] >= 0):
        bad = voters[state.seeded[voters] >= 0][0]
        raise MutationError(f"voter {bad} is seeded and cannot change")
    g = model.graph
    dummy = np.empty((0, K))
    state.updates = _kernel.event_loop(
        g.indptr, g.indices, g.degree, state.undecided, state.h, state.S, state.undecided_sum, voters,
        float(theta), model.beta, model.two_m, state.rebuild_every, state.updates,
        record, rec.z if rec else dummy, rec.before if rec else dummy, rec.after if rec else dummy,
    )
    return rec


def tally_votes(state: PreferenceState) -> np.ndarray:
    """Votes of undecided voters: argmax of each PPV, lowest index on ties."""
    if not state.n_undecided:
        return np.zeros(state.K, dtype=np.int64)
    choice = np.argmax(state.h[state.undecided], axis=1)
    return np.bincount(choice, minlength=state.K)


@dataclass
class SimulationResult:
    final_h: np.ndarray
    votes: np.ndarray
    seeded_votes: np.ndarray
    trajectory_time: np.ndarray
    trajectory_events: np.ndarray
    trajectory_h: np.ndarray
    event_count: int
    final_time: float
    stopped_early: bool
    n_undecided: int
    wall_time: float
    config: dict
    events: EventRecord | None = None

    @property
    def fractions(self) -> np.ndarray:
        if not self.n_undecided:
            return np.full(len(self.votes), np.nan)
        return self.votes / self.n_undecided

    def to_dict(self) -> dict:
        """JSON-ready summary; wall time is left out so output is reproducible."""
        return {
            "votes": self.votes.tolist(),
            "seeded_votes": self.seeded_votes.tolist(),
            "n_undecided": self.n_undecided,
            "event_count": self.event_count,
            "final_time": self.final_time,
            "stopped_early": self.stopped_early,
            "parameters": self.config,
        }


def run_simulation(
    g: Graph,
    cfg: ScenarioConfig,
    engine: str = "numba",
    record: bool = False,
) -> SimulationResult:
    """Run the dynamics from time 0 until ``cfg.T`` or until early stopping.

    Seed placement and event scheduling use two independent streams derived
    from ``cfg.rng_seed``.
    """
    started = time.perf_counter()
    state = init_scenario(g, cfg, derive_stream(cfg.rng_seed, 0))
    rng = derive_stream(cfg.rng_seed, 1)
    model = InfluenceModel(g, cfg.beta)
    n_u = state.n_undecided
    seeded_votes = np.bincount(state.seeded[state.seeded >= 0], minlength=cfg.K)
    times = [0.0]
    event_marks = [0]
    traj = [state.average_undecided().copy()]
    records: list[EventRecord] = []
    t, events, stopped = 0.0, 0, False
    if n_u:
        stride = cfg.stride or n_u
        if cfg.early_stop is not None:
            eps, window = cfg.early_stop[0], cfg.early_stop[1] or 5 * n_u
        check_events, check_avg = 0, traj[0]
        while True:
            ticks, picks = schedule_events(rng, t, n_u, stride)
            cut = int(np.searchsorted(ticks, cfg.T, side="right"))
            rec = run_events(model, state, state.undecided[picks[:cut]], cfg.theta, engine, record)
            if rec is not None:
                records.append(rec)
            events += cut
            t = float(ticks[cut - 1]) if cut == stride else float(cfg.T)
            times.append(t)
            event_marks.append(events)
            traj.append(state.average_undecided().copy())
            if cut < stride:
                break
            if cfg.early_stop is not None and events - check_events >= window:
                if np.max(np.abs(traj[-1] - check_avg)) < eps:
                    stopped = True
                    break
                check_events, check_avg = events, traj[-1]
    votes = tally_votes(state)
    final_h = np.zeros_like(state.h)
    final_h[np.arange(g.n), np.argmax(state.h, axis=1)] = 1.0
    wall = time.perf_counter() - started
    logger.debug("run finished: %d events, t=%.3f, early=%s, %.2fs", events, t, stopped, wall)
    events_rec = None
    if record and records:
        events_rec = EventRecord(*(np.concatenate([getattr(r, f) for r in records]) for f in ("voters", "z", "before", "after")))
    return SimulationResult(
        final_h=final_h,
        votes=votes,
        seeded_votes=seeded_votes,
        trajectory_time=np.asarray(times),
        trajectory_events=np.asarray(event_marks, dtype=np.int64),
        trajectory_h=np.asarray(traj),
        event_count=events,
        final_time=t,
        stopped_early=stopped,
        n_undecided=n_u,
        wall_time=wall,
        config=cfg.to_dict(),
        events=events_rec,
    )
