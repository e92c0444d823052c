"""Generalized-modularity influence and per-voter preference state.

The influence of voter ``w`` on voter ``u`` is

    q(u, w) = a_uw / 2m - beta * (k_u / 2m) * (k_w / 2m),

the modularity of a graph sampled by picking a uniformly random edge. The
n x n matrix is never formed: the combined influence on ``u`` splits into a
neighbour sum and a global term that only needs the degree-weighted
preference mass ``S_k = sum_w k_w h_wk``, which :class:`PreferenceState`
keeps up to date.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .errors import ConsistencyError, MutationError, ParameterError, ValidationError
from .graph import Graph

PROB_TOL = 1e-9


class SampledGraphInfluence(Protocol):
    """What the dynamics need from an influence model.

    Any modularity of a sampled graph, ``q = P_UW(u, w) - beta P_U(u) P_W(w)``,
    with a sparse joint term fits this shape. Only uniform edge sampling
    (:class:`InfluenceModel`) is provided.
    """

    graph: Graph
    beta: float

    def weight(self, u: int, w: int) -> float: ...

    def combined(self, state: PreferenceState, u: int) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class InfluenceModel:
    graph: Graph
    beta: float
    two_m: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.beta >= 0:
            raise ParameterError(f"beta must be >= 0, got {self.beta!r}")
        two_m = float(self.graph.degree.sum())
        if two_m == 0:
            raise ParameterError("influence is undefined on a graph without edges")
        object.__setattr__(self, "two_m", two_m)
        object.__setattr__(self, "beta", float(self.beta))

    def weight(self, u: int, w: int) -> float:
        return influence_weight(self, u, w)

    def combined(self, state: PreferenceState, u: int) -> np.ndarray:
        return combined_influence(self, state, u)


class PreferenceState:
    """Preference probability vectors of all voters plus running aggregates.

    ``seeded[u]`` is the candidate voter ``u`` is pinned to, or -1 for an
    undecided voter. ``S`` is the degree-weighted preference mass and
    ``undecided_sum`` the plain column sum over undecided voters (used for
    the average undecided preference). Both are rebuilt exactly every
    ``rebuild_every`` updates.
    """

    def __init__(self, graph: Graph, h: np.ndarray, seeded: np.ndarray, rebuild_every: int | None = None):
        h = np.array(h, dtype=np.float64, order="C")
        seeded = np.asarray(seeded, dtype=np.int64).copy()
        if h.ndim != 2 or h.shape[0] != graph.n:
            raise ValidationError(f"h must be an (n, K) matrix with n = {graph.n}")
        if seeded.shape != (graph.n,):
            raise ValidationError("seeded must have one entry per voter")
        K = h.shape[1]
        if np.any(h < 0) or np.any(np.abs(h.sum(axis=1) - 1.0) > PROB_TOL):
            raise ValidationError("every row of h must be a probability vector")
        if np.any(seeded >= K) or np.any(seeded < -1):
            raise ValidationError("seeded candidate index out of range")
        pinned = np.flatnonzero(seeded >= 0)
        onehot = np.zeros((len(pinned), K))
        onehot[np.arange(len(pinned)), seeded[pinned]] = 1.0
        if not np.array_equal(h[pinned], onehot):
            raise ValidationError("seeded voters must hold one-hot preferences")
        self.graph = graph
        self.K = K
        self.h = h
        self.seeded = seeded
        self.seeded.setflags(write=False)
        self.undecided = np.flatnonzero(seeded < 0)
        self.undecided.setflags(write=False)
        self.rebuild_every = int(rebuild_every) if rebuild_every else 10 * graph.n
        if self.rebuild_every < 1:
            raise ParameterError("rebuild_every must be positive")
        self.updates = 0
        self._deg = graph.degree.astype(np.float64)
        self.S = np.empty(K)
        self.undecided_sum = np.empty(K)
        self.rebuild()

    @property
    def n_undecided(self) -> int:
        return len(self.undecided)

    def rebuild(self) -> None:
        self.S[:] = self._deg @ self.h
        self.undecided_sum[:] = self.h[self.undecided].sum(axis=0)

    def exact_S(self) -> np.ndarray:
        return self._deg @ self.h

    def average_undecided(self) -> np.ndarray:
        """h_k(t): mean preference of undecided voters (zeros if there are none)."""
        if not self.n_undecided:
            return np.zeros(self.K)
        return self.undecided_sum / self.n_undecided

    def copy(self) -> PreferenceState:
        new = object.__new__(PreferenceState)
        new.__dict__.update(self.__dict__)
        new.h = self.h.copy()
        new.S = self.S.copy()
        new.undecided_sum = self.undecided_sum.copy()
        return new


def influence_weight(model: InfluenceModel, u: int, w: int) -> float:
    """q(u, w) for distinct voters ``u`` and ``w``."""
    if u == w:
        raise ParameterError("influence_weight is only defined for u != w")
    g = model.graph
    a = 1.0 if g.has_edge(u, w) else 0.0
    k = g.degree
    # degree product first: integer and commutative, so q(u, w) == q(w, u) exactly
    return a / model.two_m - model.beta * float(k[u] * k[w]) / (model.two_m * model.two_m)


def combined_influence(model: InfluenceModel, state: PreferenceState, u: int, check: bool = False) -> np.ndarray:
    """z_u: combined influence of all other voters on ``u``, per candidate.

    Uses z_uk = (1/2m) sum_{w in N(u)} h_wk - beta k_u / (2m)^2 (S_k - k_u h_uk),
    with the neighbour sum taken in ascending neighbour order. With
    ``check`` the maintained ``S`` is compared against a full rebuild first.
    """
    g = model.graph
    if check:
        exact = state.exact_S()
        if not np.allclose(state.S, exact, rtol=1e-6, atol=1e-9 * max(1.0, float(np.abs(exact).max()))):
            raise ConsistencyError(f"stale aggregate S: maintained {state.S}, exact {exact}")
    nbr = state.h[g.indices[g.indptr[u] : g.indptr[u + 1]]].sum(axis=0)
    k_u = float(g.degree[u])
    two_m = model.two_m
    return nbr / two_m - (model.beta * k_u / (two_m * two_m)) * (state.S - k_u * state.h[u])


def apply_preference_change(state: PreferenceState, u: int, new_h_u: np.ndarray) -> None:
    """Replace the preferences of undecided voter ``u`` in place."""
    if state.seeded[u] >= 0:
        raise MutationError(f"voter {u} is seeded for candidate {state.seeded[u]} and cannot change")
    new_h_u = np.asarray(new_h_u, dtype=np.float64)
    if new_h_u.shape != (state.K,):
        raise ValidationError(f"expected a length-{state.K} vector")
    if np.any(new_h_u < 0) or abs(new_h_u.sum() - 1.0) > PROB_TOL:
        raise ValidationError(f"not a probability vector: {new_h_u}")
    old = state.h[u].copy()
    state.S += state.graph.degree[u] * (new_h_u - old)
    state.undecided_sum += new_h_u - old
    state.h[u] = new_h_u
    state.updates += 1
    if state.updates % state.rebuild_every == 0:
        state.rebuild()
