import numpy as np
import pytest
from conftest import random_graph
from hypothesis import given
from hypothesis import strategies as st
from oracles import dense_q, dense_z

from influence_percolation.errors import ConsistencyError, MutationError, ParameterError, ValidationError
from influence_percolation.graph import Graph
from influence_percolation.influence import (
    InfluenceModel,
    PreferenceState,
    apply_preference_change,
    combined_influence,
    influence_weight,
)


def random_state(rng, g, K, seeded_frac=0.3):
    h = rng.dirichlet(np.ones(K), g.n)
    seeded = np.where(rng.random(g.n) < seeded_frac, rng.integers(0, K, g.n), -1)
    pinned = seeded >= 0
    h[pinned] = 0.0
    h[np.flatnonzero(pinned), seeded[pinned]] = 1.0
    return PreferenceState(g, h, seeded)


def cycle4():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], [0] * 4, 1)


def single_edge():
    return Graph.from_edges(2, [(0, 1)], [0, 0], 1)


class TestWeight:
    def test_beta_zero_adjacent(self):
        g = cycle4()
        assert influence_weight(InfluenceModel(g, 0.0), 0, 1) == 1 / 8

    def test_single_edge_beta_one(self):
        assert influence_weight(InfluenceModel(single_edge(), 1.0), 0, 1) == 0.25

    def test_non_adjacent(self):
        assert influence_weight(InfluenceModel(cycle4(), 1.0), 0, 2) == pytest.approx(-0.0625, abs=1e-15)

    def test_self_weight_rejected(self):
        with pytest.raises(ParameterError):
            influence_weight(InfluenceModel(cycle4(), 1.0), 1, 1)

    def test_negative_beta_rejected(self):
        with pytest.raises(ParameterError):
            InfluenceModel(cycle4(), -0.1)

    @given(seed=st.integers(0, 10**6), beta=st.floats(0, 1.5))
    def test_symmetric_and_matches_dense(self, seed, beta):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 12, 0.3)
        model = InfluenceModel(g, beta)
        q = dense_q(g.dense_adjacency().astype(float), beta)
        for u in range(g.n):
            for w in range(g.n):
                if u != w:
                    assert influence_weight(model, u, w) == influence_weight(model, w, u)
                    assert influence_weight(model, u, w) == pytest.approx(q[u, w], abs=1e-15)

    @given(seed=st.integers(0, 10**6), b1=st.floats(0, 1.5), b2=st.floats(0, 1.5))
    def test_decreasing_in_beta_for_non_adjacent(self, seed, b1, b2):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 10, 0.4)
        a = g.dense_adjacency()
        pairs = [(u, w) for u in range(g.n) for w in range(g.n) if u != w and not a[u, w] and g.degree[u] and g.degree[w]]
        # gaps below float resolution underflow to equal weights
        if not pairs or abs(b1 - b2) < 1e-9:
            return
        lo, hi = sorted((b1, b2))
        u, w = pairs[0]
        assert influence_weight(InfluenceModel(g, hi), u, w) < influence_weight(InfluenceModel(g, lo), u, w)


class TestCombined:
    def test_single_edge_seeded_neighbour(self):
        g = single_edge()
        state = PreferenceState(g, np.array([[0.5, 0.5], [1.0, 0.0]]), np.array([-1, 0]))
        z = combined_influence(InfluenceModel(g, 1.0), state, 0)
        assert np.allclose(z, [0.25, 0.0], atol=1e-15)

    def test_uniform_beta_zero(self):
        g = random_graph(np.random.default_rng(1), 15, 0.3)
        K = 3
        state = PreferenceState(g, np.full((g.n, K), 1 / K), np.full(g.n, -1))
        model = InfluenceModel(g, 0.0)
        for u in range(g.n):
            z = combined_influence(model, state, u)
            assert np.allclose(z, g.degree[u] / (model.two_m * K), atol=1e-15)

    @given(seed=st.integers(0, 10**6), n=st.integers(2, 50), beta=st.floats(0, 1.5), K=st.integers(1, 4))
    def test_matches_dense_oracle(self, seed, n, beta, K):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, n, rng.uniform(0.05, 0.9))
        state = random_state(rng, g, K)
        model = InfluenceModel(g, beta)
        adj = g.dense_adjacency().astype(float)
        q = dense_q(adj, beta)
        for u in rng.choice(n, min(n, 8), replace=False):
            z = combined_influence(model, state, int(u), check=True)
            oracle = dense_z(adj, state.h, beta, int(u))
            assert np.max(np.abs(z - oracle)) <= 1e-12
            # PPVs sum to one, so the candidate total is the column sum of q
            assert z.sum() == pytest.approx(q[:, u].sum(), abs=1e-12)

    def test_stale_aggregate_detected(self):
        g = random_graph(np.random.default_rng(2), 10, 0.5)
        state = random_state(np.random.default_rng(3), g, 2, seeded_frac=0.0)
        state.S += 5.0
        with pytest.raises(ConsistencyError):
            combined_influence(InfluenceModel(g, 1.0), state, 0, check=True)


class TestApplyChange:
    def make(self):
        # star with centre 0 of degree 3
        g = Graph.from_edges(4, [(0, 1), (0, 2), (0, 3)], [0] * 4, 1)
        h = np.full((4, 2), 0.5)
        h[3] = [1.0, 0.0]
        return PreferenceState(g, h, np.array([-1, -1, -1, 0]))

    def test_identity(self):
        state = self.make()
        before = state.S.copy()
        apply_preference_change(state, 0, state.h[0].copy())
        assert np.array_equal(state.S, before)

    def test_hand_arithmetic(self):
        state = self.make()
        before = state.S.copy()
        apply_preference_change(state, 0, np.array([0.9, 0.1]))
        assert np.allclose(state.S - before, [1.2, -1.2], atol=1e-14)
        assert np.allclose(state.S, state.exact_S(), atol=1e-14)

    def test_seeded_rejected(self):
        state = self.make()
        with pytest.raises(MutationError):
            apply_preference_change(state, 3, np.array([0.5, 0.5]))
        assert state.h[3].tolist() == [1.0, 0.0]

    @pytest.mark.parametrize("bad", [[0.7, 0.7], [1.2, -0.2], [1.0]])
    def test_invalid_vector(self, bad):
        with pytest.raises(ValidationError):
            apply_preference_change(self.make(), 0, np.array(bad))

    def test_drift_bounded(self):
        rng = np.random.default_rng(8)
        g = random_graph(rng, 40, 0.3)
        state = random_state(rng, g, 3, seeded_frac=0.2)
        state.rebuild_every = 10**9
        undecided = state.undecided
        for _ in range(1000):
            u = int(rng.choice(undecided))
            apply_preference_change(state, u, rng.dirichlet(np.ones(3)))
        exact = state.exact_S()
        assert np.max(np.abs(state.S - exact)) <= 1e-8 * np.max(np.abs(exact))

    def test_periodic_rebuild(self):
        rng = np.random.default_rng(9)
        g = random_graph(rng, 10, 0.5)
        state = PreferenceState(g, np.full((10, 2), 0.5), np.full(10, -1), rebuild_every=5)
        for i in range(5):
            apply_preference_change(state, i, np.array([0.3, 0.7]))
        assert np.array_equal(state.S, state.exact_S())

    def test_invalid_state_rejected(self):
        g = single_edge()
        with pytest.raises(ValidationError):
            PreferenceState(g, np.array([[0.5, 0.5], [0.5, 0.5]]), np.array([-1, 0]))
        with pytest.raises(ValidationError):
            PreferenceState(g, np.array([[0.6, 0.6], [1.0, 0.0]]), np.array([-1, 0]))
