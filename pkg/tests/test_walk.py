import math

import numpy as np
import pytest

from gamechurn.errors import DataError, NoEdgeError, SchemaError
from gamechurn.graph import NodeKind, Snapshot, game, player
from gamechurn.kernels import splitmix64_py
from gamechurn.walk import (
    WalkConfig,
    build_augmented,
    node_similarity,
    sample_contexts,
    sample_contexts_batch,
    transition_distribution,
)

_MASK64 = (1 << 64) - 1


def snapshot(player_feats, game_feats, edges, t=0):
    player_feats = np.asarray(player_feats, dtype=np.float64)
    game_feats = np.asarray(game_feats, dtype=np.float64)
    return Snapshot(
        t,
        np.arange(player_feats.shape[0]),
        np.arange(game_feats.shape[0]),
        np.asarray(sorted(edges), dtype=np.int64).reshape(-1, 2),
        player_feats,
        game_feats,
    )


class TestNodeSimilarity:
    def test_identical(self):
        assert node_similarity([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert node_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_known_value(self):
        assert node_similarity([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8, abs=1e-15)

    def test_zero_norm(self):
        assert node_similarity([0.0, 0.0], [1.0, 2.0]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(SchemaError):
            node_similarity([1.0], [1.0, 2.0])


class TestWalkConfig:
    @pytest.mark.parametrize("kwargs", [
        {"epsilon": 0.0},
        {"epsilon": 1.5},
        {"return_p": 0.0},
        {"inout_q": -1.0},
        {"contexts_per_edge": 0},
        {"walk_length": 0},
        {"max_augmented_per_node": 0},
    ])
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(DataError):
            WalkConfig(**kwargs)

    def test_defaults(self):
        config = WalkConfig()
        assert config.epsilon == 1.0
        assert config.return_p == 1.0
        assert config.inout_q == 0.05
        assert config.contexts_per_edge == 4


class TestBuildAugmented:
    def test_tiny_epsilon_filters_everything(self):
        rng = np.random.default_rng(0)
        feats = rng.normal(size=(4, 3))
        snap = snapshot(feats, feats, [(i, i) for i in range(4)])
        ag = build_augmented(snap, WalkConfig(epsilon=1e-9))
        for i in range(4):
            assert ag.augments(player(i)) == []
            assert ag.augments(game(i)) == []

    def test_identical_features_list_each_other(self):
        games = np.array([[1.0, 2.0], [1.0, 2.0]])
        players = np.array([[1.0, 0.0]])
        snap = snapshot(players, games, [(0, 0), (0, 1)])
        ag = build_augmented(snap, WalkConfig(epsilon=0.5))
        for gid, other in ((0, 1), (1, 0)):
            pairs = ag.augments(game(gid))
            assert len(pairs) == 1
            node, sim = pairs[0]
            assert node == game(other)
            assert sim == pytest.approx(1.0, abs=1e-12)

    def test_cap_keeps_top_similarities(self):
        rng = np.random.default_rng(12)
        feats = rng.normal(size=(5, 4))
        snap = snapshot(np.ones((1, 4)), feats, [(0, i) for i in range(5)])
        epsilon = 0.999  # threshold just above orthogonal
        ag = build_augmented(snap, WalkConfig(epsilon=epsilon,
                                              max_augmented_per_node=2))
        norms = np.linalg.norm(feats, axis=1)
        sims = feats @ feats.T / np.outer(norms, norms)
        for i in range(5):
            others = [j for j in range(5) if j != i and sims[i, j] > 1.0 - epsilon]
            others.sort(key=lambda j: (-sims[i, j], j))
            expect = [(game(j), sims[i, j]) for j in others[:2]]
            got = ag.augments(game(i))
            assert [n for n, _ in got] == [n for n, _ in expect]
            assert np.allclose([s for _, s in got], [s for _, s in expect])


def three_candidate_fixture():
    """From (player 0, game 0): return weight 1, one augment neighbor at
    similarity 0.9, one two-hop player at similarity 0.5."""
    players = np.array([
        [1.0, 0.0],
        [0.9, math.sqrt(0.19)],   # cosine 0.9 with player 0
        [0.5, math.sqrt(0.75)],   # cosine 0.5 with player 0
    ])
    games = np.array([[1.0, 1.0], [1.0, -1.0]])
    edges = [(0, 0), (2, 0), (1, 1)]
    snap = snapshot(players, games, edges)
    # threshold 0.7 admits player 1 as an augment of player 0 but not player 2
    config = WalkConfig(epsilon=0.3, return_p=1.0, inout_q=0.05)
    return build_augmented(snap, config), config


class TestTransitionDistribution:
    def test_hand_normalized_weights(self):
        ag, _ = three_candidate_fixture()
        dist = transition_distribution(ag, player(0), game(0))
        # weights 1 (return), 0.9 / 0.05 = 18, 0.5 / 0.05 = 10; total 29
        assert dist[player(0)] == pytest.approx(1 / 29, abs=1e-12)
        assert dist[player(1)] == pytest.approx(18 / 29, abs=1e-12)
        assert dist[player(2)] == pytest.approx(10 / 29, abs=1e-12)

    def test_other_kind_has_probability_zero(self):
        ag, _ = three_candidate_fixture()
        dist = transition_distribution(ag, player(0), game(0))
        assert all(node.kind is NodeKind.PLAYER for node in dist)
        assert dist.get(game(0), 0.0) == 0.0
        assert dist.get(game(1), 0.0) == 0.0

    def test_only_return_candidate(self):
        snap = snapshot([[1.0, 0.0]], [[0.0, 1.0]], [(0, 0)])
        ag = build_augmented(snap, WalkConfig(epsilon=0.5))
        assert transition_distribution(ag, player(0), game(0)) == {player(0): 1.0}

    def test_sums_to_one_and_non_negative(self):
        rng = np.random.default_rng(42)
        snap = snapshot(rng.normal(size=(6, 3)), rng.normal(size=(5, 3)),
                        [(u, v) for u in range(6) for v in range(5)
                         if rng.random() < 0.5 or v == u % 5])
        ag = build_augmented(snap, WalkConfig(epsilon=0.8))
        for u, v in map(tuple, snap.edges.tolist()):
            for prev, cur in ((player(u), game(v)), (game(v), player(u))):
                dist = transition_distribution(ag, prev, cur)
                assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
                assert all(p >= 0.0 for p in dist.values())

    def test_same_kind_state_rejected(self):
        ag, _ = three_candidate_fixture()
        with pytest.raises(DataError):
            transition_distribution(ag, player(0), player(1))

    def test_empirical_frequencies_match(self):
        # walk_length 3 emits one sampled transition per restart
        ag, _ = three_candidate_fixture()
        config = WalkConfig(epsilon=0.3, return_p=1.0, inout_q=0.05,
                            contexts_per_edge=20000, walk_length=3, rng_seed=9)
        contexts = sample_contexts(ag, (0, 0), config, walk_index=0)
        dist = transition_distribution(ag, player(0), game(0))
        counts = {}
        for u, v in contexts:
            assert v == 0
            counts[u] = counts.get(u, 0) + 1
        for pid, prob in dist.items():
            freq = counts.get(pid.id, 0) / len(contexts)
            assert freq == pytest.approx(prob, abs=0.02)


def replay_walks(ag, edge, config, walk_index):
    """Step-by-step walk simulation from public pieces of the augmented graph."""
    snap = ag.snapshot
    u_id, v_id = edge
    state = (config.rng_seed & _MASK64) ^ walk_index
    by_game = {}
    by_player = {}
    for pu, pv in snap.edges.tolist():
        by_game.setdefault(pv, []).append(pu)
        by_player.setdefault(pu, []).append(pv)
    rows = {True: snap.player_row, False: snap.game_row}

    def cosine(is_player, a, b):
        feats = snap.player_features if is_player else snap.game_features
        norms = ag.player_norm if is_player else ag.game_norm
        ra, rb = rows[is_player](a), rows[is_player](b)
        if norms[ra] == 0.0 or norms[rb] == 0.0:
            return 0.0
        dot = 0.0  # sequential accumulation, same rounding as the kernels
        for f in range(feats.shape[1]):
            dot += float(feats[ra, f]) * float(feats[rb, f])
        return dot / (float(norms[ra]) * float(norms[rb]))

    contexts = []
    while len(contexts) < config.contexts_per_edge:
        prev, cur, prev_is_player = u_id, v_id, True
        for _ in range(config.walk_length - 2):
            node = player(prev) if prev_is_player else game(prev)
            aug = ag.augments(node)
            aug_ids = [n.id for n, _ in aug]
            base = sorted((by_game if prev_is_player else by_player).get(cur, []))
            cand = [prev] + aug_ids
            weights = [1.0 / config.return_p]
            weights += [max(s, 0.0) / config.inout_q for _, s in aug]
            for o in base:
                if o == prev or o in aug_ids:
                    continue
                cand.append(o)
                weights.append(max(cosine(prev_is_player, prev, o), 0.0)
                               / config.inout_q)
            total = sum(weights)
            if total <= 0.0:
                return contexts
            state, x = splitmix64_py(state)
            r = x * total
            acc = 0.0
            chosen = cand[-1]
            for c, w in zip(cand, weights):
                acc += w
                if r < acc:
                    chosen = c
                    break
            contexts.append((chosen, cur) if prev_is_player else (cur, chosen))
            prev, cur = cur, chosen
            prev_is_player = not prev_is_player
            if len(contexts) == config.contexts_per_edge:
                break
    return contexts


class TestSampleContexts:
    def random_fixture(self, seed=21):
        rng = np.random.default_rng(seed)
        edges = {(int(u), int(rng.integers(0, 5))) for u in range(7)}
        edges |= {(int(rng.integers(0, 7)), int(v)) for v in range(5)}
        snap = snapshot(rng.normal(size=(7, 3)), rng.normal(size=(5, 3)),
                        sorted(edges))
        return snap

    def test_exact_count_on_non_degenerate_graph(self):
        snap = self.random_fixture()
        config = WalkConfig(contexts_per_edge=4, rng_seed=1)
        ag = build_augmented(snap, config)
        edge = tuple(snap.edges[0].tolist())
        assert len(sample_contexts(ag, edge, config)) == 4

    def test_contexts_are_player_game_pairs(self):
        snap = self.random_fixture()
        config = WalkConfig(contexts_per_edge=8, rng_seed=2)
        ag = build_augmented(snap, config)
        players = set(snap.player_ids.tolist())
        games = set(snap.game_ids.tolist())
        for edge in map(tuple, snap.edges.tolist()):
            for u, v in sample_contexts(ag, edge, config):
                assert u in players and v in games

    def test_isolated_edge_cycles_in_place(self):
        snap = snapshot([[1.0, 0.0]], [[0.0, 1.0]], [(0, 0)])
        config = WalkConfig(contexts_per_edge=4, walk_length=6, rng_seed=3)
        ag = build_augmented(snap, config)
        assert sample_contexts(ag, (0, 0), config) == [(0, 0)] * 4

    def test_deterministic_given_seed(self):
        snap = self.random_fixture()
        config = WalkConfig(contexts_per_edge=6, rng_seed=77)
        ag = build_augmented(snap, config)
        edge = tuple(snap.edges[1].tolist())
        first = sample_contexts(ag, edge, config, walk_index=5)
        again = sample_contexts(ag, edge, config, walk_index=5)
        assert first == again

    def test_matches_step_by_step_replay(self):
        snap = self.random_fixture(seed=33)
        config = WalkConfig(contexts_per_edge=6, walk_length=5, rng_seed=123)
        ag = build_augmented(snap, config)
        for k, edge in enumerate(map(tuple, snap.edges.tolist())):
            got = sample_contexts(ag, edge, config, walk_index=k)
            assert got == replay_walks(ag, edge, config, k)

    def test_batch_matches_single(self):
        snap = self.random_fixture(seed=8)
        config = WalkConfig(contexts_per_edge=5, rng_seed=4)
        ag = build_augmented(snap, config)
        edges = [tuple(e) for e in snap.edges.tolist()]
        indices = np.arange(len(edges), dtype=np.uint64)
        batch = sample_contexts_batch(ag, edges, config, indices)
        for k, edge in enumerate(edges):
            assert batch[k] == sample_contexts(ag, edge, config, walk_index=k)

    def test_unknown_edge_rejected(self):
        snap = self.random_fixture()
        config = WalkConfig()
        ag = build_augmented(snap, config)
        with pytest.raises(NoEdgeError):
            sample_contexts(ag, (0, 4999), config)
