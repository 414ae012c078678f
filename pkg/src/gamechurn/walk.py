"""Similarity-augmented second-order walks that sample context edges.

A snapshot is augmented with same-kind links between nodes whose full feature
vectors are more similar than ``1 - epsilon``.  A walk starts by traversing its
target edge and then hops under second-order weights: returning to the previous
node costs ``1 / p``; moving to an augment neighbor of the previous node costs
``sim / q``; moving to a node two base hops away (a base neighbor of the
current node) costs ``sim / q`` as well.  Candidates always share the previous
node's kind, so emitted consecutive pairs are always (player, game) edges,
whether or not they exist in the snapshot.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, DeadEndError, NoEdgeError, SchemaError
from .graph import NodeId, NodeKind, Snapshot

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class WalkConfig:
    epsilon: float = 1.0
    return_p: float = 1.0
    inout_q: float = 0.05
    contexts_per_edge: int = 4
    walk_length: int = 6
    max_augmented_per_node: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 1.0:
            raise DataError("epsilon must lie in (0, 1]")
        if not self.return_p > 0.0:
            raise DataError("return_p must be positive")
        if not self.inout_q > 0.0:
            raise DataError("inout_q must be positive")
        if self.contexts_per_edge < 1:
            raise DataError("contexts_per_edge must be positive")
        if self.walk_length < 1:
            raise DataError("walk_length must be positive")
        if self.max_augmented_per_node < 1:
            raise DataError("max_augmented_per_node must be positive")


def node_similarity(x, y) -> float:
    """Cosine similarity of two feature vectors; zero-norm vectors score 0."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise SchemaError(f"similarity of vectors with shapes {x.shape} and {y.shape}")
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(x @ y) / (nx * ny)


def _augment_side(feats: np.ndarray, epsilon: float, cap: int):
    """Top-``cap`` same-kind neighbors per node with similarity > 1 - epsilon."""
    n = feats.shape[0]
    indptr = np.zeros(n + 1, dtype=np.int64)
    if n == 0 or cap == 0:
        return indptr, np.empty(0, np.int64), np.empty(0)
    norms = np.linalg.norm(feats, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    unit = feats / safe[:, None]
    unit[norms == 0.0] = 0.0
    sims = unit @ unit.T
    thr = 1.0 - epsilon
    idx_rows, sim_rows = [], []
    for i in range(n):
        row = sims[i]
        keep = np.flatnonzero(row > thr)
        keep = keep[keep != i]
        # strongest first, ties broken by ascending index
        order = np.lexsort((keep, -row[keep]))[:cap]
        keep = keep[order]
        idx_rows.append(keep)
        sim_rows.append(row[keep])
        indptr[i + 1] = indptr[i] + keep.size
    return (
        indptr,
        np.concatenate(idx_rows) if idx_rows else np.empty(0, np.int64),
        np.concatenate(sim_rows) if sim_rows else np.empty(0),
    )


class AugmentedGraph:
    """One snapshot plus CSR adjacency, augment lists and feature norms."""

    def __init__(self, snapshot: Snapshot, config: WalkConfig):
        self.snapshot = snapshot
        self.config = config
        n_p = snapshot.player_ids.size
        n_g = snapshot.game_ids.size
        p_rows = np.searchsorted(snapshot.player_ids, snapshot.edges[:, 0])
        g_rows = np.searchsorted(snapshot.game_ids, snapshot.edges[:, 1])

        order = np.lexsort((g_rows, p_rows))
        self.p_indptr = np.zeros(n_p + 1, dtype=np.int64)
        np.add.at(self.p_indptr, p_rows + 1, 1)
        np.cumsum(self.p_indptr, out=self.p_indptr)
        self.p_indices = g_rows[order].astype(np.int64)

        order = np.lexsort((p_rows, g_rows))
        self.g_indptr = np.zeros(n_g + 1, dtype=np.int64)
        np.add.at(self.g_indptr, g_rows + 1, 1)
        np.cumsum(self.g_indptr, out=self.g_indptr)
        self.g_indices = p_rows[order].astype(np.int64)

        self.pa_indptr, self.pa_indices, self.pa_sims = _augment_side(
            snapshot.player_features, config.epsilon, config.max_augmented_per_node
        )
        self.ga_indptr, self.ga_indices, self.ga_sims = _augment_side(
            snapshot.game_features, config.epsilon, config.max_augmented_per_node
        )
        self.player_norm = np.linalg.norm(snapshot.player_features, axis=1)
        self.game_norm = np.linalg.norm(snapshot.game_features, axis=1)

    def augments(self, node: NodeId):
        """Same-kind (neighbor, similarity) pairs in descending similarity."""
        snap = self.snapshot
        if node.kind is NodeKind.PLAYER:
            row = snap.player_row(node.id)
            indptr, indices, sims = self.pa_indptr, self.pa_indices, self.pa_sims
            ids = snap.player_ids
        else:
            row = snap.game_row(node.id)
            indptr, indices, sims = self.ga_indptr, self.ga_indices, self.ga_sims
            ids = snap.game_ids
        return [
            (NodeId(node.kind, int(ids[indices[k]])), float(sims[k]))
            for k in range(indptr[row], indptr[row + 1])
        ]

    def augment_pairs(self, kind: NodeKind):
        """(id_a, id_b, sim) triples of the stored augment links for one kind."""
        if kind is NodeKind.PLAYER:
            indptr, indices, sims = self.pa_indptr, self.pa_indices, self.pa_sims
            ids = self.snapshot.player_ids
        else:
            indptr, indices, sims = self.ga_indptr, self.ga_indices, self.ga_sims
            ids = self.snapshot.game_ids
        out = []
        for row in range(ids.size):
            for k in range(indptr[row], indptr[row + 1]):
                out.append((int(ids[row]), int(ids[indices[k]]), float(sims[k])))
        return out


def build_augmented(snapshot: Snapshot, config: WalkConfig) -> AugmentedGraph:
    return AugmentedGraph(snapshot, config)


def _candidates(ag: AugmentedGraph, prev_is_player: bool, prev: int, cur: int):
    """Candidate rows and unnormalized weights, in the kernels' fixed order."""
    cfg = ag.config
    if prev_is_player:
        aug = ag.pa_indices[ag.pa_indptr[prev]:ag.pa_indptr[prev + 1]]
        sims = ag.pa_sims[ag.pa_indptr[prev]:ag.pa_indptr[prev + 1]]
        base = ag.g_indices[ag.g_indptr[cur]:ag.g_indptr[cur + 1]]
        feats = ag.snapshot.player_features
        norms = ag.player_norm
    else:
        aug = ag.ga_indices[ag.ga_indptr[prev]:ag.ga_indptr[prev + 1]]
        sims = ag.ga_sims[ag.ga_indptr[prev]:ag.ga_indptr[prev + 1]]
        base = ag.p_indices[ag.p_indptr[cur]:ag.p_indptr[cur + 1]]
        feats = ag.snapshot.game_features
        norms = ag.game_norm
    keep = base[(base != prev) & ~np.isin(base, aug)]
    denom = norms[prev] * norms[keep]
    with np.errstate(invalid="ignore", divide="ignore"):
        bsim = np.where(denom > 0.0, feats[keep] @ feats[prev] / denom, 0.0)
    cand = np.concatenate((np.array([prev], np.int64), aug, keep))
    weights = np.concatenate((
        np.array([1.0 / cfg.return_p]),
        np.clip(sims, 0.0, None) / cfg.inout_q,
        np.clip(bsim, 0.0, None) / cfg.inout_q,
    ))
    return cand, weights


def _locate(ag: AugmentedGraph, node: NodeId) -> int:
    snap = ag.snapshot
    if node.kind is NodeKind.PLAYER:
        return snap.player_row(node.id)
    return snap.game_row(node.id)


def transition_distribution(ag: AugmentedGraph, prev: NodeId, cur: NodeId) -> dict:
    """Next-step probabilities of a walker that just moved ``prev`` -> ``cur``.

    The returned map covers exactly the candidate set (nodes sharing ``prev``'s
    kind); anything absent, in particular every node of the other kind, has
    probability zero.
    """
    if prev.kind is cur.kind:
        raise DataError("walker state must span both node kinds")
    prev_row = _locate(ag, prev)
    cur_row = _locate(ag, cur)
    prev_is_player = prev.kind is NodeKind.PLAYER
    cand, weights = _candidates(ag, prev_is_player, prev_row, cur_row)
    total = float(weights.sum())
    if total <= 0.0:
        raise DeadEndError(f"no positive-weight transition out of ({prev}, {cur})")
    ids = ag.snapshot.player_ids if prev_is_player else ag.snapshot.game_ids
    out = {}
    for row, w in zip(cand.tolist(), (weights / total).tolist()):
        key = NodeId(prev.kind, int(ids[row]))
        out[key] = out.get(key, 0.0) + w
    return out


def _edge_rows(ag: AugmentedGraph, edges) -> tuple[np.ndarray, np.ndarray]:
    snap = ag.snapshot
    arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    for u, v in arr.tolist():
        if not snap.has_edge(u, v):
            raise NoEdgeError(f"({u}, {v}) is not an edge at day {snap.t}")
    u_rows = np.searchsorted(snap.player_ids, arr[:, 0]).astype(np.int64)
    v_rows = np.searchsorted(snap.game_ids, arr[:, 1]).astype(np.int64)
    return u_rows, v_rows


def sample_contexts_batch(
    ag: AugmentedGraph, edges, config: WalkConfig, walk_indices, num_threads: int = 1
):
    """Context edges for many target edges, one splitmix64 stream per walk.

    Stream seeds are ``rng_seed XOR walk_index``.  Returns one list of
    (player_id, game_id) pairs per target edge; identical inputs give identical
    output on every backend invocation.
    """
    u_rows, v_rows = _edge_rows(ag, edges)
    idx = np.asarray(walk_indices, dtype=np.int64)
    if idx.shape != (u_rows.size,):
        raise DataError("one walk index required per edge")
    seeds = (np.uint64(config.rng_seed & _MASK64)
             ^ idx.astype(np.uint64))
    kernel = kernels.get_walk_kernel(num_threads)
    out_p, out_g, counts = kernel(
        ag.p_indptr, ag.p_indices, ag.g_indptr, ag.g_indices,
        ag.pa_indptr, ag.pa_indices, ag.pa_sims,
        ag.ga_indptr, ag.ga_indices, ag.ga_sims,
        ag.snapshot.player_features, ag.player_norm,
        ag.snapshot.game_features, ag.game_norm,
        u_rows, v_rows, seeds,
        float(config.return_p), float(config.inout_q),
        int(config.contexts_per_edge), int(config.walk_length),
    )
    p_ids = ag.snapshot.player_ids
    g_ids = ag.snapshot.game_ids
    result = []
    for e in range(u_rows.size):
        n = int(counts[e])
        result.append(
            [
                (int(p_ids[out_p[e, k]]), int(g_ids[out_g[e, k]]))
                for k in range(n)
            ]
        )
    return result


def sample_contexts(
    ag: AugmentedGraph, edge, config: WalkConfig, walk_index: int = 0
):
    """Context edges for one target edge; see ``sample_contexts_batch``."""
    return sample_contexts_batch(ag, [edge], config, [walk_index])[0]
