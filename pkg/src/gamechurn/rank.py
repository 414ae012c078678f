"""Game ranking from a probability-weighted player-game graph.

SimSum totals each game's incident churn probabilities, directly estimating
its expected churn count.  The link-analysis scores run power iterations over
the same weighted graph: PageRank spreads each node's score across its
incident weights with damped teleportation, HITS alternates hub and authority
updates with L2 normalization.  Both iterate to a cap or an L1 tolerance and
report the final L1 change alongside the scores.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .kernels import hits_kernel, pagerank_kernel

_HEADER = "rank,game_id,score,method"


class RelationGraph:
    """Players, games and one probability weight per present edge."""

    def __init__(self, weights: dict, players=None, games=None):
        self.weights = {}
        p_set, g_set = set(), set()
        for (u, v), w in weights.items():
            w = float(w)
            if not np.isfinite(w) or not 0.0 <= w <= 1.0:
                raise DataError(f"weight {w} for edge ({u}, {v}) outside [0, 1]")
            self.weights[(int(u), int(v))] = w
            p_set.add(int(u))
            g_set.add(int(v))
        if players is not None:
            extra = set(int(p) for p in players)
            if not p_set <= extra:
                raise DataError("weighted edge references a player outside the node set")
            p_set = extra
        if games is not None:
            extra = set(int(g) for g in games)
            if not g_set <= extra:
                raise DataError("weighted edge references a game outside the node set")
            g_set = extra
        self.players = sorted(p_set)
        self.games = sorted(g_set)

    @classmethod
    def from_probabilities(cls, probs: dict, players=None, games=None):
        return cls(probs, players=players, games=games)

    def _arrays(self):
        """Edges as global node indices: players first, then games."""
        p_row = {p: i for i, p in enumerate(self.players)}
        g_row = {g: len(self.players) + i for i, g in enumerate(self.games)}
        n = len(self.players) + len(self.games)
        edges = sorted(self.weights.items())
        a = np.array([p_row[u] for (u, _), _ in edges], dtype=np.int64)
        b = np.array([g_row[v] for (_, v), _ in edges], dtype=np.int64)
        w = np.array([w for _, w in edges], dtype=np.float64)
        return a, b, w, n


def simsum(rg: RelationGraph) -> dict:
    """Sum of incident probabilities per game; games with no players score 0."""
    scores = {g: 0.0 for g in rg.games}
    for (_, v), w in rg.weights.items():
        scores[v] += w
    return scores


@dataclass(frozen=True)
class PageRankResult:
    player_scores: dict
    game_scores: dict
    l1_change: float
    iterations: int


@dataclass(frozen=True)
class HitsResult:
    player_hubs: dict
    game_authorities: dict
    l1_change: float
    iterations: int


def pagerank(
    rg: RelationGraph, max_iter: int = 100, damping: float = 0.85,
    tol: float = 1e-12,
) -> PageRankResult:
    if max_iter < 1:
        raise DataError("max_iter must be positive")
    if not 0.0 <= damping < 1.0:
        raise DataError("damping must lie in [0, 1)")
    a, b, w, n = rg._arrays()
    if n == 0:
        return PageRankResult({}, {}, 0.0, 0)
    scores, l1, iters = pagerank_kernel(a, b, w, n, damping, max_iter, tol)
    n_p = len(rg.players)
    return PageRankResult(
        player_scores={p: float(scores[i]) for i, p in enumerate(rg.players)},
        game_scores={g: float(scores[n_p + i]) for i, g in enumerate(rg.games)},
        l1_change=float(l1),
        iterations=int(iters),
    )


def hits(rg: RelationGraph, max_iter: int = 100, tol: float = 1e-12) -> HitsResult:
    if max_iter < 1:
        raise DataError("max_iter must be positive")
    a, b, w, n = rg._arrays()
    if n == 0:
        return HitsResult({}, {}, 0.0, 0)
    auth, hub, l1, iters = hits_kernel(a, b, w, n, max_iter, tol)
    n_p = len(rg.players)
    return HitsResult(
        player_hubs={p: float(hub[i]) for i, p in enumerate(rg.players)},
        game_authorities={g: float(auth[n_p + i]) for i, g in enumerate(rg.games)},
        l1_change=float(l1),
        iterations=int(iters),
    )


class RankedList:
    """Games with scores, descending; equal scores order by ascending game id."""

    def __init__(self, items):
        self.items = [(int(g), float(s)) for g, s in items]
        scores = [s for _, s in self.items]
        if any(not np.isfinite(s) for s in scores):
            raise DataError("ranked scores must be finite")
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise DataError("ranked scores must be non-increasing")

    def games(self):
        return [g for g, _ in self.items]

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __eq__(self, other):
        return isinstance(other, RankedList) and self.items == other.items


def rank_games(scores: dict) -> RankedList:
    for g, s in scores.items():
        if not np.isfinite(s):
            raise DataError(f"score for game {g} is not finite")
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return RankedList(ordered)


def write_ranked_list(path, ranked: RankedList, method: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_HEADER + "\n")
        for i, (g, s) in enumerate(ranked, start=1):
            fh.write(f"{i},{g},{s!r},{method}\n")


def read_ranked_list(path):
    """Read one ranked-list file back as (RankedList, method)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _HEADER:
        raise DataError(f"{path} is not a ranked-list file")
    items = []
    methods = set()
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise DataError(f"malformed ranked-list row: {ln}")
        items.append((int(parts[1]), float(parts[2])))
        methods.add(parts[3])
    if len(methods) > 1:
        raise DataError(f"{path} mixes methods {sorted(methods)}")
    return RankedList(items), (methods.pop() if methods else "")
