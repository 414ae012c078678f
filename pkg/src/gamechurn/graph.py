"""Daily player-game interaction snapshots and label conventions.

A dataset is a sequence of daily snapshots over one shared set of player and
game identifiers.  An edge exists on day ``t`` when the player played the game
that day.  The churn label of an edge at day ``i`` looks at the window
``[i + 2, i + T + 1]``: a play observed there means the relationship survived,
an observed empty window means it churned, and a window that runs past the end
of the observation leaves the label unknown (right censoring).
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .errors import (
    DataError,
    NoEdgeError,
    NotPresentError,
    OutOfRangeError,
    SchemaError,
)


class NodeKind(Enum):
    PLAYER = "player"
    GAME = "game"


class Label(Enum):
    STAY = "stay"
    CHURN = "churn"
    UNKNOWN = "unknown"


class NodeId(NamedTuple):
    kind: NodeKind
    id: int


def player(pid: int) -> NodeId:
    return NodeId(NodeKind.PLAYER, pid)


def game(gid: int) -> NodeId:
    return NodeId(NodeKind.GAME, gid)


@dataclass(frozen=True)
class EdgeLabel:
    """Churn label of one edge at one timestamp.

    ``censor`` is 1 when the label is determined by the observation window and
    0 when it is unknown; ``value`` is UNKNOWN exactly when ``censor`` is 0.
    ``last_observed`` is the pair's most recent uncensored timestamp across the
    whole observation (None when no timestamp is uncensored).
    """

    value: Label
    censor: int
    last_observed: int | None


@dataclass(frozen=True)
class FeatureSchema:
    """Aligned feature blocks shared by player and game vectors.

    ``blocks[k]`` holds half-open index ranges ((ps, pe), (gs, ge)) into the
    player and game feature vectors; both ranges of a block must have the same
    length so their cosine similarity is defined.
    """

    player_dim: int
    game_dim: int
    blocks: tuple

    def __post_init__(self):
        if self.player_dim <= 0 or self.game_dim <= 0:
            raise SchemaError("feature dimensions must be positive")
        if not self.blocks:
            raise SchemaError("schema needs at least one block")
        for k, ((ps, pe), (gs, ge)) in enumerate(self.blocks):
            if not (0 <= ps < pe <= self.player_dim):
                raise SchemaError(f"block {k}: player range [{ps}, {pe}) out of bounds")
            if not (0 <= gs < ge <= self.game_dim):
                raise SchemaError(f"block {k}: game range [{gs}, {ge}) out of bounds")
            if pe - ps != ge - gs:
                raise SchemaError(f"block {k}: player and game ranges differ in length")

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


def uniform_schema(latent_dim: int, block_size: int) -> FeatureSchema:
    """Schema of ``latent_dim`` consecutive blocks of ``block_size`` on both sides."""
    blocks = tuple(
        ((k * block_size, (k + 1) * block_size), (k * block_size, (k + 1) * block_size))
        for k in range(latent_dim)
    )
    return FeatureSchema(latent_dim * block_size, latent_dim * block_size, blocks)


class Snapshot:
    """One day of the interaction graph.

    Node ids are arbitrary non-negative integers; feature rows align with the
    sorted id arrays.  ``edges`` holds (player_id, game_id) rows.
    """

    def __init__(self, t, player_ids, game_ids, edges, player_features, game_features):
        self.t = int(t)
        self.player_ids = np.asarray(player_ids, dtype=np.int64)
        self.game_ids = np.asarray(game_ids, dtype=np.int64)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.player_features = np.asarray(player_features, dtype=np.float64)
        self.game_features = np.asarray(game_features, dtype=np.float64)
        self._validate()
        self._edge_set = None

    def _validate(self):
        for name, ids in (("player", self.player_ids), ("game", self.game_ids)):
            if ids.ndim != 1:
                raise DataError(f"{name} ids must be one-dimensional")
            if ids.size > 1 and not np.all(np.diff(ids) > 0):
                raise DataError(f"{name} ids must be sorted and unique")
        if self.player_features.shape[0] != self.player_ids.size:
            raise DataError("player feature rows do not match player ids")
        if self.game_features.shape[0] != self.game_ids.size:
            raise DataError("game feature rows do not match game ids")
        if self.edges.size:
            if not np.all(np.isin(self.edges[:, 0], self.player_ids)):
                raise DataError(f"edge references absent player at day {self.t}")
            if not np.all(np.isin(self.edges[:, 1], self.game_ids)):
                raise DataError(f"edge references absent game at day {self.t}")
            keys = self.edges[:, 0] * (self.edges[:, 1].max() + 1) + self.edges[:, 1]
            if np.unique(keys).size != keys.size:
                raise DataError(f"duplicate edges at day {self.t}")

    def has_player(self, u: int) -> bool:
        i = np.searchsorted(self.player_ids, u)
        return i < self.player_ids.size and self.player_ids[i] == u

    def has_game(self, v: int) -> bool:
        i = np.searchsorted(self.game_ids, v)
        return i < self.game_ids.size and self.game_ids[i] == v

    def player_row(self, u: int) -> int:
        i = int(np.searchsorted(self.player_ids, u))
        if i >= self.player_ids.size or self.player_ids[i] != u:
            raise NotPresentError(f"player {u} absent at day {self.t}")
        return i

    def game_row(self, v: int) -> int:
        i = int(np.searchsorted(self.game_ids, v))
        if i >= self.game_ids.size or self.game_ids[i] != v:
            raise NotPresentError(f"game {v} absent at day {self.t}")
        return i

    @property
    def edge_set(self) -> frozenset:
        if self._edge_set is None:
            self._edge_set = frozenset(map(tuple, self.edges.tolist()))
        return self._edge_set

    def has_edge(self, u: int, v: int) -> bool:
        return (u, v) in self.edge_set


class TemporalBipartiteGraph:
    """Consecutive daily snapshots plus the churn window and feature schema."""

    def __init__(self, snapshots, churn_window: int, schema: FeatureSchema):
        if not snapshots:
            raise DataError("at least one snapshot required")
        if churn_window < 1:
            raise DataError("churn window must be at least 1")
        days = [s.t for s in snapshots]
        if any(b - a != 1 for a, b in zip(days, days[1:])):
            raise DataError("snapshot days must increase by exactly 1")
        for s in snapshots:
            if s.player_features.shape[1] != schema.player_dim:
                raise SchemaError(
                    f"day {s.t}: player features have width "
                    f"{s.player_features.shape[1]}, schema says {schema.player_dim}"
                )
            if s.game_features.shape[1] != schema.game_dim:
                raise SchemaError(
                    f"day {s.t}: game features have width "
                    f"{s.game_features.shape[1]}, schema says {schema.game_dim}"
                )
        self.snapshots = list(snapshots)
        self.churn_window = int(churn_window)
        self.schema = schema
        self._pair_days = None

    @property
    def t0(self) -> int:
        return self.snapshots[0].t

    @property
    def t_end(self) -> int:
        return self.snapshots[-1].t

    @property
    def days(self) -> list:
        return [s.t for s in self.snapshots]

    def snapshot(self, t: int) -> Snapshot:
        if not self.t0 <= t <= self.t_end:
            raise OutOfRangeError(f"day {t} outside [{self.t0}, {self.t_end}]")
        return self.snapshots[t - self.t0]

    def pair_days(self, u: int, v: int) -> np.ndarray:
        """Sorted days on which (u, v) is an edge (empty when never)."""
        if self._pair_days is None:
            acc: dict = {}
            for s in self.snapshots:
                for pu, pv in s.edges.tolist():
                    acc.setdefault((pu, pv), []).append(s.t)
            self._pair_days = {
                k: np.asarray(d, dtype=np.int64) for k, d in acc.items()
            }
        return self._pair_days.get((u, v), np.empty(0, dtype=np.int64))


def block_cosines(schema: FeatureSchema, player_vec, game_vec) -> np.ndarray:
    """Blockwise cosine similarities of one player/game vector pair."""
    pu = np.asarray(player_vec, dtype=np.float64)
    gv = np.asarray(game_vec, dtype=np.float64)
    if pu.shape != (schema.player_dim,):
        raise SchemaError(f"player vector has shape {pu.shape}, schema says ({schema.player_dim},)")
    if gv.shape != (schema.game_dim,):
        raise SchemaError(f"game vector has shape {gv.shape}, schema says ({schema.game_dim},)")
    out = np.zeros(schema.n_blocks)
    for k, ((ps, pe), (gs, ge)) in enumerate(schema.blocks):
        a = pu[ps:pe]
        b = gv[gs:ge]
        na = np.linalg.norm(a)
        nb = np.linalg.norm(b)
        if na > 0.0 and nb > 0.0:
            out[k] = float(a @ b) / (na * nb)
    return out


def block_cosine_matrix(schema: FeatureSchema, player_rows, game_rows) -> np.ndarray:
    """Row-wise ``block_cosines`` for aligned (N, player_dim) and (N, game_dim) matrices."""
    pu = np.asarray(player_rows, dtype=np.float64)
    gv = np.asarray(game_rows, dtype=np.float64)
    n = pu.shape[0]
    out = np.zeros((n, schema.n_blocks))
    for k, ((ps, pe), (gs, ge)) in enumerate(schema.blocks):
        a = pu[:, ps:pe]
        b = gv[:, gs:ge]
        na = np.linalg.norm(a, axis=1)
        nb = np.linalg.norm(b, axis=1)
        denom = na * nb
        dot = np.einsum("ij,ij->i", a, b)
        np.divide(dot, denom, out=out[:, k], where=denom > 0.0)
    return out


def edge_features(g: TemporalBipartiteGraph, u: int, v: int, t: int) -> np.ndarray:
    """Edge feature vector at day ``t``: one cosine per schema block, in [-1, 1]."""
    snap = g.snapshot(t)
    pu = snap.player_features[snap.player_row(u)]
    gv = snap.game_features[snap.game_row(v)]
    return block_cosines(g.schema, pu, gv)


def _stay_observed(days: np.ndarray, i: int, T: int) -> bool:
    # a play anywhere in [i + 2, i + T + 1] settles the label as STAY
    j = int(np.searchsorted(days, i + 2))
    return j < days.size and days[j] <= i + T + 1


def edge_label(g: TemporalBipartiteGraph, u: int, v: int, i: int) -> EdgeLabel:
    """Label of edge (u, v) at day ``i`` under the forward churn window."""
    snap = g.snapshot(i)
    if not snap.has_edge(u, v):
        raise NoEdgeError(f"({u}, {v}) is not an edge at day {i}")
    days = g.pair_days(u, v)
    T = g.churn_window
    last = None
    for j in days[::-1].tolist():
        if _stay_observed(days, j, T) or j + T + 1 <= g.t_end:
            last = j
            break
    if _stay_observed(days, i, T):
        return EdgeLabel(Label.STAY, 1, last)
    if i + T + 1 <= g.t_end:
        return EdgeLabel(Label.CHURN, 1, last)
    return EdgeLabel(Label.UNKNOWN, 0, last)


def persistent_edges(g: TemporalBipartiteGraph, i: int) -> set:
    """Edges present at both day ``i`` and day ``i + 1``."""
    if not g.t0 <= i < g.t_end:
        raise OutOfRangeError(f"day {i} has no successor inside [{g.t0}, {g.t_end}]")
    return set(g.snapshot(i).edge_set & g.snapshot(i + 1).edge_set)
