"""Synthetic play data with a known churn-generating process.

Players and games carry latent vectors built from per-coordinate unit blocks
(cos, sin of a random angle).  Each (player, game) pair starts on a random day
and plays daily until a Bernoulli quit event fires; the quit hazard is
logistic in the latent interaction w . (u * v), a per-game offset, and the
pair's tenure.  Because the interaction weights are tied within each block,
w . (u * v) equals a weighted sum of blockwise cosines, so the features the
model observes carry the interaction signal exactly; the feature noise drifts
slowly from day to day.  The exact hazards are returned as an oracle.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, OutOfRangeError
from .graph import FeatureSchema, Snapshot, TemporalBipartiteGraph


@dataclass(frozen=True)
class SynthConfig:
    num_players: int
    num_games: int
    num_days: int
    churn_window: int = 14
    latent_dim: int = 4
    tenure_coefficient: float = 0.1
    base_hazard: float = 0.05
    noise: float = 0.02
    seed: int = 0
    # shape knobs beyond the core process
    games_per_player: int = 3
    interaction_scale: float = 1.0
    game_bias_spread: float = 1.0
    popularity_skew: float = 0.0
    noise_persistence: float = 0.9

    def __post_init__(self):
        if self.num_players < 1 or self.num_games < 1 or self.num_days < 1:
            raise DataError("counts must be positive")
        if self.churn_window < 1:
            raise DataError("churn_window must be positive")
        if self.latent_dim < 1:
            raise DataError("latent_dim must be positive")
        if self.tenure_coefficient < 0.0:
            raise DataError("tenure_coefficient must be non-negative")
        if not 0.0 < self.base_hazard < 1.0:
            raise DataError("base_hazard must lie in (0, 1)")
        if self.noise < 0.0:
            raise DataError("noise must be non-negative")
        if not 1 <= self.games_per_player <= self.num_games:
            raise DataError("games_per_player must lie in [1, num_games]")
        if self.interaction_scale < 0.0 or self.game_bias_spread < 0.0:
            raise DataError("scales must be non-negative")
        if self.popularity_skew < 0.0:
            raise DataError("popularity_skew must be non-negative")
        if not 0.0 <= self.noise_persistence < 1.0:
            raise DataError("noise_persistence must lie in [0, 1)")


def _schema(latent_dim: int) -> FeatureSchema:
    # one 2-wide block per latent coordinate plus one block for the game offset
    dim = 2 * (latent_dim + 1)
    blocks = tuple(
        ((2 * j, 2 * j + 2), (2 * j, 2 * j + 2)) for j in range(latent_dim + 1)
    )
    return FeatureSchema(player_dim=dim, game_dim=dim, blocks=blocks)


def _unit_blocks(angles: np.ndarray) -> np.ndarray:
    """(cos, sin) per angle, interleaved: row-wise unit vectors per 2-block."""
    n, k = angles.shape
    out = np.empty((n, 2 * k))
    out[:, 0::2] = np.cos(angles)
    out[:, 1::2] = np.sin(angles)
    return out


def _base_features(latents: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Latent unit blocks followed by an (offset, 1) block."""
    n, two_k = latents.shape
    out = np.ones((n, two_k + 2))
    out[:, :two_k] = latents
    out[:, two_k] = offsets
    return out


def _hazards(config: SynthConfig, inter: np.ndarray, bias: np.ndarray):
    """Per-pair, per-tenure hazard matrix (n_pairs, num_days)."""
    tenures = np.arange(config.num_days, dtype=np.float64)
    logit0 = math.log(config.base_hazard / (1.0 - config.base_hazard))
    logits = (
        logit0
        + config.interaction_scale * inter[:, None]
        + bias[:, None]
        + config.tenure_coefficient * tenures[None, :]
    )
    return 1.0 / (1.0 + np.exp(-logits))


def generate(config: SynthConfig):
    """Build a temporal graph and the oracle {(player, game, day): hazard}.

    The oracle covers every day from a pair's start to the last day, whether
    or not the pair already quit, so label-level probabilities stay defined
    for any labeled day.
    """
    rng = np.random.default_rng(config.seed)
    k = config.latent_dim
    u_lat = _unit_blocks(rng.uniform(-math.pi, math.pi, (config.num_players, k)))
    v_lat = _unit_blocks(rng.uniform(-math.pi, math.pi, (config.num_games, k)))
    # tied within blocks, so w . (u * v) = sum_j w_j cos(angle_u_j - angle_v_j)
    inter_w = np.repeat(rng.normal(0.0, 1.0, k), 2)
    game_bias = rng.uniform(-1.0, 1.0, config.num_games) * config.game_bias_spread

    if config.popularity_skew > 0.0:
        weights = (np.arange(config.num_games) + 1.0) ** -config.popularity_skew
        weights /= weights.sum()
    else:
        weights = np.full(config.num_games, 1.0 / config.num_games)
    pairs = []
    for u in range(config.num_players):
        chosen = rng.choice(
            config.num_games, size=config.games_per_player, replace=False, p=weights
        )
        for g in sorted(int(x) for x in chosen):
            pairs.append((u, g))
    pairs = np.array(pairs, dtype=np.int64)
    n_pairs = pairs.shape[0]
    starts = rng.integers(0, config.num_days, size=n_pairs)

    raw = (u_lat[pairs[:, 0]] * v_lat[pairs[:, 1]]) @ inter_w / math.sqrt(k)
    hazards = _hazards(config, raw, game_bias[pairs[:, 1]])

    # one lifetime per pair: plays daily from its start until the quit fires
    last = np.empty(n_pairs, dtype=np.int64)
    for i in range(n_pairs):
        t = int(starts[i])
        while True:
            if rng.random() < hazards[i, t - int(starts[i])]:
                break
            if t + 1 >= config.num_days:
                t += 1
                break
            t += 1
        last[i] = min(t, config.num_days - 1)

    oracle = {}
    for i in range(n_pairs):
        u, g = int(pairs[i, 0]), int(pairs[i, 1])
        for t in range(int(starts[i]), config.num_days):
            oracle[(u, g, t)] = float(hazards[i, t - int(starts[i])])

    player_base = _base_features(u_lat, np.ones(config.num_players))
    game_base = _base_features(v_lat, game_bias)
    schema = _schema(k)

    player_ids = np.arange(config.num_players, dtype=np.int64)
    game_ids = np.arange(config.num_games, dtype=np.int64)
    rho = config.noise_persistence
    p_noise = rng.normal(0.0, 1.0, player_base.shape) * config.noise
    g_noise = rng.normal(0.0, 1.0, game_base.shape) * config.noise
    snapshots = []
    for t in range(config.num_days):
        if t > 0:
            p_noise = rho * p_noise + rng.normal(0.0, 1.0, p_noise.shape) * config.noise
            g_noise = rho * g_noise + rng.normal(0.0, 1.0, g_noise.shape) * config.noise
        live = (starts <= t) & (t <= last)
        edges = pairs[live]
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        snapshots.append(
            Snapshot(
                t=t,
                player_ids=player_ids,
                game_ids=game_ids,
                edges=edges[order],
                player_features=player_base + p_noise,
                game_features=game_base + g_noise,
            )
        )
    graph = TemporalBipartiteGraph(snapshots, config.churn_window, schema)
    return graph, oracle


def realized_churn_counts(g: TemporalBipartiteGraph, day: int) -> dict:
    """Players each game loses between ``day`` and ``day + 1``, by set difference."""
    if not g.t0 <= day < g.t_end:
        raise OutOfRangeError(f"day {day} needs day + 1 inside [{g.t0}, {g.t_end}]")
    snap = g.snapshot(day)
    nxt_edges = g.snapshot(day + 1).edge_set
    counts = {int(gid): 0 for gid in snap.game_ids}
    for u, v in snap.edges.tolist():
        if (u, v) not in nxt_edges:
            counts[v] += 1
    return counts


def churn_probability(oracle: dict, u: int, v: int, day: int) -> float:
    """Probability the pair quits right after ``day`` or right after ``day + 1``.

    That event is exactly a churn label at ``day`` for a pair active then,
    since survivors of both days play again inside the label window.
    """
    key_now = (u, v, day)
    key_next = (u, v, day + 1)
    if key_now not in oracle or key_next not in oracle:
        raise DataError(f"oracle has no hazards for pair ({u}, {v}) at day {day}")
    h0 = oracle[key_now]
    h1 = oracle[key_next]
    return h0 + (1.0 - h0) * h1
