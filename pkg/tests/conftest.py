import numpy as np
import pytest

from gamechurn.graph import FeatureSchema, Snapshot, TemporalBipartiteGraph


def _build_graph(edges_by_day, player_features, game_features,
                 churn_window=3, t0=0, schema=None):
    """Graph with fixed node sets and features; day t0+i edges from edges_by_day[i]."""
    player_features = np.asarray(player_features, dtype=np.float64)
    game_features = np.asarray(game_features, dtype=np.float64)
    n_p = player_features.shape[0]
    n_g = game_features.shape[0]
    if schema is None:
        width = player_features.shape[1]
        schema = FeatureSchema(width, game_features.shape[1],
                               (((0, width), (0, game_features.shape[1])),))
    snapshots = []
    for i, edges in enumerate(edges_by_day):
        arr = np.asarray(sorted(edges), dtype=np.int64).reshape(-1, 2)
        snapshots.append(
            Snapshot(
                t=t0 + i,
                player_ids=np.arange(n_p),
                game_ids=np.arange(n_g),
                edges=arr,
                player_features=player_features,
                game_features=game_features,
            )
        )
    return TemporalBipartiteGraph(snapshots, churn_window, schema)


@pytest.fixture
def make_graph():
    return _build_graph
