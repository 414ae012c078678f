import numpy as np
import pytest

from gamechurn import dataio
from gamechurn.errors import DataError, SchemaError
from gamechurn.graph import edge_label
from gamechurn.synth import SynthConfig, generate


@pytest.fixture(scope="module")
def small_dataset():
    config = SynthConfig(
        num_players=12, num_games=4, num_days=8, churn_window=2,
        latent_dim=2, tenure_coefficient=0.1, base_hazard=0.2,
        noise=0.05, seed=5, games_per_player=2,
    )
    return generate(config)


def test_round_trip_is_lossless(small_dataset, tmp_path):
    g, _ = small_dataset
    dataio.write_dataset(g, tmp_path)
    loaded = dataio.load_dataset(tmp_path)
    assert loaded.churn_window == g.churn_window
    assert loaded.schema == g.schema
    assert loaded.days == g.days
    for a, b in zip(g.snapshots, loaded.snapshots):
        assert np.array_equal(a.player_ids, b.player_ids)
        assert np.array_equal(a.game_ids, b.game_ids)
        assert a.edge_set == b.edge_set
        # repr-formatted floats reload bit for bit
        assert np.array_equal(a.player_features, b.player_features)
        assert np.array_equal(a.game_features, b.game_features)


def test_round_trip_preserves_labels(small_dataset, tmp_path):
    g, _ = small_dataset
    dataio.write_dataset(g, tmp_path)
    loaded = dataio.load_dataset(tmp_path)
    for day in g.days:
        for u, v in g.snapshot(day).edges.tolist():
            assert edge_label(loaded, u, v, day) == edge_label(g, u, v, day)


def test_write_twice_is_byte_identical(small_dataset, tmp_path):
    g, _ = small_dataset
    a = tmp_path / "a"
    b = tmp_path / "b"
    dataio.write_dataset(g, a)
    dataio.write_dataset(g, b)
    for name in (dataio.PLAYS_FILE, dataio.PLAYER_FEATURES_FILE,
                 dataio.GAME_FEATURES_FILE, dataio.SCHEMA_FILE):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_oracle_round_trip(small_dataset, tmp_path):
    _, oracle = small_dataset
    path = tmp_path / dataio.ORACLE_FILE
    dataio.write_oracle(path, oracle)
    assert dataio.load_oracle(path) == oracle


def test_missing_schema_file(tmp_path):
    with pytest.raises(DataError):
        dataio.load_schema(tmp_path / "nope.json")


def test_malformed_schema_file(tmp_path):
    path = tmp_path / "schema.json"
    path.write_text("{\"version\": 1}")
    with pytest.raises(SchemaError):
        dataio.load_schema(path)


def test_load_rejects_wrong_header(small_dataset, tmp_path):
    g, _ = small_dataset
    dataio.write_dataset(g, tmp_path)
    plays = tmp_path / dataio.PLAYS_FILE
    rows = plays.read_text().splitlines()
    rows[0] = "a,b,c"
    plays.write_text("\n".join(rows) + "\n")
    with pytest.raises(DataError):
        dataio.load_dataset(tmp_path)
