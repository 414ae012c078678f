"""Dataset serialization: plays, per-day node features, schema, oracle hazards.

A dataset directory holds:

* ``plays.csv``            one row per (user_id, game_id, day) play record
* ``player_features.csv``  ``id,day,f0..f{n-1}`` rows, one per present node/day
* ``game_features.csv``    same layout for games
* ``schema.json``          feature-block schema plus the churn window
* ``oracle.csv``           optional (user_id, game_id, day, hazard) ground truth

Writers emit floats with ``repr`` (shortest round-trip form) and sort all rows,
so write -> load -> write is byte-identical.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataError, SchemaError
from .graph import FeatureSchema, Snapshot, TemporalBipartiteGraph

PLAYS_FILE = "plays.csv"
PLAYER_FEATURES_FILE = "player_features.csv"
GAME_FEATURES_FILE = "game_features.csv"
SCHEMA_FILE = "schema.json"
ORACLE_FILE = "oracle.csv"

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def write_schema(path, schema: FeatureSchema, churn_window: int) -> None:
    doc = {
        "version": SCHEMA_VERSION,
        "churn_window": int(churn_window),
        "player_dim": schema.player_dim,
        "game_dim": schema.game_dim,
        "blocks": [
            {"player": [ps, pe], "game": [gs, ge]}
            for (ps, pe), (gs, ge) in schema.blocks
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_schema(path) -> tuple[FeatureSchema, int]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing schema file {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc
    try:
        blocks = tuple(
            ((int(b["player"][0]), int(b["player"][1])),
             (int(b["game"][0]), int(b["game"][1])))
            for b in doc["blocks"]
        )
        schema = FeatureSchema(int(doc["player_dim"]), int(doc["game_dim"]), blocks)
        return schema, int(doc["churn_window"])
    except (KeyError, TypeError, IndexError) as exc:
        raise SchemaError(f"{path}: missing or malformed field ({exc})") from exc


def _read_rows(path, expected_header):
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing data file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        if header[: len(expected_header)] != expected_header:
            raise DataError(
                f"{path}: header must start with {','.join(expected_header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            yield lineno, row


def _load_features(path):
    per_day: dict = {}
    width = None
    for lineno, row in _read_rows(path, ["id", "day"]):
        try:
            nid = int(row[0])
            day = int(row[1])
            feats = [float(x) for x in row[2:]]
        except ValueError as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from exc
        if width is None:
            width = len(feats)
        elif len(feats) != width:
            raise DataError(f"{path} line {lineno}: expected {width} feature values")
        per_day.setdefault(day, {})[nid] = feats
    if not per_day:
        raise DataError(f"{path}: no feature rows")
    return per_day, width


def load_dataset(data_dir, churn_window: int | None = None) -> TemporalBipartiteGraph:
    """Load a dataset directory into a temporal graph.

    ``churn_window`` overrides the value recorded in ``schema.json``.
    """
    data_dir = Path(data_dir)
    schema, schema_window = load_schema(data_dir / SCHEMA_FILE)
    window = schema_window if churn_window is None else int(churn_window)

    player_days, p_width = _load_features(data_dir / PLAYER_FEATURES_FILE)
    game_days, g_width = _load_features(data_dir / GAME_FEATURES_FILE)
    if p_width != schema.player_dim:
        raise SchemaError(
            f"player features have width {p_width}, schema says {schema.player_dim}"
        )
    if g_width != schema.game_dim:
        raise SchemaError(
            f"game features have width {g_width}, schema says {schema.game_dim}"
        )
    if sorted(player_days) != sorted(game_days):
        raise DataError("player and game feature files cover different day sets")

    plays: dict = {}
    plays_path = data_dir / PLAYS_FILE
    for lineno, row in _read_rows(plays_path, ["user_id", "game_id", "day"]):
        try:
            u, v, day = int(row[0]), int(row[1]), int(row[2])
        except ValueError as exc:
            raise DataError(f"{plays_path} line {lineno}: {exc}") from exc
        if day not in player_days:
            raise DataError(
                f"{plays_path} line {lineno}: play on day {day} outside feature days"
            )
        plays.setdefault(day, set()).add((u, v))

    snapshots = []
    for day in sorted(player_days):
        p_map = player_days[day]
        g_map = game_days[day]
        p_ids = np.array(sorted(p_map), dtype=np.int64)
        g_ids = np.array(sorted(g_map), dtype=np.int64)
        edges = np.array(sorted(plays.get(day, ())), dtype=np.int64).reshape(-1, 2)
        snapshots.append(
            Snapshot(
                day,
                p_ids,
                g_ids,
                edges,
                np.array([p_map[i] for i in p_ids.tolist()], dtype=np.float64),
                np.array([g_map[i] for i in g_ids.tolist()], dtype=np.float64),
            )
        )
    return TemporalBipartiteGraph(snapshots, window, schema)


def write_dataset(g: TemporalBipartiteGraph, data_dir) -> None:
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    write_schema(data_dir / SCHEMA_FILE, g.schema, g.churn_window)

    with open(data_dir / PLAYS_FILE, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "game_id", "day"])
        for snap in g.snapshots:
            for u, v in sorted(map(tuple, snap.edges.tolist())):
                w.writerow([u, v, snap.t])

    def dump_features(path, ids_of, feats_of, width):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "day"] + [f"f{k}" for k in range(width)])
            for snap in g.snapshots:
                ids = ids_of(snap)
                feats = feats_of(snap)
                for row, nid in enumerate(ids.tolist()):
                    w.writerow([nid, snap.t] + [_fmt(x) for x in feats[row]])

    dump_features(
        data_dir / PLAYER_FEATURES_FILE,
        lambda s: s.player_ids,
        lambda s: s.player_features,
        g.schema.player_dim,
    )
    dump_features(
        data_dir / GAME_FEATURES_FILE,
        lambda s: s.game_ids,
        lambda s: s.game_features,
        g.schema.game_dim,
    )


def write_oracle(path, hazards: dict) -> None:
    """Write a {(user, game, day): hazard} map as sorted CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "game_id", "day", "hazard"])
        for (u, v, day), h in sorted(hazards.items()):
            w.writerow([u, v, day, _fmt(h)])


def load_oracle(path) -> dict:
    out = {}
    for lineno, row in _read_rows(path, ["user_id", "game_id", "day", "hazard"]):
        try:
            out[(int(row[0]), int(row[1]), int(row[2]))] = float(row[3])
        except ValueError as exc:
            raise DataError(f"{path} line {lineno}: {exc}") from exc
    return out
