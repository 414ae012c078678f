"""Command-line pipeline: synthesize data, train, predict, rank games, evaluate.

One YAML document configures a run; any CLI flag overrides the file value.
Exit codes: 0 success, 2 usage or configuration problem, 3 numeric failure
during training (the last per-epoch checkpoint is left on disk).
"""

import argparse
import json
import sys
from dataclasses import asdict, fields as dataclass_fields
from pathlib import Path

import yaml

from . import dataio
from .errors import ConfigError, DataError, GamechurnError, NumericError
from .loss import LossWeights
from .metrics import (
    avg_precision_at_k,
    kendall_tau,
    position_weighted_ap,
    spearman,
    weighted_kendall_tau,
)
from .model import load_checkpoint, save_checkpoint
from .rank import (
    RelationGraph,
    hits,
    pagerank,
    rank_games,
    read_ranked_list,
    simsum,
    write_ranked_list,
)
from .synth import SynthConfig, generate, realized_churn_counts
from .train import TrainConfig, chronological_split, predict, train
from .walk import WalkConfig

_SECTIONS = ("synth", "train", "walk", "loss", "rank", "seed", "churn_window")
_RANK_FIELDS = ("method", "damping", "max_iter", "tol", "split_fraction")
_METHODS = ("simsum", "pagerank", "hits")


def _load_config(path):
    if path is None:
        return {}
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a single key-value mapping")
    for key in doc:
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section '{key}'")
    for key in ("synth", "train", "walk", "loss", "rank"):
        if key in doc and not isinstance(doc[key], dict):
            raise ConfigError(f"config section '{key}' must be a mapping")
    return doc


def _build(section: str, cls, file_cfg: dict, overrides: dict, extra=None,
           hidden=()):
    """Merge defaults <- extra <- config file <- CLI flags into a dataclass."""
    known = {f.name for f in dataclass_fields(cls)} - set(hidden)
    merged = dict(extra or {})
    for key, value in (file_cfg or {}).items():
        if key not in known:
            raise ConfigError(f"unknown {section} field '{key}'")
        merged[key] = value
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _seed_extra(doc: dict, field: str):
    return {field: doc["seed"]} if "seed" in doc else {}


def _walk_config(doc: dict, args) -> WalkConfig:
    overrides = {
        "epsilon": getattr(args, "epsilon", None),
        "return_p": getattr(args, "return_p", None),
        "inout_q": getattr(args, "inout_q", None),
        "contexts_per_edge": getattr(args, "contexts_per_edge", None),
        "walk_length": getattr(args, "walk_length", None),
        "max_augmented_per_node": getattr(args, "max_augmented_per_node", None),
        "rng_seed": getattr(args, "walk_seed", None),
    }
    return _build(
        "walk", WalkConfig, doc.get("walk"), overrides,
        extra=_seed_extra(doc, "rng_seed"),
    )


def _loss_weights(doc: dict, args) -> LossWeights:
    overrides = {
        "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None),
        "gamma": getattr(args, "gamma", None),
    }
    return _build("loss", LossWeights, doc.get("loss"), overrides)


def _parse_widths(text):
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(",") if part != "")
    except ValueError as exc:
        raise ConfigError(f"bad layer widths {text!r}") from exc


def _train_config(doc: dict, args) -> TrainConfig:
    overrides = {
        "initial_lr": args.initial_lr,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "mode": args.mode,
        "split_fraction": args.split_fraction,
        "seed": args.seed,
        "embed_widths": _parse_widths(args.embed_widths),
        "pred_widths": _parse_widths(args.pred_widths),
        "negatives": args.negatives,
        "threads": args.threads,
    }
    section = dict(doc.get("train") or {})
    if "embed_widths" in section:
        section["embed_widths"] = tuple(section["embed_widths"])
    if "pred_widths" in section:
        section["pred_widths"] = tuple(section["pred_widths"])
    cfg = _build(
        "train", TrainConfig, section, overrides,
        extra=_seed_extra(doc, "seed"), hidden=("loss_weights", "walk"),
    )
    return TrainConfig(
        **{
            **{f.name: getattr(cfg, f.name) for f in dataclass_fields(TrainConfig)},
            "loss_weights": _loss_weights(doc, args),
            "walk": _walk_config(doc, args),
        }
    )


def _echo_config(out_dir: Path, command: str, payload: dict) -> None:
    doc = {"command": command, **payload}
    with open(out_dir / "run_config.json", "w", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_synth(args) -> None:
    doc = _load_config(args.config)
    overrides = {
        "num_players": args.num_players,
        "num_games": args.num_games,
        "num_days": args.num_days,
        "churn_window": args.churn_window,
        "latent_dim": args.latent_dim,
        "tenure_coefficient": args.tenure_coefficient,
        "base_hazard": args.base_hazard,
        "noise": args.noise,
        "seed": args.seed,
        "games_per_player": args.games_per_player,
        "interaction_scale": args.interaction_scale,
        "game_bias_spread": args.game_bias_spread,
        "popularity_skew": args.popularity_skew,
        "noise_persistence": args.noise_persistence,
    }
    extra = _seed_extra(doc, "seed")
    if "churn_window" in doc:
        extra["churn_window"] = doc["churn_window"]
    config = _build("synth", SynthConfig, doc.get("synth"), overrides, extra=extra)

    g, oracle = generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_dataset(g, out)
    dataio.write_oracle(out / dataio.ORACLE_FILE, oracle)
    _echo_config(out, "synth", {"synth": asdict(config)})
    print(
        f"wrote {config.num_players} players x {config.num_games} games "
        f"x {config.num_days} days to {out}"
    )


def cmd_train(args) -> None:
    doc = _load_config(args.config)
    config = _train_config(doc, args)
    g = dataio.load_dataset(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_path = out / "checkpoint.npz"
    meta_base = {
        "mode": config.mode,
        "seed": config.seed,
        "split_fraction": config.split_fraction,
        "churn_window": g.churn_window,
    }

    log_fh = open(out / "metrics.jsonl", "w", newline="\n")
    try:

        def on_epoch(epoch, params, vocab, entry):
            save_checkpoint(
                ckpt_path, params, vocab,
                {**meta_base, "epochs_completed": epoch + 1},
            )
            log_fh.write(json.dumps(entry, sort_keys=True) + "\n")
            log_fh.flush()

        result = train(g, config, on_epoch=on_epoch)
    finally:
        log_fh.close()

    save_checkpoint(
        ckpt_path, result.params, result.vocab,
        {**meta_base, "epochs_completed": config.epochs},
    )
    payload = asdict(config)
    payload["embed_widths"] = list(config.embed_widths)
    payload["pred_widths"] = list(config.pred_widths)
    _echo_config(out, "train", {"train": payload})
    final_test = result.log[-1]["test_auc"] if result.log else None
    print(f"trained {config.epochs} epochs, final test AUC {final_test}")


def cmd_predict(args) -> None:
    params, _, _ = load_checkpoint(args.checkpoint)
    g = dataio.load_dataset(args.data)
    probs = predict(params, g, args.day)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n") as fh:
        fh.write("player_id,game_id,probability\n")
        for (u, v), p in sorted(probs.items()):
            fh.write(f"{u},{v},{p!r}\n")
    print(f"wrote {len(probs)} edge probabilities for day {args.day}")


def _rank_days(g, args, doc) -> list:
    if args.days is not None:
        try:
            days = [int(part) for part in args.days.split(",") if part != ""]
        except ValueError as exc:
            raise ConfigError(f"bad --days {args.days!r}") from exc
        if not days:
            raise ConfigError("--days named no days")
        return days
    section = doc.get("rank") or {}
    fraction = args.split_fraction
    if fraction is None:
        fraction = section.get("split_fraction", 2.0 / 3.0)
    _, test_days = chronological_split(g, fraction)
    # realized churn at day t needs day t + 1, so the last day is unusable
    return [d for d in test_days if d < g.t_end]


def cmd_rank(args) -> None:
    doc = _load_config(args.config)
    section = dict(doc.get("rank") or {})
    for key in section:
        if key not in _RANK_FIELDS:
            raise ConfigError(f"unknown rank field '{key}'")
    method = args.method if args.method is not None else section.get("method", "all")
    if method not in _METHODS + ("all",):
        raise ConfigError(f"unknown ranking method '{method}'")
    damping = args.damping if args.damping is not None else section.get("damping", 0.85)
    max_iter = args.max_iter if args.max_iter is not None else section.get("max_iter", 100)
    tol = args.tol if args.tol is not None else section.get("tol", 1e-12)

    params, _, _ = load_checkpoint(args.checkpoint)
    g = dataio.load_dataset(args.data)
    days = _rank_days(g, args, doc)
    methods = _METHODS if method == "all" else (method,)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    written = 0
    for day in days:
        snap = g.snapshot(day)
        probs = predict(params, g, day)
        rg = RelationGraph.from_probabilities(
            probs,
            players=snap.player_ids.tolist(),
            games=snap.game_ids.tolist(),
        )
        for name in methods:
            if name == "simsum":
                scores = simsum(rg)
            elif name == "pagerank":
                scores = pagerank(rg, max_iter=max_iter, damping=damping,
                                  tol=tol).game_scores
            else:
                scores = hits(rg, max_iter=max_iter, tol=tol).game_authorities
            write_ranked_list(out / f"{name}_day{day:04d}.csv",
                              rank_games(scores), name)
            written += 1
        if args.write_truth:
            counts = realized_churn_counts(g, day)
            truth_scores = {game: float(c) for game, c in counts.items()}
            write_ranked_list(out / f"truth_day{day:04d}.csv",
                              rank_games(truth_scores), "truth")
            written += 1
    print(f"wrote {written} ranked lists for {len(days)} days to {out}")


_K_GRID = (1, 5, 10, 20, 50, 100, 200, 500)


def _eval_one(pred_games: list, truth_games: list, max_k: int) -> dict:
    values = {
        "kendall_tau": lambda: kendall_tau(pred_games, truth_games),
        "weighted_kendall_tau": lambda: weighted_kendall_tau(pred_games, truth_games),
        "spearman": lambda: spearman(pred_games, truth_games),
        "position_weighted_ap": lambda: position_weighted_ap(pred_games, truth_games),
    }
    out = {}
    for name, fn in values.items():
        try:
            out[name] = fn()
        except GamechurnError:
            out[name] = None
    for k in _K_GRID:
        if k <= min(len(pred_games), max_k):
            out[f"ap_at_{k}"] = avg_precision_at_k(pred_games, truth_games, k)
    return out


def cmd_eval(args) -> None:
    pred_dir = Path(args.pred)
    truth_dir = Path(args.truth)
    pred_files = sorted(
        p for p in pred_dir.glob("*_day[0-9][0-9][0-9][0-9].csv")
        if not p.name.startswith("truth_")
    )
    if not pred_files:
        raise DataError(f"no ranked-list files under {pred_dir}")

    per_metric = {}
    lines = []
    for path in pred_files:
        stem = path.stem
        method, _, day_part = stem.rpartition("_day")
        day = int(day_part)
        truth_path = truth_dir / f"truth_day{day_part}.csv"
        if not truth_path.exists():
            raise DataError(f"no truth ranked list for day {day}: {truth_path}")
        pred_ranked, file_method = read_ranked_list(path)
        if file_method != method:
            raise DataError(
                f"{path.name} holds method {file_method!r}, filename says {method!r}"
            )
        truth_ranked, _ = read_ranked_list(truth_path)
        pred_games = pred_ranked.games()
        truth_games = truth_ranked.games()
        if sorted(pred_games) != sorted(truth_games):
            raise DataError(
                f"item sets differ between {path.name} and {truth_path.name}"
            )
        for name, value in _eval_one(pred_games, truth_games, args.max_k).items():
            lines.append(
                {"day": day, "method": method, "metric": name, "value": value}
            )
            per_metric.setdefault((method, name), []).append(value)

    for (method, name), vals in sorted(per_metric.items()):
        seen = [v for v in vals if v is not None]
        avg = float(sum(seen) / len(seen)) if seen else None
        lines.append({"day": None, "method": method, "metric": name, "value": avg})
        if name == "position_weighted_ap":
            lines.append({"day": None, "method": method, "metric": "map", "value": avg})

    text = "".join(json.dumps(line, sort_keys=True) + "\n" for line in lines)
    if args.out is None or args.out == "-":
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {len(lines)} metric lines to {out}")


def _add_synth(sub) -> None:
    p = sub.add_parser("synth", help="generate a synthetic dataset with oracle")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--num-players", type=int)
    p.add_argument("--num-games", type=int)
    p.add_argument("--num-days", type=int)
    p.add_argument("--churn-window", type=int)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--tenure-coefficient", type=float)
    p.add_argument("--base-hazard", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--games-per-player", type=int)
    p.add_argument("--interaction-scale", type=float)
    p.add_argument("--game-bias-spread", type=float)
    p.add_argument("--popularity-skew", type=float)
    p.add_argument("--noise-persistence", type=float)
    p.set_defaults(func=cmd_synth)


def _add_train(sub) -> None:
    p = sub.add_parser("train", help="train a churn model on a dataset")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--initial-lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--mode", choices=["cotrain", "alternating"])
    p.add_argument("--split-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--embed-widths", help="comma-separated layer widths")
    p.add_argument("--pred-widths", help="comma-separated layer widths")
    p.add_argument("--negatives", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--return-p", type=float)
    p.add_argument("--inout-q", type=float)
    p.add_argument("--contexts-per-edge", type=int)
    p.add_argument("--walk-length", type=int)
    p.add_argument("--max-augmented-per-node", type=int)
    p.add_argument("--walk-seed", type=int)
    p.set_defaults(func=cmd_train)


def _add_predict(sub) -> None:
    p = sub.add_parser("predict", help="churn probabilities for one day's edges")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--day", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)


def _add_rank(sub) -> None:
    p = sub.add_parser("rank", help="rank games by aggregate churn risk")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--method", choices=list(_METHODS) + ["all"])
    p.add_argument("--days", help="comma-separated day list (default: test days)")
    p.add_argument("--split-fraction", type=float)
    p.add_argument("--damping", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--write-truth", action="store_true",
                   help="also rank games by realized churn counts")
    p.set_defaults(func=cmd_rank)


def _add_eval(sub) -> None:
    p = sub.add_parser("eval", help="score ranked lists against truth lists")
    p.add_argument("--pred", required=True, help="directory of ranked lists")
    p.add_argument("--truth", required=True, help="directory of truth lists")
    p.add_argument("--out", help="report file (default: stdout)")
    p.add_argument("--max-k", type=int, default=500)
    p.set_defaults(func=cmd_eval)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gamechurn",
        description="churn prediction and game ranking on play graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_synth(sub)
    _add_train(sub)
    _add_predict(sub)
    _add_rank(sub)
    _add_eval(sub)
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except GamechurnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except yaml.YAMLError as exc:
        print(f"error: bad config file: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
