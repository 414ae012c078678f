"""Timing comparison between the compiled kernels and the numpy fallbacks.

Runs each kernel pair on identical inputs, checks that the outputs agree,
and prints per-kernel timings.  With GAMECHURN_BACKEND=numpy both columns
time the same function, so run it under the default backend for a real
comparison:

    python benchmarks/bench_backends.py
    GAMECHURN_BACKEND=numpy python benchmarks/bench_backends.py
"""

import argparse
import time

import numpy as np

from gamechurn import backend, kernels
from gamechurn.graph import Snapshot
from gamechurn.rank import RelationGraph
from gamechurn.walk import WalkConfig, build_augmented


def build_walk_case(num_players: int, num_games: int, seed: int):
    rng = np.random.default_rng(seed)
    players = rng.normal(size=(num_players, 8))
    games = rng.normal(size=(num_games, 8))
    edges = sorted({
        (int(rng.integers(num_players)), int(rng.integers(num_games)))
        for _ in range(num_players * 4)
    })
    arr = np.asarray(edges, dtype=np.int64)
    snap = Snapshot(
        0, np.arange(num_players), np.arange(num_games), arr, players, games
    )
    config = WalkConfig(
        epsilon=0.4, return_p=1.0, inout_q=0.5,
        contexts_per_edge=20, walk_length=8, rng_seed=9,
    )
    ag = build_augmented(snap, config)
    # node ids equal row indices by construction
    seeds = np.uint64(config.rng_seed) ^ np.arange(arr.shape[0], dtype=np.uint64)
    return (
        ag.p_indptr, ag.p_indices, ag.g_indptr, ag.g_indices,
        ag.pa_indptr, ag.pa_indices, ag.pa_sims,
        ag.ga_indptr, ag.ga_indices, ag.ga_sims,
        snap.player_features, ag.player_norm,
        snap.game_features, ag.game_norm,
        arr[:, 0].copy(), arr[:, 1].copy(), seeds,
        float(config.return_p), float(config.inout_q),
        int(config.contexts_per_edge), int(config.walk_length),
    )


def build_spectral_case(num_players: int, num_games: int, seed: int):
    rng = np.random.default_rng(seed)
    weights = {
        (int(rng.integers(num_players)), int(rng.integers(num_games))):
            float(rng.uniform(0.01, 0.99))
        for _ in range(num_players * 6)
    }
    return RelationGraph(weights)._arrays()


def time_call(fn, args, repeats: int):
    """(best seconds, first-call seconds, result); the first call pays any
    compilation cost."""
    t0 = time.perf_counter()
    result = fn(*args)
    first = time.perf_counter() - t0
    best = first
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, first, result


def outputs_agree(a, b) -> bool:
    """Allow only accumulation-order rounding between the two backends."""
    if isinstance(a, tuple):
        return len(a) == len(b) and all(outputs_agree(x, y) for x, y in zip(a, b))
    return bool(np.allclose(np.asarray(a), np.asarray(b), rtol=1e-9, atol=1e-12))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--players", type=int, default=400)
    parser.add_argument("--games", type=int, default=60)
    parser.add_argument("--rank-size", type=int, default=20000,
                        help="perm length for the rank-correlation kernels")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    walk_args = build_walk_case(args.players, args.games, args.seed)
    spectral = build_spectral_case(args.players * 2, args.games * 2, args.seed)
    rng = np.random.default_rng(args.seed)
    seq = rng.permutation(args.rank_size).astype(np.int64)
    hw = 1.0 / (np.arange(args.rank_size, dtype=np.float64) + 1.0)

    cases = [
        ("walk", kernels.walk_kernel, kernels.walk_kernel_numpy, walk_args),
        ("pagerank", kernels.pagerank_kernel, kernels.pagerank_numpy,
         spectral + (0.85, 100, 1e-12)),
        ("hits", kernels.hits_kernel, kernels.hits_numpy,
         spectral + (100, 1e-12)),
        ("kendall", kernels.kendall_kernel, kernels.kendall_numpy, (seq,)),
        ("wkendall", kernels.wkendall_kernel, kernels.wkendall_numpy,
         (seq, hw)),
    ]

    print(f"active backend: {backend.BACKEND}")
    if backend.BACKEND != "numba":
        print("note: both columns run the numpy fallback\n")
    header = (f"{'kernel':<10} {'active (ms)':>12} {'numpy (ms)':>12} "
              f"{'speedup':>8} {'first call (ms)':>16}  agree")
    print(header)
    print("-" * len(header))
    for name, active, fallback, call_args in cases:
        best_a, first_a, out_a = time_call(active, call_args, args.repeats)
        best_n, _, out_n = time_call(fallback, call_args, args.repeats)
        agree = outputs_agree(out_a, out_n)
        print(
            f"{name:<10} {best_a * 1e3:>12.3f} {best_n * 1e3:>12.3f} "
            f"{best_n / best_a:>7.1f}x {first_a * 1e3:>16.1f}  "
            f"{'yes' if agree else 'NO'}"
        )
        if not agree:
            raise SystemExit(f"{name}: backend outputs disagree")


if __name__ == "__main__":
    main()
