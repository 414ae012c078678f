import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gamechurn import kernels
from gamechurn.backend import BACKEND, USE_NUMBA
from gamechurn.graph import Snapshot
from gamechurn.walk import WalkConfig, build_augmented, sample_contexts


# kept in sync with the inline copy in test_forced_numpy_backend_reproduces_walks
def walk_fixture():
    rng = np.random.default_rng(2)
    edges = np.asarray(sorted({(int(u), int(u) % 3) for u in range(4)}
                              | {(0, 1), (2, 2), (3, 1)}), dtype=np.int64)
    snap = Snapshot(
        0, np.arange(4), np.arange(3), edges,
        rng.normal(size=(4, 3)), rng.normal(size=(3, 3)),
    )
    config = WalkConfig(epsilon=0.8, contexts_per_edge=5, walk_length=5,
                        rng_seed=3)
    ag = build_augmented(snap, config)
    return [
        sample_contexts(ag, tuple(e), config, walk_index=k)
        for k, e in enumerate(edges.tolist())
    ]


class TestSplitmix64:
    states = [0, 1, 42, 123456789, 2**32, 2**63 - 1, 2**63, 2**64 - 1]

    def test_python_and_typed_streams_agree(self):
        for s in self.states:
            py_state, py_x = kernels.splitmix64_py(s)
            u_state, u_x = kernels._splitmix64_u64(np.uint64(s))
            assert int(u_state) == py_state
            assert float(u_x) == py_x

    def test_output_in_unit_interval(self):
        state = 7
        for _ in range(1000):
            state, x = kernels.splitmix64_py(state)
            assert 0.0 <= x < 1.0

    def test_distinct_seeds_diverge(self):
        _, a = kernels.splitmix64_py(1)
        _, b = kernels.splitmix64_py(2)
        assert a != b


def walk_kernel_args(seed=2, cpe=5, wl=5):
    rng = np.random.default_rng(seed)
    edges = np.asarray(sorted({(int(u), int(u) % 3) for u in range(4)}
                              | {(0, 1), (2, 2), (3, 1)}), dtype=np.int64)
    snap = Snapshot(
        0, np.arange(4), np.arange(3), edges,
        rng.normal(size=(4, 3)), rng.normal(size=(3, 3)),
    )
    config = WalkConfig(epsilon=0.8, contexts_per_edge=cpe, walk_length=wl,
                        rng_seed=3)
    ag = build_augmented(snap, config)
    u_rows = np.searchsorted(snap.player_ids, edges[:, 0]).astype(np.int64)
    v_rows = np.searchsorted(snap.game_ids, edges[:, 1]).astype(np.int64)
    seeds = np.uint64(config.rng_seed) ^ np.arange(len(edges), dtype=np.uint64)
    return (
        ag.p_indptr, ag.p_indices, ag.g_indptr, ag.g_indices,
        ag.pa_indptr, ag.pa_indices, ag.pa_sims,
        ag.ga_indptr, ag.ga_indices, ag.ga_sims,
        snap.player_features, ag.player_norm,
        snap.game_features, ag.game_norm,
        u_rows, v_rows, seeds, 1.0, 0.05, cpe, wl,
    )


class TestKernelTwins:
    """The compiled binding, the plain loop and the numpy fallback must agree."""

    def test_walk_kernels_bit_identical(self):
        args = walk_kernel_args()
        for variant in (kernels.walk_kernel, kernels._walk_kernel_loop,
                        kernels.walk_kernel_numpy):
            out_p, out_g, counts = variant(*args)
            ref = kernels.walk_kernel_numpy(*args)
            assert np.array_equal(out_p, ref[0])
            assert np.array_equal(out_g, ref[1])
            assert np.array_equal(counts, ref[2])

    def pagerank_args(self):
        rng = np.random.default_rng(11)
        n_p, n_g = 5, 4
        edge_a, edge_b, w = [], [], []
        for u in range(n_p):
            for v in range(n_g):
                if (u + v) % 2 == 0:
                    edge_a.append(u)
                    edge_b.append(n_p + v)
                    w.append(float(rng.uniform(0.05, 1.0)))
        return (np.array(edge_a, dtype=np.int64), np.array(edge_b, dtype=np.int64),
                np.array(w), n_p + n_g)

    def test_pagerank_twins_agree(self):
        edge_a, edge_b, w, n = self.pagerank_args()
        results = [
            variant(edge_a, edge_b, w, n, 0.85, 200, 1e-13)
            for variant in (kernels.pagerank_kernel, kernels._pagerank_loop,
                            kernels.pagerank_numpy)
        ]
        for scores, l1, iters in results[1:]:
            assert np.allclose(scores, results[0][0], atol=1e-12)
            assert iters == results[0][2]

    def test_hits_twins_agree(self):
        edge_a, edge_b, w, n = self.pagerank_args()
        results = [
            variant(edge_a, edge_b, w, n, 100, 1e-13)
            for variant in (kernels.hits_kernel, kernels._hits_loop,
                            kernels.hits_numpy)
        ]
        for auth, hub, l1, iters in results[1:]:
            assert np.allclose(auth, results[0][0], atol=1e-12)
            assert np.allclose(hub, results[0][1], atol=1e-12)
            assert iters == results[0][3]

    def test_kendall_twins_agree(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            seq = rng.permutation(int(rng.integers(2, 60))).astype(np.int64)
            expect = kernels.kendall_numpy(seq)
            assert int(kernels.kendall_kernel(seq)) == expect
            assert kernels._kendall_loop(seq) == expect

    def test_wkendall_twins_agree(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            seq = rng.permutation(int(rng.integers(2, 60))).astype(np.int64)
            hw = 1.0 / (np.arange(seq.size, dtype=np.float64) + 1.0)
            num0, den0 = kernels.wkendall_numpy(seq, hw)
            for variant in (kernels.wkendall_kernel, kernels._wkendall_loop):
                num, den = variant(seq, hw)
                assert num == pytest.approx(num0, abs=1e-12)
                assert den == pytest.approx(den0, abs=1e-12)


@pytest.mark.skipif(not USE_NUMBA, reason="threaded kernel needs numba")
def test_threaded_walk_kernel_matches_serial():
    args = walk_kernel_args(cpe=8, wl=6)
    serial = kernels.get_walk_kernel(1)(*args)
    threaded = kernels.get_walk_kernel(2)(*args)
    for a, b in zip(serial, threaded):
        assert np.array_equal(a, b)


@pytest.mark.skipif(not USE_NUMBA, reason="thread clamp needs numba")
def test_thread_request_clamped_to_available():
    import numba

    want = numba.config.NUMBA_NUM_THREADS + 5
    kernel = kernels.get_walk_kernel(want)
    args = walk_kernel_args()
    ref = kernels.get_walk_kernel(1)(*args)
    for a, b in zip(kernel(*args), ref):
        assert np.array_equal(a, b)


class TestBackendSelection:
    def test_flags_consistent(self):
        assert BACKEND in ("numba", "numpy")
        assert (BACKEND == "numba") == USE_NUMBA

    def test_forced_numpy_backend_reproduces_walks(self):
        import inspect

        script = (
            "import json\n"
            "import numpy as np\n"
            "from gamechurn.backend import BACKEND\n"
            "from gamechurn.graph import Snapshot\n"
            "from gamechurn.walk import WalkConfig, build_augmented, "
            "sample_contexts\n"
            "assert BACKEND == 'numpy', BACKEND\n"
            + inspect.getsource(walk_fixture)
            + "print(json.dumps(walk_fixture()))\n"
        )
        env = dict(os.environ, GAMECHURN_BACKEND="numpy")
        proc = subprocess.run(
            [sys.executable, "-c", script], env=env,
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stderr
        got = [[tuple(pair) for pair in ctx] for ctx in json.loads(proc.stdout)]
        assert got == walk_fixture()

    def test_invalid_backend_value_rejected(self):
        env = dict(os.environ, GAMECHURN_BACKEND="cuda")
        proc = subprocess.run(
            [sys.executable, "-c", "import gamechurn"], env=env,
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode != 0
        assert "GAMECHURN_BACKEND" in proc.stderr
