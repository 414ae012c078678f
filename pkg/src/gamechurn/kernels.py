"""Hot numeric kernels with numba and pure-numpy implementations.

Every kernel exists twice: a loop-style version compiled with ``@njit`` and a
vectorized numpy fallback.  ``backend.USE_NUMBA`` picks the active one at
import time; the ``*_numpy`` names stay importable for benchmarks and tests.

Random draws use splitmix64 so that a walk's stream is a pure function of its
seed.  The python-int and uint64 implementations below produce identical
streams (covered by a parity test).
"""

import numpy as np

from .backend import USE_NUMBA, jit

if USE_NUMBA:
    from numba import prange
else:
    prange = range

_MASK64 = (1 << 64) - 1
_SM_GOLD = 0x9E3779B97F4A7C15
_SM_MIX1 = 0xBF58476D1CE4E5B9
_SM_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / float(1 << 53)

# uint64-typed copies for the numba path; mixed signed/unsigned arithmetic
# would otherwise promote to float64 and destroy the bit pattern
_U_GOLD = np.uint64(_SM_GOLD)
_U_MIX1 = np.uint64(_SM_MIX1)
_U_MIX2 = np.uint64(_SM_MIX2)
_U11 = np.uint64(11)
_U27 = np.uint64(27)
_U30 = np.uint64(30)
_U31 = np.uint64(31)


def splitmix64_py(state: int) -> tuple[int, float]:
    """Advance a splitmix64 stream once: (state) -> (new state, float in [0, 1))."""
    state = (state + _SM_GOLD) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _SM_MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MIX2) & _MASK64
    z = z ^ (z >> 31)
    return state, (z >> 11) * _INV53


@jit
def _splitmix64_u64(state):
    state = state + _U_GOLD
    z = state
    z = (z ^ (z >> _U30)) * _U_MIX1
    z = (z ^ (z >> _U27)) * _U_MIX2
    z = z ^ (z >> _U31)
    return state, np.float64(z >> _U11) * _INV53


# ---------------------------------------------------------------------------
# walk context sampling
# ---------------------------------------------------------------------------
# Shared layout for both backends.  Base adjacency and augment lists arrive as
# CSR arrays; node features and their norms allow on-demand cosine similarity
# for candidates reached through two base hops.  One splitmix64 stream per
# starting edge; walks restart from their edge until enough contexts exist.
# Outputs are (player, game) index pairs padded with -1.


def _walk_kernel_loop(
    p_indptr, p_indices, g_indptr, g_indices,
    pa_indptr, pa_indices, pa_sims, ga_indptr, ga_indices, ga_sims,
    player_x, player_norm, game_x, game_norm,
    edge_u, edge_v, seeds, ret_p, ret_q,
    contexts_per_edge, walk_length,
):
    n_edges = edge_u.shape[0]
    out_p = np.full((n_edges, contexts_per_edge), -1, np.int64)
    out_g = np.full((n_edges, contexts_per_edge), -1, np.int64)
    counts = np.zeros(n_edges, np.int64)
    if contexts_per_edge == 0 or walk_length < 3:
        return out_p, out_g, counts
    max_aug = 0
    max_base = 0
    for i in range(pa_indptr.shape[0] - 1):
        c = pa_indptr[i + 1] - pa_indptr[i]
        if c > max_aug:
            max_aug = c
    for i in range(ga_indptr.shape[0] - 1):
        c = ga_indptr[i + 1] - ga_indptr[i]
        if c > max_aug:
            max_aug = c
    for i in range(p_indptr.shape[0] - 1):
        c = p_indptr[i + 1] - p_indptr[i]
        if c > max_base:
            max_base = c
    for i in range(g_indptr.shape[0] - 1):
        c = g_indptr[i + 1] - g_indptr[i]
        if c > max_base:
            max_base = c
    cap = 1 + max_aug + max_base
    for e in prange(n_edges):
        cand = np.empty(cap, np.int64)
        cw = np.empty(cap, np.float64)
        state = seeds[e]
        got = 0
        dead = False
        while got < contexts_per_edge and not dead:
            prev = edge_u[e]
            cur = edge_v[e]
            prev_is_player = True
            for _step in range(walk_length - 2):
                # candidate order: return move, augment neighbors of prev,
                # base neighbors of cur not already listed
                if prev_is_player:
                    a0 = pa_indptr[prev]
                    a1 = pa_indptr[prev + 1]
                    aug_idx = pa_indices
                    aug_sim = pa_sims
                    b0 = g_indptr[cur]
                    b1 = g_indptr[cur + 1]
                    base_idx = g_indices
                    feats = player_x
                    norms = player_norm
                else:
                    a0 = ga_indptr[prev]
                    a1 = ga_indptr[prev + 1]
                    aug_idx = ga_indices
                    aug_sim = ga_sims
                    b0 = p_indptr[cur]
                    b1 = p_indptr[cur + 1]
                    base_idx = p_indices
                    feats = game_x
                    norms = game_norm
                k = 0
                cand[k] = prev
                cw[k] = 1.0 / ret_p
                k += 1
                for a in range(a0, a1):
                    s = aug_sim[a]
                    if s < 0.0:
                        s = 0.0
                    cand[k] = aug_idx[a]
                    cw[k] = s / ret_q
                    k += 1
                nprev = norms[prev]
                for b in range(b0, b1):
                    o = base_idx[b]
                    if o == prev:
                        continue
                    listed = False
                    for a in range(a0, a1):
                        if aug_idx[a] == o:
                            listed = True
                            break
                    if listed:
                        continue
                    no = norms[o]
                    if nprev == 0.0 or no == 0.0:
                        s = 0.0
                    else:
                        dot = 0.0
                        for f in range(feats.shape[1]):
                            dot += feats[prev, f] * feats[o, f]
                        s = dot / (nprev * no)
                        if s < 0.0:
                            s = 0.0
                    cand[k] = o
                    cw[k] = s / ret_q
                    k += 1
                total = 0.0
                for c in range(k):
                    total += cw[c]
                if total <= 0.0:
                    dead = True
                    break
                # explicit cast: keeps the state uint64 when this loop runs as
                # plain python against a compiled _splitmix64_u64
                state, u = _splitmix64_u64(np.uint64(state))
                r = u * total
                acc = 0.0
                chosen = cand[k - 1]
                for c in range(k):
                    acc += cw[c]
                    if r < acc:
                        chosen = cand[c]
                        break
                if prev_is_player:
                    out_p[e, got] = chosen
                    out_g[e, got] = cur
                else:
                    out_p[e, got] = cur
                    out_g[e, got] = chosen
                got += 1
                prev = cur
                cur = chosen
                prev_is_player = not prev_is_player
                if got == contexts_per_edge:
                    break
        counts[e] = got
    return out_p, out_g, counts


def walk_kernel_numpy(
    p_indptr, p_indices, g_indptr, g_indices,
    pa_indptr, pa_indices, pa_sims, ga_indptr, ga_indices, ga_sims,
    player_x, player_norm, game_x, game_norm,
    edge_u, edge_v, seeds, ret_p, ret_q,
    contexts_per_edge, walk_length,
):
    n_edges = edge_u.shape[0]
    out_p = np.full((n_edges, contexts_per_edge), -1, np.int64)
    out_g = np.full((n_edges, contexts_per_edge), -1, np.int64)
    counts = np.zeros(n_edges, np.int64)
    if contexts_per_edge == 0 or walk_length < 3:
        return out_p, out_g, counts
    memo: dict = {}

    def table(prev_is_player, prev, cur):
        key = (prev_is_player, prev, cur)
        hit = memo.get(key)
        if hit is not None:
            return hit
        if prev_is_player:
            aug = pa_indices[pa_indptr[prev]:pa_indptr[prev + 1]]
            sims = pa_sims[pa_indptr[prev]:pa_indptr[prev + 1]]
            base = g_indices[g_indptr[cur]:g_indptr[cur + 1]]
            feats, norms = player_x, player_norm
        else:
            aug = ga_indices[ga_indptr[prev]:ga_indptr[prev + 1]]
            sims = ga_sims[ga_indptr[prev]:ga_indptr[prev + 1]]
            base = p_indices[p_indptr[cur]:p_indptr[cur + 1]]
            feats, norms = game_x, game_norm
        keep = base[(base != prev) & ~np.isin(base, aug)]
        denom = norms[prev] * norms[keep]
        with np.errstate(invalid="ignore", divide="ignore"):
            bsim = np.where(denom > 0.0, feats[keep] @ feats[prev] / denom, 0.0)
        cand = np.concatenate((np.array([prev], np.int64), aug, keep))
        w = np.concatenate((
            np.array([1.0 / ret_p]),
            np.clip(sims, 0.0, None) / ret_q,
            np.clip(bsim, 0.0, None) / ret_q,
        ))
        cum = np.cumsum(w)
        entry = (cand, cum, float(cum[-1]))
        memo[key] = entry
        return entry

    for e in range(n_edges):
        state = int(seeds[e])
        got = 0
        dead = False
        while got < contexts_per_edge and not dead:
            prev = int(edge_u[e])
            cur = int(edge_v[e])
            prev_is_player = True
            for _step in range(walk_length - 2):
                cand, cum, total = table(prev_is_player, prev, cur)
                if total <= 0.0:
                    dead = True
                    break
                state, u = splitmix64_py(state)
                idx = int(np.searchsorted(cum, u * total, side="right"))
                if idx >= cand.shape[0]:
                    idx = cand.shape[0] - 1
                chosen = int(cand[idx])
                if prev_is_player:
                    out_p[e, got] = chosen
                    out_g[e, got] = cur
                else:
                    out_p[e, got] = cur
                    out_g[e, got] = chosen
                got += 1
                prev, cur = cur, chosen
                prev_is_player = not prev_is_player
                if got == contexts_per_edge:
                    break
        counts[e] = got
    return out_p, out_g, counts


# ---------------------------------------------------------------------------
# link-analysis iterations over an undirected weighted bipartite graph
# ---------------------------------------------------------------------------
# Nodes carry one global index space (players first, then games); each edge
# appears once with both endpoints.


def _pagerank_loop(edge_a, edge_b, w, n_nodes, damping, max_iter, tol):
    n_edges = w.shape[0]
    out_w = np.zeros(n_nodes, np.float64)
    for e in range(n_edges):
        out_w[edge_a[e]] += w[e]
        out_w[edge_b[e]] += w[e]
    scores = np.full(n_nodes, 1.0 / n_nodes, np.float64)
    l1 = 0.0
    iters = 0
    for _it in range(max_iter):
        contrib = np.zeros(n_nodes, np.float64)
        for i in range(n_nodes):
            if out_w[i] > 0.0:
                contrib[i] = damping * scores[i] / out_w[i]
        fresh = np.full(n_nodes, (1.0 - damping) / n_nodes, np.float64)
        for e in range(n_edges):
            a = edge_a[e]
            b = edge_b[e]
            fresh[a] += contrib[b] * w[e]
            fresh[b] += contrib[a] * w[e]
        l1 = 0.0
        for i in range(n_nodes):
            l1 += abs(fresh[i] - scores[i])
        scores = fresh
        iters += 1
        if l1 < tol:
            break
    return scores, l1, iters


def pagerank_numpy(edge_a, edge_b, w, n_nodes, damping, max_iter, tol):
    out_w = (
        np.bincount(edge_a, weights=w, minlength=n_nodes)
        + np.bincount(edge_b, weights=w, minlength=n_nodes)
    )
    safe = np.where(out_w > 0.0, out_w, 1.0)
    scores = np.full(n_nodes, 1.0 / n_nodes)
    l1 = 0.0
    iters = 0
    for _it in range(max_iter):
        contrib = np.where(out_w > 0.0, damping * scores / safe, 0.0)
        fresh = (
            (1.0 - damping) / n_nodes
            + np.bincount(edge_a, weights=contrib[edge_b] * w, minlength=n_nodes)
            + np.bincount(edge_b, weights=contrib[edge_a] * w, minlength=n_nodes)
        )
        l1 = float(np.abs(fresh - scores).sum())
        scores = fresh
        iters += 1
        if l1 < tol:
            break
    return scores, l1, iters


def _hits_loop(edge_a, edge_b, w, n_nodes, max_iter, tol):
    n_edges = w.shape[0]
    auth = np.ones(n_nodes, np.float64)
    hub = np.ones(n_nodes, np.float64)
    uniform = 1.0 / np.sqrt(n_nodes)
    l1 = 0.0
    iters = 0
    for _it in range(max_iter):
        new_a = np.zeros(n_nodes, np.float64)
        new_h = np.zeros(n_nodes, np.float64)
        for e in range(n_edges):
            a = edge_a[e]
            b = edge_b[e]
            new_a[a] += w[e] * hub[b]
            new_a[b] += w[e] * hub[a]
            new_h[a] += w[e] * auth[b]
            new_h[b] += w[e] * auth[a]
        na = 0.0
        nh = 0.0
        for i in range(n_nodes):
            na += new_a[i] * new_a[i]
            nh += new_h[i] * new_h[i]
        na = np.sqrt(na)
        nh = np.sqrt(nh)
        if na > 0.0:
            for i in range(n_nodes):
                new_a[i] /= na
        else:
            for i in range(n_nodes):
                new_a[i] = uniform
        if nh > 0.0:
            for i in range(n_nodes):
                new_h[i] /= nh
        else:
            for i in range(n_nodes):
                new_h[i] = uniform
        l1 = 0.0
        for i in range(n_nodes):
            l1 += abs(new_a[i] - auth[i])
        auth = new_a
        hub = new_h
        iters += 1
        if l1 < tol:
            break
    return auth, hub, l1, iters


def hits_numpy(edge_a, edge_b, w, n_nodes, max_iter, tol):
    auth = np.ones(n_nodes)
    hub = np.ones(n_nodes)
    uniform = 1.0 / np.sqrt(n_nodes)
    l1 = 0.0
    iters = 0
    for _it in range(max_iter):
        new_a = (
            np.bincount(edge_a, weights=w * hub[edge_b], minlength=n_nodes)
            + np.bincount(edge_b, weights=w * hub[edge_a], minlength=n_nodes)
        )
        new_h = (
            np.bincount(edge_a, weights=w * auth[edge_b], minlength=n_nodes)
            + np.bincount(edge_b, weights=w * auth[edge_a], minlength=n_nodes)
        )
        na = float(np.linalg.norm(new_a))
        nh = float(np.linalg.norm(new_h))
        new_a = new_a / na if na > 0.0 else np.full(n_nodes, uniform)
        new_h = new_h / nh if nh > 0.0 else np.full(n_nodes, uniform)
        l1 = float(np.abs(new_a - auth).sum())
        auth = new_a
        hub = new_h
        iters += 1
        if l1 < tol:
            break
    return auth, hub, l1, iters


# ---------------------------------------------------------------------------
# rank-correlation pair statistics
# ---------------------------------------------------------------------------
# ``seq`` holds the reference positions of the items in predicted order, so a
# concordant pair is an ascent and a discordant pair a descent.


def _kendall_loop(seq):
    n = seq.shape[0]
    s = 0
    for i in range(n - 1):
        si = seq[i]
        for j in range(i + 1, n):
            if seq[j] > si:
                s += 1
            elif seq[j] < si:
                s -= 1
    return s


def kendall_numpy(seq):
    s = 0
    for i in range(seq.shape[0] - 1):
        d = seq[i + 1:] - seq[i]
        s += int((d > 0).sum()) - int((d < 0).sum())
    return s


def _wkendall_loop(seq, hw):
    n = seq.shape[0]
    num = 0.0
    den = 0.0
    for i in range(n - 1):
        ri = seq[i]
        wi = hw[ri]
        for j in range(i + 1, n):
            rj = seq[j]
            wv = wi + hw[rj]
            den += wv
            if rj > ri:
                num += wv
            elif rj < ri:
                num -= wv
    return num, den


def wkendall_numpy(seq, hw):
    num = 0.0
    den = 0.0
    for i in range(seq.shape[0] - 1):
        rest = seq[i + 1:]
        wv = hw[seq[i]] + hw[rest]
        sgn = np.sign(rest - seq[i])
        num += float((sgn * wv).sum())
        den += float(wv.sum())
    return num, den


if USE_NUMBA:
    walk_kernel = jit(_walk_kernel_loop)
    pagerank_kernel = jit(_pagerank_loop)
    hits_kernel = jit(_hits_loop)
    kendall_kernel = jit(_kendall_loop)
    wkendall_kernel = jit(_wkendall_loop)
else:
    walk_kernel = walk_kernel_numpy
    pagerank_kernel = pagerank_numpy
    hits_kernel = hits_numpy
    kendall_kernel = kendall_numpy
    wkendall_kernel = wkendall_numpy

_parallel_walk_kernel = None


def get_walk_kernel(num_threads: int = 1):
    """Return the walk kernel for ``num_threads`` worker threads.

    Per-edge RNG streams are independent and every edge writes disjoint output
    slots, so the threaded kernel is bit-identical to the serial one.  Without
    numba the serial fallback is returned regardless of ``num_threads``.
    """
    global _parallel_walk_kernel
    if num_threads <= 1 or not USE_NUMBA:
        return walk_kernel
    import numba

    num_threads = min(num_threads, numba.config.NUMBA_NUM_THREADS)
    if num_threads <= 1:
        return walk_kernel
    numba.set_num_threads(num_threads)
    if _parallel_walk_kernel is None:
        _parallel_walk_kernel = numba.njit(cache=True, parallel=True)(
            _walk_kernel_loop
        )
    return _parallel_walk_kernel
