"""Edge-embedding network with a churn head and a context-softmax head.

The trunk maps an edge feature vector through ReLU layers to an embedding g.
On top of g sit two heads: ReLU layers plus a sigmoid dot-product producing the
churn probability, and a vocabulary of context-edge weight rows scoring how
likely g is to co-occur with each context edge.  Context likelihood uses a
sampled softmax: the partition function is estimated from the target plus the
drawn negatives, so with every non-target as a negative it reproduces the full
softmax exactly.

All gradients are computed analytically in ``backward``; no autodiff anywhere.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError, VocabError

CHECKPOINT_VERSION = 1

_P_LO = np.nextafter(0.0, 1.0)
_P_HI = np.nextafter(1.0, 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class EdgeVocabulary:
    """Append-only registry of context edges with occurrence counts."""

    def __init__(self):
        self._index: dict = {}
        self.pairs: list = []
        self.counts: list = []

    def __len__(self) -> int:
        return len(self.pairs)

    def add(self, edge: tuple) -> int:
        """Register one occurrence of ``edge`` and return its row index."""
        idx = self._index.get(edge)
        if idx is None:
            idx = len(self.pairs)
            self._index[edge] = idx
            self.pairs.append(edge)
            self.counts.append(0)
        self.counts[idx] += 1
        return idx

    def index_of(self, edge: tuple) -> int:
        idx = self._index.get(edge)
        if idx is None:
            raise VocabError(f"unknown context edge {edge}")
        return idx

    def count_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.float64)

    @classmethod
    def from_arrays(cls, pairs: np.ndarray, counts: np.ndarray) -> "EdgeVocabulary":
        vocab = cls()
        for (u, v), c in zip(pairs.tolist(), counts.tolist()):
            vocab._index[(u, v)] = len(vocab.pairs)
            vocab.pairs.append((u, v))
            vocab.counts.append(int(c))
        return vocab


class ModelParams:
    """All trainable arrays: trunk, churn head, context table."""

    def __init__(self, embed_w, embed_b, pred_w, pred_b, top_w, context):
        self.embed_w = [np.asarray(w, dtype=np.float64) for w in embed_w]
        self.embed_b = [np.asarray(b, dtype=np.float64) for b in embed_b]
        self.pred_w = [np.asarray(w, dtype=np.float64) for w in pred_w]
        self.pred_b = [np.asarray(b, dtype=np.float64) for b in pred_b]
        self.top_w = np.asarray(top_w, dtype=np.float64)
        self.context = np.asarray(context, dtype=np.float64)

    @property
    def input_dim(self) -> int:
        return self.embed_w[0].shape[1]

    @property
    def embed_dim(self) -> int:
        return self.embed_w[-1].shape[0]

    def arrays(self):
        """Yield (key, array) pairs in a stable order."""
        for i, w in enumerate(self.embed_w):
            yield f"embed_w_{i}", w
        for i, b in enumerate(self.embed_b):
            yield f"embed_b_{i}", b
        for i, w in enumerate(self.pred_w):
            yield f"pred_w_{i}", w
        for i, b in enumerate(self.pred_b):
            yield f"pred_b_{i}", b
        yield "top_w", self.top_w
        yield "context", self.context

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            [np.zeros_like(w) for w in self.embed_w],
            [np.zeros_like(b) for b in self.embed_b],
            [np.zeros_like(w) for w in self.pred_w],
            [np.zeros_like(b) for b in self.pred_b],
            np.zeros_like(self.top_w),
            np.zeros_like(self.context),
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            [w.copy() for w in self.embed_w],
            [b.copy() for b in self.embed_b],
            [w.copy() for w in self.pred_w],
            [b.copy() for b in self.pred_b],
            self.top_w.copy(),
            self.context.copy(),
        )


def init_params(
    input_dim: int,
    embed_widths,
    pred_widths,
    vocab_size: int,
    seed: int,
) -> ModelParams:
    """Glorot-uniform weights, zero biases, small-normal context rows."""
    if input_dim < 1:
        raise DataError("input_dim must be positive")
    if not embed_widths:
        raise DataError("at least one embedding layer required")
    rng = np.random.default_rng(seed)

    def glorot(n_out, n_in):
        limit = np.sqrt(6.0 / (n_in + n_out))
        return rng.uniform(-limit, limit, size=(n_out, n_in))

    embed_w, embed_b = [], []
    fan = input_dim
    for width in embed_widths:
        embed_w.append(glorot(width, fan))
        embed_b.append(np.zeros(width))
        fan = width
    pred_w, pred_b = [], []
    for width in pred_widths:
        pred_w.append(glorot(width, fan))
        pred_b.append(np.zeros(width))
        fan = width
    top_w = glorot(1, fan)[0]
    context = rng.normal(0.0, 0.01, size=(max(vocab_size, 0), embed_widths[-1]))
    return ModelParams(embed_w, embed_b, pred_w, pred_b, top_w, context)


def _check_finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


def embed_forward(params: ModelParams, z: np.ndarray):
    """Trunk forward pass: (N, d) features -> (N, m) embeddings plus the tape."""
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    _check_finite(z, "embedding input")
    tape = [z]
    h = z
    for w, b in zip(params.embed_w, params.embed_b):
        h = np.maximum(h @ w.T + b, 0.0)
        tape.append(h)
    _check_finite(h, "embedding output")
    return h, tape


def predict_forward(params: ModelParams, g: np.ndarray):
    """Churn head forward pass: embeddings -> (probs, logits, tape)."""
    h = np.atleast_2d(np.asarray(g, dtype=np.float64))
    tape = [h]
    for w, b in zip(params.pred_w, params.pred_b):
        h = np.maximum(h @ w.T + b, 0.0)
        tape.append(h)
    logits = h @ params.top_w
    _check_finite(logits, "churn logits")
    return sigmoid(logits), logits, tape


def predict_proba(params: ModelParams, z: np.ndarray) -> np.ndarray:
    """Churn probabilities for feature rows, clipped strictly inside (0, 1)."""
    g, _ = embed_forward(params, z)
    probs, _, _ = predict_forward(params, g)
    return np.clip(probs, _P_LO, _P_HI)


def context_log_prob(
    params: ModelParams, g: np.ndarray, target: int, negatives
) -> float:
    """Sampled-softmax log-probability of one context edge given embedding g.

    The normalizer runs over the target and the given negatives only, which
    equals the exact softmax when the negatives enumerate every non-target row.
    With no negatives the estimate degenerates to 0.
    """
    g = np.asarray(g, dtype=np.float64).reshape(-1)
    v = params.context.shape[0]
    idx = np.concatenate(([target], np.asarray(negatives, dtype=np.int64)))
    if idx.size and (idx.min() < 0 or idx.max() >= v):
        raise VocabError(f"context index outside [0, {v})")
    s = params.context[idx] @ g
    m = s.max()
    lse = m + np.log(np.exp(s - m).sum())
    out = float(s[0] - lse)
    if not np.isfinite(out):
        raise NumericError("non-finite context log-probability")
    return out


@dataclass
class Batch:
    """One training batch of forward rows plus index views into them.

    ``z`` stacks every distinct (edge, day) feature vector the batch touches.
    Supervised entries reference uncensored rows only; context entries carry a
    vocabulary target plus sampled negatives; temporal entries reference the
    rows of day i, day i + 1 and the monotonicity reference (the day-i row for
    uncensored pairs, the last-uncensored-day row otherwise).
    """

    z: np.ndarray
    sup_rows: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    sup_targets: np.ndarray = field(default_factory=lambda: np.empty(0))
    ctx_rows: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    ctx_targets: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    ctx_negatives: np.ndarray = field(default_factory=lambda: np.empty((0, 0), np.int64))
    tmp_i: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    tmp_next: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    tmp_ref: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    m = s.max(axis=1, keepdims=True)
    e = np.exp(s - m)
    return e / e.sum(axis=1, keepdims=True)


def batch_terms(params: ModelParams, batch: Batch, weights) -> dict:
    """Forward pass of the joint objective; returns each component unweighted."""
    g, _ = embed_forward(params, batch.z)
    probs, _, _ = predict_forward(params, g)

    sup = 0.0
    if batch.sup_rows.size:
        err = batch.sup_targets - probs[batch.sup_rows]
        sup = float((err * err).mean())

    ctx = 0.0
    if batch.ctx_rows.size:
        idx = np.concatenate(
            (batch.ctx_targets[:, None], batch.ctx_negatives), axis=1
        )
        w_sel = params.context[idx]
        s = np.einsum("cm,ckm->ck", g[batch.ctx_rows], w_sel)
        m = s.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(s - m).sum(axis=1))
        ctx = float((lse - s[:, 0]).sum())

    tmp = 0.0
    if batch.tmp_i.size:
        delta = g[batch.tmp_next] - g[batch.tmp_i]
        norms = np.linalg.norm(delta, axis=1)
        gaps = np.maximum(probs[batch.tmp_ref] - probs[batch.tmp_next], 0.0)
        tmp = float(norms.sum() + gaps.sum())

    reg_embed = sum(float((w * w).sum()) * weights.lam_embed_w for w in params.embed_w)
    reg_embed += sum(float((b * b).sum()) * weights.lam_embed_b for b in params.embed_b)
    reg_pred = sum(float((w * w).sum()) * weights.lam_pred_w for w in params.pred_w)
    reg_pred += sum(float((b * b).sum()) * weights.lam_pred_b for b in params.pred_b)
    reg_pred += float((params.top_w * params.top_w).sum()) * weights.lam_top
    return {
        "supervised": sup,
        "context": ctx,
        "temporal": tmp,
        "reg_embed": reg_embed,
        "reg_pred": reg_pred,
    }


def batch_loss(
    params: ModelParams,
    batch: Batch,
    weights,
    with_supervised: bool = True,
    with_context: bool = True,
    with_temporal: bool = True,
    reg_scope: str = "full",
) -> float:
    """Scalar joint objective; the finite-difference twin of ``backward``."""
    t = batch_terms(params, batch, weights)
    loss = 0.0
    if with_supervised:
        loss += t["supervised"]
    if with_context:
        loss += weights.alpha * t["context"]
    if with_temporal:
        loss += weights.beta * t["temporal"]
    if reg_scope == "full":
        loss += weights.gamma * (t["reg_embed"] + t["reg_pred"])
    elif reg_scope == "embed":
        loss += weights.gamma * t["reg_embed"]
    elif reg_scope != "none":
        raise DataError(f"unknown reg_scope {reg_scope!r}")
    if not np.isfinite(loss):
        raise NumericError("non-finite training loss")
    return float(loss)


def backward(
    params: ModelParams,
    batch: Batch,
    weights,
    with_supervised: bool = True,
    with_context: bool = True,
    with_temporal: bool = True,
    reg_scope: str = "full",
):
    """Analytic gradients of the joint objective.

    Returns (loss, components, grads) where grads mirrors ``params``.  The
    derivation: supervised squared error and the temporal hinge reach the trunk
    through the churn head; the context softmax and the temporal smoothness
    norm reach it directly; ReLU kinks and the hinge corner use subgradient 0.
    """
    g, embed_tape = embed_forward(params, batch.z)
    probs, logits, pred_tape = predict_forward(params, g)
    n_rows = batch.z.shape[0]
    grads = params.zeros_like()
    d_logit = np.zeros(n_rows)
    d_g = np.zeros_like(g)
    comp = {"supervised": 0.0, "context": 0.0, "temporal": 0.0, "reg": 0.0}
    loss = 0.0

    if with_supervised and batch.sup_rows.size:
        err = probs[batch.sup_rows] - batch.sup_targets
        comp["supervised"] = float((err * err).mean())
        loss += comp["supervised"]
        np.add.at(d_logit, batch.sup_rows, 2.0 * err / err.size)

    if with_context and batch.ctx_rows.size:
        idx = np.concatenate(
            (batch.ctx_targets[:, None], batch.ctx_negatives), axis=1
        )
        w_sel = params.context[idx]
        g_ctx = g[batch.ctx_rows]
        s = np.einsum("cm,ckm->ck", g_ctx, w_sel)
        m = s.max(axis=1, keepdims=True)
        lse = m[:, 0] + np.log(np.exp(s - m).sum(axis=1))
        comp["context"] = float((lse - s[:, 0]).sum())
        loss += weights.alpha * comp["context"]
        coef = _softmax_rows(s)
        coef[:, 0] -= 1.0
        coef *= weights.alpha
        np.add.at(d_g, batch.ctx_rows, np.einsum("ck,ckm->cm", coef, w_sel))
        np.add.at(grads.context, idx, coef[:, :, None] * g_ctx[:, None, :])

    if with_temporal and batch.tmp_i.size:
        delta = g[batch.tmp_next] - g[batch.tmp_i]
        norms = np.linalg.norm(delta, axis=1)
        gap = probs[batch.tmp_ref] - probs[batch.tmp_next]
        active = gap > 0.0
        comp["temporal"] = float(norms.sum() + np.maximum(gap, 0.0).sum())
        loss += weights.beta * comp["temporal"]
        unit = np.zeros_like(delta)
        nz = norms > 0.0
        unit[nz] = delta[nz] / norms[nz, None]
        np.add.at(d_g, batch.tmp_next, weights.beta * unit)
        np.add.at(d_g, batch.tmp_i, -weights.beta * unit)
        np.add.at(d_logit, batch.tmp_ref, weights.beta * active)
        np.add.at(d_logit, batch.tmp_next, -weights.beta * active.astype(np.float64))

    # churn head backward feeds the trunk alongside the direct d_g terms
    d_logit *= probs * (1.0 - probs)
    h_last = pred_tape[-1]
    grads.top_w += h_last.T @ d_logit
    d_h = d_logit[:, None] * params.top_w
    for li in range(len(params.pred_w) - 1, -1, -1):
        d_pre = d_h * (pred_tape[li + 1] > 0.0)
        grads.pred_w[li] += d_pre.T @ pred_tape[li]
        grads.pred_b[li] += d_pre.sum(axis=0)
        d_h = d_pre @ params.pred_w[li]
    d_g += d_h

    for li in range(len(params.embed_w) - 1, -1, -1):
        d_pre = d_g * (embed_tape[li + 1] > 0.0)
        grads.embed_w[li] += d_pre.T @ embed_tape[li]
        grads.embed_b[li] += d_pre.sum(axis=0)
        d_g = d_pre @ params.embed_w[li]

    if reg_scope not in ("full", "embed", "none"):
        raise DataError(f"unknown reg_scope {reg_scope!r}")
    if reg_scope in ("full", "embed"):
        reg = 0.0
        for w, gw in zip(params.embed_w, grads.embed_w):
            reg += weights.lam_embed_w * float((w * w).sum())
            gw += 2.0 * weights.gamma * weights.lam_embed_w * w
        for b, gb in zip(params.embed_b, grads.embed_b):
            reg += weights.lam_embed_b * float((b * b).sum())
            gb += 2.0 * weights.gamma * weights.lam_embed_b * b
        if reg_scope == "full":
            for w, gw in zip(params.pred_w, grads.pred_w):
                reg += weights.lam_pred_w * float((w * w).sum())
                gw += 2.0 * weights.gamma * weights.lam_pred_w * w
            for b, gb in zip(params.pred_b, grads.pred_b):
                reg += weights.lam_pred_b * float((b * b).sum())
                gb += 2.0 * weights.gamma * weights.lam_pred_b * b
            reg += weights.lam_top * float((params.top_w * params.top_w).sum())
            grads.top_w += 2.0 * weights.gamma * weights.lam_top * params.top_w
        comp["reg"] = reg
        loss += weights.gamma * reg

    if not np.isfinite(loss):
        raise NumericError("non-finite training loss")
    return float(loss), comp, grads


def save_checkpoint(path, params: ModelParams, vocab: EdgeVocabulary, meta: dict) -> None:
    """Lossless single-file checkpoint (npz) with shapes, vocabulary and metadata."""
    doc = dict(meta)
    doc["checkpoint_version"] = CHECKPOINT_VERSION
    doc["n_embed_layers"] = len(params.embed_w)
    doc["n_pred_layers"] = len(params.pred_w)
    arrays = dict(params.arrays())
    arrays["vocab_pairs"] = np.asarray(
        vocab.pairs if vocab.pairs else np.empty((0, 2)), dtype=np.int64
    ).reshape(-1, 2)
    arrays["vocab_counts"] = np.asarray(vocab.counts, dtype=np.int64)
    arrays["meta_json"] = np.frombuffer(
        json.dumps(doc, sort_keys=True).encode(), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path):
    """Inverse of ``save_checkpoint``: returns (params, vocab, meta)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode())
        if meta.get("checkpoint_version") != CHECKPOINT_VERSION:
            raise DataError(
                f"unsupported checkpoint version {meta.get('checkpoint_version')}"
            )
        ne = meta["n_embed_layers"]
        npd = meta["n_pred_layers"]
        params = ModelParams(
            [data[f"embed_w_{i}"] for i in range(ne)],
            [data[f"embed_b_{i}"] for i in range(ne)],
            [data[f"pred_w_{i}"] for i in range(npd)],
            [data[f"pred_b_{i}"] for i in range(npd)],
            data["top_w"],
            data["context"],
        )
        vocab = EdgeVocabulary.from_arrays(data["vocab_pairs"], data["vocab_counts"])
    return params, vocab, meta
