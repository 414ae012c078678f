"""Training loop: batch assembly, Adam updates, co-train and alternating schedules.

Training slices the graph chronologically: the first ceil(fraction * n) label
days feed the optimizer, the remainder are held out for per-epoch AUC.  Each
batch mixes the supervised, context and temporal summands of the sampled
(edge, day) examples so the joint objective is optimized in one step; the
alternating schedule instead flips between a representation phase (context
loss plus trunk regularization, updating trunk and context table) and a
prediction phase (supervised plus temporal plus full regularization, updating
everything but the context table).
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DataError, NotPresentError, NumericError, UndefinedMetricError
from .graph import (
    Label,
    TemporalBipartiteGraph,
    block_cosine_matrix,
    edge_label,
)
from .loss import LossWeights
from .metrics import auc
from .model import (
    Batch,
    EdgeVocabulary,
    ModelParams,
    backward,
    init_params,
    predict_proba,
)
from .walk import WalkConfig, build_augmented, sample_contexts_batch

_MASK64 = (1 << 64) - 1

MODE_COTRAIN = "cotrain"
MODE_ALTERNATING = "alternating"


@dataclass(frozen=True)
class TrainConfig:
    initial_lr: float = 0.017
    epochs: int = 6
    batch_size: int = 1024
    mode: str = MODE_COTRAIN
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    loss_weights: LossWeights = field(default_factory=LossWeights)
    walk: WalkConfig = field(default_factory=WalkConfig)
    split_fraction: float = 2.0 / 3.0
    seed: int = 0
    embed_widths: tuple = (50, 50)
    pred_widths: tuple = (50, 50)
    negatives: int = 5
    threads: int = 1

    def __post_init__(self):
        if not math.isfinite(self.initial_lr) or self.initial_lr < 0.0:
            raise DataError("initial_lr must be a non-negative real")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise DataError("epochs must be a non-negative integer")
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise DataError("batch_size must be a positive integer")
        if self.mode not in (MODE_COTRAIN, MODE_ALTERNATING):
            raise DataError(f"mode must be cotrain or alternating, got {self.mode!r}")
        for name in ("adam_beta1", "adam_beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise DataError(f"{name} must lie in [0, 1)")
        if not self.adam_eps > 0.0:
            raise DataError("adam_eps must be positive")
        if not 0.0 < self.split_fraction < 1.0:
            raise DataError("split_fraction must lie strictly inside (0, 1)")
        for name in ("embed_widths", "pred_widths"):
            widths = getattr(self, name)
            if any(int(w) != w or w < 1 for w in widths):
                raise DataError(f"{name} must contain positive integers")
        if not self.embed_widths:
            raise DataError("embed_widths must not be empty")
        if int(self.negatives) != self.negatives or self.negatives < 1:
            raise DataError("negatives must be a positive integer")
        if int(self.threads) != self.threads or self.threads < 1:
            raise DataError("threads must be a positive integer")


def chronological_split(g: TemporalBipartiteGraph, fraction: float):
    """First ceil(fraction * n) label days train, the rest test, in day order."""
    if not 0.0 < fraction < 1.0:
        raise DataError("fraction must lie strictly inside (0, 1)")
    days = list(range(g.t0, g.t_end + 1))
    n = len(days)
    if n < 2:
        raise DataError(f"need at least 2 label days to split, have {n}")
    # guard against float drift pushing an exact product over the next integer
    n_train = math.ceil(fraction * n - 1e-9)
    n_train = min(max(n_train, 1), n - 1)
    return days[:n_train], days[n_train:]


def decayed_lr(initial: float, epoch: int) -> float:
    """Learning rate after ``epoch`` completed epochs: initial / (1 + epoch / 2)."""
    if epoch < 0:
        raise DataError("epoch must be non-negative")
    return initial / (1.0 + epoch / 2.0)


class AdamState:
    """First/second moment estimates plus a per-array step counter."""

    def __init__(self, params: ModelParams, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {key: np.zeros_like(arr) for key, arr in params.arrays()}
        self.v = {key: np.zeros_like(arr) for key, arr in params.arrays()}
        self.steps = {key: 0 for key, _ in params.arrays()}


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              lr: float, keys=None):
    """One bias-corrected Adam update in place; ``keys`` limits which arrays move."""
    updates = dict(grads.arrays())
    for key, arr in params.arrays():
        if keys is not None and key not in keys:
            continue
        grad = updates[key]
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient for {key}")
        state.steps[key] += 1
        t = state.steps[key]
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        arr -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


@dataclass
class EdgeExample:
    """One (edge, day) training item with its index views into the feature matrix."""

    u: int
    v: int
    day: int
    row: int
    censor: int
    target: float = 0.0
    ctx_targets: tuple = ()
    tmp_next_row: int = -1
    tmp_ref_row: int = -1


@dataclass
class TrainingData:
    z: np.ndarray
    examples: list
    vocab: EdgeVocabulary
    neg_table: np.ndarray
    train_days: list
    test_days: list
    sup_rows: np.ndarray
    sup_labels: np.ndarray
    test_z: np.ndarray
    test_labels: np.ndarray


def _day_feature_rows(g, snap):
    edges = [tuple(e) for e in snap.edges.tolist()]
    if not edges:
        return edges, np.empty((0, g.schema.n_blocks))
    p_rows = np.array([snap.player_row(u) for u, _ in edges])
    g_rows = np.array([snap.game_row(v) for _, v in edges])
    z = block_cosine_matrix(
        g.schema, snap.player_features[p_rows], snap.game_features[g_rows]
    )
    return edges, z


def assemble(g: TemporalBipartiteGraph, config: TrainConfig) -> TrainingData:
    """Materialize every training summand: rows, labels, contexts, temporal refs."""
    train_days, test_days = chronological_split(g, config.split_fraction)
    train_set = set(train_days)

    rows = {}
    labels = {}
    day_edges = {}
    z_blocks = []
    examples = []
    for day in train_days:
        snap = g.snapshot(day)
        edges, z_day = _day_feature_rows(g, snap)
        day_edges[day] = edges
        base = sum(b.shape[0] for b in z_blocks)
        z_blocks.append(z_day)
        for j, (u, v) in enumerate(edges):
            lab = edge_label(g, u, v, day)
            row = base + j
            rows[(u, v, day)] = row
            labels[(u, v, day)] = lab
            target = 1.0 if lab.value is Label.CHURN else 0.0
            examples.append(
                EdgeExample(u, v, day, row, lab.censor, target)
            )
    if not examples:
        raise DataError("no edges on any training day")
    z = np.vstack(z_blocks)

    # temporal partners: pairs persisting from one train day to the next
    for ex in examples:
        if ex.day + 1 not in train_set:
            continue
        nxt = rows.get((ex.u, ex.v, ex.day + 1))
        if nxt is None:
            continue
        if ex.censor == 1:
            ref = ex.row
        else:
            t_ref = labels[(ex.u, ex.v, ex.day)].last_observed
            ref = rows.get((ex.u, ex.v, t_ref)) if t_ref is not None else None
            if ref is None:
                continue
        ex.tmp_next_row = nxt
        ex.tmp_ref_row = ref

    # walk contexts for uncensored edges only; one batch of walks per day
    vocab = EdgeVocabulary()
    by_key = {(ex.u, ex.v, ex.day): ex for ex in examples}
    walk_counter = 0
    for day in train_days:
        edges = [
            (u, v) for (u, v) in day_edges[day] if labels[(u, v, day)].censor == 1
        ]
        if not edges:
            continue
        ag = build_augmented(g.snapshot(day), config.walk)
        indices = np.arange(walk_counter, walk_counter + len(edges), dtype=np.uint64)
        walk_counter += len(edges)
        ctx_lists = sample_contexts_batch(
            ag, edges, config.walk, indices, num_threads=config.threads
        )
        for (u, v), ctxs in zip(edges, ctx_lists):
            by_key[(u, v, day)].ctx_targets = tuple(vocab.add(c) for c in ctxs)

    counts = vocab.count_array()
    neg_table = np.cumsum(counts ** 0.75) if counts.size else np.empty(0)

    sup_rows = np.array(
        [ex.row for ex in examples if ex.censor == 1], dtype=np.int64
    )
    sup_labels = np.array(
        [int(ex.target) for ex in examples if ex.censor == 1], dtype=np.int64
    )

    test_blocks = []
    test_labels = []
    for day in test_days:
        snap = g.snapshot(day)
        edges, z_day = _day_feature_rows(g, snap)
        keep = []
        for j, (u, v) in enumerate(edges):
            lab = edge_label(g, u, v, day)
            if lab.censor == 1:
                keep.append(j)
                test_labels.append(1 if lab.value is Label.CHURN else 0)
        if keep:
            test_blocks.append(z_day[np.array(keep)])
    test_z = (
        np.vstack(test_blocks)
        if test_blocks
        else np.empty((0, g.schema.n_blocks))
    )

    return TrainingData(
        z=z,
        examples=examples,
        vocab=vocab,
        neg_table=neg_table,
        train_days=train_days,
        test_days=test_days,
        sup_rows=sup_rows,
        sup_labels=sup_labels,
        test_z=test_z,
        test_labels=np.array(test_labels, dtype=np.int64),
    )


def _sample_negatives(rng, neg_table, target: int, k: int) -> np.ndarray:
    """Draw k vocabulary rows from the count^0.75 table, rejecting the target."""
    total = neg_table[-1]
    out = np.empty(k, dtype=np.int64)
    for j in range(k):
        pick = target
        for _ in range(64):
            pick = int(np.searchsorted(neg_table, rng.random() * total, side="right"))
            pick = min(pick, neg_table.size - 1)
            if pick != target:
                break
        if pick == target:
            pick = (target + 1) % neg_table.size
        out[j] = pick
    return out


def build_batch(data: TrainingData, picked, rng, config: TrainConfig) -> Batch:
    """Gather the rows one batch of examples touches and remap indices locally."""
    needed = []
    for i in picked:
        ex = data.examples[i]
        needed.append(ex.row)
        if ex.tmp_next_row >= 0:
            needed.append(ex.tmp_next_row)
            needed.append(ex.tmp_ref_row)
    uniq = np.unique(np.array(needed, dtype=np.int64))
    local = {int(r): j for j, r in enumerate(uniq)}

    sup_rows, sup_targets = [], []
    ctx_rows, ctx_targets, ctx_negs = [], [], []
    tmp_i, tmp_next, tmp_ref = [], [], []
    can_ctx = len(data.vocab) >= 2 and data.neg_table.size >= 2
    for i in picked:
        ex = data.examples[i]
        r = local[ex.row]
        if ex.censor == 1:
            sup_rows.append(r)
            sup_targets.append(ex.target)
            if can_ctx:
                for t in ex.ctx_targets:
                    ctx_rows.append(r)
                    ctx_targets.append(t)
                    ctx_negs.append(
                        _sample_negatives(rng, data.neg_table, t, config.negatives)
                    )
        if ex.tmp_next_row >= 0:
            tmp_i.append(r)
            tmp_next.append(local[ex.tmp_next_row])
            tmp_ref.append(local[ex.tmp_ref_row])

    k = config.negatives
    return Batch(
        z=data.z[uniq],
        sup_rows=np.array(sup_rows, dtype=np.int64),
        sup_targets=np.array(sup_targets, dtype=np.float64),
        ctx_rows=np.array(ctx_rows, dtype=np.int64),
        ctx_targets=np.array(ctx_targets, dtype=np.int64),
        ctx_negatives=(
            np.stack(ctx_negs) if ctx_negs else np.empty((0, k), dtype=np.int64)
        ),
        tmp_i=np.array(tmp_i, dtype=np.int64),
        tmp_next=np.array(tmp_next, dtype=np.int64),
        tmp_ref=np.array(tmp_ref, dtype=np.int64),
    )


@dataclass
class TrainResult:
    params: ModelParams
    vocab: EdgeVocabulary
    log: list
    train_days: list
    test_days: list


def _safe_auc(scores: np.ndarray, labels: np.ndarray):
    if scores.size == 0:
        return None
    try:
        return auc(list(zip(scores.tolist(), labels.tolist())))
    except UndefinedMetricError:
        return None


def _phase_kwargs(mode: str, epoch: int):
    """Loss selection and updatable keys for this epoch's phase.

    Alternating starts with the prediction phase so the trunk is shaped by
    labels before context epochs move it; a context-only first epoch can
    collapse a fresh trunk to all-dead relus that no later phase revives.
    """
    if mode == MODE_COTRAIN:
        return {}, None
    if epoch % 2 == 1:
        kwargs = dict(with_supervised=False, with_temporal=False, reg_scope="embed")
        keys = lambda key: key.startswith("embed_") or key == "context"
    else:
        kwargs = dict(with_context=False, reg_scope="full")
        keys = lambda key: key != "context"
    return kwargs, keys


def train(g: TemporalBipartiteGraph, config: TrainConfig, on_epoch=None) -> TrainResult:
    """Optimize the joint objective; returns params, vocabulary and epoch log.

    The log carries one entry per epoch: {epoch, lr, train_loss, train_auc,
    test_auc}, with None for metrics undefined on single-class data.  With
    ``on_epoch`` given it is called as on_epoch(epoch, params, vocab, entry)
    after each epoch, letting callers checkpoint as training advances.
    """
    data = assemble(g, config)
    params = init_params(
        data.z.shape[1],
        config.embed_widths,
        config.pred_widths,
        len(data.vocab),
        config.seed & _MASK64,
    )
    state = AdamState(params, config.adam_beta1, config.adam_beta2, config.adam_eps)
    weights = config.loss_weights

    log = []
    for epoch in range(config.epochs):
        rng = np.random.default_rng([config.seed & _MASK64, epoch])
        order = rng.permutation(len(data.examples))
        lr = decayed_lr(config.initial_lr, epoch)
        kwargs, key_pred = _phase_kwargs(config.mode, epoch)
        keys = (
            None
            if key_pred is None
            else {key for key, _ in params.arrays() if key_pred(key)}
        )
        losses = []
        for start in range(0, order.size, config.batch_size):
            picked = order[start:start + config.batch_size]
            batch = build_batch(data, picked, rng, config)
            loss, _, grads = backward(params, batch, weights, **kwargs)
            adam_step(params, grads, state, lr, keys=keys)
            losses.append(loss)

        train_auc = _safe_auc(
            predict_proba(params, data.z[data.sup_rows]), data.sup_labels
        )
        test_auc = _safe_auc(predict_proba(params, data.test_z), data.test_labels)
        entry = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(np.mean(losses)) if losses else None,
            "train_auc": train_auc,
            "test_auc": test_auc,
        }
        log.append(entry)
        if on_epoch is not None:
            on_epoch(epoch, params, data.vocab, entry)

    return TrainResult(params, data.vocab, log, data.train_days, data.test_days)


def predict(params: ModelParams, g: TemporalBipartiteGraph, timestamp: int) -> dict:
    """Churn probability for every edge present at ``timestamp`` (inductive)."""
    snap = g.snapshot(timestamp)
    try:
        edges, z = _day_feature_rows(g, snap)
    except NotPresentError as exc:
        raise DataError(str(exc)) from exc
    if not edges:
        return {}
    probs = predict_proba(params, z)
    return {edge: float(p) for edge, p in zip(edges, probs)}
