"""The four components of the training objective as pure functions.

``total = supervised + alpha * unsupervised + beta * temporal + gamma * reg``.

Supervised: mean squared error between churn targets and predictions over the
uncensored examples.  Unsupervised: negative log-likelihood of sampled context
edges.  Temporal: an unsquared smoothness norm between consecutive embeddings
plus a hinge that penalizes churn probability dropping below its reference.
Regularization: weighted squared L2 norms of the trunk and churn-head
parameters (the context table is deliberately left out).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError, EmptyBatchError
from .model import ModelParams, context_log_prob


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 0.02
    beta: float = 0.01
    gamma: float = 1e-5
    lam_embed_w: float = 1.0
    lam_embed_b: float = 1.0
    lam_pred_w: float = 1.0
    lam_pred_b: float = 1.0
    lam_top: float = 1.0

    def __post_init__(self):
        for name in (
            "alpha", "beta", "gamma",
            "lam_embed_w", "lam_embed_b", "lam_pred_w", "lam_pred_b", "lam_top",
        ):
            if getattr(self, name) < 0:
                raise DataError(f"loss weight {name} must be non-negative")


def supervised_loss(preds, persists, censors) -> float:
    """Mean squared churn error over uncensored examples.

    ``persists[i]`` is 1 when the edge survives its window (churn target 0) and
    0 when it churns (target 1); censored examples contribute nothing.  An
    all-censored batch scores 0; an empty batch is an error.
    """
    preds = np.asarray(preds, dtype=np.float64)
    persists = np.asarray(persists, dtype=np.float64)
    censors = np.asarray(censors, dtype=np.float64)
    if preds.size == 0:
        raise EmptyBatchError("supervised loss over an empty batch")
    if preds.shape != persists.shape or preds.shape != censors.shape:
        raise DataError("supervised loss inputs must share one shape")
    keep = censors == 1.0
    if not keep.any():
        return 0.0
    err = (1.0 - persists[keep]) - preds[keep]
    return float((err * err).mean())


def unsupervised_loss(params: ModelParams, items) -> float:
    """Negative log-likelihood of context edges, censored examples skipped.

    ``items`` holds (embedding, contexts, censor) triples where ``contexts`` is
    a list of (target_index, negative_indices) pairs.
    """
    if not items:
        raise EmptyBatchError("unsupervised loss over an empty batch")
    total = 0.0
    for g, contexts, censor in items:
        if not censor:
            continue
        for target, negatives in contexts:
            total -= context_log_prob(params, g, target, negatives)
    return float(total)


@dataclass(frozen=True)
class TemporalPair:
    """One edge persisting from day i to day i + 1.

    ``f_ref`` is the monotonicity reference: ignored for uncensored pairs
    (which use ``f_i``) and required for censored pairs, where it is the
    prediction at the pair's last uncensored day.
    """

    g_i: np.ndarray
    g_next: np.ndarray
    f_i: float
    f_next: float
    censored: bool
    f_ref: float | None = None


def temporal_loss(pairs) -> float:
    """Smoothness plus monotonicity over persisting pairs; no pairs scores 0."""
    total = 0.0
    for pair in pairs:
        delta = np.asarray(pair.g_next, dtype=np.float64) - np.asarray(
            pair.g_i, dtype=np.float64
        )
        if pair.censored:
            if pair.f_ref is None:
                raise DataError("censored temporal pair lacks its reference prediction")
            ref = pair.f_ref
        else:
            ref = pair.f_i
        total += float(np.linalg.norm(delta)) + max(ref - pair.f_next, 0.0)
    return float(total)


def regularization_loss(params: ModelParams, weights: LossWeights) -> float:
    """Weighted squared L2 norms of trunk and churn-head parameters."""
    reg = 0.0
    for w in params.embed_w:
        reg += weights.lam_embed_w * float((w * w).sum())
    for b in params.embed_b:
        reg += weights.lam_embed_b * float((b * b).sum())
    for w in params.pred_w:
        reg += weights.lam_pred_w * float((w * w).sum())
    for b in params.pred_b:
        reg += weights.lam_pred_b * float((b * b).sum())
    reg += weights.lam_top * float((params.top_w * params.top_w).sum())
    return reg


def total_loss(
    supervised: float, unsupervised: float, temporal: float, regularization: float,
    weights: LossWeights,
) -> float:
    return float(
        supervised
        + weights.alpha * unsupervised
        + weights.beta * temporal
        + weights.gamma * regularization
    )
