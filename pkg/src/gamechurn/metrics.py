"""Evaluation metrics for churn prediction scores and game rankings.

Classification metrics consume (score, label) pairs.  Rank metrics consume two
orderings of the same item set; internally each ranking is reduced to ``seq``,
the reference positions of the items in predicted order, so concordant pairs
are ascents of ``seq``.  Undefined values surface as errors or explicit
absences, never as silent zeros.
"""

import numpy as np

from .errors import DataError, EmptyInputError, UndefinedMetricError
from .kernels import kendall_kernel, wkendall_kernel


def _scores_labels(scored):
    pairs = list(scored)
    if not pairs:
        raise EmptyInputError("no scored examples")
    scores = np.array([float(s) for s, _ in pairs])
    labels = np.array([int(l) for _, l in pairs])
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    return scores, labels


def auc(scored) -> float:
    """Area under the ROC curve by average ranks; tied scores count half."""
    scores, labels = _scores_labels(scored)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size)
    ranks[order] = np.arange(1, scores.size + 1)
    # average the ranks of equal scores
    uniq, inv, counts = np.unique(scores, return_inverse=True, return_counts=True)
    sums = np.bincount(inv, weights=ranks)
    ranks = sums[inv] / counts[inv]
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def precision_recall(scored, threshold: float = 0.5):
    """Confusion-matrix precision and recall at ``threshold`` (score >= fires).

    Precision is None when nothing is predicted positive.
    """
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold {threshold} outside [0, 1]")
    scores, labels = _scores_labels(scored)
    if labels.sum() == 0:
        raise UndefinedMetricError("recall needs at least one positive")
    predicted = scores >= threshold
    tp = int((predicted & (labels == 1)).sum())
    recall = tp / int(labels.sum())
    if predicted.sum() == 0:
        return None, recall
    return tp / int(predicted.sum()), recall


def _positions(pred, truth) -> np.ndarray:
    pred = [int(x) for x in pred]
    truth = [int(x) for x in truth]
    if len(set(pred)) != len(pred):
        raise DataError("predicted ranking repeats an item")
    if len(pred) != len(truth) or set(pred) != set(truth):
        raise DataError("rankings must cover the same item set")
    where = {item: r for r, item in enumerate(truth)}
    return np.array([where[item] for item in pred], dtype=np.int64)


def kendall_tau(pred, truth) -> float:
    """(concordant - discordant) / all pairs for two orderings of one item set."""
    seq = _positions(pred, truth)
    n = seq.size
    if n < 2:
        raise UndefinedMetricError("rank correlation needs at least 2 items")
    return float(kendall_kernel(seq)) / (n * (n - 1) / 2.0)


def weighted_kendall_tau(pred, truth) -> float:
    """Kendall correlation where a pair at reference ranks r, s weighs
    1/(r+1) + 1/(s+1), normalized so full agreement is 1 and reversal -1."""
    seq = _positions(pred, truth)
    n = seq.size
    if n < 2:
        raise UndefinedMetricError("rank correlation needs at least 2 items")
    hw = 1.0 / (np.arange(n, dtype=np.float64) + 1.0)
    num, den = wkendall_kernel(seq, hw)
    return float(num) / float(den)


def spearman(pred, truth) -> float:
    """Pearson correlation of the two position vectors."""
    seq = _positions(pred, truth)
    n = seq.size
    if n < 2:
        raise UndefinedMetricError("rank correlation needs at least 2 items")
    x = np.arange(n, dtype=np.float64)
    y = seq.astype(np.float64)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = float(np.sqrt((xc * xc).sum() * (yc * yc).sum()))
    if denom == 0.0:
        raise UndefinedMetricError("constant ranks")
    return float((xc * yc).sum()) / denom


def _relevance(pred, truth) -> np.ndarray:
    """relevance[i] = 1 when the item predicted at position i (1-based) sits
    inside the reference top i."""
    seq = _positions(pred, truth)
    return (seq < np.arange(1, seq.size + 1)).astype(np.float64)


def avg_precision_at_k(pred, truth, k: int) -> float:
    """Mean of precision at 1..k under the top-i relevance rule."""
    rel = _relevance(pred, truth)
    if not 1 <= k <= rel.size:
        raise DataError(f"k {k} outside [1, {rel.size}]")
    precisions = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return float(precisions[:k].mean())


def position_weighted_ap(pred, truth) -> float:
    """Average of precision at the relevant positions (0 when none are)."""
    rel = _relevance(pred, truth)
    total = rel.sum()
    if total == 0.0:
        return 0.0
    precisions = np.cumsum(rel) / np.arange(1, rel.size + 1)
    return float((precisions * rel).sum() / total)


def mean_average_precision(per_day_ap) -> float:
    """Mean of per-day position-weighted average precisions."""
    values = [float(v) for v in per_day_ap]
    if not values:
        raise EmptyInputError("no per-day values")
    return sum(values) / len(values)
