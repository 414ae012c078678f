import itertools

import numpy as np
import pytest

from gamechurn.errors import DataError, EmptyInputError, UndefinedMetricError
from gamechurn.metrics import (
    auc,
    avg_precision_at_k,
    kendall_tau,
    mean_average_precision,
    position_weighted_ap,
    precision_recall,
    spearman,
    weighted_kendall_tau,
)


def auc_oracle(scored):
    """Every (positive, negative) pair compared; ties count half."""
    pos = [s for s, l in scored if l == 1]
    neg = [s for s, l in scored if l == 0]
    wins = sum(
        1.0 if p > q else (0.5 if p == q else 0.0)
        for p in pos for q in neg
    )
    return wins / (len(pos) * len(neg))


def positions(pred, truth):
    where = {item: r for r, item in enumerate(truth)}
    return [where[item] for item in pred]


def kendall_oracle(pred, truth):
    seq = positions(pred, truth)
    n = len(seq)
    s = sum(
        (1 if seq[j] > seq[i] else -1)
        for i in range(n) for j in range(i + 1, n)
    )
    return s / (n * (n - 1) / 2.0)


def wkendall_oracle(pred, truth):
    seq = positions(pred, truth)
    n = len(seq)
    hw = [1.0 / (r + 1) for r in range(n)]
    num = den = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            w = hw[seq[i]] + hw[seq[j]]
            num += w if seq[j] > seq[i] else -w
            den += w
    return num / den


class TestAuc:
    def test_perfect_separation(self):
        assert auc([(0.9, 1), (0.8, 1), (0.2, 0), (0.1, 0)]) == 1.0

    def test_all_tied_scores(self):
        assert auc([(0.5, 0), (0.5, 1), (0.5, 0), (0.5, 1)]) == 0.5

    def test_known_value(self):
        scored = [(0.1, 0), (0.4, 0), (0.35, 1), (0.8, 1)]
        assert auc(scored) == pytest.approx(0.75)

    def test_matches_pair_enumeration_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(4, 40))
            # quantized scores force plenty of ties
            scores = np.round(rng.uniform(0, 1, size=n), 1)
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                labels[0] = 0
                labels[1] = 1
            scored = list(zip(scores.tolist(), labels.tolist()))
            assert auc(scored) == pytest.approx(auc_oracle(scored), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(UndefinedMetricError):
            auc([(0.4, 1), (0.6, 1)])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            auc([])

    def test_non_binary_label_rejected(self):
        with pytest.raises(DataError):
            auc([(0.5, 2), (0.4, 0)])


class TestPrecisionRecall:
    scored = [(0.9, 1), (0.8, 0), (0.3, 1), (0.2, 0)]

    def test_hand_confusion_matrix(self):
        precision, recall = precision_recall(self.scored, threshold=0.5)
        assert precision == pytest.approx(0.5)
        assert recall == pytest.approx(0.5)

    def test_zero_threshold_recalls_everything(self):
        precision, recall = precision_recall(self.scored, threshold=0.0)
        assert recall == 1.0
        assert precision == pytest.approx(0.5)

    def test_threshold_above_all_scores(self):
        precision, recall = precision_recall(
            [(0.3, 1), (0.2, 0)], threshold=0.9
        )
        assert precision is None
        assert recall == 0.0

    def test_no_positives_rejected(self):
        with pytest.raises(UndefinedMetricError):
            precision_recall([(0.9, 0), (0.1, 0)])

    def test_bad_threshold_rejected(self):
        with pytest.raises(DataError):
            precision_recall(self.scored, threshold=1.5)


class TestKendallTau:
    def test_identical_orderings(self):
        assert kendall_tau([3, 1, 2], [3, 1, 2]) == 1.0

    def test_reversed_orderings(self):
        assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0

    def test_single_swap_of_three(self):
        assert kendall_tau([1, 2, 3], [2, 1, 3]) == pytest.approx(1.0 / 3.0)

    def test_matches_pair_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            n = int(rng.integers(2, 30))
            truth = rng.permutation(n).tolist()
            pred = rng.permutation(n).tolist()
            assert kendall_tau(pred, truth) == pytest.approx(
                kendall_oracle(pred, truth), abs=1e-12
            )

    def test_item_set_mismatch_rejected(self):
        with pytest.raises(DataError):
            kendall_tau([1, 2], [1, 3])
        with pytest.raises(DataError):
            kendall_tau([1, 1], [1, 1])
        with pytest.raises(DataError):
            kendall_tau([1, 2, 3], [1, 2])

    def test_single_item_rejected(self):
        with pytest.raises(UndefinedMetricError):
            kendall_tau([1], [1])


class TestWeightedKendallTau:
    def test_agreement_and_reversal(self):
        assert weighted_kendall_tau([5, 6, 7], [5, 6, 7]) == 1.0
        assert weighted_kendall_tau([7, 6, 5], [5, 6, 7]) == -1.0

    def test_all_permutations_of_four(self):
        truth = [0, 1, 2, 3]
        for pred in itertools.permutations(truth):
            assert weighted_kendall_tau(list(pred), truth) == pytest.approx(
                wkendall_oracle(list(pred), truth), abs=1e-12
            )

    def test_top_rank_errors_cost_more(self):
        truth = [0, 1, 2, 3, 4]
        swap_top = [1, 0, 2, 3, 4]
        swap_bottom = [0, 1, 2, 4, 3]
        assert weighted_kendall_tau(swap_top, truth) < weighted_kendall_tau(
            swap_bottom, truth
        )

    def test_matches_pair_oracle(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            n = int(rng.integers(2, 40))
            truth = rng.permutation(n).tolist()
            pred = rng.permutation(n).tolist()
            assert weighted_kendall_tau(pred, truth) == pytest.approx(
                wkendall_oracle(pred, truth), abs=1e-12
            )


class TestSpearman:
    def test_agreement_and_reversal(self):
        assert spearman([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
        assert spearman([3, 2, 1], [1, 2, 3]) == pytest.approx(-1.0)

    def test_matches_correlation_of_positions(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            n = int(rng.integers(2, 25))
            truth = rng.permutation(n).tolist()
            pred = rng.permutation(n).tolist()
            seq = positions(pred, truth)
            expect = np.corrcoef(np.arange(n), np.asarray(seq, float))[0, 1]
            assert spearman(pred, truth) == pytest.approx(expect, abs=1e-12)

    def test_single_item_rejected(self):
        with pytest.raises(UndefinedMetricError):
            spearman([4], [4])


class TestAveragePrecision:
    def test_perfect_prediction_scores_one_at_every_k(self):
        pred = truth = [4, 2, 7, 1]
        for k in range(1, 5):
            assert avg_precision_at_k(pred, truth, k) == 1.0
        assert position_weighted_ap(pred, truth) == 1.0

    def test_top_one_miss(self):
        assert avg_precision_at_k([20, 10, 30], [10, 20, 30], 1) == 0.0

    def test_hand_fixture(self):
        pred, truth = [10, 20, 30], [20, 30, 10]
        # relevance [0, 1, 1], precisions [0, 1/2, 2/3]
        assert avg_precision_at_k(pred, truth, 1) == 0.0
        assert avg_precision_at_k(pred, truth, 2) == pytest.approx(0.25)
        assert avg_precision_at_k(pred, truth, 3) == pytest.approx(7.0 / 18.0)
        assert position_weighted_ap(pred, truth) == pytest.approx(7.0 / 12.0)

    def test_k_outside_range_rejected(self):
        with pytest.raises(DataError):
            avg_precision_at_k([1, 2], [1, 2], 0)
        with pytest.raises(DataError):
            avg_precision_at_k([1, 2], [1, 2], 3)

    def test_mean_average_precision(self):
        day1 = position_weighted_ap([10, 20, 30], [20, 30, 10])
        day2 = position_weighted_ap([10, 20, 30], [10, 20, 30])
        assert mean_average_precision([day1, day2]) == pytest.approx(
            (7.0 / 12.0 + 1.0) / 2.0
        )

    def test_empty_mean_rejected(self):
        with pytest.raises(EmptyInputError):
            mean_average_precision([])
