import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mpoxscreen.dataset import ClassLabel
from mpoxscreen.metrics import (
    ConfusionMatrix,
    EvaluationReport,
    MetricSet,
    NetworkResult,
    aggregate_folds,
    compute_metrics,
    compute_metrics_macro,
    confusion_matrix,
    majority_vote,
    majority_vote_batch,
    render_numeric,
    render_table,
)

MPX, OTH = ClassLabel.MONKEYPOX, ClassLabel.OTHERS


def test_worked_example_to_four_decimals():
    m = compute_metrics(ConfusionMatrix(tp=40, fp=5, fn=10, tn=45))
    assert round(m.accuracy, 4) == 0.85
    assert round(m.precision, 4) == 0.8889
    assert round(m.recall, 4) == 0.8
    assert round(m.f1, 4) == 0.8421


def test_perfect_classifier_scores_ones():
    m = compute_metrics(ConfusionMatrix(tp=10, fp=0, fn=0, tn=10))
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_degenerate_zero_over_zero_rule():
    with pytest.warns(UserWarning, match="precision is 0/0"):
        m = compute_metrics(ConfusionMatrix(tp=0, fp=0, fn=10, tn=90))
    assert (m.precision, m.recall, m.f1, m.accuracy) == (0.0, 0.0, 0.0, 0.9)


def test_empty_matrix_rejected():
    with pytest.raises(ValueError, match="empty"):
        compute_metrics(ConfusionMatrix(0, 0, 0, 0))


def test_negative_count_rejected():
    with pytest.raises(ValueError, match="non-negative"):
        ConfusionMatrix(tp=-1, fp=0, fn=0, tn=0)


def test_confusion_matrix_against_brute_force_recount():
    rng = random.Random(17)
    pairs = [(f"img{i}", rng.choice([MPX, OTH])) for i in range(50)]
    truth = {f"img{i}": rng.choice([MPX, OTH]) for i in range(50)}
    cm = confusion_matrix(pairs, truth)
    # independent recount
    tp = sum(1 for i, p in pairs if p == MPX and truth[i] == MPX)
    fp = sum(1 for i, p in pairs if p == MPX and truth[i] == OTH)
    fn = sum(1 for i, p in pairs if p == OTH and truth[i] == MPX)
    tn = sum(1 for i, p in pairs if p == OTH and truth[i] == OTH)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (tp, fp, fn, tn)
    assert cm.total == 50


def test_all_correct_and_all_inverted():
    truth = {f"m{i}": MPX for i in range(10)} | {f"o{i}": OTH for i in range(10)}
    correct = [(i, label) for i, label in truth.items()]
    cm = confusion_matrix(correct, truth)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (10, 10, 0, 0)
    inverted = [(i, OTH if label == MPX else MPX) for i, label in truth.items()]
    cm = confusion_matrix(inverted, truth)
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (0, 0, 10, 10)


def test_confusion_matrix_rejects_missing_truth_and_duplicates():
    with pytest.raises(ValueError, match="no truth label for image_id x"):
        confusion_matrix([("x", MPX)], {})
    with pytest.raises(ValueError, match="duplicate prediction for image_id x"):
        confusion_matrix([("x", MPX), ("x", OTH)], {"x": MPX})


def test_metrics_match_rational_arithmetic():
    rng = random.Random(5)
    for _ in range(200):
        tp, fp, fn, tn = (rng.randint(0, 200) for _ in range(4))
        if tp + fp + fn + tn == 0:
            continue
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            m = compute_metrics(ConfusionMatrix(tp, fp, fn, tn))
        assert m.accuracy == float(Fraction(tp + tn, tp + fp + fn + tn))
        if tp + fp:
            assert m.precision == float(Fraction(tp, tp + fp))
        if tp + fn:
            assert m.recall == float(Fraction(tp, tp + fn))
        if 2 * tp + fp + fn:
            assert m.f1 == float(Fraction(2 * tp, 2 * tp + fp + fn))


@given(
    tp=st.integers(min_value=1, max_value=500),
    fp=st.integers(min_value=0, max_value=500),
    fn=st.integers(min_value=0, max_value=500),
    tn=st.integers(min_value=0, max_value=500),
)
def test_f1_is_harmonic_mean_of_precision_and_recall(tp, fp, fn, tn):
    m = compute_metrics(ConfusionMatrix(tp, fp, fn, tn))
    direct = 2 * m.precision * m.recall / (m.precision + m.recall)
    assert abs(m.f1 - direct) < 1e-12
    assert 0.0 <= m.f1 <= 1.0


def test_majority_vote_matches_exhaustive_mode_enumeration():
    for votes in itertools.product([MPX, OTH], repeat=3):
        mode = max([MPX, OTH], key=lambda c: sum(1 for v in votes if v == c))
        assert majority_vote(list(votes)) == mode


def test_majority_vote_requires_exactly_three():
    with pytest.raises(ValueError, match="exactly 3 votes"):
        majority_vote([MPX, MPX])
    with pytest.raises(ValueError, match="exactly 3 votes"):
        majority_vote([MPX] * 4)


@given(x=st.sampled_from([MPX, OTH]), y=st.sampled_from([MPX, OTH]))
def test_two_agreeing_votes_always_win(x, y):
    assert majority_vote([x, x, y]) == x


def test_ensemble_of_identical_models_equals_single_model():
    single = {f"img{i}": (MPX if i % 2 else OTH) for i in range(8)}
    votes = {i: [label] * 3 for i, label in single.items()}
    assert majority_vote_batch(votes) == single


def _ms(acc):
    return MetricSet(accuracy=acc, precision=acc, recall=acc, f1=acc)


def test_aggregate_mean_and_sample_std():
    report = aggregate_folds({"resnet50": [_ms(0.80), _ms(0.85), _ms(0.90)]})
    result = report.networks["resnet50"]
    assert abs(result.mean.accuracy - 0.85) < 1e-12
    assert abs(result.std.accuracy - 0.05) < 1e-12
    row = render_table(report).splitlines()[2]
    assert "85.00 ± 5.00" in row


def test_aggregate_identical_folds_has_zero_std():
    report = aggregate_folds({"vgg16": [_ms(0.7)] * 3})
    assert report.networks["vgg16"].std.accuracy == 0.0


def test_aggregate_is_permutation_invariant():
    folds = [_ms(0.71), _ms(0.83), _ms(0.64)]
    a = aggregate_folds({"n": folds})
    b = aggregate_folds({"n": folds[::-1]})
    assert a.networks["n"].mean == b.networks["n"].mean
    assert a.networks["n"].std == b.networks["n"].std


def test_aggregate_mean_within_fold_range():
    folds = [_ms(0.6), _ms(0.9), _ms(0.75)]
    result = aggregate_folds({"n": folds}).networks["n"]
    values = [m.accuracy for m in folds]
    assert min(values) <= result.mean.accuracy <= max(values)


def test_aggregate_rejects_missing_fold():
    with pytest.raises(ValueError, match="expected 3 folds, got 2"):
        aggregate_folds({"n": [_ms(0.8), _ms(0.9)]})


def test_render_cell_shape_for_published_row():
    report = EvaluationReport(
        networks={
            "resnet50": NetworkResult(
                per_fold=[],
                mean=MetricSet(0.8296, 0.87, 0.83, 0.84),
                std=MetricSet(0.0457, 0.07, 0.02, 0.03),
            )
        }
    )
    table = render_table(report)
    assert "82.96 ± 4.57" in table
    assert "ResNet50" in table


def test_macro_metrics_average_both_orientations():
    cm = ConfusionMatrix(tp=40, fp=5, fn=10, tn=45)
    pos = compute_metrics(cm)
    neg = compute_metrics(cm.flipped())
    macro = compute_metrics_macro(cm)
    assert macro.precision == (pos.precision + neg.precision) / 2
    assert macro.accuracy == pos.accuracy


def test_render_numeric_has_one_line_per_metric():
    report = aggregate_folds({"n": [_ms(0.7), _ms(0.8), _ms(0.9)]})
    lines = render_numeric(report, scope="positive").strip().splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("positive\tn\taccuracy\t")
    assert len(lines[0].split("\t")) == 8
