from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from digishield.metrics import ScoredSet, auc, format_report, misclassification_report, plot_roc, roc_curve


def pairwise_auc(scores, labels):
    """O(n^2) oracle with exact rational arithmetic; ties count one half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = Fraction(0)
    for p in pos:
        for n in neg:
            wins += 1 if p > n else Fraction(1, 2) if p == n else 0
    return wins / (len(pos) * len(neg))


def _instance(rng):
    n = int(rng.integers(2, 51))
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    # coarse grid so ties are common
    scores = rng.integers(0, 8, n) / 7 if rng.random() < 0.5 else rng.random(n)
    return scores, labels


def test_examples():
    assert auc([1.0, 1.0, 0.0, 0.0], [1, 1, 0, 0]) == 1.0
    assert auc([0.3] * 6, [1, 0, 1, 0, 1, 0]) == 0.5
    assert auc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == 0.75
    assert pairwise_auc([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0]) == Fraction(3, 4)


def test_rank_auc_equals_pairwise_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        scores, labels = _instance(rng)
        assert auc(scores, labels) == float(pairwise_auc(list(scores), list(labels)))


def test_monotone_transform_invariance():
    rng = np.random.default_rng(7)
    transforms = [lambda s: s**3, lambda s: np.exp(5 * s), lambda s: 2 * s - 9, lambda s: np.arctan(10 * s)]
    for i in range(50):
        scores, labels = _instance(rng)
        f = transforms[i % len(transforms)]
        assert auc(f(scores), labels) == auc(scores, labels)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=2, max_size=40, unique_by=lambda x: x[0]))
def test_complement_symmetry(pairs):
    scores, labels = zip(*pairs)
    s = np.array(scores)
    # the property needs ties absent on both sides; 1 - s can merge distinct tiny floats
    if len(set(labels)) < 2 or len(np.unique(1 - s)) < len(s):
        return
    assert auc(1 - s, labels) == pytest.approx(1 - auc(s, labels), abs=1e-12)


def test_single_class_and_bad_input():
    with pytest.raises(ValueError, match="single-class"):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        ScoredSet([0.1, np.nan], [0, 1])
    with pytest.raises(ValueError):
        ScoredSet([0.1], [0, 1])


def test_roc_curve_endpoints_and_area():
    rng = np.random.default_rng(3)
    s, y = rng.random(30), rng.integers(0, 2, 30)
    y[:2] = [0, 1]
    fpr, tpr = roc_curve(s, y)
    assert (fpr[0], tpr[0]) == (0, 0) and (fpr[-1], tpr[-1]) == (1, 1)
    assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)
    # without ties the trapezoid area equals the rank statistic
    assert np.trapezoid(tpr, fpr) == pytest.approx(auc(s, y), abs=1e-12)


def test_report_all_correct_and_all_wrong():
    cats = ["RV_RA", "RV_RA", "FV_RA", "FV_FA"]
    good = misclassification_report(ScoredSet([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0], cats))
    bad = misclassification_report(ScoredSet([0.1, 0.2, 0.9, 0.8], [1, 1, 0, 0], cats))
    assert all(r["rate"] == 0 for r in good.values())
    assert all(r["rate"] == 1 for r in bad.values())
    assert set(good) == {"RV_RA", "FV_RA", "FV_FA", "overall"}


def test_report_mixed_counting_oracle():
    scores = [0.9, 0.4, 0.7, 0.5, 0.2, 0.6, 0.1, 0.55, 0.3, 0.8]
    labels = [1, 1, 1, 1, 0, 0, 0, 0, 0, 0]
    cats = ["RV_RA"] * 4 + ["FV_RA"] * 3 + ["FV_FA"] * 3
    rep = misclassification_report(ScoredSet(scores, labels, cats), 0.5)
    expected = {}
    for c in ("RV_RA", "FV_RA", "FV_FA"):
        idx = [i for i, k in enumerate(cats) if k == c]
        errs = sum((scores[i] >= 0.5) != (labels[i] == 1) for i in idx)
        expected[c] = errs / len(idx)
    assert {c: rep[c]["rate"] for c in expected} == expected
    assert expected == {"RV_RA": 0.25, "FV_RA": 1 / 3, "FV_FA": 2 / 3}
    assert rep["overall"]["errors"] == 4


def test_report_omits_empty_category():
    rep = misclassification_report(ScoredSet([0.9, 0.1], [1, 0], ["RV_RA", "FV_FA"]))
    assert "FV_RA" not in rep


def test_format_report_and_plot(tmp_path):
    scored = ScoredSet([0.9, 0.4, 0.6, 0.1], [1, 1, 0, 0], ["RV_RA", "RV_RA", "FV_RA", "FV_FA"])
    text = format_report(scored)
    assert "auc\t0.750000" in text and "error[overall]\t0.5000\t(2/4)" in text
    path = plot_roc(scored, tmp_path / "roc.png")
    assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
