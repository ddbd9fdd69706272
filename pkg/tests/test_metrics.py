"""Tests for RMSE / PCC / CCC and report aggregation.

The reference implementations below are deliberately naive two-pass
plain-Python loops, kept independent from the vectorized module under test.
"""

import math

import numpy as np
import pytest

from weakagg.errors import NumericError, ShapeError, UndefinedMetricError
from weakagg.metrics import (MetricsReport, TargetMetrics, aggregate_reports, ccc, paired, pcc,
                             report, rmse, score_target)


def ref_rmse(truth, pred):
    total = 0.0
    for y, p in zip(truth, pred):
        total += (y - p) ** 2
    return math.sqrt(total / len(truth))


def _ref_moments(xs):
    mean = sum(xs) / len(xs)
    var = sum((x - mean) ** 2 for x in xs) / len(xs)
    return mean, var


def ref_pcc(truth, pred):
    my, vy = _ref_moments(truth)
    mp, vp = _ref_moments(pred)
    cov = sum((y - my) * (p - mp) for y, p in zip(truth, pred)) / len(truth)
    return cov / math.sqrt(vy * vp)


def ref_ccc(truth, pred):
    my, vy = _ref_moments(truth)
    mp, vp = _ref_moments(pred)
    r = ref_pcc(truth, pred)
    return 2.0 * math.sqrt(vy) * math.sqrt(vp) * r / (vy + vp + (my - mp) ** 2)


# --- hand-derived fixtures --------------------------------------------------

def test_rmse_identical_series():
    assert rmse([0.2, 0.4, 0.9], [0.2, 0.4, 0.9]) == 0.0


def test_rmse_unit_offset():
    assert rmse([0.0, 0.0], [1.0, 1.0]) == 1.0


def test_rmse_crossed_pair():
    assert abs(rmse([0.0, 1.0], [1.0, 0.0]) - 1.0) < 1e-12


def test_pcc_perfect():
    assert abs(pcc([0.1, 0.5, 0.7], [0.1, 0.5, 0.7]) - 1.0) < 1e-12


def test_pcc_anticorrelated():
    assert abs(pcc([0.0, 1.0], [1.0, 0.0]) - (-1.0)) < 1e-12


def test_pcc_shifted_line():
    assert abs(pcc([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]) - 1.0) < 1e-12


def test_ccc_perfect():
    assert abs(ccc([0.1, 0.5, 0.7], [0.1, 0.5, 0.7]) - 1.0) < 1e-12


def test_ccc_shifted_line_is_four_sevenths():
    # variances 2/3 each, pcc 1, squared bias 1 -> (4/3) / (7/3)
    assert abs(ccc([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]) - 4.0 / 7.0) < 1e-12


def test_ccc_anticorrelated():
    assert abs(ccc([0.0, 1.0], [1.0, 0.0]) - (-1.0)) < 1e-12


# --- error handling ---------------------------------------------------------

def test_length_mismatch_rejected():
    with pytest.raises(ShapeError):
        rmse([0.0, 1.0], [0.5])


def test_short_series_rejected_for_correlations():
    with pytest.raises(UndefinedMetricError):
        pcc([1.0], [2.0])


def test_constant_truth_undefined():
    with pytest.raises(UndefinedMetricError):
        pcc([0.5, 0.5, 0.5], [0.1, 0.2, 0.3])
    with pytest.raises(UndefinedMetricError):
        ccc([0.5, 0.5, 0.5], [0.1, 0.2, 0.3])


def test_constant_prediction_undefined_but_rmse_fine():
    scored = score_target([0.1, 0.6, 0.9], [0.4, 0.4, 0.4])
    assert scored.ccc is None and scored.pcc is None
    assert scored.rmse is not None and scored.rmse > 0.0


def test_non_finite_rejected():
    with pytest.raises(NumericError):
        paired([0.0, float("nan")], [0.1, 0.2])


# --- randomized oracle ------------------------------------------------------

def test_metrics_match_two_pass_reference(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        truth = rng.uniform(-2.0, 2.0, size=n).tolist()
        pred = (np.asarray(truth) * rng.uniform(-1.5, 1.5)
                + rng.standard_normal(n)).tolist()
        try:
            got_p, got_c = pcc(truth, pred), ccc(truth, pred)
        except UndefinedMetricError:
            continue
        assert abs(rmse(truth, pred) - ref_rmse(truth, pred)) < 1e-12
        assert abs(got_p - ref_pcc(truth, pred)) < 1e-12
        assert abs(got_c - ref_ccc(truth, pred)) < 1e-12
        # the bias term in the CCC denominator can only shrink magnitude
        assert abs(got_c) <= abs(got_p) + 1e-12


def test_ccc_equals_pcc_when_moments_match(rng):
    truth = rng.uniform(0.0, 1.0, size=25)
    pred = np.flip(truth)  # same mean and variance, different pairing
    assert abs(ccc(truth, pred) - pcc(truth, pred)) < 1e-12


def test_symmetry_under_swap(rng):
    truth = rng.uniform(0.0, 1.0, size=30)
    pred = rng.uniform(0.0, 1.0, size=30)
    assert rmse(truth, pred) == rmse(pred, truth)
    assert abs(pcc(truth, pred) - pcc(pred, truth)) < 1e-15
    assert abs(ccc(truth, pred) - ccc(pred, truth)) < 1e-15


# --- reports ----------------------------------------------------------------

def test_report_perfect_predictions():
    series = ([0.1, 0.4, 0.8], [0.1, 0.4, 0.8])
    rep = report(valence=series, arousal=series)
    for target in (rep.valence, rep.arousal):
        assert target.ccc == pytest.approx(1.0, abs=1e-12)
        assert target.pcc == pytest.approx(1.0, abs=1e-12)
        assert target.rmse == 0.0


def test_aggregate_identical_reports_has_zero_std():
    rep = report(valence=([0.1, 0.4, 0.8], [0.2, 0.3, 0.9]),
                 arousal=([0.5, 0.6, 0.7], [0.5, 0.65, 0.72]))
    mean_row, std_row = aggregate_reports([rep, rep])
    assert std_row.valence.ccc == 0.0
    assert std_row.arousal.rmse == 0.0
    assert mean_row.valence.ccc == rep.valence.ccc


def test_aggregate_mean_matches_independent_summation(rng):
    reports = []
    for _ in range(8):
        truth = rng.uniform(0.0, 1.0, size=12)
        pred = np.clip(truth + rng.standard_normal(12) * 0.1, 0.0, 1.0)
        truth2 = rng.uniform(0.0, 1.0, size=12)
        pred2 = np.clip(truth2 + rng.standard_normal(12) * 0.1, 0.0, 1.0)
        reports.append(report(valence=(truth, pred), arousal=(truth2, pred2)))
    mean_row, std_row = aggregate_reports(reports)
    cells = [r.valence.ccc for r in reports]
    assert mean_row.valence.ccc == pytest.approx(sum(cells) / len(cells), abs=1e-12)
    # std rows use the sample (n-1) convention
    expected_std = math.sqrt(sum((c - sum(cells) / len(cells)) ** 2 for c in cells)
                             / (len(cells) - 1))
    assert std_row.valence.ccc == pytest.approx(expected_std, abs=1e-12)


def test_aggregate_skips_undefined_cells():
    defined = report(valence=([0.1, 0.4, 0.8], [0.2, 0.3, 0.9]),
                     arousal=([0.5, 0.6, 0.7], [0.5, 0.65, 0.72]))
    partial = MetricsReport(valence=TargetMetrics(ccc=None, pcc=None, rmse=0.25),
                            arousal=defined.arousal)
    mean_row, _ = aggregate_reports([defined, partial])
    assert mean_row.valence.ccc == defined.valence.ccc  # only one defined cell
    assert mean_row.valence.rmse == pytest.approx((defined.valence.rmse + 0.25) / 2)
