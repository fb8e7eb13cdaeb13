"""Masked PSNR, mask statistics, risk curves and CSV output."""

import csv
import math

import numpy as np
import pytest

from confmask.calibrate import CalibrationPair, empirical_risk
from confmask.fidelity import d_pointwise, fidelity_error
from confmask.metrics import (
    EVAL_CSV_COLUMNS,
    evaluate_prediction,
    format_psnr,
    mask_stats,
    masked_psnr,
    risk_curve,
    write_eval_csv,
)

# 10 log10(1 / (0.1**2 / 3)), evaluated with mpmath
PSNR_ONE_PIXEL = 24.771212547196624


def test_psnr_examples():
    y = np.random.default_rng(0).uniform(size=(4, 4, 3))
    assert masked_psnr(y, y, np.ones((4, 4), bool)) == math.inf
    assert masked_psnr(y, y * 0.5, np.zeros((4, 4), bool)) is None

    y1 = np.ones((2, 2, 3))
    yh = y1.copy()
    yh[0, 0, 0] = 0.9
    mask = np.zeros((2, 2), bool)
    mask[0, 0] = True
    assert masked_psnr(yh, y1, mask) == pytest.approx(PSNR_ONE_PIXEL, rel=1e-12)


def test_psnr_dimension_mismatch():
    with pytest.raises(ValueError):
        masked_psnr(np.zeros((3, 3, 3)), np.zeros((3, 3, 3)), np.ones((3, 4), bool))


def test_psnr_per_instance_bound():
    g = np.random.default_rng(1)
    for _ in range(200):
        y = g.uniform(size=(6, 6, 3))
        yh = np.clip(y + g.normal(scale=0.05, size=y.shape), 0, 1)
        mask = g.uniform(size=(6, 6)) < 0.5
        if not mask.any():
            continue
        fe = fidelity_error(d_pointwise(y, yh), mask)
        s = y[mask].max()
        assert masked_psnr(yh, y, mask) >= 20 * math.log10(s) - 20 * math.log10(fe) - 1e-9


def test_psnr_shrinking_mask_drops_worst_pixel():
    y = np.full((1, 3, 3), 0.8)
    yh = y.copy()
    yh[0, 2] -= 0.3  # worst pixel, not the signal max
    yh[0, 1] -= 0.05
    full = np.ones((1, 3), bool)
    smaller = np.array([[True, True, False]])
    assert masked_psnr(yh, y, smaller) > masked_psnr(yh, y, full)


def test_mask_stats():
    assert mask_stats(np.ones((4, 4), bool)) == (1.0, 0.0)
    assert mask_stats(np.zeros((4, 4), bool)) == (0.0, 1.0)
    half = np.zeros((4, 4), bool)
    half[:2] = True
    assert mask_stats(half) == (0.5, 0.5)


def test_risk_curve():
    pairs = [CalibrationPair(np.array([[float(i)]]), np.array([[0.1 * i]])) for i in range(1, 6)]
    assert risk_curve(pairs, [-math.inf]) == [(-math.inf, 0.5)]
    assert risk_curve(pairs, [math.inf]) == [(math.inf, empirical_risk(pairs, math.inf))]
    curve = risk_curve(pairs, [0, 1, 2, 3, 4, 5])
    expected = [(3 + sum(0.1 * j for j in range(1, i + 1))) / 6 for i in range(6)]
    np.testing.assert_allclose([r for _, r in curve], expected, rtol=1e-15)
    assert all(a[1] <= b[1] for a, b in zip(curve, curve[1:]))
    with pytest.raises(ValueError):
        risk_curve(pairs, [])


def test_eval_report_and_csv(tmp_path):
    g = np.random.default_rng(2)
    y = g.uniform(size=(4, 4, 3))
    rep = evaluate_prediction(y, y, d_pointwise(y, y), np.ones((4, 4), bool))
    assert rep.fidelity_error == 0.0 and rep.masked_psnr == math.inf
    assert rep.trusted_fraction + rep.mistrust_fraction == 1.0
    empty = evaluate_prediction(y, y * 0.9, d_pointwise(y, y * 0.9), np.zeros((4, 4), bool))
    assert empty.masked_psnr is None and empty.fidelity_error == 0.0 and empty.n_trusted_pixels == 0

    rows = []
    for name, r in (("a", rep), ("b", empty)):
        rows.append({"image_id": name, "alpha": 0.1, "mode": "conservative", "fidelity_error": r.fidelity_error,
                     "masked_psnr": r.masked_psnr, "trusted_fraction": r.trusted_fraction,
                     "mistrust_fraction": r.mistrust_fraction})
    write_eval_csv(tmp_path / "e.csv", rows)
    with open(tmp_path / "e.csv", newline="") as fh:
        got = list(csv.DictReader(fh))
    assert tuple(got[0]) == EVAL_CSV_COLUMNS
    assert [r["masked_psnr"] for r in got] == ["inf", "NA"]


def test_format_psnr():
    assert format_psnr(None) == "NA"
    assert format_psnr(math.inf) == "inf"
    assert float(format_psnr(21.5)) == 21.5
