"""Monte Carlo harnesses (small configurations; the full runs live in test_acceptance)."""

import json
import math

import numpy as np
import pytest

from confmask import experiments as exp
from confmask.fidelity import FidelityMetricSpec
from confmask.kernels import make_box
from confmask.scoremap import ScoreConfig
from confmask.synthmodel import WorldConfig

SMALL = WorldConfig(seed=3, lr_width=4, lr_height=4, factor=2)
CFG = ScoreConfig(num_draws=3, kernel=make_box(1), post_blur=None)


def test_bounds_from_formulas():
    assert exp.leakage_bound(0.1, 9, 10) == pytest.approx(0.2)
    assert exp.leakage_bound(0.1, 9, 0) == pytest.approx(0.1)
    assert exp.psnr_bound(0.1) == pytest.approx(20.0)
    assert exp.psnr_bound(0.05) == pytest.approx(26.020599913279624, rel=1e-14)
    assert exp.psnr_bound(1.0) == 0.0


def test_perfect_world_has_zero_error():
    gray = WorldConfig(seed=1, lr_width=4, lr_height=4, factor=2, bump_count=(0, 0),
                       texture_amplitude=0.0, noise_base=0.0, noise_coupling=0.0)
    agg, rows = exp.run_guarantee(gray, 5, 0.6, 100, score_config=CFG)
    assert all(r.fidelity_error == 0.0 for r in rows)
    assert all(r.threshold == math.inf for r in rows)
    assert agg.passed


def test_degenerate_world_is_reported():
    quiet = WorldConfig(seed=1, lr_width=4, lr_height=4, factor=2, noise_base=0.0, noise_coupling=0.0)
    # identical draws only give an all-zero score with the 1-box kernel; wider
    # kernels keep the local spatial variance of the prediction
    plain = ScoreConfig(num_draws=3, kernel=make_box(0), post_blur=None)
    with pytest.raises(exp.DegenerateWorldError):
        exp.run_guarantee(quiet, 3, 0.9, 100, score_config=plain)


def test_small_alpha_trusts_nothing():
    agg, rows = exp.run_guarantee(SMALL, 5, 0.4, 100, score_config=CFG)
    assert all(r.threshold == -math.inf and r.fidelity_error == 0.0 for r in rows)
    assert agg.details["trials_trust_nothing"] == 100
    psnr, _ = exp.run_psnr_bound(SMALL, 5, 0.4, 100, score_config=CFG)
    assert psnr.verdict == "inconclusive"
    assert exp.exit_code([psnr]) == 3


def test_guarantee_rows_are_consistent():
    agg, rows = exp.run_guarantee(SMALL, 9, 0.5, 100, score_config=CFG)
    assert [r.trial for r in rows] == list(range(100))
    for r in rows:
        assert 0.0 <= r.fidelity_error <= 3.0
        if r.threshold > -math.inf:
            assert r.calibration_risk <= 0.5
    assert agg.verdict == "pass" and not agg.details["unsound_trials"]


def test_leakage_without_leaks_equals_guarantee():
    g, g_rows = exp.run_guarantee(SMALL, 6, 0.5, 100, score_config=CFG)
    l, l_rows = exp.run_leakage(SMALL, 6, 0, 0.5, 100, score_config=CFG)
    assert g_rows == l_rows
    assert (g.mean, g.se, g.bound) == (l.mean, l.se, l.bound)


def test_leaked_pairs_raise_threshold():
    honest = exp.collect_trials(SMALL, 9, [0.3], 100, score_config=CFG)[0.3]
    leaky = exp.collect_trials(SMALL, 9, [0.3], 100, n_leaked=20, score_config=CFG)[0.3]
    assert sum(r.trusted_fraction for r in leaky) >= sum(r.trusted_fraction for r in honest)


def test_thresholds_monotone_within_trial_and_sweep():
    alphas = [0.3, 0.5, 0.8, 1.0]
    results, collected = exp.run_alpha_sweep(SMALL, 9, alphas, 100, score_config=CFG)
    for t in range(100):
        ts = [collected[a][t].threshold for a in alphas]
        assert ts == sorted(ts)
    mistrust = [r.details["mean_mistrust_fraction"] for r in results]
    assert mistrust[0] == 1.0  # 0.3 < 3/10
    assert all(b <= a for a, b in zip(mistrust, mistrust[1:]))
    with pytest.raises(ValueError):
        exp.run_alpha_sweep(SMALL, 9, [0.5, 0.3], 100, score_config=CFG)


def test_workers_do_not_change_results():
    a = exp.collect_trials(SMALL, 4, [0.9], 100, score_config=CFG)
    b = exp.collect_trials(SMALL, 4, [0.9], 100, score_config=CFG, workers=2)
    assert a == b


def test_trial_count_and_metric_checks():
    with pytest.raises(ValueError):
        exp.run_guarantee(SMALL, 5, 0.5, 99)
    with pytest.raises(ValueError):
        exp.run_psnr_bound(SMALL, 5, 0.5, 100, metric=FidelityMetricSpec("neighborhood", make_box(1)))


def test_summaries():
    rows = [exp.TrialResult(i, 0.1, 0.5, 0.05 * (i % 3), 30.0 + i % 2, 0.5, 0.09) for i in range(100)]
    agg = exp.summarize_guarantee(rows, 0.1)
    assert agg.mean == pytest.approx(np.mean([0.05 * (i % 3) for i in range(100)]))
    assert agg.passed
    bad = rows + [exp.TrialResult(100, 0.1, 0.5, 0.0, None, 0.5, 0.2)]
    assert exp.summarize_guarantee(bad, 0.1).verdict == "fail"
    assert exp.summarize_guarantee(bad, 0.1, check_soundness=False).passed
    psnr = exp.summarize_psnr(bad, 0.1)
    assert psnr.details["skipped_empty_masks"] == 1 and psnr.passed
    assert exp.exit_code([agg]) == 0 and exp.exit_code([agg, exp.summarize_guarantee(bad, 0.1)]) == 2


def test_prior_mask_and_lambda():
    np.testing.assert_allclose(exp.prior_mask(np.zeros(3), 0.5, 0.01), 0.5 / 1.01)
    assert exp.prior_mask(np.zeros(1), 2.0, 0.01)[0] == 1.0
    assert exp.prior_lambda(np.zeros(1), np.zeros(1), 0.1, 0.01) == 1.0
    assert exp.prior_lambda(np.zeros(1), np.ones(1), 0.1, 0.01) == pytest.approx(0.101)
    sigma = np.array([0.0, 0.5, 0.9])
    err = np.array([0.2, 1.0, 0.4])
    lam = exp.prior_lambda(sigma, err, 0.15, 0.01)
    assert exp.prior_risk(sigma, err, lam, 0.01) == pytest.approx(0.15, abs=1e-12)
    assert exp.prior_risk(sigma, err, lam + 1e-6, 0.01) > 0.15
    # all-zero calibration errors give lambda = 1 whatever delta is
    for delta in (0.05, 0.25, 0.45):
        assert exp.prior_calibrate([np.zeros(1)] * 8, [np.zeros(1)] * 8, 0.1, delta, 0.01) == 1.0


def test_counterexample_preconditions():
    assert exp.counterexample_alpha_ceiling(0.5, 0.01) == pytest.approx(0.2525)
    with pytest.raises(ValueError, match="ceiling"):
        exp.run_prior_counterexample(alpha=0.3)
    with pytest.raises(ValueError, match="delta"):
        exp.run_prior_counterexample(delta=0.1)
    with pytest.raises(ValueError):
        exp.run_prior_counterexample(tau=1.0, delta=0.5)


def test_counterexample_small_run():
    agg, rows = exp.run_prior_counterexample(trials=300, seed=4)
    assert agg.passed and agg.mean > 0.25
    ours, _ = exp.run_conformal_scalar(trials=300, seed=4)
    assert ours.passed


def test_summary_json_is_deterministic(tmp_path):
    rows = exp.run_guarantee(SMALL, 5, 0.6, 100, score_config=CFG)
    exp.write_summary(tmp_path / "a.json", [rows[0]])
    exp.write_summary(tmp_path / "b.json", [exp.run_guarantee(SMALL, 5, 0.6, 100, score_config=CFG)[0]])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    doc = json.loads((tmp_path / "a.json").read_text())
    assert doc["verdict"] == rows[0].verdict
    exp.write_trials_csv(tmp_path / "t.csv", rows[1])
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("trial,alpha,threshold") and len(lines) == 101
