"""Monte Carlo harnesses for the fidelity, PSNR and leakage guarantees.

Each trial draws ``n + 1`` fresh pairs from the synthetic world, calibrates
on the first ``n`` and evaluates the mask on the last one. Pair ``j`` of
trial ``t`` always comes from the same keyed stream, so any harness re-run
with the same world seed reproduces every number, and a leakage run with
no leaked pairs is the plain guarantee run.

Verdicts compare a trial mean against its bound with a 3 standard-error
allowance (``mean <= bound + 3 SE`` for upper bounds). ``inconclusive`` is
reported when there is nothing to average.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .calibrate import CalibrationMode, CalibrationPair, calibrate_dp, empirical_risk, make_mask
from .fidelity import FidelityMetricSpec, compute_fidelity, fidelity_error
from .imagecore import srgb_to_lab_normalized
from .metrics import format_psnr, mask_stats, masked_psnr
from .scoremap import ScoreConfig, score_from_draws
from .synthmodel import WorldConfig, gen_pair, stream

__all__ = [
    "DegenerateWorldError",
    "TrialResult",
    "AggregateResult",
    "PairData",
    "simulate_pair",
    "collect_trials",
    "summarize_guarantee",
    "summarize_psnr",
    "run_guarantee",
    "run_psnr_bound",
    "run_leakage",
    "run_alpha_sweep",
    "run_prior_counterexample",
    "run_conformal_scalar",
    "prior_mask",
    "prior_risk",
    "prior_lambda",
    "prior_calibrate",
    "counterexample_alpha_ceiling",
    "leakage_bound",
    "psnr_bound",
    "write_trials_csv",
    "write_summary",
    "exit_code",
]

_TRIAL_STRIDE = 1 << 20
_LEAK_OFFSET = 1 << 19


class DegenerateWorldError(RuntimeError):
    """Every calibration score is zero while the fidelity maps are not."""


@dataclass(frozen=True)
class TrialResult:
    trial: int
    alpha: float
    threshold: float
    fidelity_error: float
    masked_psnr: float | None
    trusted_fraction: float
    calibration_risk: float


@dataclass
class AggregateResult:
    name: str
    trials: int
    mean: float
    se: float
    bound: float
    verdict: str
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PairData:
    score: np.ndarray
    fidelity: np.ndarray
    y_lab: np.ndarray
    yhat_lab: np.ndarray


def simulate_pair(
    world: WorldConfig,
    index: int,
    score_config: ScoreConfig,
    metric: FidelityMetricSpec,
    *,
    leaked: bool = False,
) -> PairData:
    """Generate pair ``index``, run the mock model and compute its score and D maps.

    Draw 0 is the prediction; draws ``1..M`` feed the score. Leaked pairs
    keep their honest score but get ``D == 0``, a perfectly memorized sample.
    """
    x, y = gen_pair(world, index)
    model = world.model()
    draws = model.draws(x, range(score_config.num_draws + 1))
    labs = [srgb_to_lab_normalized(d) for d in draws]
    score = score_from_draws(labs[1:], score_config)
    y_lab = srgb_to_lab_normalized(y)
    if leaked:
        fid = np.zeros(score.shape)
    else:
        fid = compute_fidelity(metric, y_lab, labs[0])
    return PairData(score, fid, y_lab, labs[0])


def _trial(args) -> list[TrialResult]:
    world, trial, n, n_leaked, alphas, mode, score_config, metric = args
    base = trial * _TRIAL_STRIDE
    honest = [simulate_pair(world, base + j, score_config, metric) for j in range(n + 1)]
    leaked = [
        simulate_pair(world, base + _LEAK_OFFSET + j, score_config, metric, leaked=True)
        for j in range(n_leaked)
    ]
    cal = [CalibrationPair(p.score, p.fidelity) for p in honest[:n] + leaked]
    test = honest[n]

    if all(not p.score.any() for p in cal) and any(p.fidelity.any() for p in cal):
        raise DegenerateWorldError(
            f"trial {trial}: every calibration score is zero but fidelity maps are not; "
            "the score carries no information in this world configuration"
        )

    out = []
    for alpha in alphas:
        t = calibrate_dp(cal, alpha, mode)
        mask = make_mask(test.score, t)
        out.append(
            TrialResult(
                trial=trial,
                alpha=alpha,
                threshold=t,
                fidelity_error=fidelity_error(test.fidelity, mask),
                masked_psnr=masked_psnr(test.yhat_lab, test.y_lab, mask),
                trusted_fraction=mask_stats(mask)[0],
                calibration_risk=empirical_risk(cal, t),
            )
        )
    return out


def collect_trials(
    world: WorldConfig,
    n: int,
    alphas: Sequence[float],
    trials: int,
    *,
    n_leaked: int = 0,
    mode=CalibrationMode.CONSERVATIVE,
    score_config: ScoreConfig | None = None,
    metric: FidelityMetricSpec | None = None,
    workers: int = 1,
) -> dict[float, list[TrialResult]]:
    """Run ``trials`` trials once and evaluate every alpha on the same data.

    Returns ``{alpha: [TrialResult, ...]}`` ordered by trial index. With
    ``workers > 1`` trials run in a process pool; results are identical.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1; got {n}")
    if n_leaked < 0:
        raise ValueError(f"n_leaked must be >= 0; got {n_leaked}")
    if trials < 1:
        raise ValueError(f"trials must be >= 1; got {trials}")
    score_config = score_config or ScoreConfig()
    metric = metric or FidelityMetricSpec("pointwise")
    alphas = [float(a) for a in alphas]
    mode = CalibrationMode(mode)
    jobs = [(world, t, n, n_leaked, alphas, mode, score_config, metric) for t in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            per_trial = list(pool.map(_trial, jobs, chunksize=8))
    else:
        per_trial = [_trial(job) for job in jobs]
    return {a: [rows[i] for rows in per_trial] for i, a in enumerate(alphas)}


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean())
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return mean, se


def _check_trials(trials: int) -> None:
    if trials < 100:
        raise ValueError(f"Monte Carlo harnesses need at least 100 trials; got {trials}")


def summarize_guarantee(
    rows: Sequence[TrialResult],
    bound: float,
    name: str = "guarantee",
    params: dict | None = None,
    check_soundness: bool = True,
) -> AggregateResult:
    """Mean held-out fidelity error against ``bound``.

    With ``check_soundness`` it also fails if any trial whose threshold is
    above ``-inf`` has a calibration risk above its alpha, which the
    conservative rule forbids.
    """
    mean, se = _mean_se([r.fidelity_error for r in rows])
    mistrust = [1.0 - r.trusted_fraction for r in rows]
    m_mean, m_se = _mean_se(mistrust)
    unsound = [
        r.trial for r in rows
        if check_soundness and r.threshold > -math.inf and r.calibration_risk > r.alpha
    ]
    verdict = "pass" if mean <= bound + 3.0 * se and not unsound else "fail"
    return AggregateResult(
        name=name,
        trials=len(rows),
        mean=mean,
        se=se,
        bound=bound,
        verdict=verdict,
        params=dict(params or {}),
        details={
            "mean_mistrust_fraction": m_mean,
            "mistrust_fraction_se": m_se,
            "max_fidelity_error": max(r.fidelity_error for r in rows),
            "trials_trust_nothing": sum(r.threshold == -math.inf for r in rows),
            "trials_trust_everything": sum(r.threshold == math.inf for r in rows),
            "max_calibration_risk_finite_threshold": max(
                (r.calibration_risk for r in rows if r.threshold > -math.inf), default=None
            ),
            "unsound_trials": unsound,
        },
    )


def psnr_bound(alpha: float) -> float:
    return -20.0 * math.log10(alpha)


def summarize_psnr(rows: Sequence[TrialResult], alpha: float, params: dict | None = None) -> AggregateResult:
    """Mean masked PSNR over trials with a nonempty mask against ``-20 log10 alpha``."""
    bound = psnr_bound(alpha)
    values = [r.masked_psnr for r in rows if r.masked_psnr is not None]
    skipped = len(rows) - len(values)
    details = {"skipped_empty_masks": skipped, "used_trials": len(values)}
    if not values:
        return AggregateResult("psnr-bound", len(rows), math.nan, math.nan, bound, "inconclusive",
                               dict(params or {}), details)
    if any(v == math.inf for v in values):
        details["exact_trials"] = sum(v == math.inf for v in values)
        return AggregateResult("psnr-bound", len(rows), math.inf, 0.0, bound, "pass",
                               dict(params or {}), details)
    mean, se = _mean_se(values)
    verdict = "pass" if mean >= bound - 3.0 * se else "fail"
    return AggregateResult("psnr-bound", len(rows), mean, se, bound, verdict, dict(params or {}), details)


def _params(world: WorldConfig, **kw) -> dict:
    out = {"world": world.to_dict()}
    for k, v in kw.items():
        if isinstance(v, (ScoreConfig, FidelityMetricSpec)):
            v = v.to_dict()
        elif isinstance(v, CalibrationMode):
            v = v.value
        out[k] = v
    return out


def run_guarantee(
    world: WorldConfig,
    n: int,
    alpha: float,
    trials: int,
    *,
    mode=CalibrationMode.CONSERVATIVE,
    score_config: ScoreConfig | None = None,
    metric: FidelityMetricSpec | None = None,
    workers: int = 1,
) -> tuple[AggregateResult, list[TrialResult]]:
    """Held-out fidelity error against alpha."""
    _check_trials(trials)
    score_config = score_config or ScoreConfig()
    metric = metric or FidelityMetricSpec("pointwise")
    rows = collect_trials(world, n, [alpha], trials, mode=mode, score_config=score_config,
                          metric=metric, workers=workers)[float(alpha)]
    params = _params(world, n=n, alpha=alpha, trials=trials, mode=CalibrationMode(mode),
                     score_config=score_config, metric=metric)
    conservative = CalibrationMode(mode) is CalibrationMode.CONSERVATIVE
    return summarize_guarantee(rows, float(alpha), "guarantee", params, conservative), rows


def run_psnr_bound(
    world: WorldConfig,
    n: int,
    alpha: float,
    trials: int,
    *,
    mode=CalibrationMode.CONSERVATIVE,
    score_config: ScoreConfig | None = None,
    metric: FidelityMetricSpec | None = None,
    workers: int = 1,
) -> tuple[AggregateResult, list[TrialResult]]:
    """Masked PSNR against ``-20 log10 alpha``; requires the pointwise metric."""
    _check_trials(trials)
    metric = metric or FidelityMetricSpec("pointwise")
    if metric.kind != "pointwise":
        raise ValueError("the PSNR bound check requires the pointwise metric")
    score_config = score_config or ScoreConfig()
    rows = collect_trials(world, n, [alpha], trials, mode=mode, score_config=score_config,
                          metric=metric, workers=workers)[float(alpha)]
    params = _params(world, n=n, alpha=alpha, trials=trials, mode=CalibrationMode(mode),
                     score_config=score_config, metric=metric)
    return summarize_psnr(rows, float(alpha), params), rows


def leakage_bound(alpha: float, n_new: int, n_leaked: int) -> float:
    return alpha * (n_new + n_leaked + 1) / (n_new + 1)


def run_leakage(
    world: WorldConfig,
    n_new: int,
    n_leaked: int,
    alpha: float,
    trials: int,
    *,
    mode=CalibrationMode.CONSERVATIVE,
    score_config: ScoreConfig | None = None,
    metric: FidelityMetricSpec | None = None,
    workers: int = 1,
) -> tuple[AggregateResult, list[TrialResult]]:
    """Calibrate on ``n_new`` honest plus ``n_leaked`` perfectly-fit pairs."""
    _check_trials(trials)
    score_config = score_config or ScoreConfig()
    metric = metric or FidelityMetricSpec("pointwise")
    rows = collect_trials(world, n_new, [alpha], trials, n_leaked=n_leaked, mode=mode,
                          score_config=score_config, metric=metric, workers=workers)[float(alpha)]
    bound = leakage_bound(float(alpha), n_new, n_leaked)
    params = _params(world, n_new=n_new, n_leaked=n_leaked, alpha=alpha, trials=trials,
                     mode=CalibrationMode(mode), score_config=score_config, metric=metric)
    conservative = CalibrationMode(mode) is CalibrationMode.CONSERVATIVE
    return summarize_guarantee(rows, bound, "leakage", params, conservative), rows


def run_alpha_sweep(
    world: WorldConfig,
    n: int,
    alphas: Sequence[float],
    trials: int,
    *,
    mode=CalibrationMode.CONSERVATIVE,
    score_config: ScoreConfig | None = None,
    metric: FidelityMetricSpec | None = None,
    workers: int = 1,
    collected: dict[float, list[TrialResult]] | None = None,
) -> tuple[list[AggregateResult], dict[float, list[TrialResult]]]:
    """Fidelity error and mask size across ascending alphas on shared trials.

    An alpha whose mean mistrust fraction rises above the previous alpha's by
    more than ``2 * max(SE)`` is marked failed.
    """
    _check_trials(trials)
    alphas = [float(a) for a in alphas]
    if alphas != sorted(alphas):
        raise ValueError("alphas must be sorted ascending")
    score_config = score_config or ScoreConfig()
    metric = metric or FidelityMetricSpec("pointwise")
    if collected is None:
        collected = collect_trials(world, n, alphas, trials, mode=mode, score_config=score_config,
                                   metric=metric, workers=workers)
    results = []
    for a in alphas:
        params = _params(world, n=n, alpha=a, trials=trials, mode=CalibrationMode(mode),
                         score_config=score_config, metric=metric)
        conservative = CalibrationMode(mode) is CalibrationMode.CONSERVATIVE
        results.append(summarize_guarantee(collected[a], a, "alpha-sweep", params, conservative))
    for prev, cur in zip(results, results[1:]):
        slack = 2.0 * max(prev.details["mistrust_fraction_se"], cur.details["mistrust_fraction_se"])
        rise = cur.details["mean_mistrust_fraction"] - prev.details["mean_mistrust_fraction"]
        cur.details["mistrust_monotone"] = rise <= slack
        if rise > slack:
            cur.verdict = "fail"
    return results, collected


# -- prior continuous-mask method on a scalar world ---------------------------


def prior_mask(sigma, lam: float, eps: float) -> np.ndarray:
    """Continuous mask ``min(lam / (1 - sigma + eps), 1)``."""
    return np.minimum(lam / (1.0 - np.asarray(sigma, dtype=np.float64) + eps), 1.0)


def prior_risk(sigma, abs_err, lam: float, eps: float) -> float:
    """Pixel-averaged mask-weighted absolute error."""
    return float(np.mean(prior_mask(sigma, lam, eps) * np.asarray(abs_err, dtype=np.float64)))


def prior_lambda(sigma, abs_err, alpha: float, eps: float, lam_max: float = 1.0) -> float:
    """Largest ``lam`` in ``[0, lam_max]`` with ``prior_risk <= alpha`` (exact).

    The risk is piecewise linear in ``lam`` with kinks where a pixel's mask
    saturates at 1, so the crossing is solved segment by segment.
    """
    sigma = np.asarray(sigma, dtype=np.float64).ravel()
    err = np.asarray(abs_err, dtype=np.float64).ravel()
    if np.any(1.0 - sigma + eps <= 0):
        raise ValueError("prior mask needs sigma < 1 + eps")
    if prior_risk(sigma, err, lam_max, eps) <= alpha:
        return lam_max
    size = err.size
    kink = 1.0 - sigma + eps
    weight = err / kink
    stops = np.unique(np.append(kink[kink < lam_max], lam_max))
    lo = 0.0
    for hi in stops:
        if prior_risk(sigma, err, hi, eps) > alpha:
            saturated = err[kink <= lo].sum()
            slope = weight[kink > lo].sum()
            return float(min(max((alpha * size - saturated) / slope, lo), hi))
        lo = hi
    return lam_max


def prior_calibrate(sigmas, errors, alpha: float, delta: float, eps: float) -> float:
    """Per-sample maximal lambdas, then their empirical ``1 - delta`` quantile."""
    lams = [prior_lambda(s, e, alpha, eps) for s, e in zip(sigmas, errors)]
    return float(np.quantile(lams, 1.0 - delta, method="inverted_cdf"))


def counterexample_alpha_ceiling(tau: float, epsilon: float, error: float = 1.0) -> float:
    """Largest alpha for which the counterexample construction applies."""
    return (1.0 + epsilon) / 2.0 * (1.0 - tau) * error


def _scalar_errors(seed: int, purpose: str, trial: int, count: int, tau: float, error: float):
    rng = stream(seed, purpose, trial)
    return np.where(rng.random(count) < tau, 0.0, error)


def _check_counterexample(tau, epsilon, alpha, delta, error):
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1); got {tau}")
    if not math.isclose(delta, tau / 2.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"the construction needs delta = tau / 2 = {tau / 2}; got {delta}")
    if not 0.0 < error <= 3.0:
        raise ValueError(f"error must lie in (0, 3]; got {error}")
    ceiling = counterexample_alpha_ceiling(tau, epsilon, error)
    if not 0.0 < alpha <= ceiling:
        raise ValueError(
            f"alpha={alpha} is outside (0, {ceiling:.6g}]; above this ceiling the "
            "construction no longer forces a violation"
        )


def run_prior_counterexample(
    tau: float = 0.5,
    epsilon: float = 0.01,
    alpha: float = 0.1,
    delta: float | None = None,
    n: int = 20,
    trials: int = 2000,
    *,
    seed: int = 0,
    error: float = 1.0,
) -> tuple[AggregateResult, list[dict]]:
    """Estimate how often the prior method's calibrated mask breaks its own guarantee.

    Scalar world: zero score everywhere; each sample's error is 0 with
    probability ``tau`` and ``error`` otherwise. Each trial calibrates lambda
    on ``n`` samples and checks whether the exact expected weighted error
    ``min(lam / (1 + eps), 1) * (1 - tau) * error`` exceeds alpha. The claim is
    violated when that happens with frequency above ``delta``.
    """
    delta = tau / 2.0 if delta is None else delta
    _check_counterexample(tau, epsilon, alpha, delta, error)
    _check_trials(trials)
    expected_err = (1.0 - tau) * error
    sigma = np.zeros(1)
    rows = []
    for t in range(trials):
        errs = _scalar_errors(seed, "prior-cal", t, n, tau, error)
        lam = prior_calibrate([sigma] * n, [[e] for e in errs], alpha, delta, epsilon)
        risk = float(prior_mask(sigma, lam, epsilon)[0]) * expected_err
        rows.append({"trial": t, "lambda": lam, "expected_risk": risk, "violated": risk > alpha})
    mean, se = _mean_se([float(r["violated"]) for r in rows])
    verdict = "pass" if mean > delta and mean - delta >= 3.0 * se else "fail"
    params = {"tau": tau, "epsilon": epsilon, "alpha": alpha, "delta": delta, "n": n,
              "trials": trials, "seed": seed, "error": error}
    return AggregateResult("counterexample", trials, mean, se, delta, verdict, params,
                           {"alpha_ceiling": counterexample_alpha_ceiling(tau, epsilon, error)}), rows


def run_conformal_scalar(
    tau: float = 0.5,
    alpha: float = 0.1,
    n: int = 20,
    trials: int = 2000,
    *,
    seed: int = 0,
    error: float = 1.0,
    mode=CalibrationMode.CONSERVATIVE,
) -> tuple[AggregateResult, list[TrialResult]]:
    """Our calibration on the counterexample's scalar world (zero scores, 0/error D)."""
    _check_trials(trials)
    zero = np.zeros((1, 1))
    rows = []
    for t in range(trials):
        errs = _scalar_errors(seed, "prior-cal", t, n, tau, error)
        cal = [CalibrationPair(zero, np.full((1, 1), e)) for e in errs]
        test_err = _scalar_errors(seed, "prior-test", t, 1, tau, error)[0]
        thr = calibrate_dp(cal, alpha, mode)
        mask = make_mask(zero, thr)
        rows.append(TrialResult(t, alpha, thr, fidelity_error(np.full((1, 1), test_err), mask),
                                None, mask_stats(mask)[0], empirical_risk(cal, thr)))
    params = {"tau": tau, "alpha": alpha, "n": n, "trials": trials, "seed": seed, "error": error,
              "mode": CalibrationMode(mode).value}
    return summarize_guarantee(rows, alpha, "conformal-scalar", params), rows


# -- output -------------------------------------------------------------------

TRIAL_CSV_COLUMNS = ("trial", "alpha", "threshold", "fidelity_error", "masked_psnr",
                     "trusted_fraction", "calibration_risk")


def _fmt(v):
    if isinstance(v, float):
        if v == math.inf:
            return "inf"
        if v == -math.inf:
            return "-inf"
        return repr(v)
    return v


def write_trials_csv(path, rows: Iterable) -> None:
    """Write TrialResults (or plain dicts, e.g. counterexample rows) as CSV."""
    rows = list(rows)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if rows and isinstance(rows[0], dict):
            cols = list(rows[0])
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(cols)
            for r in rows:
                writer.writerow([_fmt(r[c]) for c in cols])
            return
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_CSV_COLUMNS)
        for r in rows:
            writer.writerow([
                r.trial, _fmt(r.alpha), _fmt(r.threshold), _fmt(r.fidelity_error),
                format_psnr(r.masked_psnr), _fmt(r.trusted_fraction), _fmt(r.calibration_risk),
            ])


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def write_summary(path, results: Sequence[AggregateResult], extra: dict | None = None) -> None:
    """Deterministic summary JSON (sorted keys, no timestamps)."""
    doc = {
        "results": [r.to_dict() for r in results],
        "verdict": _overall(results),
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _overall(results: Sequence[AggregateResult]) -> str:
    verdicts = {r.verdict for r in results}
    if "fail" in verdicts:
        return "fail"
    if "inconclusive" in verdicts:
        return "inconclusive"
    return "pass"


def exit_code(results: Sequence[AggregateResult]) -> int:
    """0 when every bound holds, 2 on a violation, 3 when inconclusive."""
    return {"pass": 0, "fail": 2, "inconclusive": 3}[_overall(results)]
