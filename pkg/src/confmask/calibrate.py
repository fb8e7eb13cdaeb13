"""Conformal threshold calibration, mask construction and calibration records.

For calibration pairs ``(score_i, D_i)`` the empirical risk at threshold t is

    R(t) = (3 + sum_i max{D_i[p] : score_i[p] <= t}) / (n + 1)

with an empty max counting as 0. R is a nondecreasing, right-continuous step
function of t that only jumps at observed score values T_1 < ... < T_m.
Thresholds are floats with ``-inf`` meaning "trust nothing" and ``+inf``
meaning "trust everything".

Two selection rules are supported:

``conservative``
    the largest T_j with R(T_j) <= alpha, so the calibration risk at the
    returned threshold never exceeds alpha.
``sup_faithful``
    ``sup{t : R(t) <= alpha}``, the smallest T_j with R(T_j) > alpha.

Both return ``+inf`` when R(+inf) <= alpha and ``-inf`` when 3/(n+1) > alpha.
Risks are always summed with :func:`math.fsum`, so the sweep and the brute
force evaluate bit-identical values and agree exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .fidelity import FidelityMetricSpec, fidelity_error
from .imagecore import LAB_NORMALIZATION, as_map
from .scoremap import ScoreConfig

__all__ = [
    "CalibrationMode",
    "CalibrationPair",
    "CalibrationRecord",
    "RecordMismatchError",
    "empirical_risk",
    "calibrate_bruteforce",
    "calibrate_dp",
    "make_mask",
    "save_record",
    "load_record",
    "format_threshold",
    "parse_threshold",
]

RECORD_FORMAT_VERSION = 1
_BRUTE_BLOCK_ELEMENTS = 1 << 22


class CalibrationMode(str, Enum):
    CONSERVATIVE = "conservative"
    SUP_FAITHFUL = "sup_faithful"


class RecordMismatchError(ValueError):
    """A calibration record is being applied under different conventions."""


@dataclass(frozen=True)
class CalibrationPair:
    """Score map and fidelity map of one calibration image (same shape)."""

    score: np.ndarray
    fidelity: np.ndarray

    def __post_init__(self):
        score = as_map(self.score, name="score map")
        fid = as_map(self.fidelity, name="fidelity map")
        if score.shape != fid.shape:
            raise ValueError(f"score {score.shape} and fidelity {fid.shape} shapes differ")
        if fid.min() < 0.0 or fid.max() > 3.0:
            raise ValueError("fidelity values must lie in [0, 3]")
        object.__setattr__(self, "score", score)
        object.__setattr__(self, "fidelity", fid)


def _check_pairs(pairs: Sequence[CalibrationPair]) -> int:
    if len(pairs) == 0:
        raise ValueError("need at least one calibration pair")
    return len(pairs)


def _check_alpha(alpha: float, allow_large_alpha: bool) -> float:
    alpha = float(alpha)
    upper = 3.0 if allow_large_alpha else 1.0
    if not 0.0 < alpha <= upper:
        raise ValueError(f"alpha must lie in (0, {upper:g}]; got {alpha}")
    return alpha


def _risk(sups, n: int) -> float:
    return math.fsum([3.0, *sups]) / (n + 1)


def empirical_risk(pairs: Sequence[CalibrationPair], t: float) -> float:
    """Calibration risk R(t) evaluated directly from the masks ``score <= t``."""
    n = _check_pairs(pairs)
    return _risk([fidelity_error(p.fidelity, p.score <= t) for p in pairs], n)


def _mode(mode) -> CalibrationMode:
    return mode if isinstance(mode, CalibrationMode) else CalibrationMode(mode)


def _bruteforce_risks(pairs: Sequence[CalibrationPair], ts: np.ndarray) -> np.ndarray:
    n = len(pairs)
    sups = np.empty((n, len(ts)))
    for i, p in enumerate(pairs):
        s = p.score.ravel()
        d = p.fidelity.ravel()
        block = max(1, _BRUTE_BLOCK_ELEMENTS // s.size)
        for start in range(0, len(ts), block):
            tb = ts[start : start + block]
            selected = s[None, :] <= tb[:, None]
            sups[i, start : start + block] = np.where(selected, d[None, :], 0.0).max(axis=1)
    return np.array([_risk(col, n) for col in sups.T])


def calibrate_bruteforce(
    pairs: Sequence[CalibrationPair],
    alpha: float,
    mode=CalibrationMode.CONSERVATIVE,
    *,
    allow_large_alpha: bool = False,
) -> float:
    """Evaluate R at every distinct score value and pick the threshold.

    Quadratic in the total pixel count; intended as a reference for
    :func:`calibrate_dp` on small inputs.
    """
    _check_pairs(pairs)
    alpha = _check_alpha(alpha, allow_large_alpha)
    mode = _mode(mode)
    if empirical_risk(pairs, math.inf) <= alpha:
        return math.inf
    if empirical_risk(pairs, -math.inf) > alpha:
        return -math.inf
    ts = np.unique(np.concatenate([p.score.ravel() for p in pairs]))
    risks = _bruteforce_risks(pairs, ts)
    if mode is CalibrationMode.CONSERVATIVE:
        ok = ts[risks <= alpha]
        return float(ok.max()) if ok.size else -math.inf
    return float(ts[risks > alpha].min())


def calibrate_dp(
    pairs: Sequence[CalibrationPair],
    alpha: float,
    mode=CalibrationMode.CONSERVATIVE,
    *,
    allow_large_alpha: bool = False,
) -> float:
    """Sort-and-sweep threshold computation in O(N log N) for N total pixels.

    All (score, D, image) triples are sorted by score once. Sweeping them in
    order while tracking each image's running maximum of D gives the risk
    after every group of tied scores as a cumulative sum. The crossing found
    from that float sum is then confirmed with exactly summed risks, which
    only needs the per-image running maxima at the candidate group.
    """
    n = _check_pairs(pairs)
    alpha = _check_alpha(alpha, allow_large_alpha)
    mode = _mode(mode)

    sizes = np.array([p.score.size for p in pairs])
    sigma = np.concatenate([p.score.ravel() for p in pairs])
    dvals = np.concatenate([p.fidelity.ravel() for p in pairs])
    image = np.repeat(np.arange(n), sizes)

    order = np.argsort(sigma, kind="stable")
    s = sigma[order]
    d = dvals[order]
    img = image[order]

    # sweep positions of each image's pixels, in sweep order
    by_image = np.split(np.argsort(img, kind="stable"), np.cumsum(sizes)[:-1])
    running = np.empty_like(d)
    previous = np.empty_like(d)
    for pos in by_image:
        run = np.maximum.accumulate(d[pos])
        running[pos] = run
        previous[pos[0]] = 0.0
        previous[pos[1:]] = run[:-1]

    approx = (3.0 + np.cumsum(running - previous)) / (n + 1)
    ends = np.append(np.flatnonzero(np.diff(s)), s.size - 1)
    thresholds = s[ends]
    group_risk = approx[ends]

    def exact(j: int) -> float:
        sups = []
        for pos in by_image:
            last = np.searchsorted(pos, ends[j], side="right") - 1
            sups.append(running[pos[last]] if last >= 0 else 0.0)
        return _risk(sups, n)

    m = thresholds.size
    if exact(m - 1) <= alpha:
        return math.inf
    if _risk([], n) > alpha:
        return -math.inf

    # k = number of groups whose risk is <= alpha
    k = int(np.searchsorted(group_risk, alpha, side="right"))
    while k > 0 and exact(k - 1) > alpha:
        k -= 1
    while k < m and exact(k) <= alpha:
        k += 1

    if mode is CalibrationMode.CONSERVATIVE:
        return float(thresholds[k - 1]) if k > 0 else -math.inf
    return float(thresholds[k])


def make_mask(score, t: float) -> np.ndarray:
    """Trusted-pixel mask ``score <= t``."""
    return np.asarray(score, dtype=np.float64) <= t


def format_threshold(t: float):
    if t == math.inf:
        return "+inf"
    if t == -math.inf:
        return "-inf"
    return float(t)


def parse_threshold(value) -> float:
    if value == "+inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    if isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value):
        return float(value)
    raise ValueError(f"malformed threshold {value!r}")


@dataclass(frozen=True)
class CalibrationRecord:
    """Calibrated threshold plus the conventions it is valid under."""

    alpha: float
    threshold: float
    n: int
    mode: CalibrationMode
    metric: FidelityMetricSpec
    score_config: ScoreConfig
    lab_normalization: str = LAB_NORMALIZATION
    created: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    format_version: int = RECORD_FORMAT_VERSION

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"record n must be >= 1; got {self.n}")
        if not 0.0 < self.alpha <= 3.0:
            raise ValueError(f"record alpha out of range: {self.alpha}")
        object.__setattr__(self, "mode", _mode(self.mode))

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "alpha": self.alpha,
            "threshold": format_threshold(self.threshold),
            "n": self.n,
            "mode": self.mode.value,
            "metric": self.metric.to_dict(),
            "score_config": self.score_config.to_dict(),
            "lab_normalization": self.lab_normalization,
            "created": self.created,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationRecord":
        version = d.get("format_version")
        if version != RECORD_FORMAT_VERSION:
            raise ValueError(
                f"unsupported record format version {version!r} "
                f"(this build reads version {RECORD_FORMAT_VERSION})"
            )
        try:
            return cls(
                alpha=float(d["alpha"]),
                threshold=parse_threshold(d["threshold"]),
                n=int(d["n"]),
                mode=CalibrationMode(d["mode"]),
                metric=FidelityMetricSpec.from_dict(d["metric"]),
                score_config=ScoreConfig.from_dict(d["score_config"]),
                lab_normalization=str(d["lab_normalization"]),
                created=str(d["created"]),
                format_version=version,
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed calibration record: {exc!r}") from exc

    def check_compatible(
        self,
        metric: FidelityMetricSpec | None = None,
        score_config: ScoreConfig | None = None,
        lab_normalization: str = LAB_NORMALIZATION,
    ) -> None:
        """Raise :class:`RecordMismatchError` if the offered conventions differ."""
        problems = []
        if metric is not None and metric != self.metric:
            problems.append(f"metric {metric.to_dict()} != recorded {self.metric.to_dict()}")
        if score_config is not None and score_config != self.score_config:
            problems.append(
                f"score config {score_config.to_dict()} != recorded {self.score_config.to_dict()}"
            )
        if lab_normalization != self.lab_normalization:
            problems.append(
                f"Lab normalization {lab_normalization!r} != recorded {self.lab_normalization!r}"
            )
        if problems:
            raise RecordMismatchError("calibration record mismatch: " + "; ".join(problems))


def save_record(record: CalibrationRecord, path) -> None:
    Path(path).write_text(json.dumps(record.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_record(path) -> CalibrationRecord:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not a JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: calibration record must be a JSON object")
    return CalibrationRecord.from_dict(doc)
