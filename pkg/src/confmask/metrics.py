"""Evaluation quantities: masked PSNR, mask sizes, risk curves and CSV reports.

PSNR here is computed in normalized Lab, pooling all three channel values of
every trusted pixel, which is the space where the fidelity bound lives. It is
not comparable with the usual sRGB / luma PSNR.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .calibrate import CalibrationPair, empirical_risk
from .fidelity import fidelity_error
from .imagecore import as_image

__all__ = [
    "EvalReport",
    "masked_psnr",
    "mask_stats",
    "risk_curve",
    "evaluate_prediction",
    "format_psnr",
    "write_eval_csv",
    "EVAL_CSV_COLUMNS",
]

EVAL_CSV_COLUMNS = (
    "image_id",
    "alpha",
    "mode",
    "fidelity_error",
    "masked_psnr",
    "trusted_fraction",
    "mistrust_fraction",
)


def masked_psnr(yhat, y, mask) -> float | None:
    """PSNR of ``yhat`` against ``y`` restricted to ``mask``.

    ``10 log10(s**2 / mse)`` where ``s`` is the largest pooled value of ``y``
    over the trusted pixels. Returns ``None`` for an empty mask and ``inf``
    when the trusted region is reproduced exactly.
    """
    y = as_image(y, name="Y")
    yhat = as_image(yhat, name="Yhat")
    mask = np.asarray(mask, dtype=bool)
    if y.shape != yhat.shape or y.shape[:2] != mask.shape:
        raise ValueError(f"dimension mismatch: Y {y.shape}, Yhat {yhat.shape}, mask {mask.shape}")
    if not mask.any():
        return None
    ref = y[mask]
    mse = float(np.mean((yhat[mask] - ref) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(ref.max())
    if peak == 0.0:
        return -math.inf
    return 10.0 * math.log10(peak * peak / mse)


def mask_stats(mask) -> tuple[float, float]:
    """``(trusted_fraction, mistrust_fraction)``; the second is the reported mask size."""
    mask = np.asarray(mask, dtype=bool)
    trusted = int(mask.sum())
    frac = trusted / mask.size
    return frac, (mask.size - trusted) / mask.size


def risk_curve(pairs: Sequence[CalibrationPair], t_grid: Iterable[float]) -> list[tuple[float, float]]:
    grid = [float(t) for t in t_grid]
    if not grid:
        raise ValueError("empty threshold grid")
    return [(t, empirical_risk(pairs, t)) for t in grid]


@dataclass(frozen=True)
class EvalReport:
    fidelity_error: float
    masked_psnr: float | None
    trusted_fraction: float
    mistrust_fraction: float
    n_trusted_pixels: int


def evaluate_prediction(y_lab, yhat_lab, d_map, mask) -> EvalReport:
    mask = np.asarray(mask, dtype=bool)
    trusted, mistrust = mask_stats(mask)
    return EvalReport(
        fidelity_error=fidelity_error(d_map, mask),
        masked_psnr=masked_psnr(yhat_lab, y_lab, mask),
        trusted_fraction=trusted,
        mistrust_fraction=mistrust,
        n_trusted_pixels=int(mask.sum()),
    )


def format_psnr(value: float | None) -> str:
    if value is None:
        return "NA"
    if value == math.inf:
        return "inf"
    if value == -math.inf:
        return "-inf"
    return repr(float(value))


def write_eval_csv(path, rows: Iterable[dict]) -> None:
    """Write EvalReport rows; each dict carries the :data:`EVAL_CSV_COLUMNS` keys."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVAL_CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            out = dict(row)
            if not isinstance(out.get("masked_psnr"), str):
                out["masked_psnr"] = format_psnr(out.get("masked_psnr"))
            writer.writerow(out)
