"""Model-indecision score maps built from repeated stochastic model draws.

All estimators take a list of ``M >= 2`` normalized-Lab draws of the same
shape and return a single-channel ``(H, W)`` float64 map. Per-channel
variances are averaged into one value per pixel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .imagecore import as_image, srgb_to_lab_normalized
from .kernels import Kernel, convolve2d, make_box, make_gaussian

__all__ = [
    "ScoreConfig",
    "sigma_var",
    "sigma_ker",
    "finalize_score",
    "score_from_draws",
    "score_from_model",
]


@dataclass(frozen=True)
class ScoreConfig:
    """How a score map is produced: number of draws, smoothing kernel, post blur."""

    num_draws: int = 8
    kernel: Kernel = field(default_factory=lambda: make_box(2))
    post_blur: float | None = 2.0

    def __post_init__(self):
        if self.num_draws < 2:
            raise ValueError(f"num_draws must be >= 2; got {self.num_draws}")
        if self.post_blur is not None and not self.post_blur > 0:
            raise ValueError(f"post_blur must be positive or None; got {self.post_blur}")

    def to_dict(self) -> dict:
        return {
            "num_draws": self.num_draws,
            "kernel": self.kernel.to_dict(),
            "post_blur": self.post_blur,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoreConfig":
        blur = d.get("post_blur")
        return cls(
            num_draws=int(d["num_draws"]),
            kernel=Kernel.from_dict(d["kernel"]),
            post_blur=None if blur is None else float(blur),
        )


def _stack(draws: Sequence) -> np.ndarray:
    if len(draws) < 2:
        raise ValueError(f"need at least 2 draws; got {len(draws)}")
    arrays = [as_image(d, name=f"draw {i}") for i, d in enumerate(draws)]
    shape = arrays[0].shape
    for i, a in enumerate(arrays):
        if a.shape != shape:
            raise ValueError(f"draw {i} has shape {a.shape}, expected {shape}")
    return np.stack(arrays)


def _draw_mean(stack: np.ndarray) -> np.ndarray:
    # sorting along the draw axis makes the sum independent of draw order
    return np.sort(stack, axis=0).sum(axis=0) / stack.shape[0]


def _per_channel_variance(stack: np.ndarray) -> np.ndarray:
    # centering on the per-pixel minimum keeps identical draws at exactly zero
    shifted = stack - stack.min(axis=0)
    mean = _draw_mean(shifted)
    return _draw_mean((shifted - mean) ** 2)


def sigma_var(draws: Sequence) -> np.ndarray:
    """Pixel-wise population variance (divide by M), averaged over channels."""
    var = _per_channel_variance(_stack(draws))
    return np.maximum(var.mean(axis=2), 0.0)


def _sigma_ker_raw(draws: Sequence, kernel: Kernel) -> np.ndarray:
    stack = _stack(draws)
    var = _per_channel_variance(stack)
    mean = _draw_mean(stack)
    # E[f^2 * K] - (E[f] * K)^2 split as (Var * K) + ((m^2 * K) - (m * K)^2);
    # the second term vanishes identically for the 1-box kernel.
    spread = convolve2d(mean * mean, kernel) - convolve2d(mean, kernel) ** 2
    return (convolve2d(var, kernel) + spread).mean(axis=2)


def sigma_ker(draws: Sequence, kernel: Kernel) -> np.ndarray:
    """Kernel-smoothed variance ``E[f^2 * K] - (E[f * K])^2``, averaged over channels.

    With ``make_box(0)`` this reduces to :func:`sigma_var`.
    """
    return np.maximum(_sigma_ker_raw(draws, kernel), 0.0)


def finalize_score(score, post_blur: float | None) -> np.ndarray:
    """Gaussian-blur a score map (no-op when ``post_blur`` is None)."""
    arr = np.asarray(score, dtype=np.float64)
    if post_blur is None:
        return arr.copy()
    return convolve2d(arr, make_gaussian(post_blur))


def score_from_draws(draws_lab: Sequence, config: ScoreConfig) -> np.ndarray:
    """Full score pipeline on Lab draws: ``sigma_ker`` then the post blur."""
    if len(draws_lab) != config.num_draws:
        raise ValueError(f"config expects {config.num_draws} draws; got {len(draws_lab)}")
    return finalize_score(sigma_ker(draws_lab, config.kernel), config.post_blur)


def score_from_model(
    model: Callable[[np.ndarray, int], np.ndarray],
    x,
    config: ScoreConfig,
    first_draw: int = 1,
) -> np.ndarray:
    """Score an input using ``config.num_draws`` sRGB draws from ``model(x, draw_index)``.

    Draw indices start at ``first_draw``; index 0 is conventionally the
    prediction that gets shown to the user, so it is kept out of the score.
    The model never sees ground truth.
    """
    draws = [
        srgb_to_lab_normalized(model(x, first_draw + i)) for i in range(config.num_draws)
    ]
    return score_from_draws(draws, config)
