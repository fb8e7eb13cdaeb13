"""Local image-difference maps D_p and the fidelity error of a mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import as_image, load_png
from .kernels import Kernel, convolve2d

__all__ = [
    "FidelityMetricSpec",
    "d_pointwise",
    "d_neighborhood",
    "d_semantic",
    "load_annotation",
    "fidelity_error",
    "compute_fidelity",
]

METRIC_KINDS = ("pointwise", "neighborhood", "semantic")


@dataclass(frozen=True)
class FidelityMetricSpec:
    kind: str = "pointwise"
    kernel: Kernel | None = None

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}; expected one of {METRIC_KINDS}")
        if self.kind == "neighborhood" and self.kernel is None:
            raise ValueError("neighborhood metric needs a kernel")
        if self.kind != "neighborhood" and self.kernel is not None:
            raise ValueError(f"{self.kind} metric takes no kernel")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "kernel": None if self.kernel is None else self.kernel.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FidelityMetricSpec":
        k = d.get("kernel")
        return cls(d["kind"], None if k is None else Kernel.from_dict(k))


def _lab_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = as_image(y, name="Y")
    yhat = as_image(yhat, name="Yhat")
    if y.shape != yhat.shape:
        raise ValueError(f"dimension mismatch: Y {y.shape} vs Yhat {yhat.shape}")
    if y.shape[2] != 3:
        raise ValueError("fidelity metrics expect 3-channel Lab images")
    for name, a in (("Y", y), ("Yhat", yhat)):
        if a.min() < 0.0 or a.max() > 1.0:
            raise ValueError(f"{name} values must lie in [0, 1]")
    return y, yhat


def d_pointwise(y, yhat) -> np.ndarray:
    """Channel-summed absolute difference per pixel, in [0, 3]."""
    y, yhat = _lab_pair(y, yhat)
    return np.abs(y - yhat).sum(axis=2)


def d_neighborhood(y, yhat, kernel: Kernel) -> np.ndarray:
    """L1 distance between kernel-smoothed images at each pixel."""
    y, yhat = _lab_pair(y, yhat)
    d = np.abs(convolve2d(y, kernel) - convolve2d(yhat, kernel)).sum(axis=2)
    # smoothing inputs in [0, 1] can overshoot by a rounding error
    return np.clip(d, 0.0, 3.0)


def d_semantic(annotation, shape: tuple[int, int] | None = None) -> np.ndarray:
    """Pass a binary difference annotation through as a {0.0, 1.0} map.

    3-channel annotations collapse by per-pixel maximum: a pixel flagged in
    any channel counts as different.
    """
    arr = as_image(annotation, name="annotation")
    if not np.all((arr == 0.0) | (arr == 1.0)):
        raise ValueError("annotation must contain only 0 and 1")
    out = arr.max(axis=2)
    if shape is not None and out.shape != tuple(shape):
        raise ValueError(f"annotation shape {out.shape} does not match prediction {tuple(shape)}")
    return out


def load_annotation(path) -> np.ndarray:
    """Load a PNG annotation: 0 means same, any nonzero value means different."""
    return (load_png(path) > 0).astype(np.float64)


def fidelity_error(d, mask) -> float:
    """Maximum of ``d`` over the trusted pixels; 0.0 for an empty mask."""
    d = np.asarray(d, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if d.shape != mask.shape:
        raise ValueError(f"dimension mismatch: D {d.shape} vs mask {mask.shape}")
    if not mask.any():
        return 0.0
    return float(d[mask].max())


def compute_fidelity(spec: FidelityMetricSpec, y_lab=None, yhat_lab=None, annotation=None):
    """Dispatch on ``spec.kind``. Semantic maps need ``annotation``; others need Y and Yhat."""
    if spec.kind == "semantic":
        if annotation is None:
            raise ValueError("semantic metric requires an annotation raster")
        shape = None if yhat_lab is None else np.asarray(yhat_lab).shape[:2]
        return d_semantic(annotation, shape)
    if y_lab is None or yhat_lab is None:
        raise ValueError(f"{spec.kind} metric requires both Y and Yhat")
    if spec.kind == "pointwise":
        return d_pointwise(y_lab, yhat_lab)
    return d_neighborhood(y_lab, yhat_lab, spec.kernel)
