"""Normalized low-pass kernels and reflect-101 2-D correlation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .imagecore import as_image

__all__ = ["Kernel", "make_box", "make_gaussian", "convolve2d", "parse_kernel"]


@dataclass(frozen=True)
class Kernel:
    """Separable, symmetric, sum-to-one kernel on a ``(2r+1) x (2r+1)`` grid.

    ``profile`` is the 1-D factor; the 2-D weights are its outer product.
    """

    kind: str
    radius: int
    sigma: float | None = None
    profile: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return 2 * self.radius + 1

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.profile, self.profile)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "radius": self.radius, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, spec: dict) -> "Kernel":
        kind = spec.get("kind")
        if kind == "box":
            return make_box(int(spec["radius"]))
        if kind == "gaussian":
            return make_gaussian(float(spec["sigma"]), int(spec["radius"]))
        raise ValueError(f"unknown kernel kind {kind!r}")


def make_box(radius: int) -> Kernel:
    """Uniform kernel with weights ``1 / (2r+1)**2``; radius 0 is the identity."""
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"box radius must be >= 0; got {radius}")
    n = 2 * radius + 1
    return Kernel("box", radius, None, np.full(n, 1.0 / n))


def make_gaussian(sigma: float, radius: int | None = None) -> Kernel:
    """Gaussian kernel truncated at ``radius`` (default ``ceil(3 * sigma)``), renormalized."""
    sigma = float(sigma)
    if not sigma > 0.0 or not math.isfinite(sigma):
        raise ValueError(f"gaussian sigma must be a positive finite number; got {sigma}")
    if radius is None:
        radius = max(1, math.ceil(3.0 * sigma))
    radius = int(radius)
    if radius < 1:
        raise ValueError(f"gaussian radius must be >= 1; got {radius}")
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(d * d) / (2.0 * sigma * sigma))
    return Kernel("gaussian", radius, sigma, g / g.sum())


def parse_kernel(text: str) -> Kernel:
    """Parse ``box:R`` or ``gaussian:S`` (optionally ``gaussian:S:R``)."""
    parts = text.strip().split(":")
    try:
        if parts[0] == "box" and len(parts) == 2:
            return make_box(int(parts[1]))
        if parts[0] == "gaussian" and len(parts) in (2, 3):
            radius = int(parts[2]) if len(parts) == 3 else None
            return make_gaussian(float(parts[1]), radius)
    except ValueError as exc:
        raise ValueError(f"bad kernel spec {text!r}: {exc}") from exc
    raise ValueError(f"bad kernel spec {text!r}; expected box:R or gaussian:S")


def convolve2d(img, kernel: Kernel) -> np.ndarray:
    """Correlate every channel with ``kernel`` using reflect-101 borders.

    Output has the same shape as the input (2-D inputs stay 2-D). The kernel
    is separable, so this runs as two 1-D passes.
    """
    arr = np.asarray(img, dtype=np.float64)
    flat = arr.ndim == 2
    arr = as_image(arr)
    h, w = arr.shape[:2]
    if kernel.size > 2 * min(h, w):
        raise ValueError(
            f"kernel of side {kernel.size} is too large for a {w}x{h} image "
            "(reflect-101 needs radius < min(width, height))"
        )
    if kernel.radius == 0:
        out = arr.copy()
    else:
        # scipy's "mirror" mode is reflect-101 (edge pixel not repeated)
        out = ndimage.correlate1d(arr, kernel.profile, axis=0, mode="mirror")
        out = ndimage.correlate1d(out, kernel.profile, axis=1, mode="mirror")
    return out[:, :, 0] if flat else out
