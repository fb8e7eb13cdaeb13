"""Seed-deterministic synthetic world and a stochastic mock upscaler.

Ground truth images are mid-gray canvases with randomly placed soft-edged
radial bumps plus smooth texture; the low-resolution input is their box
downsample. The mock model upsamples bilinearly and adds noise whose
amplitude grows with the local gradient, so edges are where the model is
both least certain and most wrong.

Every random quantity comes from its own counter-based Philox stream keyed
by ``(seed, purpose, index...)``, so results never depend on call order.
"""

from __future__ import annotations

import hashlib
import zlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .imagecore import as_image, downsample_box

__all__ = ["WorldConfig", "MockModel", "stream", "gen_pair", "mock_upscale", "bilinear_upsample"]


def stream(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``(seed, purpose, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(purpose.encode())]
    entropy.extend(int(k) for k in keys)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 0
    lr_width: int = 8
    lr_height: int = 8
    factor: int = 4
    bump_count: tuple[int, int] = (2, 5)
    bump_amplitude: float = 0.4
    texture_amplitude: float = 0.02
    noise_base: float = 0.001
    noise_coupling: float = 0.25

    def __post_init__(self):
        if self.lr_width < 4 or self.lr_height < 4:
            raise ValueError(f"low-res dims must be >= 4; got {self.lr_width}x{self.lr_height}")
        if self.factor not in (2, 4):
            raise ValueError(f"upscale factor must be 2 or 4; got {self.factor}")
        lo, hi = self.bump_count
        if not 0 <= lo <= hi:
            raise ValueError(f"bad bump count range {self.bump_count}")
        for name in ("bump_amplitude", "texture_amplitude", "noise_base", "noise_coupling"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def hr_shape(self) -> tuple[int, int]:
        return self.lr_height * self.factor, self.lr_width * self.factor

    def model(self) -> "MockModel":
        """The mock upscaler paired with this world."""
        return MockModel(
            seed=self.seed ^ 0x5EED_0F_30DE1,
            factor=self.factor,
            noise_base=self.noise_base,
            noise_coupling=self.noise_coupling,
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "lr_width": self.lr_width,
            "lr_height": self.lr_height,
            "factor": self.factor,
            "bump_count": list(self.bump_count),
            "bump_amplitude": self.bump_amplitude,
            "texture_amplitude": self.texture_amplitude,
            "noise_base": self.noise_base,
            "noise_coupling": self.noise_coupling,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        d = dict(d)
        d["bump_count"] = tuple(d["bump_count"])
        return cls(**d)


def gen_pair(cfg: WorldConfig, index: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(X, Y)`` for pair ``index``; X is ``k``-times smaller than Y."""
    rng = stream(cfg.seed, "pair", index)
    h, w = cfg.hr_shape
    y = np.full((h, w, 3), 0.5)

    lo, hi = cfg.bump_count
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    for _ in range(int(rng.integers(lo, hi + 1))):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        radius = rng.uniform(0.1, 0.35) * min(h, w)
        softness = rng.uniform(0.5, 1.5)
        delta = rng.uniform(-cfg.bump_amplitude, cfg.bump_amplitude, size=3)
        r = np.hypot(rows - cy, cols - cx)
        profile = 0.5 * (1.0 - np.tanh((r - radius) / (2.0 * softness)))
        y += profile[:, :, None] * delta

    if cfg.texture_amplitude > 0:
        tex = rng.standard_normal((h, w, 3))
        tex = ndimage.gaussian_filter(tex, sigma=(3.0, 3.0, 0), mode="wrap")
        y += cfg.texture_amplitude * tex / tex.std()

    y = np.clip(y, 0.0, 1.0)
    return downsample_box(y, cfg.factor), y


def _lerp_axis(a: np.ndarray, k: int, axis: int) -> np.ndarray:
    n = a.shape[axis]
    pos = np.clip((np.arange(n * k) + 0.5) / k - 0.5, 0.0, n - 1)
    i0 = np.floor(pos).astype(int)
    i1 = np.minimum(i0 + 1, n - 1)
    frac = pos - i0
    shape = [1] * a.ndim
    shape[axis] = -1
    lo = np.take(a, i0, axis=axis)
    hi = np.take(a, i1, axis=axis)
    return lo + (hi - lo) * frac.reshape(shape)


def bilinear_upsample(img, k: int) -> np.ndarray:
    """Pixel-center-aligned bilinear upsampling by an integer factor, edges clamped."""
    arr = as_image(img)
    return _lerp_axis(_lerp_axis(arr, k, 0), k, 1)


@dataclass(frozen=True)
class MockModel:
    """Stochastic stand-in for a generative upscaler; call as ``model(x, draw_index)``."""

    seed: int
    factor: int = 4
    noise_base: float = 0.001
    noise_coupling: float = 0.25

    def amplitude(self, upsampled: np.ndarray) -> np.ndarray:
        """Per-pixel noise standard deviation for an upsampled image."""
        gy, gx = np.gradient(upsampled, axis=(0, 1))
        grad = np.sqrt(gx * gx + gy * gy).mean(axis=2)
        return self.noise_base + self.noise_coupling * grad

    def __call__(self, x, draw_index: int) -> np.ndarray:
        return mock_upscale(self, x, draw_index)

    def draws(self, x, draw_indices) -> list[np.ndarray]:
        """Several draws at once; identical to calling the model per index."""
        x = as_image(x, name="X")
        up = bilinear_upsample(x, self.factor)
        if self.noise_base == 0 and self.noise_coupling == 0:
            return [np.clip(up, 0.0, 1.0) for _ in draw_indices]
        amp = self.amplitude(up)[:, :, None]
        key = _digest(x)
        return [
            np.clip(up + amp * stream(self.seed, "draw", key, i).standard_normal(up.shape), 0.0, 1.0)
            for i in draw_indices
        ]


def _digest(x: np.ndarray) -> int:
    return int.from_bytes(hashlib.blake2b(x.tobytes(), digest_size=8).digest(), "little")


def mock_upscale(model: MockModel, x, draw_index: int) -> np.ndarray:
    """One stochastic draw of the mock model on low-resolution input ``x``."""
    x = as_image(x, name="X")
    up = bilinear_upsample(x, model.factor)
    if model.noise_base == 0 and model.noise_coupling == 0:
        return np.clip(up, 0.0, 1.0)
    rng = stream(model.seed, "draw", _digest(x), draw_index)
    amp = model.amplitude(up)
    noise = rng.standard_normal(up.shape)
    return np.clip(up + amp[:, :, None] * noise, 0.0, 1.0)
