"""Image containers, sRGB -> normalized CIELAB conversion and raster I/O.

Images are plain numpy arrays of shape ``(height, width, channels)`` with
``channels`` in {1, 3}. Single-channel rasters (score maps, fidelity maps)
may also be passed as 2-D ``(height, width)`` arrays. Binary masks are 2-D
boolean arrays where ``True`` marks a trusted pixel.

The normalized Lab convention used throughout the package is::

    L' = L / 100,  a' = (a + 128) / 255,  b' = (b + 128) / 255

each clamped to [0, 1], computed from sRGB with the D65 white point.
"""

from __future__ import annotations

import struct
from pathlib import Path

import cv2
import numpy as np
from PIL import Image
from PIL.PngImagePlugin import PngInfo

__all__ = [
    "LAB_NORMALIZATION",
    "ImageFormatError",
    "as_image",
    "as_map",
    "srgb_to_lab_normalized",
    "load_png",
    "save_png",
    "load_floatmap",
    "save_floatmap",
    "downsample_box",
]

LAB_NORMALIZATION = "srgb-d65-cielab:L/100,(a+128)/255,(b+128)/255:clamp01"

# IEC 61966-2-1 linear sRGB -> CIEXYZ (D65)
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
# White is the image of sRGB (1, 1, 1), so reference white lands on a = b = 0.
_WHITE_XYZ = np.ones(3) @ _SRGB_TO_XYZ.T

_LAB_EPS = (6.0 / 29.0) ** 3
_LAB_SLOPE = 1.0 / (3.0 * (6.0 / 29.0) ** 2)

CFM_MAGIC = b"CFM1"
_CFM_HEADER = struct.Struct("<4sIII")


class ImageFormatError(ValueError):
    """Raised for unreadable or malformed image / float-map files."""


def as_image(img, *, name: str = "image") -> np.ndarray:
    """Return ``img`` as a float64 ``(H, W, C)`` array, validating shape and finiteness."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or arr.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have shape (H, W), (H, W, 1) or (H, W, 3); got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_map(values, *, name: str = "map") -> np.ndarray:
    """Return a single-channel raster as a float64 ``(H, W)`` array."""
    arr = as_image(values, name=name)
    if arr.shape[2] != 1:
        raise ValueError(f"{name} must be single-channel; got {arr.shape[2]} channels")
    return arr[:, :, 0]


def _check_unit_range(arr: np.ndarray, name: str) -> None:
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]; got [{arr.min()}, {arr.max()}]")


def srgb_to_lab_normalized(img) -> np.ndarray:
    """Convert an sRGB image in [0, 1] to normalized CIELAB in [0, 1].

    Parameters
    ----------
    img : array_like, shape (H, W, 3)
        sRGB values in [0, 1].

    Returns
    -------
    numpy.ndarray, shape (H, W, 3)
        Channels ``(L', a', b')``, see the module docstring for the mapping.
    """
    rgb = as_image(img, name="sRGB image")
    if rgb.shape[2] != 3:
        raise ValueError(f"sRGB image must have 3 channels; got {rgb.shape[2]}")
    _check_unit_range(rgb, "sRGB image")

    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _SRGB_TO_XYZ.T
    t = xyz / _WHITE_XYZ
    f = np.where(t > _LAB_EPS, np.cbrt(t), t * _LAB_SLOPE + 4.0 / 29.0)

    lab = np.empty_like(f)
    lab[..., 0] = (116.0 * f[..., 1] - 16.0) / 100.0
    lab[..., 1] = (500.0 * (f[..., 0] - f[..., 1]) + 128.0) / 255.0
    lab[..., 2] = (200.0 * (f[..., 1] - f[..., 2]) + 128.0) / 255.0
    return np.clip(lab, 0.0, 1.0)


def _png_header(path: Path) -> tuple[int, int, int, int]:
    try:
        head = path.read_bytes()[:33]
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if len(head) < 33 or head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        raise ImageFormatError(f"{path} is not a PNG file")
    width, height, depth, color_type = struct.unpack(">IIBB", head[16:26])
    return width, height, depth, color_type


def load_png(path) -> np.ndarray:
    """Load an 8- or 16-bit grayscale or RGB PNG as floats in [0, 1].

    Returns an ``(H, W, 1)`` or ``(H, W, 3)`` float64 array.
    """
    path = Path(path)
    width, height, depth, color_type = _png_header(path)
    if depth not in (8, 16):
        raise ImageFormatError(f"{path}: unsupported bit depth {depth} (need 8 or 16)")
    if color_type not in (0, 2):
        raise ImageFormatError(
            f"{path}: unsupported PNG color type {color_type} (need grayscale or RGB)"
        )
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageFormatError(f"cannot decode {path}")
    if raw.ndim == 2:
        raw = raw[:, :, None]
    else:
        raw = raw[:, :, ::-1]
    if raw.shape[:2] != (height, width):
        raise ImageFormatError(f"{path}: decoded shape {raw.shape} disagrees with header")
    scale = 255.0 if depth == 8 else 65535.0
    return raw.astype(np.float64) / scale


def save_png(img, path, *, bits: int = 8, text: dict[str, str] | None = None) -> None:
    """Quantize an image in [0, 1] and write it as PNG.

    ``text`` entries are stored as tEXt chunks (8-bit output only).
    """
    arr = as_image(img)
    _check_unit_range(arr, "image")
    path = Path(path)
    if bits == 8:
        q = np.rint(arr * 255.0).astype(np.uint8)
        mode = "L" if q.shape[2] == 1 else "RGB"
        pil = Image.fromarray(q[:, :, 0] if mode == "L" else q, mode=mode)
        info = None
        if text:
            info = PngInfo()
            for key, value in text.items():
                info.add_text(key, value)
        pil.save(path, format="PNG", pnginfo=info)
    elif bits == 16:
        if text:
            raise ValueError("text chunks are only supported for 8-bit PNGs")
        q = np.rint(arr * 65535.0).astype(np.uint16)
        out = q[:, :, 0] if q.shape[2] == 1 else np.ascontiguousarray(q[:, :, ::-1])
        if not cv2.imwrite(str(path), out):
            raise ImageFormatError(f"cannot write {path}")
    else:
        raise ValueError(f"bits must be 8 or 16; got {bits}")


def load_floatmap(path) -> np.ndarray:
    """Read a CFM1 float raster. Returns a float32 ``(H, W, C)`` array."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if len(blob) < _CFM_HEADER.size:
        raise ImageFormatError(f"{path}: truncated header")
    magic, width, height, channels = _CFM_HEADER.unpack_from(blob)
    if magic != CFM_MAGIC:
        raise ImageFormatError(f"{path}: bad magic {magic!r}")
    if width == 0 or height == 0 or channels == 0:
        raise ImageFormatError(f"{path}: zero dimension ({width}x{height}x{channels})")
    count = width * height * channels
    expected = _CFM_HEADER.size + 4 * count
    if count > (1 << 40) or len(blob) < expected:
        raise ImageFormatError(
            f"{path}: payload holds {len(blob) - _CFM_HEADER.size} bytes, "
            f"header declares {width}x{height}x{channels}"
        )
    if len(blob) > expected:
        raise ImageFormatError(f"{path}: {len(blob) - expected} trailing bytes")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=_CFM_HEADER.size)
    return data.reshape(height, width, channels).astype(np.float32)


def save_floatmap(img, path) -> None:
    """Write a raster as CFM1 (little-endian binary32, row-major, channel-interleaved)."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3 or 0 in arr.shape:
        raise ValueError(f"float map must be a nonempty (H, W[, C]) array; got {arr.shape}")
    height, width, channels = arr.shape
    for dim in (height, width, channels):
        if dim >= 1 << 32:
            raise ValueError("float map dimension does not fit in 32 bits")
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    Path(path).write_bytes(_CFM_HEADER.pack(CFM_MAGIC, width, height, channels) + payload)


def downsample_box(img, k: int) -> np.ndarray:
    """Average non-overlapping ``k x k`` blocks of each channel."""
    arr = as_image(img)
    if k < 1:
        raise ValueError(f"downsample factor must be >= 1; got {k}")
    h, w, c = arr.shape
    if h % k or w % k:
        raise ValueError(f"image dims {w}x{h} are not divisible by {k}")
    if k == 1:
        return arr.copy()
    return arr.reshape(h // k, k, w // k, k, c).mean(axis=(1, 3))
