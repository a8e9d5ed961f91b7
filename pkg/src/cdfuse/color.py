"""Colour handling: full-range BT.601 YCbCr, chroma fusion and image I/O.

RGB images are ``(3, H, W)`` float arrays in ``[0, 1]``; each YCbCr plane
is ``(1, H, W)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .tensor import DimensionError

__all__ = [
    "ImageYCbCr",
    "ImageDecodeError",
    "rgb_to_ycbcr",
    "ycbcr_to_rgb",
    "fuse_chrominance",
    "fuse_color",
    "decode_image",
    "encode_image",
    "is_grayscale",
]

KB = 0.564
KR = 0.713


class ImageDecodeError(ValueError):
    pass


@dataclass
class ImageYCbCr:
    y: np.ndarray
    cb: np.ndarray
    cr: np.ndarray

    def __post_init__(self):
        if not (self.y.shape == self.cb.shape == self.cr.shape):
            raise DimensionError(
                f"plane shapes differ: {self.y.shape}, {self.cb.shape}, {self.cr.shape}"
            )


def _as_rgb(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise DimensionError(f"expected a (3, H, W) image, got {img.shape}")
    return img


def rgb_to_ycbcr(img) -> ImageYCbCr:
    r, g, b = _as_rgb(img)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 0.5 + (b - y) * KB
    cr = 0.5 + (r - y) * KR
    return ImageYCbCr(y[None], cb[None], cr[None])


def ycbcr_to_rgb(ycc: ImageYCbCr) -> np.ndarray:
    y, cb, cr = ycc.y[0], ycc.cb[0], ycc.cr[0]
    r = y + (cr - 0.5) / KR
    b = y + (cb - 0.5) / KB
    g = (y - 0.299 * r - 0.114 * b) / 0.587
    return np.clip(np.stack([r, g, b]), 0.0, 1.0)


def fuse_chrominance(c1, c2, eps: float = 1e-6) -> np.ndarray:
    """Saturation-weighted average of two chroma planes (neutral at 0.5)."""
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    if c1.shape != c2.shape:
        raise DimensionError(f"chroma planes differ in shape: {c1.shape} vs {c2.shape}")
    w1 = np.abs(c1 - 0.5)
    w2 = np.abs(c2 - 0.5)
    den = w1 + w2
    safe = np.where(den < eps, 1.0, den)
    return np.where(den < eps, 0.5, (c1 * w1 + c2 * w2) / safe)


def is_grayscale(img) -> bool:
    img = _as_rgb(img)
    return bool(np.array_equal(img[0], img[1]) and np.array_equal(img[1], img[2]))


def fuse_color(fuse_y, img_a, img_b, gray_a: bool = False, gray_b: bool = False) -> np.ndarray:
    """Fuse two RGB images through ``fuse_y(y_a, y_b)`` on luminance.

    A source flagged as grayscale contributes neutral chroma, so the other
    source's chroma passes through unchanged.
    """
    a = rgb_to_ycbcr(img_a)
    b = rgb_to_ycbcr(img_b)
    if a.y.shape != b.y.shape:
        raise DimensionError(f"source sizes differ: {a.y.shape[1:]} vs {b.y.shape[1:]}")
    for flag, ycc in ((gray_a, a), (gray_b, b)):
        if flag:
            ycc.cb = np.full_like(ycc.cb, 0.5)
            ycc.cr = np.full_like(ycc.cr, 0.5)
    fused = ImageYCbCr(
        np.asarray(fuse_y(a.y, b.y), dtype=np.float64),
        fuse_chrominance(a.cb, b.cb),
        fuse_chrominance(a.cr, b.cr),
    )
    return ycbcr_to_rgb(fused)


def decode_image(path) -> np.ndarray:
    """Read an image file as a ``(3, H, W)`` array in ``[0, 1]``.

    Grayscale files are promoted to three equal planes.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("1", "L", "P", "RGB", "RGBA", "LA"):
                arr = np.asarray(im.convert("L" if mode in ("1", "L", "LA") else "RGB"))
                maxval = 255.0
            elif mode in ("I;16", "I;16B", "I"):
                arr = np.asarray(im, dtype=np.float64)
                maxval = 65535.0
            else:
                raise ImageDecodeError(f"{path}: unsupported pixel mode {mode!r}")
    except FileNotFoundError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, ImageDecodeError):
            raise
        raise ImageDecodeError(f"{path}: cannot decode image ({exc})") from None
    arr = np.asarray(arr, dtype=np.float64) / maxval
    if arr.ndim == 2:
        arr = np.stack([arr] * 3)
    else:
        arr = arr.transpose(2, 0, 1)
    return arr


def encode_image(img, path) -> None:
    """Write an RGB ``(3, H, W)`` or single-plane image with 8-bit quantisation.

    The format follows the file suffix (``.ppm``/``.pgm``/``.png`` are lossless).
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[0] == 1:
        img = img[0]
    q = np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if q.ndim == 3:
        if q.shape[0] != 3:
            raise DimensionError(f"expected 1 or 3 channels, got {q.shape[0]}")
        pil = Image.fromarray(q.transpose(1, 2, 0))
    else:
        pil = Image.fromarray(q)
    try:
        pil.save(Path(path))
    except (KeyError, ValueError) as exc:
        raise ImageDecodeError(f"{path}: unsupported output format ({exc})") from None
