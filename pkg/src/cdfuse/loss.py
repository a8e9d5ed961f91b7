"""High- and low-frequency image fidelity (HLIF) loss.

Gradient maps are ``|G_h| + |G_v|`` from 3x3 Scharr filters on an
edge-replicated border. Per-pixel importance weights come from a sigmoid of
the scaled source gradients, normalised to sum to one. The high-frequency
term is an l1 distance between the fused gradient map and the weighted
source gradients; the low-frequency term an l2 distance between the fused
image and the weighted sources.

By default both norms are normalised per pixel (mean for l1, RMS for l2) so
the loss does not depend on resolution; ``normalized=False`` gives the raw
norms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .tensor import DimensionError

__all__ = [
    "SCHARR_H",
    "SCHARR_V",
    "AdaptiveWeights",
    "HLIFReference",
    "make_reference",
    "LossReport",
    "scharr_responses",
    "scharr_magnitude",
    "scharr_magnitude_backward",
    "adaptive_weights",
    "hif_loss",
    "lif_loss",
    "hlif_loss",
    "hlif_grad",
]

SCHARR_H = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0
SCHARR_V = SCHARR_H.T.copy()
DEFAULT_TAU = 0.1


@dataclass
class AdaptiveWeights:
    zx: np.ndarray
    zy: np.ndarray


@dataclass
class LossReport:
    hif: float
    lif: float
    total: float
    weights: AdaptiveWeights


def _plane(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        if img.shape[0] != 1:
            raise DimensionError(f"expected a single-channel image, got {img.shape}")
        img = img[0]
    if img.ndim != 2:
        raise DimensionError(f"expected a (1, H, W) image, got {img.shape}")
    return img


def _correlate3(p: np.ndarray, k: np.ndarray, h: int, w: int) -> np.ndarray:
    out = np.zeros((h, w))
    for u in range(3):
        for v in range(3):
            if k[u, v] != 0.0:
                out += k[u, v] * p[u:u + h, v:v + w]
    return out


def scharr_responses(img) -> tuple[np.ndarray, np.ndarray]:
    """Horizontal and vertical Scharr responses, each ``(H, W)``."""
    x = _plane(img)
    h, w = x.shape
    p = np.empty((h + 2, w + 2))
    p[1:-1, 1:-1] = x
    p[0, 1:-1], p[-1, 1:-1] = x[0], x[-1]
    p[:, 0], p[:, -1] = p[:, 1], p[:, -2]
    return _correlate3(p, SCHARR_H, h, w), _correlate3(p, SCHARR_V, h, w)


def scharr_magnitude(img) -> np.ndarray:
    gh, gv = scharr_responses(img)
    return (np.abs(gh) + np.abs(gv))[None]


def scharr_magnitude_backward(img, grad_out) -> np.ndarray:
    """Vector-Jacobian product of :func:`scharr_magnitude` (``sign(0) = 0``)."""
    x = _plane(img)
    h, w = x.shape
    gh, gv = scharr_responses(x)
    g = _plane(grad_out)
    dh = g * np.sign(gh)
    dv = g * np.sign(gv)
    dp = np.zeros((h + 2, w + 2))
    for u in range(3):
        for v in range(3):
            dp[u:u + h, v:v + w] += SCHARR_H[u, v] * dh + SCHARR_V[u, v] * dv
    # fold the replicated border back onto the edge pixels
    dp[1, :] += dp[0, :]
    dp[-2, :] += dp[-1, :]
    dp[:, 1] += dp[:, 0]
    dp[:, -2] += dp[:, -1]
    return dp[1:-1, 1:-1][None]


def adaptive_weights(grad_x, grad_y, tau: float = DEFAULT_TAU) -> AdaptiveWeights:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    wx = expit(np.asarray(grad_x, dtype=np.float64) / tau)
    wy = expit(np.asarray(grad_y, dtype=np.float64) / tau)
    zx = wx / (wx + wy)
    return AdaptiveWeights(zx, 1.0 - zx)


@dataclass
class HLIFReference:
    """Source-derived quantities shared by both loss terms.

    ``grad_ref`` is the weighted gradient reference and ``lum_ref`` the
    weighted luminance reference. Neither depends on the fused image.
    """

    weights: AdaptiveWeights
    grad_ref: np.ndarray
    lum_ref: np.ndarray


def make_reference(x, y, tau: float = DEFAULT_TAU) -> HLIFReference:
    x, y = (np.asarray(a, dtype=np.float64) for a in (x, y))
    x, y = (a[None] if a.ndim == 2 else a for a in (x, y))
    if x.shape != y.shape:
        raise DimensionError(f"sources differ in shape: {x.shape} vs {y.shape}")
    gx, gy = scharr_magnitude(x), scharr_magnitude(y)
    w = adaptive_weights(gx, gy, tau)
    return HLIFReference(w, w.zx * gx + w.zy * gy, w.zx * x + w.zy * y)


def _check(f, x, y):
    f, x, y = (np.asarray(a, dtype=np.float64) for a in (f, x, y))
    f, x, y = (a[None] if a.ndim == 2 else a for a in (f, x, y))
    if not (f.shape == x.shape == y.shape) or f.ndim != 3 or f.shape[0] != 1:
        raise DimensionError(f"need matching (1, H, W) planes, got {f.shape}, {x.shape}, {y.shape}")
    return f, x, y


def hif_loss(f, x, y, weights: AdaptiveWeights, normalized: bool = True) -> float:
    f, x, y = _check(f, x, y)
    ref = weights.zx * scharr_magnitude(x) + weights.zy * scharr_magnitude(y)
    total = float(np.abs(scharr_magnitude(f) - ref).sum())
    return total / f[0].size if normalized else total


def lif_loss(f, x, y, weights: AdaptiveWeights, normalized: bool = True) -> float:
    f, x, y = _check(f, x, y)
    r = f - (weights.zx * x + weights.zy * y)
    norm = float(np.sqrt(np.sum(r * r)))
    return norm / np.sqrt(f[0].size) if normalized else norm


def _terms(f, ref: HLIFReference, normalized: bool):
    n = f[0].size
    r_hi = scharr_magnitude(f) - ref.grad_ref
    r_lo = f - ref.lum_ref
    hif = float(np.abs(r_hi).sum())
    lif = float(np.sqrt(np.sum(r_lo * r_lo)))
    if normalized:
        hif /= n
        lif /= np.sqrt(n)
    return hif, lif, r_hi, r_lo


def hlif_loss(f, x, y, tau: float = DEFAULT_TAU, lam: float = 1.0,
              normalized: bool = True, ref: HLIFReference | None = None) -> LossReport:
    """HIF + ``lam`` * LIF with weights computed once from the sources."""
    f, x, y = _check(f, x, y)
    ref = ref or make_reference(x, y, tau)
    hif, lif, _, _ = _terms(f, ref, normalized)
    return LossReport(hif, lif, hif + lam * lif, ref.weights)


def hlif_grad(f, x, y, tau: float = DEFAULT_TAU, lam: float = 1.0,
              normalized: bool = True, ref: HLIFReference | None = None
              ) -> tuple[LossReport, np.ndarray]:
    """Loss report and d(total)/d(f); subgradients use ``sign(0) = 0``."""
    f, x, y = _check(f, x, y)
    ref = ref or make_reference(x, y, tau)
    hif, lif, r_hi, r_lo = _terms(f, ref, normalized)
    n = f[0].size
    d_hi = np.sign(r_hi)
    if normalized:
        d_hi /= n
    df = scharr_magnitude_backward(f, d_hi)
    norm = np.sqrt(np.sum(r_lo * r_lo))
    if norm > 0:
        df += lam * r_lo / (norm * (np.sqrt(n) if normalized else 1.0))
    return LossReport(hif, lif, hif + lam * lif, ref.weights), df
