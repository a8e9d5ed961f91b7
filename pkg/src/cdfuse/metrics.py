"""Fusion quality metrics: MSE, PSNR, SSIM, CC and Nabf.

Every metric compares the fused image ``f`` with each source ``a`` and
``b`` and averages the two scores (Nabf uses both sources jointly). Inputs
are luminance planes in ``[0, 1]``; they are rescaled to the 8-bit range
``[0, 255]`` internally, which is the scale the reported MSE and PSNR
values refer to.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import sobel
from scipy.signal import correlate2d

from .tensor import DimensionError

__all__ = [
    "MetricReport",
    "NABF_CONSTANTS",
    "mse",
    "mse_per_source",
    "psnr",
    "psnr_per_source",
    "ssim",
    "ssim_single",
    "cc",
    "nabf",
    "evaluate",
]

PEAK = 255.0


@dataclass
class MetricReport:
    mse: float
    psnr: float
    ssim: float
    cc: float
    nabf: float

    def as_dict(self) -> dict:
        return asdict(self)


def _planes(*imgs) -> list[np.ndarray]:
    out = []
    for img in imgs:
        a = np.asarray(img, dtype=np.float64)
        if a.ndim == 3 and a.shape[0] == 1:
            a = a[0]
        if a.ndim != 2:
            raise DimensionError(f"expected a (1, H, W) or (H, W) plane, got {a.shape}")
        out.append(a * PEAK)
    if any(o.shape != out[0].shape for o in out):
        raise DimensionError(f"shape mismatch: {[o.shape for o in out]}")
    return out


def mse_per_source(f, a, b) -> tuple[float, float]:
    f, a, b = _planes(f, a, b)
    return float(np.mean((f - a) ** 2)), float(np.mean((f - b) ** 2))


def mse(f, a, b) -> float:
    return float(np.mean(mse_per_source(f, a, b)))


def psnr_per_source(f, a, b) -> tuple[float, float]:
    """PSNR against each source in dB; ``inf`` where the MSE is zero."""
    return tuple(math.inf if m == 0 else 10.0 * math.log10(PEAK**2 / m)
                 for m in mse_per_source(f, a, b))


def psnr(f, a, b) -> float:
    """Average PSNR over sources.

    A source matched exactly (``inf``) is left out of the average when the
    other is finite; if both are exact the result is ``inf``.
    """
    vals = [v for v in psnr_per_source(f, a, b) if math.isfinite(v)]
    return float(np.mean(vals)) if vals else math.inf


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_single(x: np.ndarray, y: np.ndarray, window: int = 11, sigma: float = 1.5) -> float:
    """Single-scale SSIM of two planes already on the 0-255 scale.

    Gaussian-weighted local statistics over every fully contained window.
    The window shrinks (keeping odd size) for images smaller than it.
    """
    size = min(window, *x.shape)
    if size % 2 == 0:
        size -= 1
    w = _gaussian_window(size, sigma)
    c1 = (0.01 * PEAK) ** 2
    c2 = (0.03 * PEAK) ** 2

    def filt(z):
        return correlate2d(z, w, mode="valid")

    mu_x, mu_y = filt(x), filt(y)
    sxx = filt(x * x) - mu_x**2
    syy = filt(y * y) - mu_y**2
    sxy = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


def ssim(f, a, b) -> float:
    f, a, b = _planes(f, a, b)
    return 0.5 * (ssim_single(f, a) + ssim_single(f, b))


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    den = math.sqrt(float(np.sum(xc * xc)) * float(np.sum(yc * yc)))
    return 0.0 if den == 0 else float(np.sum(xc * yc)) / den


def cc(f, a, b) -> float:
    f, a, b = _planes(f, a, b)
    return 0.5 * (_pearson(f, a) + _pearson(f, b))


# Edge-preservation model of the gradient-based fusion performance family.
NABF_CONSTANTS = {
    "Tg": 0.9994, "kg": -15.0, "Dg": 0.5,
    "Ta": 0.9879, "ka": -22.0, "Da": 0.8,
    "L": 1.0,
}


def _edges(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    sx = sobel(img, axis=1, mode="reflect")
    sy = sobel(img, axis=0, mode="reflect")
    g = np.hypot(sx, sy)
    alpha = np.arctan2(sy, sx)
    # fold orientation into (-pi/2, pi/2], i.e. atan(sy / sx)
    alpha = np.where(alpha > np.pi / 2, alpha - np.pi, alpha)
    alpha = np.where(alpha <= -np.pi / 2, alpha + np.pi, alpha)
    return g, alpha


def _preservation(g_s, a_s, g_f, a_f, k) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(g_s > g_f, g_f / g_s, g_s / g_f)
    rel = np.where((g_s == 0) & (g_f == 0), 1.0, rel)
    orient = 1.0 - np.abs(a_s - a_f) / (np.pi / 2)
    qg = k["Tg"] / (1.0 + np.exp(k["kg"] * (rel - k["Dg"])))
    qa = k["Ta"] / (1.0 + np.exp(k["ka"] * (orient - k["Da"])))
    return qg * qa


def nabf(f, a, b) -> float:
    """Modified fusion-artifact measure.

    Counts edge information in ``f`` stronger than in both sources, weighted
    by the loss of edge preservation and by source edge strength.
    """
    f, a, b = _planes(f, a, b)
    k = NABF_CONSTANTS
    g_f, a_f = _edges(f)
    g_a, a_a = _edges(a)
    g_b, a_b = _edges(b)
    q_af = _preservation(g_a, a_a, g_f, a_f, k)
    q_bf = _preservation(g_b, a_b, g_f, a_f, k)
    w_a = g_a ** k["L"]
    w_b = g_b ** k["L"]
    artifact = (g_f > g_a) & (g_f > g_b)
    den = float(np.sum(w_a + w_b))
    if den == 0:
        return 0.0
    num = np.sum(np.where(artifact, (1 - q_af) * w_a + (1 - q_bf) * w_b, 0.0))
    return float(num) / den


def evaluate(f, a, b) -> MetricReport:
    return MetricReport(mse(f, a, b), psnr(f, a, b), ssim(f, a, b), cc(f, a, b), nabf(f, a, b))
