"""Dense tensor arithmetic on float64 numpy arrays.

Images and feature maps are ``(C, H, W)`` arrays; convolution kernels are
``(Cout, Cin, k, k)``. Convolutions are cross-correlations with zero
"same" padding and unit stride.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "DimensionError",
    "MultCounter",
    "as_tensor",
    "conv2d",
    "conv2d_transposed",
    "conv2d_multi",
    "conv2d_transposed_multi",
    "conv2d_kernel_grad",
    "add",
    "sub",
    "hadamard",
    "scale",
    "abs_",
    "sign",
    "max0",
    "sigmoid",
    "l1_sum",
    "l2_norm",
    "mean",
]


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible."""


@dataclass
class MultCounter:
    """Accumulates scalar multiplications performed by kernel applications.

    One multiplication is counted per kernel tap per output element,
    including taps that land on zero padding.
    """

    mults: int = 0

    def add(self, n: int) -> None:
        self.mults += int(n)


def as_tensor(a) -> np.ndarray:
    t = np.asarray(a, dtype=np.float64)
    if t.ndim > 4 or any(n < 1 for n in t.shape):
        raise DimensionError(f"invalid tensor shape {t.shape}")
    return t


def _check_conv(x: np.ndarray, kernel: np.ndarray, in_axis: int) -> int:
    if x.ndim != 3:
        raise DimensionError(f"expected a (C, H, W) input, got shape {x.shape}")
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise DimensionError(f"expected a (Cout, Cin, k, k) kernel, got shape {kernel.shape}")
    k = kernel.shape[2]
    if k % 2 == 0:
        raise DimensionError(f"kernel size must be odd, got {k}")
    if kernel.shape[in_axis] != x.shape[0]:
        raise DimensionError(
            f"kernel expects {kernel.shape[in_axis]} channels, input has {x.shape[0]}"
        )
    return k


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """``(C * k * k, H * W)`` matrix of zero-padded patches."""
    c, h, w = x.shape
    if k == 1:
        return x.reshape(c, h * w)
    p = k // 2
    xp = np.zeros((c, h + 2 * p, w + 2 * p))
    xp[:, p:p + h, p:p + w] = x
    cols = np.empty((c, k, k, h, w))
    for u in range(k):
        for v in range(k):
            cols[:, u, v] = xp[:, u:u + h, v:v + w]
    return cols.reshape(c * k * k, h * w)


def conv2d_multi(x, kernels, counter: MultCounter | None = None) -> list[np.ndarray]:
    """:func:`conv2d` of one input with several kernels, sharing the patch matrix."""
    x = np.asarray(x, dtype=np.float64)
    kernels = [np.asarray(kn, dtype=np.float64) for kn in kernels]
    ks = {_check_conv(x, kn, 1) for kn in kernels}
    if len(ks) != 1:
        raise DimensionError("kernels passed to conv2d_multi must share a size")
    k = ks.pop()
    _, h, w = x.shape
    if counter is not None:
        for kn in kernels:
            counter.add(kn.shape[0] * kn.shape[1] * k * k * h * w)
    cols = _im2col(x, k)
    if len(kernels) == 1:
        return [(kernels[0].reshape(kernels[0].shape[0], -1) @ cols).reshape(-1, h, w)]
    stacked = np.concatenate([kn.reshape(kn.shape[0], -1) for kn in kernels])
    out = (stacked @ cols).reshape(-1, h, w)
    splits = np.cumsum([kn.shape[0] for kn in kernels])[:-1]
    return np.split(out, splits)


def conv2d(x, kernel, counter: MultCounter | None = None) -> np.ndarray:
    """Same-padded 2-D cross-correlation.

    ``out[o, i, j] = sum_{c,u,v} kernel[o, c, u, v] * xpad[c, i + u, j + v]``
    """
    return conv2d_multi(x, [kernel], counter)[0]


def _adjoint_kernel(kernel: np.ndarray) -> np.ndarray:
    return kernel.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1]


def conv2d_transposed(g, kernel, counter: MultCounter | None = None) -> np.ndarray:
    """Adjoint of :func:`conv2d` with respect to its input.

    ``g`` has ``Cout`` channels and the result has ``Cin`` channels, so that
    ``<conv2d(a, K), b> == <a, conv2d_transposed(b, K)>``.
    """
    return conv2d_transposed_multi(g, [kernel], counter)[0]


def conv2d_transposed_multi(g, kernels, counter: MultCounter | None = None) -> list[np.ndarray]:
    g = np.asarray(g, dtype=np.float64)
    kernels = [np.asarray(kn, dtype=np.float64) for kn in kernels]
    for kn in kernels:
        _check_conv(g, kn, 0)
    return conv2d_multi(g, [_adjoint_kernel(kn) for kn in kernels], counter)


def conv2d_kernel_grad(x, g, k: int) -> np.ndarray:
    """Gradient of ``<g, conv2d(x, K)>`` with respect to ``K`` (shape ``(Cout, Cin, k, k)``)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if x.ndim != 3 or g.ndim != 3 or x.shape[1:] != g.shape[1:]:
        raise DimensionError(f"spatial mismatch: input {x.shape}, output grad {g.shape}")
    cout = g.shape[0]
    return (g.reshape(cout, -1) @ _im2col(x, k).T).reshape(cout, x.shape[0], k, k)


def _same(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def add(a, b):
    a, b = _same(a, b)
    return a + b


def sub(a, b):
    a, b = _same(a, b)
    return a - b


def hadamard(a, b):
    a, b = _same(a, b)
    return a * b


def scale(a, c: float):
    return np.asarray(a, dtype=np.float64) * c


def abs_(a):
    return np.abs(np.asarray(a, dtype=np.float64))


def sign(a):
    return np.sign(np.asarray(a, dtype=np.float64))


def max0(a):
    return np.maximum(np.asarray(a, dtype=np.float64), 0.0)


def sigmoid(a):
    return expit(np.asarray(a, dtype=np.float64))


def l1_sum(a) -> float:
    return float(np.abs(np.asarray(a, dtype=np.float64)).sum())


def l2_norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sqrt(np.sum(a * a)))


def mean(a) -> float:
    return float(np.mean(np.asarray(a, dtype=np.float64)))
