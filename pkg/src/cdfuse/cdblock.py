"""Block-structured dictionary operators and the unfolded update steps.

The combined representation ``W`` stacks three ``C``-channel slabs
``[Z_X; Z_Y; Z_C]``. The combined input ``Z`` stacks the expanded source
features ``[X; Y]``. The dictionary acts as

    D = [[U_X, 0,   C_X],
         [0,   U_Y, C_Y]]

and its zero blocks are never materialised: each non-zero block is one
``C x C x s x s`` convolution.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .tensor import (
    DimensionError,
    MultCounter,
    conv2d,
    conv2d_multi,
    conv2d_transposed,
    conv2d_transposed_multi,
)

__all__ = [
    "KERNEL_NAMES",
    "CDBlockParams",
    "AlternatingParams",
    "soft_threshold",
    "dict_forward",
    "dict_adjoint",
    "cdblock_step",
    "alternating_step",
]

KERNEL_NAMES = ("ux_f", "uy_f", "cx_f", "cy_f", "ux_a", "uy_a", "cx_a", "cy_a")


@dataclass
class CDBlockParams:
    """Parameters of one unfolded block.

    ``*_f`` kernels are applied in the synthesis direction (``D W``) and
    ``*_a`` kernels in the analysis direction (``D^T S``). They are
    independent parameters. ``theta`` holds ``3C`` unconstrained values;
    the threshold actually used is ``|theta|``.
    """

    ux_f: np.ndarray
    uy_f: np.ndarray
    cx_f: np.ndarray
    cy_f: np.ndarray
    ux_a: np.ndarray
    uy_a: np.ndarray
    cx_a: np.ndarray
    cy_a: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        shapes = {getattr(self, n).shape for n in KERNEL_NAMES}
        if len(shapes) != 1:
            raise DimensionError(f"block kernels disagree in shape: {sorted(shapes)}")
        c, c2, s, s2 = shapes.pop()
        if c != c2 or s != s2 or s % 2 == 0:
            raise DimensionError(f"block kernels must be (C, C, s, s) with odd s, got {(c, c2, s, s2)}")
        if np.shape(self.theta) != (3 * c,):
            raise DimensionError(f"theta must have {3 * c} entries, got shape {np.shape(self.theta)}")

    @property
    def channels(self) -> int:
        return self.ux_f.shape[0]

    @property
    def kernel_size(self) -> int:
        return self.ux_f.shape[2]

    @property
    def thresholds(self) -> np.ndarray:
        return np.abs(self.theta)

    def tensors(self) -> list[np.ndarray]:
        return [getattr(self, f.name) for f in fields(self)]

    @classmethod
    def from_tensors(cls, tensors) -> "CDBlockParams":
        return cls(*tensors)

    def tied(self) -> "CDBlockParams":
        """Copy whose analysis kernels equal the synthesis kernels."""
        return CDBlockParams(
            self.ux_f, self.uy_f, self.cx_f, self.cy_f,
            self.ux_f, self.uy_f, self.cx_f, self.cy_f,
            self.theta,
        )


# The alternating baseline uses the same eight kernels; ``theta`` is read as
# the three per-component threshold vectors [theta_X; theta_Y; theta_C].
AlternatingParams = CDBlockParams


def soft_threshold(v, theta) -> np.ndarray:
    """``sign(v) * max(|v| - theta_c, 0)`` with one threshold per channel."""
    v = np.asarray(v, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (v.shape[0],):
        raise DimensionError(f"need {v.shape[0]} thresholds, got shape {theta.shape}")
    t = theta.reshape((-1,) + (1,) * (v.ndim - 1))
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _split(t: np.ndarray, parts: int, c: int, what: str) -> list[np.ndarray]:
    if t.ndim != 3 or t.shape[0] != parts * c:
        raise DimensionError(f"{what} must have {parts * c} channels, got shape {t.shape}")
    return [t[i * c:(i + 1) * c] for i in range(parts)]


def dict_forward(params: CDBlockParams, W, counter: MultCounter | None = None) -> np.ndarray:
    """Apply the structured synthesis operator: ``[U_X Z_X + C_X Z_C; U_Y Z_Y + C_Y Z_C]``."""
    zx, zy, zc = _split(np.asarray(W, dtype=np.float64), 3, params.channels, "W")
    cx, cy = conv2d_multi(zc, [params.cx_f, params.cy_f], counter)
    return np.concatenate([conv2d(zx, params.ux_f, counter) + cx,
                           conv2d(zy, params.uy_f, counter) + cy])


def dict_adjoint(params: CDBlockParams, S, counter: MultCounter | None = None) -> np.ndarray:
    """Apply the structured analysis operator to ``S = [P; Q]``."""
    p, q = _split(np.asarray(S, dtype=np.float64), 2, params.channels, "S")
    ux, cx = conv2d_transposed_multi(p, [params.ux_a, params.cx_a], counter)
    uy, cy = conv2d_transposed_multi(q, [params.uy_a, params.cy_a], counter)
    return np.concatenate([ux, uy, cx + cy])


def cdblock_step(params: CDBlockParams, W_prev, Z, counter: MultCounter | None = None) -> np.ndarray:
    """One joint proximal-gradient update of all three slabs of ``W``."""
    W_prev = np.asarray(W_prev, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    DW = dict_forward(params, W_prev, counter)
    if DW.shape != Z.shape:
        raise DimensionError(f"Z shape {Z.shape} does not match D W shape {DW.shape}")
    residual = DW - Z
    return soft_threshold(W_prev - dict_adjoint(params, residual, counter), params.thresholds)


def alternating_step(params: AlternatingParams, zx, zy, zc, X, Y,
                     counter: MultCounter | None = None):
    """One cyclic sweep of per-component proximal updates (the baseline).

    ``Z_X`` is updated first, then ``Z_Y``, then ``Z_C`` using the freshly
    updated unique components. Each unique-component gradient is applied
    branch-wise, one analysis convolution per dictionary term, which is how
    separate update branches are realised in unfolded alternating networks.
    Algebraically it equals ``U^T (U Z_u + C Z_C - X)``.
    """
    c = params.channels
    zx, zy, zc, X, Y = (np.asarray(a, dtype=np.float64) for a in (zx, zy, zc, X, Y))
    for name, a in (("Z_X", zx), ("Z_Y", zy), ("Z_C", zc), ("X", X), ("Y", Y)):
        if a.ndim != 3 or a.shape[0] != c or a.shape != zx.shape:
            raise DimensionError(f"{name} must be ({c}, H, W) like Z_X, got {a.shape}")
    th = params.thresholds
    th_x, th_y, th_c = th[:c], th[c:2 * c], th[2 * c:]

    grad_x = (conv2d_transposed(conv2d(zx, params.ux_f, counter) - X, params.ux_a, counter)
              + conv2d_transposed(conv2d(zc, params.cx_f, counter), params.ux_a, counter))
    zx_new = soft_threshold(zx - grad_x, th_x)

    grad_y = (conv2d_transposed(conv2d(zy, params.uy_f, counter) - Y, params.uy_a, counter)
              + conv2d_transposed(conv2d(zc, params.cy_f, counter), params.uy_a, counter))
    zy_new = soft_threshold(zy - grad_y, th_y)

    res_x = conv2d(zx_new, params.ux_f, counter) + conv2d(zc, params.cx_f, counter) - X
    res_y = conv2d(zy_new, params.uy_f, counter) + conv2d(zc, params.cy_f, counter) - Y
    grad_c = (conv2d_transposed(res_x, params.cx_a, counter)
              + conv2d_transposed(res_y, params.cy_a, counter))
    zc_new = soft_threshold(zc - grad_c, th_c)
    return zx_new, zy_new, zc_new
