"""Reverse-mode gradients of the HLIF loss through the fusion network.

The graph is fixed, so every adjoint is written out by hand. Conventions at
non-differentiable points: soft-threshold passes gradient only where
``|v| > theta``; ``|.|`` has derivative 0 at 0; the output clamp passes
gradient on the closed interval ``[0, 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cdblock import CDBlockParams, dict_adjoint, dict_forward, soft_threshold
from .loss import (
    DEFAULT_TAU,
    HLIFReference,
    LossReport,
    hlif_grad,
    make_reference,
    scharr_magnitude,
    scharr_responses,
)
from .network import ModelParams, _check_pair, expand
from .tensor import conv2d, conv2d_kernel_grad, conv2d_transposed

__all__ = ["ForwardCache", "forward", "backward", "kink_signature"]


def _theta_channels(v: np.ndarray) -> np.ndarray:
    return v.reshape(v.shape[0], -1)


def _st_backward(v, theta_raw, g):
    """Gradients of ``soft_threshold(v, |theta_raw|)`` w.r.t. ``v`` and ``theta_raw``."""
    th = np.abs(theta_raw).reshape(-1, 1, 1)
    active = np.abs(v) > th
    dv = np.where(active, g, 0.0)
    dth = -_theta_channels(np.sign(v) * dv).sum(axis=1)
    return dv, dth * np.sign(theta_raw)


@dataclass
class ForwardCache:
    x: np.ndarray
    y: np.ndarray
    Z: np.ndarray
    steps: list = field(default_factory=list)
    W: np.ndarray = None
    M: np.ndarray = None
    F: np.ndarray = None
    P: np.ndarray = None
    f: np.ndarray = None


def forward(params: ModelParams, x, y) -> ForwardCache:
    """Fused output together with every intermediate the backward pass needs."""
    x, y = _check_pair(x, y)
    c = params.config.C
    Z = expand(params, x, y)
    cache = ForwardCache(x, y, Z)
    W = np.zeros((3 * c,) + Z.shape[1:])
    for block in params.blocks:
        if params.config.mode == "unified":
            R = dict_forward(block, W) - Z
            V = W - dict_adjoint(block, R)
            cache.steps.append((W, R, V))
            W = soft_threshold(V, block.thresholds)
        else:
            step = _alt_forward(block, W[:c], W[c:2 * c], W[2 * c:], Z[:c], Z[c:])
            cache.steps.append(step)
            W = np.concatenate(step["out"])
    cache.W = W
    cache.M = conv2d(W, params.d_f1) + Z
    cache.F = conv2d(cache.M, params.d_f2)
    cache.P = conv2d(cache.F, params.proj)
    cache.f = np.clip(cache.P, 0.0, 1.0)
    return cache


def _alt_forward(b: CDBlockParams, zx, zy, zc, X, Y) -> dict:
    c = b.channels
    th = b.thresholds
    ax = conv2d(zx, b.ux_f) - X
    bx = conv2d(zc, b.cx_f)
    vx = zx - conv2d_transposed(ax, b.ux_a) - conv2d_transposed(bx, b.ux_a)
    zx1 = soft_threshold(vx, th[:c])
    ay = conv2d(zy, b.uy_f) - Y
    by = conv2d(zc, b.cy_f)
    vy = zy - conv2d_transposed(ay, b.uy_a) - conv2d_transposed(by, b.uy_a)
    zy1 = soft_threshold(vy, th[c:2 * c])
    rx = conv2d(zx1, b.ux_f) + conv2d(zc, b.cx_f) - X
    ry = conv2d(zy1, b.uy_f) + conv2d(zc, b.cy_f) - Y
    vc = zc - conv2d_transposed(rx, b.cx_a) - conv2d_transposed(ry, b.cy_a)
    zc1 = soft_threshold(vc, th[2 * c:])
    return dict(inp=(zx, zy, zc), ax=ax, bx=bx, vx=vx, ay=ay, by=by, vy=vy,
                rx=rx, ry=ry, vc=vc, out=(zx1, zy1, zc1))


def _unified_backward(b: CDBlockParams, step, dW_new, grads: dict):
    """Returns (dW_prev, dZ) and accumulates parameter gradients into ``grads``."""
    W_prev, R, V = step
    c, k = b.channels, b.kernel_size
    dV, grads["theta"] = _st_backward(V, b.theta, dW_new)
    dW_prev = dV.copy()
    # V = W_prev - A(R), A = structured analysis operator
    gA = -dV
    ga_x, ga_y, ga_c = gA[:c], gA[c:2 * c], gA[2 * c:]
    P, Q = R[:c], R[c:]
    grads["ux_a"] = conv2d_kernel_grad(ga_x, P, k)
    grads["uy_a"] = conv2d_kernel_grad(ga_y, Q, k)
    grads["cx_a"] = conv2d_kernel_grad(ga_c, P, k)
    grads["cy_a"] = conv2d_kernel_grad(ga_c, Q, k)
    dP = conv2d(ga_x, b.ux_a) + conv2d(ga_c, b.cx_a)
    dQ = conv2d(ga_y, b.uy_a) + conv2d(ga_c, b.cy_a)
    # R = D(W_prev) - Z
    zx, zy, zc = W_prev[:c], W_prev[c:2 * c], W_prev[2 * c:]
    grads["ux_f"] = conv2d_kernel_grad(zx, dP, k)
    grads["cx_f"] = conv2d_kernel_grad(zc, dP, k)
    grads["uy_f"] = conv2d_kernel_grad(zy, dQ, k)
    grads["cy_f"] = conv2d_kernel_grad(zc, dQ, k)
    dR = np.concatenate([dP, dQ])
    dW_prev += dict_adjoint(b.tied(), dR)
    return dW_prev, -dR


def _alt_backward(b: CDBlockParams, s: dict, dout, grads: dict):
    c, k = b.channels, b.kernel_size
    zx, zy, zc = s["inp"]
    zx1, zy1, _ = s["out"]
    dzx1, dzy1, dzc1 = (np.array(a) for a in dout)
    g = {n: 0.0 for n in ("ux_f", "uy_f", "cx_f", "cy_f", "ux_a", "uy_a", "cx_a", "cy_a")}
    dth = np.zeros(3 * c)

    # common component: vc = zc - cx_a^T rx - cy_a^T ry
    dvc, dth[2 * c:] = _st_backward(s["vc"], b.theta[2 * c:], dzc1)
    dzc = dvc.copy()
    g["cx_a"] += conv2d_kernel_grad(-dvc, s["rx"], k)
    g["cy_a"] += conv2d_kernel_grad(-dvc, s["ry"], k)
    drx = -conv2d(dvc, b.cx_a)
    dry = -conv2d(dvc, b.cy_a)
    dX = -drx
    dY = -dry
    g["ux_f"] += conv2d_kernel_grad(zx1, drx, k)
    g["cx_f"] += conv2d_kernel_grad(zc, drx, k)
    g["uy_f"] += conv2d_kernel_grad(zy1, dry, k)
    g["cy_f"] += conv2d_kernel_grad(zc, dry, k)
    dzx1 += conv2d_transposed(drx, b.ux_f)
    dzy1 += conv2d_transposed(dry, b.uy_f)
    dzc += conv2d_transposed(drx, b.cx_f) + conv2d_transposed(dry, b.cy_f)

    # unique components: v = z - u_a^T (u_f z - X) - u_a^T (c_f zc)
    for tag, z, dz1, sl, X_sign in (("x", zx, dzx1, slice(0, c), 0), ("y", zy, dzy1, slice(c, 2 * c), 1)):
        u_f, c_f, u_a = f"u{tag}_f", f"c{tag}_f", f"u{tag}_a"
        dv, dth[sl] = _st_backward(s[f"v{tag}"], b.theta[sl], dz1)
        dz = dv.copy()
        ga = -dv
        g[u_a] += conv2d_kernel_grad(ga, s[f"a{tag}"], k) + conv2d_kernel_grad(ga, s[f"b{tag}"], k)
        da = conv2d(ga, getattr(b, u_a))
        # a = u_f z - X ; b = c_f zc (same adjoint input da)
        g[u_f] += conv2d_kernel_grad(z, da, k)
        g[c_f] += conv2d_kernel_grad(zc, da, k)
        dz += conv2d_transposed(da, getattr(b, u_f))
        dzc += conv2d_transposed(da, getattr(b, c_f))
        if X_sign == 0:
            dX -= da
            dzx = dz
        else:
            dY -= da
            dzy = dz
    grads.update(g)
    grads["theta"] = dth
    return np.concatenate([dzx, dzy, dzc]), np.concatenate([dX, dY])


def backward(params: ModelParams, x, y, tau: float = DEFAULT_TAU, lam: float = 1.0,
             normalized: bool = True, cache: ForwardCache | None = None,
             ref: HLIFReference | None = None) -> tuple[LossReport, ModelParams]:
    """HLIF loss of the fused output and its gradient w.r.t. every parameter.

    The gradient is returned as a :class:`ModelParams` of matching shapes.
    """
    cache = cache or forward(params, x, y)
    cfg = params.config
    c, s = cfg.C, cfg.s
    report, df = hlif_grad(cache.f, cache.x, cache.y, tau, lam, normalized, ref)

    dP = np.where((cache.P >= 0.0) & (cache.P <= 1.0), df, 0.0)
    d_proj = conv2d_kernel_grad(cache.F, dP, 1)
    dF = conv2d_transposed(dP, params.proj)
    d_f2 = conv2d_kernel_grad(cache.M, dF, 1)
    dM = conv2d_transposed(dF, params.d_f2)
    d_f1 = conv2d_kernel_grad(cache.W, dM, 1)
    dW = conv2d_transposed(dM, params.d_f1)
    dZ = dM.copy()

    block_grads = []
    for block, step in zip(reversed(params.blocks), reversed(cache.steps)):
        g: dict = {}
        if cfg.mode == "unified":
            dW, dZ_step = _unified_backward(block, step, dW, g)
        else:
            dW, dZ_step = _alt_backward(block, step, (dW[:c], dW[c:2 * c], dW[2 * c:]), g)
        dZ += dZ_step
        block_grads.append(CDBlockParams(
            g["ux_f"], g["uy_f"], g["cx_f"], g["cy_f"],
            g["ux_a"], g["uy_a"], g["cx_a"], g["cy_a"], g["theta"],
        ))
    block_grads.reverse()

    d_ex = conv2d_kernel_grad(cache.x, dZ[:c], s)
    d_ey = conv2d_kernel_grad(cache.y, dZ[c:], s)
    grads = ModelParams(cfg, d_ex, d_ey, block_grads, d_f1, d_f2, d_proj)
    return report, grads


def kink_signature(params: ModelParams, cache: ForwardCache, tau: float = DEFAULT_TAU,
                   ref: HLIFReference | None = None) -> np.ndarray:
    """Boolean pattern of which side of every kink the computation sits on.

    Two parameter settings with equal signatures lie in the same smooth
    piece of the loss, which is what finite-difference checks need.
    """
    parts = []
    for block, step in zip(params.blocks, cache.steps):
        th = block.thresholds
        c = block.channels
        if params.config.mode == "unified":
            vs = [(step[2], th)]
        else:
            vs = [(step["vx"], th[:c]), (step["vy"], th[c:2 * c]), (step["vc"], th[2 * c:])]
        for v, t in vs:
            parts += [v > t.reshape(-1, 1, 1), v < -t.reshape(-1, 1, 1)]
    parts += [cache.P >= 0.0, cache.P <= 1.0]
    gh, gv = scharr_responses(cache.f)
    parts += [gh > 0, gh < 0, gv > 0, gv < 0]
    ref = ref or make_reference(cache.x, cache.y, tau)
    r = scharr_magnitude(cache.f) - ref.grad_ref
    parts += [r > 0, r < 0]
    return np.concatenate([np.ravel(p) for p in parts])
