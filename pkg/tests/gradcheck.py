"""Central finite-difference check of every model parameter."""

from dataclasses import dataclass

import numpy as np

from cdfuse.autograd import backward, forward, kink_signature
from cdfuse.loss import hlif_loss, make_reference
from cdfuse.network import ModelConfig, init_params


@dataclass
class CheckResult:
    checked: int
    excluded: int
    worst: float


def rel_err(g, fd, floor=1e-6):
    return abs(g - fd) / max(abs(g), abs(fd), floor)


def check_gradients(mode="unified", seed=0, size=8, h=1e-5, tau=0.1) -> CheckResult:
    rng = np.random.default_rng(1000 + seed)
    x, y = rng.random((1, size, size)), rng.random((1, size, size))
    params = init_params(ModelConfig(mode=mode), seed=seed)
    ref = make_reference(x, y, tau)
    base = forward(params, x, y)
    sig0 = kink_signature(params, base, tau, ref)
    _, grads = backward(params, x, y, tau, cache=base, ref=ref)

    def probe():
        cache = forward(params, x, y)
        loss = hlif_loss(cache.f, x, y, tau, ref=ref).total
        return loss, np.array_equal(kink_signature(params, cache, tau, ref), sig0)

    checked = excluded = 0
    worst = 0.0
    for p, g in zip(params.tensors(), grads.tensors()):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            lp, same_p = probe()
            flat[i] = old - h
            lm, same_m = probe()
            flat[i] = old
            if not (same_p and same_m):
                excluded += 1
                continue
            checked += 1
            worst = max(worst, rel_err(gflat[i], (lp - lm) / (2 * h)))
    return CheckResult(checked, excluded, worst)
