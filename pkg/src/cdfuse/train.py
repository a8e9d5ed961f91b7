"""Unsupervised training: Adam, synthetic exposure pairs and the epoch loop."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .autograd import backward
from .dataset import load_luminance_pairs
from .loss import DEFAULT_TAU, hlif_loss, make_reference
from .network import ModelConfig, ModelParams, fuse_luminance, init_params

__all__ = [
    "TrainConfig",
    "AdamState",
    "TrainResult",
    "adam_init",
    "adam_step",
    "synth_scene",
    "synth_exposure_pair",
    "synth_pairs",
    "mean_loss",
    "train",
    "write_history_csv",
]

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 0.0005
    batch_size: int = 10
    epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    tau: float = DEFAULT_TAU
    lam: float = 1.0
    crop: int = 64
    init_gain: float = 1.0
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be at least 1, got {self.epochs}")
        if self.crop < 1:
            raise ValueError(f"crop must be positive, got {self.crop}")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0


def adam_init(params: ModelParams) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params.tensors()],
                     [np.zeros_like(p) for p in params.tensors()])


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState,
              config: TrainConfig) -> tuple[ModelParams, AdamState]:
    """Bias-corrected Adam. Returns new parameters and state; inputs are not modified."""
    b1, b2 = config.beta1, config.beta2
    t = state.t + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params.tensors(), grads.tensors(), state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_p.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps))
        new_m.append(m)
        new_v.append(v)
    return ModelParams.from_tensors(params.config, new_p), AdamState(new_m, new_v, t)


def synth_scene(h: int, w: int, seed: int | None = None) -> np.ndarray:
    """Random ``(1, h, w)`` scene in ``[0, 1]``: smooth shading, flat shapes and fine texture."""
    rng = np.random.default_rng(seed)
    img = gaussian_filter(rng.standard_normal((h, w)), sigma=max(h, w) / 8.0)
    img = (img - img.min()) / (np.ptp(img) + 1e-12)
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(3, 7)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        r = rng.uniform(0.08, 0.25) * min(h, w)
        level = rng.uniform(0.0, 1.0)
        if rng.random() < 0.5:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 < r * r
        else:
            mask = (np.abs(yy - cy) < r) & (np.abs(xx - cx) < r * rng.uniform(0.5, 1.5))
        img = np.where(mask, 0.5 * img + 0.5 * level, img)
    img += 0.04 * gaussian_filter(rng.standard_normal((h, w)), sigma=0.8)
    return np.clip(img, 0.0, 1.0)[None]


def synth_exposure_pair(base, gamma_under: float = 2.5, gamma_over: float = 0.4,
                        seed: int | None = None, noise: float = 0.0):
    """Over- and under-exposed renderings ``(x, y)`` of ``base`` by power curves.

    ``noise`` is the standard deviation of optional additive Gaussian noise
    (0.005 is a realistic sensor level).
    """
    base = np.clip(np.asarray(base, dtype=np.float64), 0.0, 1.0)
    x = base ** gamma_over
    y = base ** gamma_under
    if noise > 0:
        rng = np.random.default_rng(seed)
        x = np.clip(x + rng.normal(0.0, noise, x.shape), 0.0, 1.0)
        y = np.clip(y + rng.normal(0.0, noise, y.shape), 0.0, 1.0)
    return x, y


def synth_pairs(n: int, size: int = 64, seed: int = 0, noise: float = 0.0) -> list[tuple]:
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        s = int(rng.integers(2**31))
        pairs.append(synth_exposure_pair(synth_scene(size, size, s), seed=s + 1, noise=noise))
    return pairs


def mean_loss(params: ModelParams, pairs, tau: float = DEFAULT_TAU, lam: float = 1.0) -> float:
    """Mean HLIF total of the network output over full-size pairs."""
    totals = [hlif_loss(fuse_luminance(params, x, y), x, y, tau, lam).total for x, y in pairs]
    return float(np.mean(totals))


@dataclass
class TrainResult:
    params: ModelParams
    history: list  # (epoch, mean_hif, mean_lif, mean_total)
    steps: int


def _crop(rng, x, y, size):
    _, h, w = x.shape
    if h <= size and w <= size:
        return x, y
    i = int(rng.integers(0, max(h - size, 0) + 1))
    j = int(rng.integers(0, max(w - size, 0) + 1))
    return x[:, i:i + size, j:j + size], y[:, i:i + size, j:j + size]


def train(config: TrainConfig, data, params: ModelParams | None = None,
          progress=None) -> TrainResult:
    """Train on a pair directory or a sequence of ``(x, y)`` luminance planes.

    Each epoch visits every pair once in a seeded random order, in batches of
    ``batch_size``; each pair contributes one random crop. The batch
    gradient is the mean of the per-pair gradients, summed in batch order.
    ``progress(epoch, hif, lif, total)`` is called after every epoch.
    """
    pairs = load_luminance_pairs(data) if isinstance(data, (str, Path)) else list(data)
    if not pairs:
        raise ValueError("training data is empty")
    rng = np.random.default_rng(config.seed)
    if params is None:
        params = init_params(config.model, seed=config.seed, gain=config.init_gain)
    state = adam_init(params)
    history = []
    steps = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(pairs))
        sums = np.zeros(3)
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            acc = None
            for idx in batch:
                x, y = _crop(rng, *pairs[idx], config.crop)
                ref = make_reference(x, y, config.tau)
                report, grads = backward(params, x, y, config.tau, config.lam, ref=ref)
                sums += (report.hif, report.lif, report.total)
                g = grads.tensors()
                acc = g if acc is None else [a + b for a, b in zip(acc, g)]
            mean_grads = ModelParams.from_tensors(params.config, [a / len(batch) for a in acc])
            params, state = adam_step(params, mean_grads, state, config)
            steps += 1
        row = (epoch, *(sums / len(pairs)))
        history.append(row)
        log.debug("epoch %d hif %.6f lif %.6f total %.6f", *row)
        if progress is not None:
            progress(*row)
    return TrainResult(params, history, steps)


def write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_hif", "mean_lif", "mean_total"])
        for epoch, hif, lif, total in history:
            w.writerow([epoch, f"{hif:.8f}", f"{lif:.8f}", f"{total:.8f}"])
