"""Multiplication counts of joint versus alternating sparse-coding updates.

Closed forms count scalar multiplications in the sparse-coding core only:
``(5 + N) N s^2 H W C^2`` for one cyclic alternating sweep over ``N``
sources and ``4 N s^2 H W C^2`` for one joint block step. The instrumented
counters run the real block implementations with a
:class:`~cdfuse.tensor.MultCounter` attached.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .cdblock import alternating_step, cdblock_step
from .network import ModelConfig, fuse_luminance, init_params
from .tensor import MultCounter

__all__ = [
    "CostReport",
    "m_am",
    "m_joint",
    "reduction",
    "cost_report",
    "count_block_mults",
    "count_network_mults",
    "sufficient_iterations",
]


def _check(N, s, C, H, W):
    for name, v in (("N", N), ("s", s), ("C", C), ("H", H), ("W", W)):
        if int(v) != v or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v}")


def m_am(N: int, s: int, C: int, H: int, W: int) -> int:
    _check(N, s, C, H, W)
    return (5 + N) * N * s * s * H * W * C * C


def m_joint(N: int, s: int, C: int, H: int, W: int) -> int:
    _check(N, s, C, H, W)
    return 4 * N * s * s * H * W * C * C


def reduction(N: int) -> Fraction:
    """Exact relative saving ``(M_AM - M_Joint) / M_AM = (N + 1) / (N + 5)``."""
    _check(N, 1, 1, 1, 1)
    return Fraction(N + 1, N + 5)


@dataclass
class CostReport:
    N: int
    s: int
    C: int
    H: int
    W: int
    m_am: int
    m_joint: int
    reduction: Fraction

    FIELDS = ("N", "s", "C", "H", "W", "m_am", "m_joint", "reduction")

    def row(self) -> list[str]:
        return [str(getattr(self, f)) for f in self.FIELDS[:-1]] + [f"{float(self.reduction):.6f}"]

    def to_text(self) -> str:
        labels = list(self.FIELDS) + ["reduction_pct"]
        values = self.row() + [f"{100 * float(self.reduction):.2f}%"]
        width = max(len(x) for x in labels + values)
        return "\n".join([
            "  ".join(f"{x:>{width}}" for x in labels),
            "  ".join(f"{x:>{width}}" for x in values),
        ])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.FIELDS)
        w.writerow(self.row())
        return buf.getvalue()


def cost_report(N: int, s: int = 3, C: int = 5, H: int = 256, W: int = 256) -> CostReport:
    am, jt = m_am(N, s, C, H, W), m_joint(N, s, C, H, W)
    return CostReport(N, s, C, H, W, am, jt, Fraction(am - jt, am))


def count_block_mults(mode: str, config: ModelConfig | None = None, H: int = 64, W: int = 64) -> int:
    """Measured multiplications of one unified block step or one alternating sweep.

    Only kernel applications inside the update are counted; thresholds,
    feature expansion and the fusion head are excluded. The two-source
    network gives ``N = 2``.
    """
    config = config or ModelConfig()
    c = config.C
    block = init_params(ModelConfig(T=1, C=c, s=config.s)).blocks[0]
    counter = MultCounter()
    if mode == "unified":
        cdblock_step(block, np.zeros((3 * c, H, W)), np.zeros((2 * c, H, W)), counter)
    elif mode == "alternating":
        z = np.zeros((c, H, W))
        alternating_step(block, z, z, z, z, z, counter)
    else:
        raise ValueError(f"mode must be 'unified' or 'alternating', got {mode!r}")
    return counter.mults


def count_network_mults(config: ModelConfig | None = None, H: int = 256, W: int = 256) -> int:
    """Measured multiplications of a whole luminance fusion pass (expansion, blocks, head)."""
    config = config or ModelConfig()
    counter = MultCounter()
    z = np.zeros((1, H, W))
    fuse_luminance(init_params(config), z, z, counter)
    return counter.mults


def sufficient_iterations(L: float, dist0: float, eps: float) -> int:
    """Worst-case proximal-gradient iteration bound ``ceil(L * dist0^2 / (2 eps))``.

    A reference value for a fixed dictionary, not a guarantee for a
    trained network.
    """
    if L <= 0 or eps <= 0 or dist0 < 0:
        raise ValueError("need L > 0, eps > 0 and dist0 >= 0")
    return max(1, math.ceil(L * dist0 * dist0 / (2 * eps)))
