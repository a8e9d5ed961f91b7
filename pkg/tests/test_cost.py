import math
from fractions import Fraction

import numpy as np
import pytest

from cdfuse.cdblock import CDBlockParams, cdblock_step
from cdfuse.cost import (
    cost_report,
    count_block_mults,
    count_network_mults,
    m_am,
    m_joint,
    reduction,
    sufficient_iterations,
)
from cdfuse.network import ModelConfig


def test_formula_values():
    assert m_am(2, 3, 5, 256, 256) == 206_438_400
    assert m_joint(2, 3, 5, 256, 256) == 117_964_800
    assert m_am(1, 3, 5, 8, 8) == 6 * 9 * 64 * 25


@pytest.mark.parametrize("N", [1, 2, 3, 7])
def test_ratio_independent_of_geometry(N):
    for s, C, H, W in [(1, 1, 1, 1), (3, 5, 64, 64), (5, 2, 7, 11)]:
        assert Fraction(m_am(N, s, C, H, W), m_joint(N, s, C, H, W)) == Fraction(5 + N, 4)


def test_linear_in_area():
    assert m_am(2, 3, 5, 512, 256) == 2 * m_am(2, 3, 5, 256, 256)


def test_reduction():
    assert reduction(2) == Fraction(3, 7)
    assert reduction(3) == Fraction(1, 2)
    values = [reduction(n) for n in range(1, 200)]
    assert values == sorted(values) and float(values[-1]) > 0.97


@pytest.mark.parametrize("bad", [0, -1, 1.5])
def test_invalid_n(bad):
    with pytest.raises(ValueError):
        reduction(bad)


def test_report_formats():
    r = cost_report(2)
    text = r.to_text()
    assert "42.86%" in text and "206438400" in text
    lines = r.to_csv().splitlines()
    assert lines[0] == "N,s,C,H,W,m_am,m_joint,reduction"
    assert lines[1].endswith("0.428571")


def test_instrumented_counts_match_formulas():
    cfg = ModelConfig()
    assert count_block_mults("unified", cfg, 64, 64) == m_joint(2, 3, 5, 64, 64)
    assert count_block_mults("alternating", cfg, 64, 64) == m_am(2, 3, 5, 64, 64)
    with pytest.raises(ValueError):
        count_block_mults("joint")


def test_network_count_exceeds_core():
    cfg = ModelConfig()
    assert count_network_mults(cfg, 32, 32) > cfg.T * count_block_mults("unified", cfg, 32, 32)


def test_sufficient_iterations():
    assert sufficient_iterations(1, 1, 0.5) == 1
    for eps in (0.3, 0.01, 1e-4):
        assert sufficient_iterations(2, 3, eps / 2) <= 2 * sufficient_iterations(2, 3, eps) + 1
    with pytest.raises(ValueError):
        sufficient_iterations(0, 1, 1)


def test_ista_meets_bound_on_prototype():
    # Scalar 1x1 prototype: ISTA reaches eps-suboptimality within the bound.
    rng = np.random.default_rng(0)
    c = 3
    ks = [rng.standard_normal((c, c, 1, 1)) for _ in range(4)]
    D = np.block([[ks[0][:, :, 0, 0], np.zeros((c, c)), ks[2][:, :, 0, 0]],
                  [np.zeros((c, c)), ks[1][:, :, 0, 0], ks[3][:, :, 0, 0]]])
    L = np.linalg.norm(D, 2) ** 2
    k = [a / math.sqrt(L) for a in ks]
    theta = np.full(3 * c, 0.05)
    block = CDBlockParams(*k, *k, theta=theta)
    Dn = D / math.sqrt(L)
    z = rng.standard_normal((2 * c, 1, 1))

    def F(w):
        r = Dn @ w.ravel() - z.ravel()
        return 0.5 * r @ r + theta @ np.abs(w.ravel())

    w = np.zeros((3 * c, 1, 1))
    for _ in range(20000):
        w = cdblock_step(block, w, z)
    f_star, w_star = F(w), w.copy()
    eps = 1e-3
    bound = sufficient_iterations(1.0, float(np.linalg.norm(w_star)), eps)
    w = np.zeros((3 * c, 1, 1))
    for t in range(1, bound + 1):
        w = cdblock_step(block, w, z)
        if F(w) - f_star <= eps:
            break
    assert F(w) - f_star <= eps
