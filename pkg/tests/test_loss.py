import numpy as np
import pytest
from scipy.special import expit

from cdfuse.loss import (
    SCHARR_H,
    adaptive_weights,
    hif_loss,
    hlif_grad,
    hlif_loss,
    lif_loss,
    scharr_magnitude,
    scharr_magnitude_backward,
)


def scharr_loops(img):
    """Per-pixel ``|G_h| + |G_v|`` with replicated borders."""
    h, w = img.shape
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            gh = gv = 0.0
            for a in range(3):
                for b in range(3):
                    v = img[min(max(i + a - 1, 0), h - 1), min(max(j + b - 1, 0), w - 1)]
                    gh += SCHARR_H[a, b] * v
                    gv += SCHARR_H[b, a] * v
            out[i, j] = abs(gh) + abs(gv)
    return out


def test_constant_image_has_no_gradient():
    assert not scharr_magnitude(np.full((1, 6, 7), 0.4)).any()


def test_step_edge_response():
    img = np.zeros((1, 7, 8))
    img[0, :, 4:] = 1.0
    g = scharr_magnitude(img)[0]
    # Each column of the pair straddling the edge responds with 1.
    np.testing.assert_allclose(g[:, 3], 1.0)
    np.testing.assert_allclose(g[:, 4], 1.0)
    assert g[:, 3].sum() + g[:, 4].sum() == pytest.approx(2.0 * 7)
    assert not g[:, [0, 1, 2, 5, 6, 7]].any()


def test_rotation_rotates_magnitude():
    rng = np.random.default_rng(0)
    img = rng.random((9, 9))
    np.testing.assert_allclose(scharr_magnitude(np.rot90(img)[None])[0],
                               np.rot90(scharr_magnitude(img[None])[0]), atol=1e-12)


def test_magnitude_matches_loops():
    rng = np.random.default_rng(1)
    img = rng.random((6, 9))
    np.testing.assert_allclose(scharr_magnitude(img[None])[0], scharr_loops(img), atol=1e-12)


def test_magnitude_backward_is_vjp():
    rng = np.random.default_rng(2)
    img = rng.random((1, 7, 7))
    g = rng.standard_normal((1, 7, 7))
    d = rng.standard_normal((1, 7, 7))
    h = 1e-6
    fd = (np.vdot(g, scharr_magnitude(img + h * d)) - np.vdot(g, scharr_magnitude(img - h * d))) / (2 * h)
    assert np.vdot(scharr_magnitude_backward(img, g), d) == pytest.approx(fd, rel=1e-6)


def test_adaptive_weight_values():
    tau = 0.1
    w = adaptive_weights(np.array([tau]), np.array([0.0]), tau)
    assert w.zx[0] == pytest.approx(expit(1.0) / (expit(1.0) + 0.5))
    assert w.zx[0] == pytest.approx(0.5939, abs=1e-4)
    big = adaptive_weights(np.array([1e3]), np.array([0.0]), tau)
    assert big.zx[0] == pytest.approx(2 / 3)


def test_weights_sum_to_one_and_symmetric():
    rng = np.random.default_rng(3)
    a, b = rng.random(100), rng.random(100)
    w = adaptive_weights(a, b)
    assert np.all(w.zx + w.zy == 1.0)
    assert np.all(adaptive_weights(a, a).zx == 0.5)


def test_tau_must_be_positive():
    with pytest.raises(ValueError):
        adaptive_weights(np.zeros(2), np.zeros(2), tau=0.0)


def test_hif_matches_oracle():
    rng = np.random.default_rng(4)
    f, x, y = (rng.random((8, 8)) for _ in range(3))
    gx, gy, gf = scharr_loops(x), scharr_loops(y), scharr_loops(f)
    wx, wy = expit(gx / 0.1), expit(gy / 0.1)
    zx = wx / (wx + wy)
    want = np.mean(np.abs(gf - (zx * gx + (1 - zx) * gy)))
    w = adaptive_weights(scharr_magnitude(x[None]), scharr_magnitude(y[None]))
    assert hif_loss(f, x, y, w) == pytest.approx(want, abs=1e-12)


def test_lif_zero_at_reference_and_offset():
    rng = np.random.default_rng(5)
    x, y = rng.random((1, 8, 8)), rng.random((1, 8, 8))
    w = adaptive_weights(scharr_magnitude(x), scharr_magnitude(y))
    assert lif_loss(w.zx * x + w.zy * y, x, y, w) == pytest.approx(0.0, abs=1e-15)
    ww = adaptive_weights(scharr_magnitude(x), scharr_magnitude(x))
    assert lif_loss(x + 0.07, x, x, ww) == pytest.approx(0.07)


def test_total_and_trivial_zeros():
    rng = np.random.default_rng(6)
    f, x, y = (rng.random((1, 8, 8)) for _ in range(3))
    r = hlif_loss(f, x, y)
    assert r.total == pytest.approx(r.hif + r.lif)
    assert hlif_loss(x, x, x).total == 0.0
    c = np.full((1, 8, 8), 0.3)
    assert hlif_loss(c, c, c).total == 0.0


def test_moving_away_from_reference_increases_loss():
    rng = np.random.default_rng(7)
    x, y = rng.random((1, 8, 8)), rng.random((1, 8, 8))
    w = adaptive_weights(scharr_magnitude(x), scharr_magnitude(y))
    ref = w.zx * x + w.zy * y
    d = rng.standard_normal(ref.shape)
    losses = [hlif_loss(ref + t * d, x, y).total for t in (0.0, 0.05, 0.1, 0.2)]
    assert losses == sorted(losses)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(8)
    f, x, y = (rng.random((1, 6, 6)) for _ in range(3))
    _, g = hlif_grad(f, x, y, lam=0.7)
    d = rng.standard_normal(f.shape)
    h = 1e-7
    fd = (hlif_loss(f + h * d, x, y, lam=0.7).total - hlif_loss(f - h * d, x, y, lam=0.7).total) / (2 * h)
    assert np.vdot(g, d) == pytest.approx(fd, rel=1e-5)


def test_unnormalized_scales():
    rng = np.random.default_rng(9)
    f, x, y = (rng.random((1, 4, 5)) for _ in range(3))
    a, b = hlif_loss(f, x, y), hlif_loss(f, x, y, normalized=False)
    assert b.hif == pytest.approx(a.hif * 20)
    assert b.lif == pytest.approx(a.lif * np.sqrt(20))
