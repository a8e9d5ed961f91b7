import numpy as np
import pytest

from cdfuse.autograd import backward, forward, kink_signature
from cdfuse.loss import hlif_loss
from cdfuse.network import ModelConfig, fuse_luminance, init_params

from gradcheck import check_gradients


def test_forward_matches_inference():
    rng = np.random.default_rng(0)
    x, y = rng.random((1, 9, 9)), rng.random((1, 9, 9))
    for mode in ("unified", "alternating"):
        p = init_params(ModelConfig(mode=mode), seed=1)
        np.testing.assert_allclose(forward(p, x, y).f, fuse_luminance(p, x, y), atol=1e-13)


def test_zero_model_gives_black_and_finite_grads():
    rng = np.random.default_rng(1)
    x, y = rng.random((1, 8, 8)), rng.random((1, 8, 8))
    p = init_params(seed=0).map(np.zeros_like)
    report, grads = backward(p, x, y)
    assert report.total == pytest.approx(hlif_loss(np.zeros((1, 8, 8)), x, y).total)
    assert all(np.isfinite(g).all() for g in grads.tensors())


def params_add(p, d, scale):
    return type(p).from_tensors(p.config, [a + scale * b for a, b in zip(p.tensors(), d.tensors())])


@pytest.mark.parametrize("mode", ["unified", "alternating"])
@pytest.mark.parametrize("seed", [2, 5])
def test_directional_derivative(mode, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random((1, 8, 8)), rng.random((1, 8, 8))
    p = init_params(ModelConfig(mode=mode), seed=seed + 1)
    base = forward(p, x, y)
    sig = kink_signature(p, base)
    _, grads = backward(p, x, y, cache=base)
    direction = p.map(lambda t: rng.standard_normal(t.shape))
    analytic = sum(np.vdot(g, d) for g, d in zip(grads.tensors(), direction.tensors()))

    # A random direction moves every parameter at once, so shrink the probe
    # until neither side crosses a kink.
    for h in (1e-5, 1e-6, 1e-7, 1e-8):
        probes = [params_add(p, direction, s * h) for s in (1, -1)]
        caches = [forward(q, x, y) for q in probes]
        if all(np.array_equal(kink_signature(q, c), sig) for q, c in zip(probes, caches)):
            break
    else:
        pytest.fail("no kink-free probe size found")
    lp, lm = (hlif_loss(c.f, x, y).total for c in caches)
    assert analytic == pytest.approx((lp - lm) / (2 * h), rel=1e-5, abs=1e-9)


@pytest.mark.slow
def test_alternating_gradients_match_finite_differences():
    r = check_gradients("alternating", seed=0)
    assert r.checked > 5700
    assert r.worst <= 1e-4


def test_small_config_gradients_match_finite_differences():
    # Exercises a non-default geometry quickly (C=2, s=5, T=2).
    from gradcheck import rel_err
    rng = np.random.default_rng(4)
    x, y = rng.random((1, 7, 6)), rng.random((1, 7, 6))
    p = init_params(ModelConfig(T=2, C=2, s=5), seed=4)
    _, grads = backward(p, x, y)
    h, worst, n = 1e-5, 0.0, 0
    for t, g in zip(p.tensors(), grads.tensors()):
        flat, gf = t.reshape(-1), g.reshape(-1)
        for i in range(0, flat.size, 3):
            old = flat[i]
            flat[i] = old + h
            lp = hlif_loss(fuse_luminance(p, x, y), x, y).total
            flat[i] = old - h
            lm = hlif_loss(fuse_luminance(p, x, y), x, y).total
            flat[i] = old
            worst = max(worst, rel_err(gf[i], (lp - lm) / (2 * h)))
            n += 1
    assert n > 100 and worst <= 1e-4
