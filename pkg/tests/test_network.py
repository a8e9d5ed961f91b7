import numpy as np
import pytest

from cdfuse.network import (
    ModelConfig,
    ModelFormatError,
    ModelParams,
    decompose,
    expand,
    fuse_luminance,
    init_params,
    load_model,
    parameter_count,
    save_model,
)
from cdfuse.tensor import DimensionError


def test_default_parameter_count():
    assert parameter_count(ModelConfig()) == 5740


def test_zero_blocks_leaves_expansion_and_head():
    assert parameter_count(ModelConfig(T=0)) == 295


@pytest.mark.parametrize("T,C,s", [(1, 1, 1), (2, 4, 3), (3, 5, 3), (4, 3, 5)])
def test_count_matches_tensors(T, C, s):
    cfg = ModelConfig(T=T, C=C, s=s)
    assert init_params(cfg).size() == parameter_count(cfg)


@pytest.mark.parametrize("kw", [dict(T=-1), dict(C=0), dict(s=2), dict(mode="joint")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        ModelConfig(**kw)


def test_output_in_unit_range_and_shape():
    rng = np.random.default_rng(0)
    params = init_params(seed=1)
    f = fuse_luminance(params, rng.random((1, 20, 17)), rng.random((1, 20, 17)))
    assert f.shape == (1, 20, 17)
    assert f.min() >= 0.0 and f.max() <= 1.0


def test_decompose_zero_input_gives_zero():
    params = init_params()
    assert not decompose(params, np.zeros((10, 6, 6))).any()


def test_expand_shape():
    params = init_params()
    assert expand(params, np.zeros((8, 9)), np.zeros((8, 9))).shape == (10, 8, 9)


def test_deterministic():
    rng = np.random.default_rng(2)
    x, y = rng.random((1, 12, 12)), rng.random((1, 12, 12))
    a = fuse_luminance(init_params(seed=3), x, y)
    b = fuse_luminance(init_params(seed=3), x, y)
    np.testing.assert_array_equal(a, b)


def test_rejects_mismatched_pair():
    with pytest.raises(DimensionError):
        fuse_luminance(init_params(), np.zeros((1, 4, 4)), np.zeros((1, 4, 5)))


def test_params_shape_validation():
    p = init_params()
    with pytest.raises(DimensionError):
        ModelParams(p.config, p.expand_x, p.expand_y, p.blocks[:2], p.d_f1, p.d_f2, p.proj)
    with pytest.raises(DimensionError):
        ModelParams(p.config, p.expand_x[:2], p.expand_y, p.blocks, p.d_f1, p.d_f2, p.proj)


def test_save_load_round_trip(tmp_path):
    params = init_params(ModelConfig(T=2, C=3, s=3), seed=5)
    path = tmp_path / "m.cdn"
    save_model(params, path)
    assert path.read_bytes()[:4] == b"CDN1"
    assert path.stat().st_size == 16 + 4 * params.size()
    back = load_model(path)
    assert back.config == params.config
    for a, b in zip(params.tensors(), back.tensors()):
        np.testing.assert_array_equal(a.astype(np.float32), b)
    alt = load_model(path, mode="alternating")
    assert alt.config.mode == "alternating"


def test_load_errors(tmp_path):
    params = init_params(seed=0)
    good = tmp_path / "good.cdn"
    save_model(params, good)
    data = good.read_bytes()
    cases = {
        "magic": b"XXXX" + data[4:],
        "header": data[:10],
        "payload": data[:-4],
        "trailing": data + b"\0\0\0\0",
    }
    for name, blob in cases.items():
        p = tmp_path / f"{name}.cdn"
        p.write_bytes(blob)
        with pytest.raises(ModelFormatError, match="byte"):
            load_model(p)
    with pytest.raises(ModelFormatError, match="mismatch"):
        load_model(good, expect=ModelConfig(T=2))


def test_modes_share_parameters_but_differ_in_output():
    rng = np.random.default_rng(4)
    x, y = rng.random((1, 10, 10)), rng.random((1, 10, 10))
    uni = init_params(ModelConfig(mode="unified"), seed=0)
    alt = init_params(ModelConfig(mode="alternating"), seed=0)
    assert uni.size() == alt.size()
    assert not np.allclose(fuse_luminance(uni, x, y), fuse_luminance(alt, x, y))
