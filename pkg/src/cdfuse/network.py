"""The end-to-end luminance fuser and its weight file format.

Pipeline: per-source feature expansion, ``T`` unfolded blocks starting from
``W = 0``, then ``F = d_F2 * (d_F1 * W + Z)`` and a ``C -> 1`` projection
clamped to ``[0, 1]``.

Weight files (``.cdn``) are little-endian: the magic ``b"CDN1"``, then
``T``, ``C``, ``s`` as ``uint32``, then every tensor as ``float32`` in
declaration order (``expand_x``, ``expand_y``, each block's eight kernels
and ``theta``, ``d_f1``, ``d_f2``, ``proj``).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cdblock import KERNEL_NAMES, CDBlockParams, alternating_step, cdblock_step
from .tensor import DimensionError, MultCounter, conv2d

__all__ = [
    "MODES",
    "ModelConfig",
    "ModelParams",
    "ModelFormatError",
    "init_params",
    "zeros_like_params",
    "parameter_count",
    "expand",
    "decompose",
    "fuse_luminance",
    "save_model",
    "load_model",
]

MODES = ("unified", "alternating")
MAGIC = b"CDN1"
_HEADER = struct.Struct("<4sIII")


class ModelFormatError(ValueError):
    """Malformed or mismatched ``.cdn`` weight file."""


@dataclass(frozen=True)
class ModelConfig:
    T: int = 3
    C: int = 5
    s: int = 3
    mode: str = "unified"

    def __post_init__(self):
        if self.T < 0 or self.C < 1 or self.s < 1 or self.s % 2 == 0:
            raise ValueError(f"invalid config: T={self.T}, C={self.C}, s={self.s} (s must be odd)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class ModelParams:
    config: ModelConfig
    expand_x: np.ndarray
    expand_y: np.ndarray
    blocks: list[CDBlockParams] = field(default_factory=list)
    d_f1: np.ndarray = None
    d_f2: np.ndarray = None
    proj: np.ndarray = None

    def __post_init__(self):
        c, s = self.config.C, self.config.s
        expected = {
            "expand_x": (c, 1, s, s),
            "expand_y": (c, 1, s, s),
            "d_f1": (2 * c, 3 * c, 1, 1),
            "d_f2": (c, 2 * c, 1, 1),
            "proj": (1, c, 1, 1),
        }
        for name, shape in expected.items():
            got = np.shape(getattr(self, name))
            if got != shape:
                raise DimensionError(f"{name} must have shape {shape}, got {got}")
        if len(self.blocks) != self.config.T:
            raise DimensionError(f"expected {self.config.T} blocks, got {len(self.blocks)}")
        for b in self.blocks:
            if b.channels != c or b.kernel_size != s:
                raise DimensionError("block kernels do not match the model config")

    def tensors(self) -> list[np.ndarray]:
        """All parameter tensors in serialization order."""
        out = [self.expand_x, self.expand_y]
        for b in self.blocks:
            out.extend(b.tensors())
        out.extend([self.d_f1, self.d_f2, self.proj])
        return out

    @classmethod
    def from_tensors(cls, config: ModelConfig, tensors) -> "ModelParams":
        tensors = list(tensors)
        per_block = len(KERNEL_NAMES) + 1
        blocks = [
            CDBlockParams.from_tensors(tensors[2 + i * per_block: 2 + (i + 1) * per_block])
            for i in range(config.T)
        ]
        return cls(config, tensors[0], tensors[1], blocks, *tensors[-3:])

    def map(self, fn) -> "ModelParams":
        return ModelParams.from_tensors(self.config, [fn(t) for t in self.tensors()])

    def copy(self) -> "ModelParams":
        return self.map(np.array)

    def size(self) -> int:
        return sum(t.size for t in self.tensors())


def parameter_count(config: ModelConfig) -> int:
    """Closed-form number of learnable reals.

    ``2 C s^2`` (expansion) ``+ T (8 C^2 s^2 + 3 C)`` (blocks)
    ``+ 6 C^2 + 2 C^2 + C`` (fusion head and projection).
    """
    c, s, t = config.C, config.s, config.T
    return 2 * c * s * s + t * (8 * c * c * s * s + 3 * c) + 6 * c * c + 2 * c * c + c


def init_params(config: ModelConfig | None = None, seed: int = 0,
                theta0: float = 0.01, gain: float = 1.0) -> ModelParams:
    """Uniform ``[-a, a]`` kernels with ``a = gain / sqrt(fan_in)`` and thresholds ``theta0``.

    ``fan_in = Cin * k * k``, which is ``C s^2`` for the dictionary kernels.
    With ``gain=1`` this is the usual default bound for convolution layers.
    """
    config = config or ModelConfig()
    rng = np.random.default_rng(seed)
    c, s = config.C, config.s

    def kern(cout, cin, k):
        a = gain / np.sqrt(cin * k * k)
        return rng.uniform(-a, a, size=(cout, cin, k, k))

    expand_x = kern(c, 1, s)
    expand_y = kern(c, 1, s)
    blocks = []
    for _ in range(config.T):
        kernels = [kern(c, c, s) for _ in KERNEL_NAMES]
        blocks.append(CDBlockParams(*kernels, theta=np.full(3 * c, theta0)))
    return ModelParams(config, expand_x, expand_y, blocks,
                       kern(2 * c, 3 * c, 1), kern(c, 2 * c, 1), kern(1, c, 1))


def zeros_like_params(params: ModelParams) -> ModelParams:
    return params.map(np.zeros_like)


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim == 2:
        x = x[None]
    if y.ndim == 2:
        y = y[None]
    if x.shape != y.shape or x.ndim != 3 or x.shape[0] != 1:
        raise DimensionError(f"sources must be matching (1, H, W) planes, got {x.shape} and {y.shape}")
    return x, y


def expand(params: ModelParams, x, y, counter: MultCounter | None = None) -> np.ndarray:
    """Stacked expanded features ``Z = [X; Y]`` with ``2C`` channels."""
    x, y = _check_pair(x, y)
    return np.concatenate([conv2d(x, params.expand_x, counter), conv2d(y, params.expand_y, counter)])


def decompose(params: ModelParams, Z, counter: MultCounter | None = None) -> np.ndarray:
    """Run the ``T`` blocks from ``W = 0`` and return the combined representation."""
    c = params.config.C
    Z = np.asarray(Z, dtype=np.float64)
    W = np.zeros((3 * c,) + Z.shape[1:])
    if params.config.mode == "unified":
        for block in params.blocks:
            W = cdblock_step(block, W, Z, counter)
        return W
    X, Y = Z[:c], Z[c:]
    zx, zy, zc = W[:c], W[c:2 * c], W[2 * c:]
    for block in params.blocks:
        zx, zy, zc = alternating_step(block, zx, zy, zc, X, Y, counter)
    return np.concatenate([zx, zy, zc])


def fuse_luminance(params: ModelParams, x, y, counter: MultCounter | None = None) -> np.ndarray:
    """Fuse two ``(1, H, W)`` luminance planes in ``[0, 1]``."""
    Z = expand(params, x, y, counter)
    W = decompose(params, Z, counter)
    F = conv2d(conv2d(W, params.d_f1, counter) + Z, params.d_f2, counter)
    return np.clip(conv2d(F, params.proj, counter), 0.0, 1.0)


def save_model(params: ModelParams, path) -> None:
    cfg = params.config
    payload = b"".join(np.asarray(t, dtype="<f4").tobytes() for t in params.tensors())
    Path(path).write_bytes(_HEADER.pack(MAGIC, cfg.T, cfg.C, cfg.s) + payload)


def load_model(path, mode: str = "unified", expect: ModelConfig | None = None) -> ModelParams:
    """Read a ``.cdn`` file. Values come back widened from float32."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFormatError(f"byte 0: bad magic {data[:4]!r}, expected {MAGIC!r} (\"CDN1\")")
    if len(data) < _HEADER.size:
        raise ModelFormatError(f"byte {len(data)}: truncated header, need {_HEADER.size} bytes")
    _, t, c, s = _HEADER.unpack_from(data)
    try:
        config = ModelConfig(T=t, C=c, s=s, mode=mode)
    except ValueError as exc:
        raise ModelFormatError(f"byte 4: {exc}") from None
    if expect is not None and (expect.T, expect.C, expect.s) != (t, c, s):
        raise ModelFormatError(
            f"byte 4: config mismatch, file has T={t} C={c} s={s}, "
            f"expected T={expect.T} C={expect.C} s={expect.s}"
        )
    template = init_params(config)
    need = _HEADER.size + 4 * template.size()
    if len(data) < need:
        raise ModelFormatError(
            f"byte {len(data)}: truncated payload, header declares {need} bytes in total"
        )
    if len(data) > need:
        raise ModelFormatError(f"byte {need}: {len(data) - need} trailing bytes after payload")
    offset = _HEADER.size
    tensors = []
    for t_ in template.tensors():
        n = t_.size
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset)
        tensors.append(arr.astype(np.float64).reshape(t_.shape))
        offset += 4 * n
    return ModelParams.from_tensors(config, tensors)
