"""Command-line interface: ``cdfuse {fuse,train,eval,bench,cost}``.

Settings resolve as flags > ``--config`` file (flat ``key=value`` lines,
``#`` comments) > built-in defaults. Exit codes: 0 success, 2 usage or
input errors, 3 image-shape errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import metrics
from .color import ImageDecodeError, decode_image, encode_image, fuse_color, rgb_to_ycbcr
from .cost import cost_report, count_block_mults, count_network_mults
from .dataset import find_pairs
from .network import (
    ModelConfig,
    ModelFormatError,
    fuse_luminance,
    init_params,
    load_model,
    parameter_count,
    save_model,
)
from .tensor import DimensionError
from .train import TrainConfig, train, write_history_csv

EXIT_USAGE = 2
EXIT_SHAPE = 3

DEFAULTS = {
    "fuse": {"model": None, "a": None, "b": None, "output": None,
             "gray_a": False, "gray_b": False, "mode": "unified"},
    "train": {"data": None, "output": None, "history": None, "epochs": 50, "lr": 0.0005,
              "batch": 10, "tau": 0.1, "seed": 0, "crop": 64, "blocks": 3, "channels": 5,
              "kernel": 3, "mode": "unified"},
    "eval": {"model": None, "data": None, "output": None, "mode": "unified"},
    "bench": {"mode": "both", "size": 256, "runs": 20, "warmup": 5, "seed": 0,
              "blocks": 3, "channels": 5, "kernel": 3},
    "cost": {"n": None, "s": 3, "c": 5, "h": 256, "w": 256, "csv": False},
}
_BOOL_KEYS = {"gray_a", "gray_b", "csv"}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="cdfuse", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True)

    def cmd(name, help_):
        p = sub.add_parser(name, help=help_, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key=value file overriding defaults")
        return p

    p = cmd("fuse", "fuse two images with a trained model")
    p.add_argument("--model")
    p.add_argument("-a", dest="a")
    p.add_argument("-b", dest="b")
    p.add_argument("-o", "--output", dest="output")
    p.add_argument("--gray-a", dest="gray_a", action="store_true")
    p.add_argument("--gray-b", dest="gray_b", action="store_true")
    p.add_argument("--mode", choices=("unified", "alternating"))

    p = cmd("train", "train a model on a directory of image pairs")
    p.add_argument("--data")
    p.add_argument("-o", "--output", dest="output")
    p.add_argument("--history", help="loss-history CSV (default: <output>.history.csv)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--crop", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--kernel", type=int)
    p.add_argument("--mode", choices=("unified", "alternating"))

    p = cmd("eval", "score fused results for a directory of image pairs")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("-o", "--output", dest="output")
    p.add_argument("--mode", choices=("unified", "alternating"))

    p = cmd("bench", "time and count the unified and alternating networks")
    p.add_argument("--mode", choices=("unified", "alternating", "both"))
    p.add_argument("--size", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--blocks", type=int)
    p.add_argument("--channels", type=int)
    p.add_argument("--kernel", type=int)

    p = cmd("cost", "print the analytic cost comparison")
    p.add_argument("--n", type=int)
    p.add_argument("--s", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--h", type=int)
    p.add_argument("--w", type=int)
    p.add_argument("--csv", action="store_true")
    return top


def read_config_file(path, allowed: dict) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise CliError(f"{path}:{n}: unknown key {key!r}")
        default = allowed[key]
        try:
            if key in _BOOL_KEYS:
                if value.lower() not in ("1", "0", "true", "false", "yes", "no"):
                    raise ValueError(value)
                out[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(default, bool) or default is None:
                out[key] = value if key not in ("n",) else int(value)
            elif isinstance(default, int):
                out[key] = int(value)
            elif isinstance(default, float):
                out[key] = float(value)
            else:
                out[key] = value
        except ValueError:
            raise CliError(f"{path}:{n}: bad value for {key}: {value!r}") from None
    return out


def resolve(command: str, ns: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    if getattr(ns, "config", None):
        cfg.update(read_config_file(ns.config, DEFAULTS[command]))
    cfg.update(flags)
    return cfg


def _banner(command: str, cfg: dict) -> None:
    items = " ".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    print(f"# cdfuse {command} {items}", file=sys.stderr)


def _require(cfg: dict, *keys) -> None:
    missing = [k for k in keys if cfg.get(k) in (None, "")]
    if missing:
        raise CliError("missing required setting(s): " + ", ".join(missing))


def _existing(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}")
    return p


def _load_model(path, mode) -> object:
    try:
        return load_model(_existing(path, "model"), mode=mode)
    except ModelFormatError as exc:
        raise CliError(f"{path}: {exc}") from None


def _decode(path) -> np.ndarray:
    try:
        return decode_image(_existing(path, "image"))
    except ImageDecodeError as exc:
        raise CliError(str(exc)) from None


def cmd_fuse(cfg: dict) -> int:
    _require(cfg, "model", "a", "b", "output")
    params = _load_model(cfg["model"], cfg["mode"])
    img_a, img_b = _decode(cfg["a"]), _decode(cfg["b"])
    if img_a.shape != img_b.shape:
        raise CliError(f"image sizes differ: {img_a.shape[1:]} vs {img_b.shape[1:]}", EXIT_SHAPE)
    fused = fuse_color(lambda x, y: fuse_luminance(params, x, y), img_a, img_b,
                       cfg["gray_a"], cfg["gray_b"])
    try:
        encode_image(fused, cfg["output"])
    except ImageDecodeError as exc:
        raise CliError(str(exc)) from None
    return 0


def cmd_train(cfg: dict) -> int:
    _require(cfg, "data", "output")
    data = _existing(cfg["data"], "data directory")
    if not data.is_dir() or not find_pairs(data):
        raise CliError(f"no <stem>_a / <stem>_b image pairs in {data}")
    try:
        model = ModelConfig(T=cfg["blocks"], C=cfg["channels"], s=cfg["kernel"], mode=cfg["mode"])
        tc = TrainConfig(learning_rate=cfg["lr"], batch_size=cfg["batch"], epochs=cfg["epochs"],
                         seed=cfg["seed"], tau=cfg["tau"], crop=cfg["crop"], model=model)
    except ValueError as exc:
        raise CliError(str(exc)) from None

    def progress(epoch, hif, lif, total):
        print(f"epoch {epoch:4d}/{tc.epochs}  hif {hif:.6f}  lif {lif:.6f}  total {total:.6f}",
              file=sys.stderr, flush=True)

    try:
        result = train(tc, data, progress=progress)
    except ImageDecodeError as exc:
        raise CliError(str(exc)) from None
    out = Path(cfg["output"])
    save_model(result.params, out)
    history = cfg["history"] or str(out.with_suffix(".history.csv"))
    write_history_csv(result.history, history)
    print(f"wrote {out} and {history}", file=sys.stderr)
    return 0


EVAL_HEADER = ["pair", "mse", "psnr", "ssim", "cc", "nabf"]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CDFUSE_THREADS", "1")))
    except ValueError:
        return 1


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "data", "output")
    data = _existing(cfg["data"], "data directory")
    pairs = find_pairs(data, extra="f") if data.is_dir() else []
    if not pairs:
        raise CliError(f"no <stem>_a / <stem>_b image pairs in {data}")
    params = _load_model(cfg["model"], cfg["mode"]) if cfg.get("model") else None
    if params is None and any(p[3] is None for p in pairs):
        raise CliError("--model is required unless every pair has a <stem>_f fused image")

    def score(item):
        stem, pa, pb, pf = item
        ya = rgb_to_ycbcr(_decode(pa)).y
        yb = rgb_to_ycbcr(_decode(pb)).y
        if ya.shape != yb.shape:
            raise CliError(f"{stem}: image sizes differ", EXIT_SHAPE)
        if pf is not None:
            f = rgb_to_ycbcr(_decode(pf)).y
            if f.shape != ya.shape:
                raise CliError(f"{stem}: fused image size differs from sources", EXIT_SHAPE)
        else:
            f = fuse_luminance(params, ya, yb)
        return stem, metrics.evaluate(f, ya, yb)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = sorted(pool.map(score, pairs), key=lambda r: r[0])
    keys = EVAL_HEADER[1:]
    with open(cfg["output"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVAL_HEADER)
        for stem, rep in rows:
            w.writerow([stem] + [f"{getattr(rep, k):.6f}" for k in keys])
        means = []
        for k in keys:
            vals = [getattr(r, k) for _, r in rows if math.isfinite(getattr(r, k))]
            means.append(f"{np.mean(vals):.6f}" if vals else "inf")
        w.writerow(["mean"] + means)
    return 0


def _median_ms(fn, runs: int, warmup: int) -> float:
    for _ in range(warmup):
        fn()
    times = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def cmd_bench(cfg: dict) -> int:
    modes = ("unified", "alternating") if cfg["mode"] == "both" else (cfg["mode"],)
    size = cfg["size"]
    if size < 1 or cfg["runs"] < 1 or cfg["warmup"] < 0:
        raise CliError("size and runs must be positive, warmup non-negative")
    rng = np.random.default_rng(cfg["seed"])
    x, y = rng.random((1, size, size)), rng.random((1, size, size))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["mode", "params", "median_ms", "core_mults", "network_mults"])
    for mode in modes:
        try:
            config = ModelConfig(T=cfg["blocks"], C=cfg["channels"], s=cfg["kernel"], mode=mode)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        params = init_params(config, seed=cfg["seed"])
        ms = _median_ms(lambda: fuse_luminance(params, x, y), cfg["runs"], cfg["warmup"])
        core = config.T * count_block_mults(mode, config, size, size)
        w.writerow([mode, parameter_count(config), f"{ms:.3f}", core,
                    count_network_mults(config, size, size)])
    return 0


def cmd_cost(cfg: dict) -> int:
    _require(cfg, "n")
    try:
        report = cost_report(cfg["n"], cfg["s"], cfg["c"], cfg["h"], cfg["w"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(report.to_csv() if cfg["csv"] else report.to_text())
    return 0


COMMANDS = {"fuse": cmd_fuse, "train": cmd_train, "eval": cmd_eval,
            "bench": cmd_bench, "cost": cmd_cost}


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = resolve(ns.command, ns)
        _banner(ns.command, cfg)
        return COMMANDS[ns.command](cfg)
    except CliError as exc:
        print(f"cdfuse {ns.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except DimensionError as exc:
        print(f"cdfuse {ns.command}: error: {exc}", file=sys.stderr)
        return EXIT_SHAPE


if __name__ == "__main__":
    sys.exit(main())
