"""Shared pytest setup.

Acceptance tests carry ``@pytest.mark.criterion(n)``. A criterion passes only
if every test tagged with it passes; the terminal summary prints one line per
criterion with whatever detail the tests attached via ``record_property``.
"""

import os

# Timing checks are specified single-threaded.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import time  # noqa: E402

import pytest  # noqa: E402

from cdfuse.network import init_params  # noqa: E402
from cdfuse.train import TrainConfig, mean_loss, synth_pairs, train  # noqa: E402

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            entry = _results.setdefault(mark.args[0], {"ok": True, "seen": 0, "details": []})
            entry["expected"] = entry.get("expected", 0) + 1


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    entry = _results[mark.args[0]]
    failed = call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception)
    if call.when == "call":
        entry["seen"] += 1
        entry["details"] += [str(v) for k, v in item.user_properties if k == "detail"]
    if failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        e = _results[n]
        ok = e["ok"] and e["seen"] == e["expected"]
        detail = "; ".join(e["details"])
        tr.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}" + (f"  ({detail})" if detail else ""))


@pytest.fixture(scope="session")
def trained():
    """The desk-scale run: 20 synthetic 64x64 pairs, 100 epochs of 2 batches."""
    pairs = synth_pairs(20, 64, seed=100)
    config = TrainConfig(epochs=100, seed=0)
    t0 = time.perf_counter()
    result = train(config, pairs)
    elapsed = time.perf_counter() - t0
    initial = mean_loss(init_params(config.model, seed=config.seed, gain=config.init_gain), pairs)
    final = mean_loss(result.params, pairs)
    return dict(pairs=pairs, config=config, result=result, elapsed=elapsed,
                initial=initial, final=final)
