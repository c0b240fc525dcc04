import numpy as np
import pytest

from fdnet.arch import LayerKind
from fdnet.engine import WeightEntry, WeightStore
from fdnet.engine.reference import apply_layer


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def calibrated_store(spec, store, x, seed=0):
    """Replace identity batch norms with data-calibrated random ones.

    Running statistics are taken from the conv outputs on ``x`` so activations
    stay O(1) through the whole chain (Glorot init with identity BN shrinks
    them by ~2x per layer), then gamma/beta are randomized so folding has
    something non-trivial to do.
    """
    rng = np.random.default_rng(seed)
    blobs = {e.ordinal: e.blob.copy() for e in store}
    cur = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(spec.layers):
        if layer.kind == LayerKind.BATCH_NORM:
            c = layer.c_out
            mean = cur.mean(axis=(0, 2, 3))
            var = np.maximum(cur.var(axis=(0, 2, 3)), 1e-4)
            blobs[i] = np.stack([rng.uniform(0.5, 1.5, c), rng.uniform(-0.3, 0.3, c), mean, var]).astype(np.float32)
        cur = apply_layer(layer, blobs.get(i), cur)
    return WeightStore(WeightEntry(e.ordinal, e.kind, blobs[e.ordinal]) for e in store)


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else "")
        request.config._acceptance_lines.append(line)
        print(line)
        assert ok, line

    return record
