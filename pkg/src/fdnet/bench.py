"""Latency microbenchmark: seeded weights, warmup, then wall-clock per inference."""
from __future__ import annotations

import csv
import io
import os
import platform
import statistics
import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_info, threadpool_limits

from .arch import build
from .complexity import total_macs
from .engine import compile, init_random_weights
from .tensor import Tensor

# Model pairs at matched complexity, largest budget first.
TABLE4_SUITE = (
    ("mobilenet", 0.5),
    ("fd-mobilenet", 1.0),
    ("mobilenet", 0.25),
    ("fd-mobilenet", 0.5),
    ("mobilenet", 0.125),
    ("fd-mobilenet", 0.25),
)
CSV_FIELDS = (
    "model", "alpha", "label", "mflops", "warmup_runs", "timed_runs",
    "min_ms", "median_ms", "mean_ms", "threads", "cpu", "blas",
)


def _cpu_name() -> str:
    try:
        with open("/proc/cpuinfo") as f:
            for line in f:
                if line.startswith("model name"):
                    return line.split(":", 1)[1].strip()
    except OSError:
        pass
    return platform.processor() or platform.machine()


def environment(threads: int) -> dict:
    blas = sorted({f"{i.get('internal_api')} {i.get('version')}" for i in threadpool_info() if i.get("user_api") == "blas"})
    return {
        "cpu": _cpu_name(),
        "cpu_count": os.cpu_count(),
        "machine": platform.machine(),
        "platform": platform.platform(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "blas": ", ".join(blas) or "unknown",
        "threads": threads,
    }


@dataclass
class BenchmarkReport:
    model: str
    alpha: float
    label: str
    mflops: float
    warmup_runs: int
    timed_runs: int
    run_ms: list[float]
    env: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.timed_runs < 1 or len(self.run_ms) != self.timed_runs:
            raise ValueError(f"expected {self.timed_runs} >= 1 timings, got {len(self.run_ms)}")

    @property
    def min_ms(self) -> float:
        return min(self.run_ms)

    @property
    def median_ms(self) -> float:
        return statistics.median(self.run_ms)

    @property
    def mean_ms(self) -> float:
        return statistics.fmean(self.run_ms)


def random_image(seed: int) -> Tensor:
    return Tensor(np.random.default_rng(seed).uniform(0.0, 1.0, size=(1, 3, 224, 224)))


def run_suite(configs, warmup: int = 5, runs: int = 30, seed: int = 0, threads: int = 1) -> list[BenchmarkReport]:
    """Time several (model, alpha) configurations.

    Timed runs are interleaved round-robin so slow drift on a shared host
    lands on every model alike instead of on whichever ran last.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    if warmup < 0:
        raise ValueError(f"warmup must be >= 0, got {warmup}")
    specs = [build(model, alpha) for model, alpha in configs]
    engines = [compile(spec, init_random_weights(spec, seed)) for spec in specs]
    x = random_image(seed)
    timings = [[] for _ in engines]
    with threadpool_limits(limits=threads):
        for engine in engines:
            for _ in range(warmup):
                engine.infer(x)
        for _ in range(runs):
            for engine, out in zip(engines, timings):
                t0 = time.perf_counter_ns()
                engine.infer(x)
                # clamp so a coarse clock can never report a zero-length run
                out.append(max(time.perf_counter_ns() - t0, 1) / 1e6)
    env = environment(threads)
    return [
        BenchmarkReport(
            model=model,
            alpha=float(alpha),
            label=spec.label,
            mflops=total_macs(spec) / 1e6,
            warmup_runs=warmup,
            timed_runs=runs,
            run_ms=t,
            env=env,
        )
        for (model, alpha), spec, t in zip(configs, specs, timings)
    ]


def run_benchmark(model: str, alpha: float, warmup: int = 5, runs: int = 30, seed: int = 0, threads: int = 1) -> BenchmarkReport:
    return run_suite([(model, alpha)], warmup=warmup, runs=runs, seed=seed, threads=threads)[0]


def format_text(reports: list[BenchmarkReport]) -> str:
    lines = [f"{'Models':<24} {'MFLOPs':>8} {'Time (ms)':>10} {'min':>9} {'mean':>9}  runs"]
    for r in reports:
        lines.append(
            f"{r.label:<24} {r.mflops:>8.1f} {r.median_ms:>10.2f} {r.min_ms:>9.2f} {r.mean_ms:>9.2f}  "
            f"{r.timed_runs} (+{r.warmup_runs} warmup)"
        )
    if reports:
        env = reports[0].env
        lines.append(
            f"# median wall-clock per inference; cpu={env.get('cpu')} ({env.get('cpu_count')} logical), "
            f"threads={env.get('threads')}, blas={env.get('blas')}, numpy={env.get('numpy')}, python={env.get('python')}"
        )
    return "\n".join(lines) + "\n"


def format_csv(reports: list[BenchmarkReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow((
            r.model, f"{r.alpha:g}", r.label, f"{r.mflops:.1f}", r.warmup_runs, r.timed_runs,
            f"{r.min_ms:.3f}", f"{r.median_ms:.3f}", f"{r.mean_ms:.3f}",
            r.env.get("threads"), r.env.get("cpu"), r.env.get("blas"),
        ))
    return buf.getvalue()
