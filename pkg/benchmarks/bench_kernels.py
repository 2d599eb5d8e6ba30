"""Benchmark the compiled kernel backend against the pure-numpy fallback.

Runs each hot kernel on realistic shapes (24 hourly learners x 99 quantiles
x K experts) plus an end-to-end online-learning run under both backends.

    python3 benchmarks/bench_kernels.py [--days 200] [--experts 6] [--repeats 7]
"""

from __future__ import annotations

import argparse
import importlib
import os
import time

import numpy as np

import quantens._kernels as kernels
from quantens._kernels import _python
from quantens.data import HOURS, N_QUANTILES, PROB_GRID, ExpertPanel, PriceSeries


def best_of(func, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        times.append(time.perf_counter() - start)
    return min(times)


def make_inputs(n_experts: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    shape = (HOURS, N_QUANTILES, n_experts)
    R = rng.normal(0.0, 5.0, shape)
    V = rng.uniform(0.0, 50.0, shape)
    E = rng.uniform(0.0, 10.0, shape)
    experts = np.sort(rng.normal(40.0, 10.0, shape), axis=1)
    combined = np.sort(rng.normal(40.0, 10.0, (HOURS, N_QUANTILES)), axis=1)
    x = rng.normal(40.0, 15.0, HOURS)
    rows = np.arange(HOURS, dtype=np.intp)
    flat = np.repeat(combined, 11, axis=0)  # 11 smoothing candidates
    flat_x = np.tile(x, 11)
    return dict(R=R, V=V, E=E, experts=experts, combined=combined, x=x,
                rows=rows, flat=flat, flat_x=flat_x,
                ln_k=float(np.log(n_experts)), ln_w0=np.full(
                    n_experts, -np.log(n_experts)))


def bench_kernels(backends: dict, n_experts: int, repeats: int) -> list[tuple]:
    inp = make_inputs(n_experts)
    rows = []

    def crps(mod):
        return lambda: mod.crps_rows(inp["flat"], inp["flat_x"], PROB_GRID)

    def boa(mod):
        def run():
            mod.boa_day_update(
                inp["R"].copy(), inp["V"].copy(), inp["E"].copy(),
                inp["experts"], inp["combined"], inp["x"], PROB_GRID,
                inp["rows"], inp["ln_k"], 1e6,
            )
        return run

    def weights(mod):
        return lambda: mod.weights_from_regret(
            inp["R"], inp["V"], inp["E"], inp["ln_w0"], inp["ln_k"], 1e6)

    for label, factory in (
        (f"crps_rows ({11 * HOURS}x{N_QUANTILES})", crps),
        (f"boa_day_update (24x99x{n_experts})", boa),
        (f"weights_from_regret (24x99x{n_experts})", weights),
    ):
        timings = {name: best_of(factory(mod), repeats)
                   for name, mod in backends.items()}
        rows.append((label, timings))
    return rows


def bench_end_to_end(n_days: int, n_experts: int, repeats: int) -> list[tuple]:
    rng = np.random.default_rng(1)
    days = np.datetime64("2020-01-01") + np.arange(n_days)
    x = 40.0 + 12.0 * np.sin(np.arange(HOURS) / 4.0) \
        + rng.normal(0.0, 4.0, (n_days, HOURS))
    prices = PriceSeries(days, x)
    biases = rng.uniform(-4.0, 4.0, n_experts)
    values = np.stack([
        np.sort(x[:, :, None] + b + rng.normal(0.0, 2.0, x.shape)[:, :, None]
                + np.linspace(-8.0, 8.0, N_QUANTILES), axis=-1)
        for b in biases
    ])
    panel = ExpertPanel(tuple(f"m{k}" for k in range(n_experts)), days, values)

    timings = {}
    for backend in ("python", "cython"):
        os.environ["QUANTENS_KERNELS"] = backend
        importlib.reload(kernels)
        import quantens.learner as learner
        importlib.reload(learner)
        config = learner.LearnerConfig()
        timings[backend] = best_of(
            lambda: learner.run_online(panel, prices, config), repeats)
    del os.environ["QUANTENS_KERNELS"]
    importlib.reload(kernels)
    import quantens.learner as learner
    importlib.reload(learner)
    return [(f"run_online ({n_days}d x {n_experts} experts)", timings)]


def fmt_seconds(value: float) -> str:
    if value < 1e-3:
        return f"{value * 1e6:8.1f} us"
    if value < 1.0:
        return f"{value * 1e3:8.2f} ms"
    return f"{value:8.3f} s "


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--days", type=int, default=200)
    parser.add_argument("--experts", type=int, default=6)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    backends = {"python": _python}
    try:
        from quantens._kernels import _core
        backends["cython"] = _core
    except ImportError:
        print("compiled extension not built; benchmarking python only")

    rows = bench_kernels(backends, args.experts, args.repeats)
    rows += bench_end_to_end(args.days, args.experts, args.repeats)

    width = max(len(label) for label, _ in rows)
    header = f"{'benchmark':<{width}}  {'python':>11}  {'cython':>11}  speedup"
    print(header)
    print("-" * len(header))
    for label, timings in rows:
        py = timings.get("python")
        cy = timings.get("cython")
        speed = f"{py / cy:6.1f}x" if py and cy else "      -"
        cy_s = fmt_seconds(cy) if cy else "          -"
        print(f"{label:<{width}}  {fmt_seconds(py)}  {cy_s}  {speed}")


if __name__ == "__main__":
    main()
