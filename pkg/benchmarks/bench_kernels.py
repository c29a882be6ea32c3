"""Time the numba kernels against their pure-numpy counterparts.

Run with ``python3 benchmarks/bench_kernels.py``. Both variants are called
directly, so the ``TABPOWER_NUMBA`` flag does not matter here. The first
numba call (compilation or cache load) is excluded from the timings.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from tabpower import dist, kernels
from tabpower.power import TestKind, second_order_law
from tabpower.sampling import multinomial_block
from tabpower.sim import Scenario
from tabpower.tables import AlternativeSpec


def _best(fn, repeat: int) -> float:
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(replicates: int):
    gen = np.random.default_rng(0)
    table = Scenario.setting(1, 1 / 80).table
    counts = np.ascontiguousarray(multinomial_block(gen, table.probs, 200, replicates).reshape(replicates, 6, 6))
    points = gen.dirichlet(np.ones(36), size=replicates)[:, :35]
    w = np.sort(gen.normal(size=35))
    ts = np.linspace(0.01, 50.0, 20_000)

    def parts(fn):
        def run():
            for t in ts:
                fn(t, w, 0.7)

        return run

    yield "batch_statistics 6x6, n=200", (
        lambda: kernels._batch_statistics_numpy(counts, 200),
        lambda: kernels._batch_statistics_numba(counts, 200),
        replicates,
    )
    yield "functional_batch dcov 6x6", (
        lambda: kernels._functional_batch_numpy(points, 6, 6, kernels.DCOV),
        lambda: kernels._functional_batch_numba(points, 6, 6, kernels.DCOV),
        replicates,
    )
    yield "imhof_parts scalar t, 35 weights", (parts(kernels._imhof_parts_numpy), parts(kernels._imhof_parts_numba), ts.size)


def end_to_end(repeat: int) -> float:
    """Seconds for one second-order power-table CDF evaluation with the active path."""
    law = second_order_law(TestKind.DCOV_UNBIASED, AlternativeSpec.from_table(Scenario.setting(1, 1 / 80).table), 100)
    grid = np.linspace(-0.5, 0.5, 21)
    return _best(lambda: dist.cdf(law, grid), repeat)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--replicates", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    print(f"{'kernel':36s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, (slow, fast, size) in cases(args.replicates):
        a = _best(slow, args.repeat)
        b = _best(fast, args.repeat)
        print(f"{name:36s} {1e3 * a:11.2f} {1e3 * b:11.2f} {a / b:7.1f}x   ({size} items)")
    path = "numba" if kernels.USE_NUMBA else "numpy"
    print(f"\ncdf at 21 points (active path: {path}): {1e3 * end_to_end(args.repeat):.1f} ms")


if __name__ == "__main__":
    main()
