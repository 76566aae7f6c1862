"""Timing comparison of the numba kernels against the numpy fallback.

Run from the repo root:

    python3 benchmarks/bench_kernels.py

Sizes mirror real workloads: the planner evaluates the repulsion field at
~14 quadrature points per candidate primitive against however many voxels
discovery has accumulated (tens to a few thousand), and the clearance check
scans ~20 samples per primitive. End-to-end impact is measured by timing a
full gap-scenario run under each path (flip with SHAREDFLOCK_NUMBA=0).
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np

from sharedflock import kernels
from sharedflock.kernels import (_min_dist_sq_loops, _min_dist_sq_np,
                                 _repulsion_at_np)

REPO = Path(__file__).resolve().parents[1]


def time_call(fn, *args, repeats: int = 7) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernel_grid() -> None:
    rng = np.random.default_rng(3)
    print(f"numba active: {kernels.USING_NUMBA}")
    if not kernels.USING_NUMBA:
        print("  (SHAREDFLOCK_NUMBA=0 or numba unavailable; the 'fast' column "
              "below is the numpy path timed against itself)")
    kernels.warmup()

    print(f"\n{'points':>7} {'voxels':>7} | {'repulsion np':>12} "
          f"{'repulsion fast':>14} {'speedup':>8} | {'mindist np':>11} "
          f"{'mindist fast':>13} {'speedup':>8}")
    for n_pts, n_vox in ((14, 50), (14, 500), (14, 5000),
                         (140, 500), (420, 2000)):
        pts = rng.uniform(-5, 5, size=(n_pts, 3))
        vox = rng.uniform(-5, 5, size=(n_vox, 3))
        t_np = time_call(_repulsion_at_np, pts, vox, 25.0, 0.55, 3.0)
        t_fast = time_call(kernels.repulsion_at, pts, vox, 25.0, 0.55, 3.0)
        m_np = time_call(_min_dist_sq_np, pts, vox)
        m_fast = time_call(kernels.min_dist_sq, pts, vox)
        print(f"{n_pts:>7} {n_vox:>7} | {t_np * 1e6:>10.0f}us "
              f"{t_fast * 1e6:>12.0f}us {t_np / t_fast:>7.1f}x | "
              f"{m_np * 1e6:>9.0f}us {m_fast * 1e6:>11.0f}us "
              f"{m_np / m_fast:>7.1f}x")

    # agreement spot check (summation order differs, so allow round-off)
    pts = rng.uniform(-5, 5, size=(50, 3))
    vox = rng.uniform(-5, 5, size=(800, 3))
    a = _repulsion_at_np(pts, vox, 25.0, 0.55, 3.0)
    b = kernels.repulsion_at(pts, vox, 25.0, 0.55, 3.0)
    print(f"\npath agreement: max|diff| = {np.max(np.abs(a - b)):.2e}")
    assert np.allclose(a, b, atol=1e-9)
    assert np.isclose(_min_dist_sq_loops(pts, vox), _min_dist_sq_np(pts, vox))


def bench_full_run() -> None:
    from sharedflock.engine import SimWorld
    from sharedflock.scenario import load_scenario

    text = (REPO / "scenarios" / "gap_shared.yaml").read_text()
    sim = SimWorld(load_scenario(text))
    t0 = time.perf_counter()
    report = sim.run()
    wall = time.perf_counter() - t0
    label = "numba" if kernels.USING_NUMBA else "numpy"
    print(f"\ngap_shared full run ({label} path): {wall:.2f}s wall "
          f"for {report.time_to_goal:.1f}s sim "
          f"({report.time_to_goal / wall:.0f}x realtime)")


if __name__ == "__main__":
    bench_kernel_grid()
    bench_full_run()
