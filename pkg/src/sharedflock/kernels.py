"""Hot numeric kernels with a numba @njit fast path and a pure-numpy fallback.

The planner evaluates the obstacle force field at every quadrature sample of
every candidate primitive, so these inner loops dominate runtime in cluttered
maps. Set SHAREDFLOCK_NUMBA=0 to force the numpy path (the default is to use
numba whenever it imports). benchmarks/bench_kernels.py compares both paths.

Both paths take C-contiguous float64 arrays and agree to floating-point
round-off (summation order differs between them, so results are bitwise
reproducible within one path but not across paths).

Force magnitude for a voxel at distance d (0 <= d < h):

    m(d) = (f_s / k) * exp(-lam * d) * (1 - exp(h - d)),   k = 1 - exp(h)

so that m(0) = f_s and m(h) = 0. Voxels at d >= h contribute nothing. A query
point exactly on a voxel center has no defined direction; those voxels push
along +z with magnitude f_s.
"""

from __future__ import annotations

import os

import numpy as np

_DEGENERATE_D2 = 1e-24  # squared distance below which the +z fallback applies


def _repulsion_at_np(points: np.ndarray, centers: np.ndarray, f_s: float,
                     lam: float, horizon: float) -> np.ndarray:
    out = np.zeros_like(points)
    if centers.shape[0] == 0:
        return out
    k = 1.0 - np.exp(horizon)
    diff = points[:, None, :] - centers[None, :, :]  # (P, N, 3)
    d2 = np.einsum("pnk,pnk->pn", diff, diff)
    d = np.sqrt(d2)
    inside = d < horizon
    degenerate = d2 < _DEGENERATE_D2
    regular = inside & ~degenerate
    mag = np.zeros_like(d)
    dr = d[regular]
    mag[regular] = (f_s / k) * np.exp(-lam * dr) * (1.0 - np.exp(horizon - dr))
    scale = np.zeros_like(d)
    scale[regular] = mag[regular] / dr
    out += np.einsum("pn,pnk->pk", scale, diff)
    out[:, 2] += f_s * degenerate.sum(axis=1)
    return out


def _min_dist_sq_np(points: np.ndarray, centers: np.ndarray) -> float:
    if centers.shape[0] == 0 or points.shape[0] == 0:
        return np.inf
    diff = points[:, None, :] - centers[None, :, :]
    d2 = np.einsum("pnk,pnk->pn", diff, diff)
    return float(d2.min())


def _repulsion_at_loops(points, centers, f_s, lam, horizon):
    out = np.zeros_like(points)
    n = centers.shape[0]
    if n == 0:
        return out
    k = 1.0 - np.exp(horizon)
    for p in range(points.shape[0]):
        fx = 0.0
        fy = 0.0
        fz = 0.0
        for i in range(n):
            dx = points[p, 0] - centers[i, 0]
            dy = points[p, 1] - centers[i, 1]
            dz = points[p, 2] - centers[i, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < _DEGENERATE_D2:
                fz += f_s
                continue
            d = np.sqrt(d2)
            if d >= horizon:
                continue
            mag = (f_s / k) * np.exp(-lam * d) * (1.0 - np.exp(horizon - d))
            s = mag / d
            fx += s * dx
            fy += s * dy
            fz += s * dz
        out[p, 0] = fx
        out[p, 1] = fy
        out[p, 2] = fz
    return out


def _min_dist_sq_loops(points, centers):
    if centers.shape[0] == 0 or points.shape[0] == 0:
        return np.inf
    best = np.inf
    for p in range(points.shape[0]):
        for i in range(centers.shape[0]):
            dx = points[p, 0] - centers[i, 0]
            dy = points[p, 1] - centers[i, 1]
            dz = points[p, 2] - centers[i, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
    return best


USING_NUMBA = False

if os.environ.get("SHAREDFLOCK_NUMBA", "1") != "0":
    try:
        from numba import njit

        repulsion_at = njit(cache=True, nogil=True)(_repulsion_at_loops)
        min_dist_sq = njit(cache=True, nogil=True)(_min_dist_sq_loops)
        USING_NUMBA = True
    except ImportError:
        pass

if not USING_NUMBA:
    repulsion_at = _repulsion_at_np
    min_dist_sq = _min_dist_sq_np


def warmup() -> None:
    """Trigger JIT compilation on tiny inputs so later calls run at full speed."""
    pts = np.zeros((2, 3))
    ctr = np.ones((2, 3))
    repulsion_at(pts, ctr, 1.0, 1.0, 3.0)
    min_dist_sq(pts, ctr)
