"""Sparse voxel occupancy map, simulated discovery, repulsion field, and
collision queries.

A map stores integer voxel keys; key (i, j, k) covers the cube
[origin + key*res, origin + (key+1)*res) and its center sits at
origin + (key + 0.5)*res. `occupied` holds the voxels occupied in this map's
world model and `known` every voxel whose occupancy has been observed, so
occupied is always a subset of known. The ground-truth map knows itself;
the working map is filled in by range-limited discovery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import Vec3, as_vec3, vec3

VoxelKey = tuple[int, int, int]


@dataclass
class RepulsionParams:
    """Per-voxel exponential repulsion: max force f_s at contact, zero at the
    horizon."""

    f_s: float = 25.0
    lam: float = 0.55
    horizon: float = 3.0

    def __post_init__(self) -> None:
        if self.f_s <= 0 or self.lam <= 0 or self.horizon <= 0:
            raise ValueError("repulsion parameters must be positive")


def repulsion_magnitude(d: float, params: RepulsionParams) -> float:
    """Scalar force from a single voxel at distance d; f_s at d=0, 0 at d>=h."""
    if d >= params.horizon:
        return 0.0
    k = 1.0 - math.exp(params.horizon)
    return (params.f_s / k) * math.exp(-params.lam * d) * (1.0 - math.exp(params.horizon - d))


class VoxelMap:
    def __init__(self, resolution: float = 0.2, origin: Vec3 | None = None):
        if resolution <= 0:
            raise ValueError("resolution must be positive")
        self.resolution = float(resolution)
        self.origin = as_vec3(origin) if origin is not None else vec3(0.0, 0.0, 0.0)
        self.occupied: set[VoxelKey] = set()
        self.known: set[VoxelKey] = set()
        self._centers_cache: np.ndarray | None = None

    def key_of(self, p: Vec3) -> VoxelKey:
        rel = (np.asarray(p, dtype=np.float64) - self.origin) / self.resolution
        return (int(math.floor(rel[0])), int(math.floor(rel[1])), int(math.floor(rel[2])))

    def center_of(self, key: VoxelKey) -> Vec3:
        return self.origin + (np.array(key, dtype=np.float64) + 0.5) * self.resolution

    def same_grid(self, other: "VoxelMap") -> bool:
        return self.resolution == other.resolution and bool(np.all(self.origin == other.origin))

    def _mark_occupied(self, key: VoxelKey) -> None:
        self.occupied.add(key)
        self.known.add(key)
        self._centers_cache = None

    def insert_box(self, min_corner: Vec3, max_corner: Vec3) -> None:
        """Occupy every voxel whose center lies inside the axis-aligned box."""
        lo = as_vec3(min_corner)
        hi = as_vec3(max_corner)
        if np.any(lo > hi):
            raise ValueError(f"inverted box: min {lo} exceeds max {hi}")
        res = self.resolution
        # center c = origin + (k + 0.5) res lies in [lo, hi]
        k_lo = np.ceil((lo - self.origin) / res - 0.5).astype(int)
        k_hi = np.floor((hi - self.origin) / res - 0.5).astype(int)
        for i in range(k_lo[0], k_hi[0] + 1):
            for j in range(k_lo[1], k_hi[1] + 1):
                for k in range(k_lo[2], k_hi[2] + 1):
                    self._mark_occupied((i, j, k))

    def occupied_centers(self) -> np.ndarray:
        """(N, 3) centers of occupied voxels in sorted key order (cached)."""
        if self._centers_cache is None:
            keys = sorted(self.occupied)
            if keys:
                arr = (np.array(keys, dtype=np.float64) + 0.5) * self.resolution
                self._centers_cache = arr + self.origin
            else:
                self._centers_cache = np.zeros((0, 3))
        return self._centers_cache

    def discover_from(self, truth: "VoxelMap", p: Vec3, horizon: float) -> list[VoxelKey]:
        """Copy truth voxels within `horizon` of p into this map (monotone).

        Returns the newly discovered keys in sorted order.
        """
        if not self.same_grid(truth):
            raise ValueError("resolution/origin mismatch between truth and known maps")
        centers = truth.occupied_centers()
        if centers.shape[0] == 0:
            return []
        q = np.asarray(p, dtype=np.float64)
        d2 = np.einsum("nk,nk->n", centers - q, centers - q)
        keys = sorted(truth.occupied)
        fresh = []
        for idx in np.nonzero(d2 <= horizon * horizon)[0]:
            key = keys[idx]
            if key not in self.occupied:
                fresh.append(key)
                self._mark_occupied(key)
        return sorted(fresh)


def discover(truth: VoxelMap, known: VoxelMap, p: Vec3, horizon: float) -> VoxelMap:
    known.discover_from(truth, p, horizon)
    return known


def repulsion_force(p: Vec3, vmap: VoxelMap, params: RepulsionParams) -> Vec3:
    """Summed repulsion at p from every occupied voxel within the horizon.

    Each voxel pushes away from its center; a voxel exactly at p pushes +z
    with the full magnitude f_s.
    """
    pts = np.asarray(p, dtype=np.float64).reshape(1, 3)
    out = kernels.repulsion_at(pts, vmap.occupied_centers(), params.f_s,
                               params.lam, params.horizon)
    return out[0]


def repulsion_at_points(points: np.ndarray, vmap: VoxelMap,
                        params: RepulsionParams) -> np.ndarray:
    """(P, 3) repulsion vectors at a batch of query points."""
    return kernels.repulsion_at(np.ascontiguousarray(points, dtype=np.float64),
                                vmap.occupied_centers(), params.f_s,
                                params.lam, params.horizon)


def sample_segment(a: Vec3, b: Vec3, step: float) -> np.ndarray:
    """Points along [a, b] spaced at most `step` apart, endpoints included."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    length = float(np.linalg.norm(b - a))
    n = max(1, int(math.ceil(length / step)))
    ts = np.linspace(0.0, 1.0, n + 1)
    return a[None, :] + ts[:, None] * (b - a)[None, :]


def segment_free(vmap: VoxelMap, a: Vec3, b: Vec3, clearance: float) -> bool:
    """True iff no occupied voxel center of `vmap` lies within `clearance` of
    the segment [a, b], sampled at steps of at most resolution/2."""
    if clearance < 0:
        raise ValueError("clearance must be non-negative")
    pts = sample_segment(a, b, vmap.resolution / 2.0)
    d2 = kernels.min_dist_sq(np.ascontiguousarray(pts), vmap.occupied_centers())
    return d2 >= clearance * clearance
