"""Motion-primitive lattice planner.

Candidate trajectories are sequences of fixed-duration constant-acceleration
segments on a double-integrator model. A* over the resulting lattice
minimizes

    J = sum ||u||^2 dt  +  rho * T  +  rho_c * J_obstacle  +  rho_usr * J_user

where J_obstacle integrates the repulsion-field magnitude along the
trajectory and J_user penalizes velocity directions misaligned with the
operator's force, discounted by exp(-t/tau) so the operator shapes the early
part of the plan while later segments stay goal-driven.

The search is exact: the heuristic rho * max(0, dist - goal_tolerance) /
v_max never overestimates remaining cost (speed is capped at v_max and all
other terms are non-negative), it is consistent, and lattice deduplication
keys include depth so two states are merged only when their remaining cost
structure is identical. Tie-breaks are total-ordered, making the returned
path deterministic.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import SimClock, Vec3, as_vec3, norm
from .voxels import RepulsionParams, VoxelMap

OBSTACLE_QUAD_INTERVALS = 10  # trapezoid intervals per primitive for J_obstacle
USER_QUAD_INTERVALS = 10      # Simpson intervals per primitive for J_user
SPEED_EPS = 1e-6              # below this the velocity direction is undefined
FORCE_EPS = 1e-9              # below this the user force is treated as zero


@dataclass
class MotionPrimitive:
    """Constant-control segment: p(t) = p0 + v0 t + u t^2 / 2."""

    start_position: Vec3
    start_velocity: Vec3
    control: Vec3
    duration: float

    def position_at(self, t: float) -> Vec3:
        return self.start_position + self.start_velocity * t + 0.5 * self.control * t * t

    def velocity_at(self, t: float) -> Vec3:
        return self.start_velocity + self.control * t

    def positions_at(self, ts: np.ndarray) -> np.ndarray:
        ts = ts[:, None]
        return (self.start_position[None, :] + self.start_velocity[None, :] * ts
                + 0.5 * self.control[None, :] * ts * ts)

    def velocities_at(self, ts: np.ndarray) -> np.ndarray:
        return self.start_velocity[None, :] + self.control[None, :] * ts[:, None]

    @property
    def end_position(self) -> Vec3:
        return self.position_at(self.duration)

    @property
    def end_velocity(self) -> Vec3:
        return self.velocity_at(self.duration)


@dataclass
class PlannedPath:
    """Concatenated primitives; `partial` marks a best-effort path that did
    not reach the virtual goal."""

    primitives: list[MotionPrimitive]
    total_duration: float
    total_cost: float
    partial: bool = False

    def state_at(self, t: float) -> tuple[Vec3, Vec3, Vec3]:
        """Position, velocity, acceleration at path time t, clamped to the ends."""
        if not self.primitives:
            raise ValueError("no reference available")
        if t <= 0.0:
            prim = self.primitives[0]
            return prim.position_at(0.0), prim.velocity_at(0.0), prim.control.copy()
        acc = 0.0
        for prim in self.primitives:
            if t <= acc + prim.duration:
                tl = t - acc
                return prim.position_at(tl), prim.velocity_at(tl), prim.control.copy()
            acc += prim.duration
        last = self.primitives[-1]
        return (last.position_at(last.duration), last.velocity_at(last.duration),
                last.control.copy())

    def sample_times(self, step: float) -> np.ndarray:
        n = max(1, int(round(self.total_duration / step)))
        return np.linspace(0.0, self.total_duration, n + 1)

    def sample_positions(self, step: float) -> np.ndarray:
        key = round(step, 12)
        cached = self._pos_cache.get(key)
        if cached is None:
            cached = np.stack([self.state_at(t)[0] for t in self.sample_times(step)])
            self._pos_cache[key] = cached
        return cached

    def __post_init__(self) -> None:
        self._pos_cache: dict[float, np.ndarray] = {}


@dataclass
class PlannerParams:
    rho: float = 1.5            # duration weight
    rho_c: float = 0.05         # obstacle weight
    rho_usr: float = 35.0       # user-alignment weight
    tau: float = 0.8            # user-influence decay time constant, s
    horizon: float = 3.0        # planning/goal-projection radius, m
    primitive_dt: float = 1.3   # segment duration, s
    u_max: float = 0.5          # per-axis control bound, m/s^2
    v_max: float = 1.0          # speed bound, m/s
    control_levels: int = 3     # discrete control values per axis
    depth_max: int = 6          # max primitives per plan
    goal_tolerance: float = 0.5
    clearance: float = 0.3      # collision clearance to voxel centers, m
    pos_quantum: float = 0.1    # lattice dedup cell size, m
    vel_quantum: float = 0.25   # lattice dedup cell size, m/s
    max_expansions: int = 60000

    def __post_init__(self) -> None:
        if min(self.rho, self.rho_c, self.rho_usr) < 0:
            raise ValueError("cost weights must be non-negative")
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class UserForce:
    vector: Vec3 = field(default_factory=lambda: np.zeros(3))

    @property
    def magnitude(self) -> float:
        return norm(self.vector)


def control_grid(params: PlannerParams) -> np.ndarray:
    """All control vectors of the lattice in lexicographic order, (L^3, 3)."""
    levels = np.linspace(-params.u_max, params.u_max, params.control_levels)
    ux, uy, uz = np.meshgrid(levels, levels, levels, indexing="ij")
    return np.stack([ux.ravel(), uy.ravel(), uz.ravel()], axis=1)


def expand(position: Vec3, velocity: Vec3, params: PlannerParams) -> list[MotionPrimitive]:
    """One primitive per lattice control, dropping those whose end speed
    exceeds v_max. Speed along a surviving primitive never exceeds v_max
    because the norm of an affine velocity peaks at an endpoint."""
    p = as_vec3(position)
    v = as_vec3(velocity)
    dt = params.primitive_dt
    prims = []
    for u in control_grid(params):
        v_end = v + u * dt
        if norm(v_end) <= params.v_max + 1e-9:
            prims.append(MotionPrimitive(p, v, u.copy(), dt))
    return prims


def control_cost(prim: MotionPrimitive) -> float:
    """Integral of ||u||^2 over the segment; closed form for constant u."""
    u = prim.control
    return float(u @ u) * prim.duration


def obstacle_cost(prim: MotionPrimitive, vmap: VoxelMap, rep: RepulsionParams) -> float:
    return _obstacle_cost_arr(prim, vmap.occupied_centers(), rep)


def _obstacle_cost_arr(prim: MotionPrimitive, centers: np.ndarray,
                       rep: RepulsionParams) -> float:
    """Trapezoidal quadrature of the repulsion magnitude along the primitive."""
    if centers.shape[0] == 0:
        return 0.0
    ts = np.linspace(0.0, prim.duration, OBSTACLE_QUAD_INTERVALS + 1)
    pts = np.ascontiguousarray(prim.positions_at(ts))
    forces = kernels.repulsion_at(pts, centers, rep.f_s, rep.lam, rep.horizon)
    mags = np.sqrt(np.einsum("ij,ij->i", forces, forces))
    h = prim.duration / OBSTACLE_QUAD_INTERVALS
    return float(h * (mags.sum() - 0.5 * (mags[0] + mags[-1])))


_SIMPSON_W = None


def _simpson_weights(n: int) -> np.ndarray:
    global _SIMPSON_W
    if _SIMPSON_W is None or len(_SIMPSON_W) != n + 1:
        w = np.ones(n + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        _SIMPSON_W = w
    return _SIMPSON_W


def user_cost_edge(prim: MotionPrimitive, t_offset: float, force: UserForce,
                   tau: float) -> float:
    """User-misalignment cost of one primitive starting at path time t_offset.

    Composite Simpson at step duration/10; accurate to ~1e-5 relative, well
    inside the 0.1 percent oracle tolerance. Samples slower than SPEED_EPS
    have no direction and count as fully misaligned (alignment factor 1).
    """
    fmag = force.magnitude
    if fmag < FORCE_EPS:
        return 0.0
    fhat = force.vector / fmag
    ts = np.linspace(0.0, prim.duration, USER_QUAD_INTERVALS + 1)
    vel = prim.velocities_at(ts)
    speed = np.sqrt(np.einsum("ij,ij->i", vel, vel))
    dots = np.zeros_like(speed)
    ok = speed >= SPEED_EPS
    dots[ok] = (vel[ok] @ fhat) / speed[ok]
    integrand = fmag * (1.0 - dots) * np.exp(-(t_offset + ts) / tau)
    h = prim.duration / USER_QUAD_INTERVALS
    return float(h / 3.0 * (integrand @ _simpson_weights(USER_QUAD_INTERVALS)))


def user_cost(path: PlannedPath, force: UserForce, tau: float) -> float:
    """Misalignment cost over the whole path with cumulative time decay."""
    total = 0.0
    t0 = 0.0
    for prim in path.primitives:
        total += user_cost_edge(prim, t0, force, tau)
        t0 += prim.duration
    return total


def project_goal(p_bar: Vec3, goal: Vec3, horizon: float) -> Vec3:
    """Clamp the global goal onto the planning-horizon sphere around p_bar."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    p_bar = as_vec3(p_bar)
    goal = as_vec3(goal)
    d = norm(goal - p_bar)
    if d <= horizon:
        return goal.copy()
    return p_bar + (goal - p_bar) * (horizon / d)


def replan_due(clock: SimClock, period: float = 2.0) -> bool:
    """True exactly when tick*dt crosses a multiple of the replan period
    (including t = 0 for the initial plan)."""
    if period <= 0:
        raise ValueError("period must be positive")
    if clock.tick == 0:
        return True
    return math.floor(clock.tick * clock.dt / period) > math.floor(
        (clock.tick - 1) * clock.dt / period)


def primitive_free(prim: MotionPrimitive, vmap: VoxelMap, clearance: float) -> bool:
    free, _ = _primitive_clearance(prim, vmap.occupied_centers(),
                                   vmap.resolution, clearance)
    return free


def _primitive_clearance(prim: MotionPrimitive, centers: np.ndarray,
                         resolution: float, clearance: float) -> tuple[bool, float]:
    """(collision-free, min squared sample distance) along the primitive,
    sampled at spatial steps of at most resolution/2."""
    if centers.shape[0] == 0:
        return True, np.inf
    speed = max(norm(prim.start_velocity), norm(prim.end_velocity))
    n = max(2, int(math.ceil(prim.duration * speed / (resolution / 2.0))) + 1)
    ts = np.linspace(0.0, prim.duration, n)
    pts = np.ascontiguousarray(prim.positions_at(ts))
    d2 = kernels.min_dist_sq(pts, centers)
    return d2 >= clearance * clearance, d2


def _lattice_key(depth: int, p: Vec3, v: Vec3, params: PlannerParams) -> tuple:
    pq = params.pos_quantum
    vq = params.vel_quantum
    return (depth,
            round(p[0] / pq), round(p[1] / pq), round(p[2] / pq),
            round(v[0] / vq), round(v[1] / vq), round(v[2] / vq))


def plan(start_position: Vec3, start_velocity: Vec3, virtual_goal: Vec3,
         vmap: VoxelMap, force: UserForce, params: PlannerParams,
         rep: RepulsionParams) -> PlannedPath:
    """A* over the primitive lattice; see module docstring for the objective.

    If no sequence of at most depth_max primitives reaches the virtual goal
    (or the expansion budget runs out), returns the explored path ending
    closest to it, flagged partial.
    """
    start_p = as_vec3(start_position)
    start_v = as_vec3(start_velocity)
    goal = as_vec3(virtual_goal)
    dt = params.primitive_dt

    # Voxels that can never interact with a plan from this start are dropped
    # up front; the ball covers max displacement plus the field horizon.
    reach = params.depth_max * params.v_max * dt + max(rep.horizon, params.clearance) + 1.0
    centers = vmap.occupied_centers()
    if centers.shape[0]:
        d2 = np.einsum("nk,nk->n", centers - start_p, centers - start_p)
        centers = np.ascontiguousarray(centers[d2 <= reach * reach])
    # Beyond this sample distance every point of the primitive is outside the
    # field, so the quadrature is exactly zero and can be skipped.
    skip_d2 = (rep.horizon + vmap.resolution / 2.0) ** 2

    def heuristic(p: Vec3) -> float:
        return params.rho * max(0.0, norm(p - goal) - params.goal_tolerance) / params.v_max

    def reached(p: Vec3) -> bool:
        return norm(p - goal) <= params.goal_tolerance

    if reached(start_p):
        hover = MotionPrimitive(start_p, start_v, np.zeros(3), dt)
        cost = (control_cost(hover) + params.rho * dt
                + params.rho_c * _obstacle_cost_arr(hover, centers, rep)
                + params.rho_usr * user_cost_edge(hover, 0.0, force, params.tau))
        return PlannedPath([hover], dt, cost, partial=False)

    # Arena of nodes: (position, velocity, depth, g, parent index, primitive).
    nodes: list[tuple[Vec3, Vec3, int, float, int, MotionPrimitive | None]] = [
        (start_p, start_v, 0, 0.0, -1, None)]
    root_key = _lattice_key(0, start_p, start_v, params)
    best_g: dict[tuple, float] = {root_key: 0.0}
    counter = 0
    heap: list[tuple] = [(heuristic(start_p), 0.0, root_key, counter, 0)]
    # Best partial candidate: (distance to goal, g, key, node index).
    best_partial = (norm(start_p - goal), 0.0, root_key, 0)
    pops = 0

    def reconstruct(idx: int, g: float, partial: bool) -> PlannedPath:
        prims: list[MotionPrimitive] = []
        while idx >= 0:
            _, _, _, _, parent, prim = nodes[idx]
            if prim is not None:
                prims.append(prim)
            idx = parent
        prims.reverse()
        if not prims:
            # Nothing legal was expandable from the start; emit a zero-control
            # segment so downstream consumers always have a reference.
            prims = [MotionPrimitive(start_p, start_v, np.zeros(3), dt)]
        return PlannedPath(prims, len(prims) * dt, g, partial=partial)

    while heap:
        f, g, key, _, idx = heapq.heappop(heap)
        if g > best_g.get(key, np.inf):
            continue  # superseded entry
        p, v, depth, _, _, _ = nodes[idx]
        if reached(p):
            return reconstruct(idx, g, partial=False)
        cand = (norm(p - goal), g, key, idx)
        if cand[:3] < best_partial[:3]:
            best_partial = cand
        pops += 1
        if depth >= params.depth_max or pops > params.max_expansions:
            continue
        t_offset = depth * dt
        for prim in expand(p, v, params):
            free, min_d2 = _primitive_clearance(prim, centers, vmap.resolution,
                                                params.clearance)
            if not free:
                continue
            edge = control_cost(prim) + params.rho * dt
            if params.rho_c > 0.0 and min_d2 < skip_d2:
                edge += params.rho_c * _obstacle_cost_arr(prim, centers, rep)
            if params.rho_usr > 0.0:
                edge += params.rho_usr * user_cost_edge(prim, t_offset, force, params.tau)
            g2 = g + edge
            p2 = prim.end_position
            v2 = prim.end_velocity
            key2 = _lattice_key(depth + 1, p2, v2, params)
            if best_g.get(key2, np.inf) <= g2:
                continue
            best_g[key2] = g2
            nodes.append((p2, v2, depth + 1, g2, idx, prim))
            counter += 1
            heapq.heappush(heap, (g2 + heuristic(p2), g2, key2, counter, len(nodes) - 1))

    _, g, _, idx = best_partial
    return reconstruct(idx, g, partial=True)
