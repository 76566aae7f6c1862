"""Admittance control of the migration point.

The operator's marker exerts a spring-damper force on the team barycenter;
that force, summed with the obstacle repulsion field, drives a virtual
mass-spring-damper

    M (a_c - a_r) + D (v_c - v_r) + K (p_c - p_r) = F_v

whose state p_c is the migration point every agent tracks. The reference
(p_r, v_r, a_r) comes from projecting the barycenter onto the planned path
and looking ahead a fixed interval so the team keeps moving along the plan.

step() integrates the error dynamics with the exact zero-order-hold
discretization (matrix exponential of the per-axis error system, cached per
gain set). A semi-implicit Euler step at 50 Hz leaves ~2e-3 m of transient
error against the closed-form response; the exact map is at round-off and
preserves the K^-1 F_v equilibrium, so oracle checks can use tight
tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import Vec3, as_vec3
from .planner import PlannedPath, UserForce


def _diag3(value) -> np.ndarray:
    a = np.asarray(value, dtype=np.float64)
    if a.ndim == 0:
        a = np.full(3, float(a))
    if a.shape != (3,):
        raise ValueError("expected a scalar or 3 diagonal entries")
    return a


@dataclass
class AdmittanceParams:
    """Diagonal gains; scalars broadcast to all three axes."""

    mass: np.ndarray = field(default_factory=lambda: _diag3(1.5))
    damping: np.ndarray = field(default_factory=lambda: _diag3(6.0))
    stiffness: np.ndarray = field(default_factory=lambda: _diag3(8.0))
    k_p_usr: np.ndarray = field(default_factory=lambda: _diag3(2.0))
    k_d_usr: np.ndarray = field(default_factory=lambda: _diag3(0.5))
    # +1 pulls the team toward the marker; -1 selects the opposite reading
    # of the spring law (both appear in the literature).
    force_sign: float = 1.0
    lookahead: float = 0.4  # seconds ahead of the projected path point

    def __post_init__(self) -> None:
        self.mass = _diag3(self.mass)
        self.damping = _diag3(self.damping)
        self.stiffness = _diag3(self.stiffness)
        self.k_p_usr = _diag3(self.k_p_usr)
        self.k_d_usr = _diag3(self.k_d_usr)
        for name in ("mass", "damping", "stiffness", "k_p_usr", "k_d_usr"):
            if np.any(getattr(self, name) <= 0):
                raise ValueError(f"{name} diagonal entries must be positive")
        if self.force_sign not in (1.0, -1.0):
            raise ValueError("force_sign must be +1 or -1")


@dataclass
class AdmittanceState:
    """Migration point and its velocity."""

    p_c: Vec3
    v_c: Vec3

    def copy(self) -> "AdmittanceState":
        return AdmittanceState(self.p_c.copy(), self.v_c.copy())


@dataclass
class ReferenceSample:
    """Path state the migration point is pulled toward."""

    p_r: Vec3
    v_r: Vec3
    a_r: Vec3


def user_force(p_bar: Vec3, v_bar: Vec3, p_u: Vec3, v_u: Vec3,
               params: AdmittanceParams, take_control: bool = True) -> UserForce:
    """Spring-damper force of the marker on the barycenter; zero while the
    operator has not taken control."""
    if not take_control:
        return UserForce(np.zeros(3))
    dp = as_vec3(p_u) - as_vec3(p_bar)
    dv = as_vec3(v_u) - as_vec3(v_bar)
    f = params.force_sign * (params.k_p_usr * dp - params.k_d_usr * dv)
    return UserForce(f)


def project_reference(p_bar: Vec3, path: PlannedPath, lookahead: float,
                      dt: float = 0.02) -> ReferenceSample:
    """Closest path point to the barycenter (sampled at step dt), advanced by
    the lookahead and clamped to the path end."""
    if not path.primitives:
        raise ValueError("no reference available")
    p_bar = as_vec3(p_bar)
    ts = path.sample_times(dt)
    pts = path.sample_positions(dt)
    d2 = np.einsum("nk,nk->n", pts - p_bar, pts - p_bar)
    t_star = float(ts[int(np.argmin(d2))])  # argmin takes the first minimum
    t_ref = min(t_star + lookahead, path.total_duration)
    p_r, v_r, a_r = path.state_at(t_ref)
    return ReferenceSample(p_r, v_r, a_r)


_PHI_CACHE: dict[tuple, np.ndarray] = {}


def _phi(m: float, d: float, k: float, dt: float) -> np.ndarray:
    """Exact dt-transition matrix of (e, de, F) for m e'' + d e' + k e = F
    with F held constant over the step."""
    key = (m, d, k, dt)
    phi = _PHI_CACHE.get(key)
    if phi is None:
        a = np.array([[0.0, 1.0, 0.0],
                      [-k / m, -d / m, 1.0 / m],
                      [0.0, 0.0, 0.0]])
        phi = expm(a * dt)
        _PHI_CACHE[key] = phi
    return phi


def step(state: AdmittanceState, ref: ReferenceSample, f_virtual: Vec3,
         params: AdmittanceParams, dt: float) -> AdmittanceState:
    """Advance the migration point one step under the virtual force.

    The tracking error e = p_c - p_r evolves axis-by-axis under the linear
    error dynamics with f_virtual held constant over the step; the reference
    itself advances under its reported acceleration.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    f_virtual = as_vec3(f_virtual)
    e_new = np.empty(3)
    edot_new = np.empty(3)
    e = state.p_c - ref.p_r
    edot = state.v_c - ref.v_r
    for ax in range(3):
        phi = _phi(params.mass[ax], params.damping[ax], params.stiffness[ax], dt)
        x = phi @ np.array([e[ax], edot[ax], f_virtual[ax]])
        e_new[ax] = x[0]
        edot_new[ax] = x[1]
    p_r_next = ref.p_r + ref.v_r * dt + 0.5 * ref.a_r * dt * dt
    v_r_next = ref.v_r + ref.a_r * dt
    return AdmittanceState(p_r_next + e_new, v_r_next + edot_new)
