"""Flocking layer that distributes the migration point to individual agents.

Each agent gets a reference acceleration

    a_i = sum_j cohesion(p_j - p_i) + beta sum_j (v_j - v_i)
          + K_p (p_c - p_i) + K_v (v_c - v_i) + F_rep_i

summed over neighbors within radius R, clamped to a_max, then double
integrated (with velocity saturation) into a per-agent commanded position.
Cohesion uses a sigma-norm potential with a smooth bump cutoff so the
pairwise term vanishes at the desired spacing d_ref and fades to zero at R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AgentState, TeamState, Vec3, as_vec3, clamp_norm, norm


@dataclass
class FlockParams:
    alpha: float = 1.0    # cohesion gain, s^-2
    beta: float = 0.3     # velocity-consensus gain, s^-1
    k_p: float = 2.0      # migration-point tracking, s^-2
    k_v: float = 1.5      # migration-velocity tracking, s^-1
    radius: float = 5.0   # neighbor / cutoff radius R, m
    epsilon: float = 0.08
    h_bump: float = 0.1   # cutoff ramp start, fraction of the sigma range
    d_ref: float = 1.5    # desired inter-agent distance, m
    a_max: float = 2.0
    v_max: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.h_bump < 1.0:
            raise ValueError("h_bump must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.d_ref >= self.radius:
            raise ValueError("d_ref must be smaller than the cutoff radius")


def sigma_norm(z: float, epsilon: float) -> float:
    """Smooth surrogate of |z|: (sqrt(1 + eps z^2) - 1)/eps, zero at zero."""
    if z < 0:
        raise ValueError("sigma_norm expects z >= 0")
    return (math.sqrt(1.0 + epsilon * z * z) - 1.0) / epsilon


def bump(z: float, h_bump: float) -> float:
    """1 on [0, h), cosine ramp down to 0 on [h, 1], 0 elsewhere."""
    if 0.0 <= z < h_bump:
        return 1.0
    if h_bump <= z <= 1.0:
        return 0.5 * (1.0 + math.cos(math.pi * (z - h_bump) / (1.0 - h_bump)))
    return 0.0


# Coincident agents have no defined pair direction; cohesion returns zero
# there and counts the event so long runs can surface the anomaly.
degeneracy_count = 0


def reset_degeneracy_count() -> None:
    global degeneracy_count
    degeneracy_count = 0


def cohesion(p_ji: Vec3, params: FlockParams) -> Vec3:
    """Pairwise spacing force along p_ji = p_j - p_i: attractive beyond d_ref,
    repulsive inside it, zero at d_ref and beyond the cutoff."""
    global degeneracy_count
    p_ji = as_vec3(p_ji)
    dist = norm(p_ji)
    if dist == 0.0:
        degeneracy_count += 1
        return np.zeros(3)
    z = sigma_norm(dist, params.epsilon) / sigma_norm(params.radius, params.epsilon)
    gain = params.alpha * bump(z, params.h_bump) * (
        sigma_norm(dist, params.epsilon) - sigma_norm(params.d_ref, params.epsilon))
    return gain * (p_ji / dist)


def reference_accel(i: int, team: TeamState, p_c: Vec3, v_c: Vec3,
                    f_rep_i: Vec3, params: FlockParams) -> Vec3:
    """Commanded acceleration for team.agents[i]; see module docstring."""
    me = team.agents[i]
    acc = np.zeros(3)
    for j, other in enumerate(team.agents):
        if j == i:
            continue
        p_ji = other.position - me.position
        if norm(p_ji) > params.radius:
            continue
        acc += cohesion(p_ji, params)
        acc += params.beta * (other.velocity - me.velocity)
    acc += params.k_p * (as_vec3(p_c) - me.position)
    acc += params.k_v * (as_vec3(v_c) - me.velocity)
    acc += as_vec3(f_rep_i)
    return clamp_norm(acc, params.a_max)


def integrate_command(p_cmd: Vec3, v_cmd: Vec3, a_ref: Vec3, dt: float,
                      params: FlockParams) -> tuple[Vec3, Vec3]:
    """One saturated double-integration step of the command state."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v_next = clamp_norm(v_cmd + as_vec3(a_ref) * dt, params.v_max)
    p_next = p_cmd + v_next * dt
    return p_next, v_next


class CommandIntegrator:
    """Per-agent command states (p_cmd, v_cmd), advanced in id order."""

    def __init__(self, agents: list[AgentState]):
        self.states: dict[int, tuple[Vec3, Vec3]] = {
            a.id: (a.position.copy(), a.velocity.copy())
            for a in sorted(agents, key=lambda a: a.id)
        }

    def step(self, agent_id: int, a_ref: Vec3, dt: float,
             params: FlockParams) -> Vec3:
        p_cmd, v_cmd = self.states[agent_id]
        p_cmd, v_cmd = integrate_command(p_cmd, v_cmd, a_ref, dt, params)
        self.states[agent_id] = (p_cmd, v_cmd)
        return p_cmd.copy()

    def command_of(self, agent_id: int) -> tuple[Vec3, Vec3]:
        p_cmd, v_cmd = self.states[agent_id]
        return p_cmd.copy(), v_cmd.copy()
