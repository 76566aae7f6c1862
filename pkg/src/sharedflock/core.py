"""Shared geometric and temporal types used across the simulator.

All vectors are float64 numpy arrays of shape (3,). All reductions iterate
in agent-id order so results are bitwise reproducible regardless of input
ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Vec3 = np.ndarray  # shape (3,), dtype float64


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=np.float64)


ZERO3 = vec3(0.0, 0.0, 0.0)


def as_vec3(v) -> Vec3:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {a.shape}")
    return a


def norm(v: Vec3) -> float:
    return float(np.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))


def clamp_norm(v: Vec3, limit: float) -> Vec3:
    """Rescale v to Euclidean norm `limit` if it exceeds it."""
    n = norm(v)
    if n > limit:
        return v * (limit / n)
    return v


def assert_finite(v: np.ndarray, label: str) -> None:
    if not np.all(np.isfinite(v)):
        raise FloatingPointError(f"non-finite value in {label}: {v}")


@dataclass
class AgentState:
    """Translational state of one drone plus its commanded position."""

    id: int
    position: Vec3
    velocity: Vec3
    acceleration: Vec3 = field(default_factory=lambda: ZERO3.copy())
    commanded_position: Vec3 = field(default_factory=lambda: ZERO3.copy())

    def copy(self) -> "AgentState":
        return AgentState(
            id=self.id,
            position=self.position.copy(),
            velocity=self.velocity.copy(),
            acceleration=self.acceleration.copy(),
            commanded_position=self.commanded_position.copy(),
        )


@dataclass
class TeamState:
    """Agents ordered by id, with their barycenter recomputed each tick."""

    agents: list[AgentState]
    barycenter_position: Vec3
    barycenter_velocity: Vec3

    @classmethod
    def from_agents(cls, agents: list[AgentState]) -> "TeamState":
        ordered = sorted(agents, key=lambda a: a.id)
        p_bar, v_bar = barycenter(ordered)
        return cls(agents=ordered, barycenter_position=p_bar, barycenter_velocity=v_bar)


def barycenter(agents: list[AgentState]) -> tuple[Vec3, Vec3]:
    """Mean position and mean velocity of the team, summed in id order."""
    if not agents:
        raise ValueError("no agents")
    ordered = sorted(agents, key=lambda a: a.id)
    p = ZERO3.copy()
    v = ZERO3.copy()
    for a in ordered:
        p += a.position
        v += a.velocity
    n = float(len(ordered))
    return p / n, v / n


@dataclass
class SimClock:
    """Fixed-timestep clock; time is always recomputed as tick * dt."""

    tick: int = 0
    dt: float = 0.02

    @property
    def time(self) -> float:
        return self.tick * self.dt

    def advance(self) -> None:
        self.tick += 1
