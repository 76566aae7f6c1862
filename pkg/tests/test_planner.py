from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharedflock.core import SimClock, norm, vec3
from sharedflock.planner import (MotionPrimitive, PlannedPath, PlannerParams,
                                 UserForce, control_cost, control_grid, expand,
                                 obstacle_cost, plan, primitive_free,
                                 project_goal, replan_due, user_cost,
                                 user_cost_edge)
from sharedflock.voxels import RepulsionParams, VoxelMap, repulsion_magnitude

from _oracles import antiparallel_user_cost, brute_force_plan


def hover(p=(0.0, 0.0, 1.0), dt=1.3):
    return MotionPrimitive(vec3(*p), np.zeros(3), np.zeros(3), dt)


def empty_map():
    return VoxelMap(resolution=0.2)


# ---- primitives ------------------------------------------------------------

def test_primitive_kinematics():
    prim = MotionPrimitive(vec3(0, 0, 0), vec3(1, 0, 0), vec3(-1, 0, 0), 1.3)
    np.testing.assert_allclose(prim.end_velocity, [-0.3, 0, 0], atol=1e-15)
    # p(T) = v0 T + u T^2 / 2 = 1.3 - 0.845
    np.testing.assert_allclose(prim.end_position, [0.455, 0, 0], atol=1e-15)
    np.testing.assert_allclose(prim.position_at(0.0), [0, 0, 0])
    ts = np.array([0.0, 0.65, 1.3])
    pts = prim.positions_at(ts)
    np.testing.assert_allclose(pts[1], prim.position_at(0.65), atol=1e-15)
    np.testing.assert_allclose(prim.velocities_at(ts)[2], prim.end_velocity)


def test_control_cost_closed_form():
    prim = MotionPrimitive(vec3(0, 0, 0), np.zeros(3), vec3(1.0, 2.0, 2.0), 1.3)
    assert control_cost(prim) == pytest.approx(9.0 * 1.3, abs=1e-12)
    assert control_cost(hover()) == 0.0


def test_expand_from_rest_prunes_fast_corners():
    """With u = 0.5 m/s^2 per axis and dt = 1.3 s, the 8 corner controls end
    at speed 1.125 m/s > v_max and are dropped; 19 of 27 survive."""
    prims = expand(vec3(0, 0, 1), np.zeros(3), PlannerParams())
    assert len(prims) == 19
    for prim in prims:
        assert norm(prim.end_velocity) <= 1.0 + 1e-9


def test_unit_bound_controls_collapse_the_lattice_from_rest():
    # u_max = 1.0 leaves only hover expandable from rest (1.3 m/s > v_max for
    # every other control), which is why the default bound is 0.5.
    prims = expand(vec3(0, 0, 1), np.zeros(3), PlannerParams(u_max=1.0))
    assert len(prims) == 1
    assert np.all(prims[0].control == 0.0)


def test_control_grid_shape_and_order():
    grid = control_grid(PlannerParams())
    assert grid.shape == (27, 3)
    np.testing.assert_allclose(grid[0], [-0.5, -0.5, -0.5])
    np.testing.assert_allclose(grid[-1], [0.5, 0.5, 0.5])
    assert grid.shape[0] == len(np.unique(grid, axis=0))


def test_planned_path_state_at_clamps_and_joins():
    p1 = MotionPrimitive(vec3(0, 0, 0), np.zeros(3), vec3(0.5, 0, 0), 1.3)
    p2 = MotionPrimitive(p1.end_position, p1.end_velocity, np.zeros(3), 1.3)
    path = PlannedPath([p1, p2], 2.6, 0.0)
    p, v, a = path.state_at(1.3)
    np.testing.assert_allclose(p, p2.start_position)
    np.testing.assert_allclose(a, p1.control)  # junction belongs to the left segment
    p_end, _, _ = path.state_at(99.0)  # clamped to the last state
    np.testing.assert_allclose(p_end, p2.end_position)
    p_neg, _, _ = path.state_at(-1.0)
    np.testing.assert_allclose(p_neg, [0, 0, 0])
    with pytest.raises(ValueError, match="no reference"):
        PlannedPath([], 0.0, 0.0).state_at(0.0)


# ---- cost terms ------------------------------------------------------------

def test_obstacle_cost_constant_integrand_is_exact():
    """Hovering at fixed distance d from one voxel makes the integrand the
    constant m(d), which the trapezoid rule integrates exactly."""
    vmap = empty_map()
    vmap.insert_box(vec3(0, 0, 0), vec3(0.15, 0.15, 0.15))  # center (.1,.1,.1)
    rep = RepulsionParams()
    prim = hover(p=(1.6, 0.1, 0.1))
    expected = 1.3 * repulsion_magnitude(1.5, rep)
    assert obstacle_cost(prim, vmap, rep) == pytest.approx(expected, rel=1e-12)


def test_obstacle_cost_empty_map_is_zero():
    assert obstacle_cost(hover(), empty_map(), RepulsionParams()) == 0.0


def test_user_cost_zero_force_short_circuits():
    prim = MotionPrimitive(vec3(0, 0, 0), vec3(1, 0, 0), np.zeros(3), 1.3)
    assert user_cost_edge(prim, 0.0, UserForce(np.zeros(3)), 0.8) == 0.0
    assert user_cost_edge(prim, 0.0, UserForce(vec3(1e-12, 0, 0)), 0.8) == 0.0


def test_user_cost_aligned_is_exactly_zero():
    prim = MotionPrimitive(vec3(0, 0, 0), vec3(1, 0, 0), np.zeros(3), 1.3)
    assert user_cost_edge(prim, 0.0, UserForce(vec3(3, 0, 0)), 0.8) == 0.0


def test_user_cost_antialigned_matches_closed_form():
    prims = [MotionPrimitive(vec3(0, 0, 0), vec3(-1, 0, 0), np.zeros(3), 1.3)]
    prims.append(MotionPrimitive(prims[0].end_position, vec3(-1, 0, 0),
                                 np.zeros(3), 1.3))
    path = PlannedPath(prims, 2.6, 0.0)
    got = user_cost(path, UserForce(vec3(2, 0, 0)), 0.8)
    want = antiparallel_user_cost(2.0, 0.8, 2.6)
    assert got == pytest.approx(want, rel=1e-3)
    assert got == pytest.approx(want, rel=1e-4)  # Simpson is far inside 0.1%


def test_user_cost_scales_linearly_in_force():
    prim = MotionPrimitive(vec3(0, 0, 0), vec3(0.3, -0.2, 0.1),
                           vec3(0.5, 0.0, -0.5), 1.3)
    base = user_cost_edge(prim, 0.0, UserForce(vec3(0.4, 1.1, -0.2)), 0.8)
    scaled = user_cost_edge(prim, 0.0, UserForce(3.0 * vec3(0.4, 1.1, -0.2)), 0.8)
    assert scaled == pytest.approx(3.0 * base, rel=1e-12)


def test_user_cost_time_offset_decays_exponentially():
    prim = MotionPrimitive(vec3(0, 0, 0), vec3(0.0, 0.5, 0.0),
                           vec3(0.5, 0.0, 0.0), 1.3)
    force = UserForce(vec3(1.0, 0.0, 0.0))
    at0 = user_cost_edge(prim, 0.0, force, 0.8)
    at1 = user_cost_edge(prim, 1.3, force, 0.8)
    assert at1 == pytest.approx(math.exp(-1.3 / 0.8) * at0, rel=1e-12)


def test_user_cost_stationary_counts_as_misaligned():
    # no velocity direction -> alignment factor 1, integral of |F| e^{-t/tau}
    prim = hover()
    got = user_cost_edge(prim, 0.0, UserForce(vec3(0, 2, 0)), 0.8)
    want = 2.0 * 0.8 * (1.0 - math.exp(-1.3 / 0.8))
    assert got == pytest.approx(want, rel=1e-4)


@given(st.floats(0.1, 5.0), st.floats(0.1, 3.0))
@settings(max_examples=30, deadline=None)
def test_user_cost_is_nonnegative_and_bounded(fmag, tau):
    prim = MotionPrimitive(vec3(0, 0, 0), vec3(-0.4, 0.3, 0.0),
                           vec3(0.5, -0.5, 0.0), 1.3)
    got = user_cost_edge(prim, 0.0, UserForce(vec3(fmag, 0, 0)), tau)
    assert 0.0 <= got <= 2.0 * fmag * 1.3 + 1e-9  # factor in [0, 2], decay <= 1


# ---- goal projection and cadence -------------------------------------------

def test_project_goal_inside_horizon_is_identity():
    goal = vec3(1.0, 1.0, 1.0)
    out = project_goal(vec3(0, 0, 1), goal, 3.0)
    np.testing.assert_allclose(out, goal)
    assert out is not goal  # defensive copy


def test_project_goal_clamps_to_sphere():
    out = project_goal(vec3(0, 0, 1), vec3(10, 0, 1), 3.0)
    np.testing.assert_allclose(out, [3.0, 0.0, 1.0], atol=1e-12)
    with pytest.raises(ValueError):
        project_goal(vec3(0, 0, 1), vec3(1, 0, 1), 0.0)


def test_replan_cadence_six_plans_in_ten_seconds():
    clock = SimClock(0, 0.02)
    due_times = []
    while clock.time <= 10.0:
        if replan_due(clock, 2.0):
            due_times.append(round(clock.time, 9))
        clock.advance()
    assert due_times == [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]


def test_replan_cadence_uneven_dt():
    # dt that never lands exactly on the period still replans once per period
    clock = SimClock(0, 0.03)
    due = []
    for _ in range(300):
        if replan_due(clock, 2.0):
            due.append(clock.tick)
        clock.advance()
    # floor-crossing: first tick at or past each multiple of 2 s
    assert due == [0, 67, 134, 200, 267]
    with pytest.raises(ValueError):
        replan_due(SimClock(0, 0.02), 0.0)


# ---- plan() ----------------------------------------------------------------

def test_plan_straight_line_reaches_goal():
    params = PlannerParams()
    path = plan(vec3(0, 0, 1), np.zeros(3), vec3(2.0, 0, 1), empty_map(),
                UserForce(np.zeros(3)), params, RepulsionParams())
    assert not path.partial
    end = path.primitives[-1].end_position
    assert norm(end - vec3(2.0, 0, 1)) <= params.goal_tolerance + 1e-12
    # segments join continuously
    for a, b in zip(path.primitives, path.primitives[1:]):
        np.testing.assert_allclose(a.end_position, b.start_position, atol=1e-9)
        np.testing.assert_allclose(a.end_velocity, b.start_velocity, atol=1e-9)


def test_plan_cost_matches_recomputation():
    """total_cost must equal the sum of edge terms recomputed from the
    returned primitives."""
    vmap = empty_map()
    vmap.insert_box(vec3(0.8, -0.3, 0.6), vec3(1.2, 0.3, 1.4))
    params = PlannerParams(depth_max=4)
    rep = RepulsionParams()
    force = UserForce(vec3(0.0, 1.5, 0.0))
    path = plan(vec3(-0.5, 0, 1), np.zeros(3), vec3(2.2, 0, 1), vmap, force,
                params, rep)
    total = 0.0
    t0 = 0.0
    for prim in path.primitives:
        total += control_cost(prim) + params.rho * prim.duration
        total += params.rho_c * obstacle_cost(prim, vmap, rep)
        total += params.rho_usr * user_cost_edge(prim, t0, force, params.tau)
        t0 += prim.duration
    assert path.total_cost == pytest.approx(total, abs=1e-9)
    assert path.total_duration == pytest.approx(len(path.primitives) * 1.3)


def test_plan_start_inside_tolerance_hovers():
    params = PlannerParams()
    path = plan(vec3(0, 0, 1), np.zeros(3), vec3(0.2, 0, 1), empty_map(),
                UserForce(np.zeros(3)), params, RepulsionParams())
    assert not path.partial
    assert len(path.primitives) == 1
    assert np.all(path.primitives[0].control == 0.0)
    assert path.total_cost == pytest.approx(params.rho * 1.3, abs=1e-12)


def test_plan_unreachable_goal_returns_partial_progress():
    params = PlannerParams(depth_max=1)
    path = plan(vec3(0, 0, 1), np.zeros(3), vec3(30.0, 0, 1), empty_map(),
                UserForce(np.zeros(3)), params, RepulsionParams())
    assert path.partial
    assert len(path.primitives) == 1
    end = path.primitives[-1].end_position
    assert end[0] > 0.2  # moved toward the goal as far as one segment allows


def test_plan_boxed_in_start_falls_back_to_hover():
    vmap = empty_map()
    vmap.insert_box(vec3(0.0, 0.0, 0.9), vec3(0.19, 0.19, 1.05))
    assert len(vmap.occupied) == 1  # center (0.1, 0.1, 1.0), 0.14 m from start
    path = plan(vec3(0, 0, 1), np.zeros(3), vec3(3, 0, 1), vmap,
                UserForce(np.zeros(3)), PlannerParams(), RepulsionParams())
    assert path.partial
    assert len(path.primitives) == 1
    assert np.all(path.primitives[0].control == 0.0)


def test_plan_routes_through_wall_gap():
    """A wall with one opening blocks the straight line; the returned route
    must detour through the gap and stay collision free throughout."""
    vmap = empty_map()
    vmap.insert_box(vec3(0.5, -1.5, 0.6), vec3(0.9, -0.1, 1.4))
    vmap.insert_box(vec3(0.5, 0.9, 0.6), vec3(0.9, 1.7, 1.4))
    params = PlannerParams(depth_max=4)
    start, goal = vec3(0, 0, 1), vec3(1.6, 0, 1)
    from sharedflock.voxels import segment_free
    assert not segment_free(vmap, start, goal, params.clearance)
    path = plan(start, np.zeros(3), goal, vmap, UserForce(np.zeros(3)),
                params, RepulsionParams())
    assert not path.partial
    assert norm(path.primitives[-1].end_position - goal) <= params.goal_tolerance + 1e-12
    for prim in path.primitives:
        assert primitive_free(prim, vmap, params.clearance)
    assert max(p.end_position[1] for p in path.primitives) > 0.25  # used the gap


def test_plan_no_tunneling_between_samples():
    """Collision checks sample at most resolution/2 apart, so the continuous
    path can dip below the clearance by at most resolution/4."""
    vmap = empty_map()
    vmap.insert_box(vec3(0.5, -1.5, 0.6), vec3(0.9, -0.1, 1.4))
    vmap.insert_box(vec3(0.5, 0.9, 0.6), vec3(0.9, 1.7, 1.4))
    params = PlannerParams(depth_max=4)
    path = plan(vec3(0, 0, 1), np.zeros(3), vec3(1.6, 0, 1), vmap,
                UserForce(np.zeros(3)), params, RepulsionParams())
    centers = vmap.occupied_centers()
    for prim in path.primitives:
        pts = prim.positions_at(np.linspace(0.0, prim.duration, 400))
        d = np.sqrt(np.min(np.einsum("pnk,pnk->pn",
                                     pts[:, None, :] - centers[None, :, :],
                                     pts[:, None, :] - centers[None, :, :])))
        assert d >= params.clearance - vmap.resolution / 4.0 - 1e-9


def test_plan_is_deterministic():
    vmap = empty_map()
    vmap.insert_box(vec3(0.8, -0.4, 0.6), vec3(1.2, 0.4, 1.4))
    args = (vec3(0, 0, 1), np.zeros(3), vec3(2.4, 0.2, 1.0), vmap,
            UserForce(vec3(0.3, -0.2, 0.0)), PlannerParams(depth_max=4),
            RepulsionParams())
    a = plan(*args)
    b = plan(*args)
    assert a.total_cost == b.total_cost
    assert len(a.primitives) == len(b.primitives)
    for pa, pb in zip(a.primitives, b.primitives):
        assert pa.control.tobytes() == pb.control.tobytes()
        assert pa.end_position.tobytes() == pb.end_position.tobytes()


def test_plan_lateral_force_bends_the_route():
    params = PlannerParams(depth_max=3)
    rep = RepulsionParams()
    straight = plan(vec3(0, 0, 1), np.zeros(3), vec3(2.0, 0, 1), empty_map(),
                    UserForce(np.zeros(3)), params, rep)
    bent = plan(vec3(0, 0, 1), np.zeros(3), vec3(2.0, 0, 1), empty_map(),
                UserForce(vec3(0.0, 2.0, 0.0)), params, rep)
    y_straight = max(abs(p.end_position[1]) for p in straight.primitives)
    y_bent = max(p.end_position[1] for p in bent.primitives)
    assert y_bent > y_straight + 0.1


def test_plan_user_weight_monotonically_trades_user_cost():
    """Raising rho_usr can only lower the chosen path's misalignment integral
    (standard scalarization argument); requires plan() to be exactly optimal."""
    force = UserForce(vec3(0.0, 1.0, 0.0))
    rep = RepulsionParams()
    prev = None
    for rho_usr in (0.0, 5.0, 35.0, 200.0):
        params = PlannerParams(depth_max=3, rho_usr=rho_usr)
        path = plan(vec3(0, 0, 1), np.zeros(3), vec3(2.0, 0, 1), empty_map(),
                    force, params, rep)
        j_usr = user_cost(path, force, params.tau)
        if prev is not None:
            assert j_usr <= prev + 1e-9
        prev = j_usr


def test_plan_matches_brute_force_small_instance():
    vmap = empty_map()
    vmap.insert_box(vec3(0.7, -0.1, 0.6), vec3(0.9, 0.1, 1.4))  # thin pillar
    params = PlannerParams(depth_max=3)
    rep = RepulsionParams()
    force = UserForce(vec3(0.0, 1.2, 0.0))
    path = plan(vec3(0, 0, 1), np.zeros(3), vec3(1.5, 0.4, 1.0), vmap, force,
                params, rep)
    cost, controls = brute_force_plan(vec3(0, 0, 1), np.zeros(3),
                                      vec3(1.5, 0.4, 1.0), vmap, force,
                                      params, rep)
    assert not path.partial
    assert path.total_cost == pytest.approx(cost, abs=1e-9)
    assert tuple(tuple(p.control) for p in path.primitives) == controls


def test_params_validation():
    with pytest.raises(ValueError):
        PlannerParams(rho=-1.0)
    with pytest.raises(ValueError):
        PlannerParams(tau=0.0)
