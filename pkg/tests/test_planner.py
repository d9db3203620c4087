import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from opmdrive.errors import InfeasibleError, PreconditionError, StalledProfileError
from opmdrive.opm import OPM1, OPM2, DrivingStyle, preset, validate_opm
from opmdrive.path import PathGeometry, build_path, s_curve_waypoints, straight_waypoints
from opmdrive.planner import (
    BoundaryConditions,
    VelocityProfile,
    curvature_speed_cap,
    dp_oracle_plan,
    plan_velocity,
    profile_violation,
    read_profile_csv,
    trapezoid_time,
    travel_time,
    write_profile_csv,
)

NO_JERK = (math.inf, math.inf)


def arc_path(kappa, ds=1.0):
    """Path with prescribed per-station curvature, built by heading integration."""
    kappa = np.asarray(kappa, dtype=float)
    n = len(kappa)
    s = np.arange(n) * ds
    heading = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * ds)])
    x = np.concatenate([[0.0], np.cumsum(np.cos(heading[:-1]) * ds)])
    y = np.concatenate([[0.0], np.cumsum(np.sin(heading[:-1]) * ds)])
    return PathGeometry(s=s, x=x, y=y, heading=heading, kappa=kappa)


def profile_of(v, s):
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    z = np.zeros_like(s)
    return VelocityProfile(s=s, v=v, ax_plan=z, t=z, kappa=z)


@pytest.mark.parametrize(
    "ay, kappa, expected",
    [(0.9, 0.0, 30.0), (0.9, 0.01, 9.4868), (3.5, 0.02, 13.229), (3.5, -0.02, 13.229)],
)
def test_curvature_speed_cap(ay, kappa, expected):
    opm = validate_opm((1.0, -1.0, ay, 1.0, 1.0))
    cap = curvature_speed_cap(np.array([kappa]), opm, 30.0)[0]
    assert cap == pytest.approx(expected, abs=1e-3)


def test_constant_profile_at_global_max():
    path = build_path(straight_waypoints(100.0))
    prof = plan_velocity(path, OPM1, BoundaryConditions(12.0, 12.0, 12.0))
    np.testing.assert_allclose(prof.v, 12.0)
    assert prof.total_time == pytest.approx(100.0 / 12.0, rel=1e-12)


@pytest.mark.parametrize(
    "v, s, expected",
    [([10.0, 10.0], [0.0, 100.0], 10.0), ([0.0, 10.0], [0.0, 100.0], 20.0), ([5.0] * 11, np.arange(11.0) * 10, 20.0)],
)
def test_travel_time(v, s, expected):
    assert travel_time(profile_of(v, s)) == pytest.approx(expected)


@pytest.mark.parametrize("v, s", [([], []), ([3.0, 0.0, 0.0, 2.0], [0.0, 1.0, 2.0, 3.0])])
def test_travel_time_stalled(v, s):
    with pytest.raises(StalledProfileError):
        travel_time(profile_of(v, s))


@pytest.mark.parametrize("opm", [OPM1, OPM2, preset(DrivingStyle.Normal)], ids=["opm1", "opm2", "normal"])
def test_s_curve_profile_invariants(s_curve_path, opm):
    prof = plan_velocity(s_curve_path, opm, BoundaryConditions())
    assert np.all(prof.v >= 0)
    assert np.all(np.diff(prof.t) > 0)
    assert prof.total_time == prof.t[-1] == pytest.approx(travel_time(prof), rel=1e-12)
    seg_ax = (prof.v[1:] ** 2 - prof.v[:-1] ** 2) / (2 * np.diff(prof.s))
    np.testing.assert_allclose(prof.ax_plan[:-1], seg_ax, atol=1e-9)
    assert max(profile_violation(prof, opm).values()) <= 1e-6
    caps = curvature_speed_cap(prof.kappa, opm, 30.0)
    assert np.all(prof.v <= caps + 1e-9)


def test_closed_lap_covers_full_length(lap_path):
    prof = plan_velocity(lap_path, OPM2, BoundaryConditions())
    assert prof.s[-1] == pytest.approx(lap_path.length)
    assert prof.v[0] == 0.0 and prof.v[-1] == 0.0


def test_lap_ordering(lap_path):
    t1 = plan_velocity(lap_path, OPM1, BoundaryConditions()).total_time
    t2 = plan_velocity(lap_path, OPM2, BoundaryConditions()).total_time
    assert t2 < t1


def test_matches_oracle_on_fine_straight():
    path = build_path(straight_waypoints(100.0, 0.5), ds=0.5)
    planned = plan_velocity(path, OPM1, BoundaryConditions()).total_time
    oracle = dp_oracle_plan(path, OPM1, BoundaryConditions(), a_grid=0.025).total_time
    assert abs(planned - oracle) / oracle <= 0.02


def test_oracle_refinement_converges():
    path = build_path(straight_waypoints(100.0, 2.0), ds=2.0)
    times = [dp_oracle_plan(path, OPM1, BoundaryConditions(), a_grid=g).total_time for g in (0.1, 0.05, 0.025)]
    assert times[0] >= times[1] >= times[2]
    assert times[2] >= plan_velocity(path, OPM1, BoundaryConditions()).total_time - 1e-9


def test_oracle_single_segment():
    s = np.array([0.0, 5.0])
    path = PathGeometry(s=s, x=s, y=np.zeros(2), heading=np.zeros(2), kappa=np.zeros(2))
    prof = dp_oracle_plan(path, OPM1, BoundaryConditions(10.0, 10.0, 10.0))
    assert prof.total_time == pytest.approx(0.5)


@pytest.mark.parametrize("vmax", [5.0, 8.0, 20.0])
def test_oracle_matches_trapezoid_without_jerk_limits(vmax):
    opm = validate_opm((0.9, -0.9, 0.9) + NO_JERK)
    path = build_path(straight_waypoints(100.0, 2.0), ds=2.0)
    oracle = dp_oracle_plan(path, opm, BoundaryConditions(v_global_max=vmax), a_grid=0.05).total_time
    exact = trapezoid_time(100.0, 0.9, 0.9, vmax)
    assert oracle >= exact - 1e-9
    assert oracle == pytest.approx(exact, rel=2e-3)
    # the cruise speed is reached mid-segment, so the discrete plan is slightly slower
    planned = plan_velocity(path, opm, BoundaryConditions(v_global_max=vmax)).total_time
    assert exact - 1e-9 <= planned <= oracle + 1e-9
    assert planned == pytest.approx(exact, rel=1e-3)


def test_oracle_station_limit():
    path = build_path(straight_waypoints(600.0))
    with pytest.raises(PreconditionError):
        dp_oracle_plan(path, OPM1, BoundaryConditions())


def test_start_above_cap_names_station():
    path = arc_path(np.full(50, 0.1))
    with pytest.raises(InfeasibleError) as info:
        plan_velocity(path, OPM1, BoundaryConditions(v_start=5.0))
    assert info.value.station == 0


def test_unreachable_end_names_station():
    path = build_path(straight_waypoints(20.0))
    with pytest.raises(InfeasibleError) as info:
        plan_velocity(path, OPM1, BoundaryConditions(v_end=25.0))
    assert info.value.station == len(path) - 1


def test_cannot_brake_for_corner():
    kappa = np.zeros(40)
    kappa[10:] = 0.1
    with pytest.raises(InfeasibleError) as info:
        plan_velocity(arc_path(kappa), OPM1, BoundaryConditions(v_start=20.0, v_global_max=25.0))
    assert info.value.station is not None


@pytest.mark.parametrize("opm", [OPM1, preset(DrivingStyle.Normal)], ids=["opm1", "normal"])
def test_symmetric_profile(opm):
    path = build_path(s_curve_waypoints(), ds=1.0)
    mirrored = arc_path(-path.kappa[::-1])
    a = plan_velocity(arc_path(path.kappa), opm, BoundaryConditions())
    b = plan_velocity(mirrored, opm, BoundaryConditions())
    np.testing.assert_allclose(a.v, b.v[::-1], atol=1e-6)


def test_symmetric_path_symmetric_profile():
    kappa = np.concatenate([np.zeros(40), np.full(30, 0.03), np.zeros(40)])
    prof = plan_velocity(arc_path(kappa), OPM1, BoundaryConditions())
    np.testing.assert_allclose(prof.v, prof.v[::-1], atol=1e-6)


routes = st.lists(
    st.tuples(st.integers(5, 25), st.sampled_from([0.0, 0.0, 0.01, -0.02, 0.04])), min_size=2, max_size=5
)


@given(route=routes, grow=st.floats(1.0, 2.0), which=st.integers(0, 4))
@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_widening_never_slows(route, grow, which):
    kappa = np.concatenate([np.full(n, k) for n, k in route])
    path = arc_path(kappa, ds=2.0)
    base = OPM1.as_list()
    wide = list(base)
    wide[which] *= grow
    bc = BoundaryConditions(v_global_max=15.0)
    t_base = plan_velocity(path, validate_opm(base), bc).total_time
    t_wide = plan_velocity(path, validate_opm(wide), bc).total_time
    assert t_wide <= t_base * (1 + 1e-6)


def test_profile_csv_round_trip(tmp_path, s_curve_path):
    prof = plan_velocity(s_curve_path, OPM2, BoundaryConditions())
    write_profile_csv(prof, tmp_path / "p.csv")
    back = read_profile_csv(tmp_path / "p.csv", kappa=prof.kappa)
    for name in ("s", "v", "ax_plan", "t"):
        assert np.array_equal(getattr(back, name), getattr(prof, name))
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "s,v,ax_plan,t"


@pytest.mark.parametrize("s", [0.0, 12.5, 50.0, 99.0])
def test_profile_lookup_interpolates_v_squared(s):
    prof = profile_of([0.0, 10.0], [0.0, 100.0])
    v, _ = prof.at(s)
    assert v == pytest.approx(math.sqrt(100.0 * s / 100.0))


@pytest.mark.parametrize("kw", [dict(v_start=-1.0), dict(v_global_max=0.0), dict(v_start=40.0)])
def test_boundary_validation(kw):
    with pytest.raises(ValueError):
        BoundaryConditions(**kw)
