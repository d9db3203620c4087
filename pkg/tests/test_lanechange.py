import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from opmdrive.errors import InvalidRequestError, PreconditionError
from opmdrive.lanechange import (
    C2,
    C3,
    LaneChangeRequest,
    check_feasibility,
    generate_lane_change_path,
    min_lane_change_length,
    read_plan_csv,
    shape,
    shape_d2,
    shape_d3,
    write_plan_csv,
)
from opmdrive.opm import OPM1, OPM2, validate_opm

AY_ONLY = validate_opm((0.9, -0.9, 0.9, math.inf, math.inf))


def test_shape_constants_by_numerical_maximization():
    res = minimize_scalar(lambda xi: -abs(shape_d2(xi)), bounds=(0.0, 0.5), method="bounded",
                          options={"xatol": 1e-12})
    assert -res.fun == pytest.approx(5.7735, abs=1e-3)
    assert -res.fun == pytest.approx(C2, abs=1e-9)
    xi = np.linspace(0.0, 1.0, 100001)
    assert np.max(np.abs(shape_d3(xi))) == pytest.approx(60.0, abs=1e-6)
    assert C3 == 60.0


def test_shape_boundary_values():
    assert shape(0.0) == 0.0 and shape(1.0) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "opm, expected",
    [(AY_ONLY, 47.38), (OPM1, 70.47)],
    ids=["accel-binding", "jerk-binding"],
)
def test_min_length_examples(opm, expected):
    assert min_lane_change_length(10.0, 3.5, opm) == pytest.approx(expected, abs=0.01)


@pytest.mark.parametrize("v, w", [(10.0, 0.0), (0.0, 3.5), (-2.0, 3.5)])
def test_min_length_rejects(v, w):
    with pytest.raises(InvalidRequestError):
        min_lane_change_length(v, w, OPM1)


@pytest.mark.parametrize(
    "opm, gap, feasible, length",
    [
        (OPM1, 100.0, True, 70.47),
        (OPM1, 50.0, False, 70.47),
        (OPM2, 50.0, False, 51.92),
        (OPM2, 52.0, True, 51.92),
    ],
)
def test_feasibility(opm, gap, feasible, length):
    f = check_feasibility(LaneChangeRequest(10.0, 3.5, gap), opm)
    assert bool(f) is feasible
    assert f.length == pytest.approx(length, abs=0.01)
    if not feasible:
        assert f.reason.startswith("corridor-too-short")


def test_generate_on_infeasible_request():
    with pytest.raises(PreconditionError):
        generate_lane_change_path(LaneChangeRequest(10.0, 3.5, 50.0), OPM1)


@pytest.mark.parametrize("w", [3.5, -3.5, 1.2])
def test_boundary_conditions(w):
    plan = generate_lane_change_path(LaneChangeRequest(15.0, w, 500.0), OPM2)
    p = plan.path
    assert p.y[0] == 0.0 and p.y[-1] == pytest.approx(w, abs=1e-9)
    for i in (0, -1):
        assert abs(p.heading[i]) <= 1e-6
        assert abs(p.kappa[i]) <= 1e-6
    assert np.max(np.diff(p.s)) <= 0.5 + 1e-12


def test_plan_respects_bounds():
    plan = generate_lane_change_path(LaneChangeRequest(10.0, 3.5, 100.0), OPM1)
    assert plan.max_ay <= 0.9 + 1e-3
    assert plan.max_jy <= 0.6 + 1e-3


def test_tight_acceleration_case():
    plan = generate_lane_change_path(LaneChangeRequest(10.0, 3.5, 100.0), AY_ONLY)
    assert abs(plan.max_ay - 0.9) / 0.9 <= 0.005


def test_mirror_symmetry():
    a = generate_lane_change_path(LaneChangeRequest(12.0, 3.5, 200.0), OPM1)
    b = generate_lane_change_path(LaneChangeRequest(12.0, -3.5, 200.0), OPM1)
    np.testing.assert_allclose(a.path.x, b.path.x, atol=1e-9)
    np.testing.assert_allclose(a.path.y, -b.path.y, atol=1e-9)
    np.testing.assert_allclose(a.path.kappa, -b.path.kappa, atol=1e-9)


def test_curvature_jumps_shrink_with_ds():
    req = LaneChangeRequest(10.0, 3.5, 200.0)
    spacings = (1.0, 0.5, 0.25, 0.125)
    jumps = [np.max(np.abs(np.diff(generate_lane_change_path(req, OPM1, ds=ds).path.kappa))) for ds in spacings]
    # first order in ds; finer grids sample closer to the peak of dkappa/ds, hence the 5% slack
    for coarse, fine in zip(jumps, jumps[1:]):
        assert fine <= 0.5 * coarse * 1.05
    rates = [j / ds for j, ds in zip(jumps, spacings)]
    assert rates[-1] == pytest.approx(rates[-2], rel=0.01)


@given(
    v=st.floats(3.0, 35.0),
    w=st.floats(0.5, 7.0),
    ay=st.floats(0.3, 5.0),
    jy=st.floats(0.2, 3.0),
)
def test_generated_peaks_within_bounds(v, w, ay, jy):
    opm = validate_opm((1.0, -1.0, ay, 1.0, jy))
    plan = generate_lane_change_path(LaneChangeRequest(v, w, 1e6), opm, ds=2.0)
    assert plan.max_ay <= ay * (1 + 1e-6)
    assert plan.max_jy <= jy * (1 + 1e-6)
    # one of the two limits binds
    assert max(plan.max_ay / ay, plan.max_jy / jy) == pytest.approx(1.0, rel=5e-3)


def test_plan_csv_round_trip(tmp_path):
    plan = generate_lane_change_path(LaneChangeRequest(10.0, 3.5, 100.0), OPM1)
    write_plan_csv(plan, tmp_path / "lc.csv")
    path, summary = read_plan_csv(tmp_path / "lc.csv")
    for name in ("s", "x", "y", "heading", "kappa"):
        assert np.array_equal(getattr(path, name), getattr(plan.path, name))
    assert summary == {"L": plan.length, "max_ay": plan.max_ay, "max_jy": plan.max_jy}
