import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dronenet.errors import InvalidCoordinate, InvalidParam, UncoverableDemand
from dronenet.generators import random_instance
from dronenet.model import (
    CandidateBase,
    DemandPoint,
    Design,
    GeoPoint,
    WGS84_A,
    build_instance,
    check_feasible,
    distance_matrix,
    latlon_to_ecef,
)

from helpers import colocated, line_instance


def test_ecef_reference_points():
    assert latlon_to_ecef(0.0, 0.0) == pytest.approx((WGS84_A, 0.0, 0.0), abs=1e-6)
    x, y, z = latlon_to_ecef(90.0, 0.0)
    assert abs(x) < 1e-6 and abs(y) < 1e-6
    assert z == pytest.approx(6356752.314245, abs=1e-5)
    assert latlon_to_ecef(0.0, 90.0) == pytest.approx((0.0, WGS84_A, 0.0), abs=1e-6)


@pytest.mark.parametrize("lat,lon", [(91.0, 0.0), (-90.5, 0.0), (0.0, 181.0), (float("nan"), 0.0)])
def test_bad_coordinates(lat, lon):
    with pytest.raises(InvalidCoordinate):
        GeoPoint(lat, lon)


def test_one_degree_latitude_near_norfolk():
    a = GeoPoint(36.85, -76.0).ecef
    b = GeoPoint(37.85, -76.0).ecef
    d = math.dist(a, b)
    assert 110_900 < d < 111_100


def test_demand_validation():
    p = GeoPoint(0, 0)
    with pytest.raises(InvalidParam):
        DemandPoint("a", p, 0.0, 10.0)
    with pytest.raises(InvalidParam):
        DemandPoint("a", p, 1.0, -1.0)
    with pytest.raises(InvalidParam):
        DemandPoint("a", p, 1.0, 10.0, 50.0)
    assert DemandPoint("a", p, 1.0, 10.0).xi_second_moment == 100.0


def test_uncoverable_demand():
    with pytest.raises(UncoverableDemand):
        line_instance([0.0, 9000.0], [0.0], 1e-4, r=5000.0, p=1, q=1)


def test_parameter_checks():
    with pytest.raises(InvalidParam):
        line_instance([0.0], [0.0], 1e-4, p=1, q=2)
    with pytest.raises(InvalidParam):
        line_instance([0.0], [0.0, 10.0], 1e-4, p=1, q=2)
    with pytest.raises(InvalidParam):
        line_instance([0.0], [0.0], 1e-4, p=1, q=1, rho_cap=1.5)
    with pytest.raises(InvalidParam):
        line_instance([0.0], [0.0], 1e-4, p=1, q=1, speed=3)


def test_duplicate_base_ids():
    p = GeoPoint(0, 0)
    with pytest.raises(InvalidParam):
        build_instance([DemandPoint("d", p, 1.0, 1.0)], [CandidateBase("b", p), CandidateBase("b", p)], p=1, q=1)


@given(st.integers(0, 10_000))
def test_catchment_duality_and_distance_consistency(seed):
    inst = random_instance(seed, 7, 4, 3, 2)
    for i in range(inst.n_demands):
        for j in range(inst.n_bases):
            assert (j in inst.J[i]) == (i in inst.I[j])
            assert (j in inst.J[i]) == (inst.d[i, j] <= inst.r)
    # row-wise and column-wise evaluation must agree exactly
    for i in range(inst.n_demands):
        row = distance_matrix([inst.demands[i]], inst.bases)[0]
        assert np.array_equal(row, inst.d[i])
    for j in range(inst.n_bases):
        col = distance_matrix(inst.demands, [inst.bases[j]])[:, 0]
        assert np.array_equal(col, inst.d[:, j])


def test_instance_is_read_only():
    inst = random_instance(1, 4, 2, 2, 1)
    with pytest.raises(ValueError):
        inst.d[0, 0] = 1.0


def test_steady_state_violation_at_capacity():
    # one drone, offered load exactly one
    inst = colocated(1e-3, 1000.0, p=1, q=1, M=2)
    viol = check_feasible(inst, Design.from_counts([1], [0], 2))
    assert [v.kind for v in viol] == ["SteadyState"]
    assert viol[0].where == (0,)


def test_feasible_design_has_no_violations():
    inst = line_instance([0.0, 500.0, 1500.0], [0.0, 1000.0], 1e-4, p=3, q=2, M=2)
    d = Design.from_counts([2, 1], [0, 0, 1], 2)
    assert check_feasible(inst, d) == []


def test_structural_violations():
    inst = line_instance([0.0, 500.0, 1500.0], [0.0, 1000.0], 1e-4, p=3, q=1, M=2)
    kinds = {v.kind for v in check_feasible(inst, Design.from_counts([2, 1], [0, 0, 1], 2))}
    assert "TooManyBases" in kinds
    kinds = {v.kind for v in check_feasible(inst, Design.from_counts([1, 0], [0, 0, 0], 2))}
    assert "FleetNotFullyDeployed" in kinds
    kinds = {v.kind for v in check_feasible(inst, Design.from_counts([2, 0], [0, 1, 0], 2))}
    assert "AssignedToClosedBase" in kinds
    bad = Design(x=(True, False), K=(2, 0), y=(0, 0, 0), gamma=((True, False), (False, False)))
    assert "GammaInconsistent" in {v.kind for v in check_feasible(inst, bad)}
    assert [v.kind for v in check_feasible(inst, Design.from_counts([2], [0], 2))] == ["DimensionMismatch"]


def test_out_of_range_assignment():
    inst = line_instance([0.0, 4000.0], [0.0, 4500.0], 1e-4, r=3000.0, p=2, q=2, M=2)
    kinds = {v.kind for v in check_feasible(inst, Design.from_counts([1, 1], [1, 1], 2))}
    assert "AssignmentOutOfRange" in kinds


def test_replace_rebuilds_catchments():
    inst = line_instance([0.0, 2000.0], [0.0, 2500.0], 1e-4, r=3000.0, p=2, q=2)
    small = inst.replace(r=1000.0)
    assert small.J == ((0,), (1,))
    assert inst.J == ((0, 1), (0, 1))


def test_design_dict_round_trip():
    d = Design.from_counts([0, 2, 1], [1, 2, 1], 2)
    assert Design.from_dict(d.to_dict()) == d
    assert d.open_bases == [1, 2]
    assert d.gamma == ((False, False), (False, True), (True, False))
