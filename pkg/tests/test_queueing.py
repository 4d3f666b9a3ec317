import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from dronenet.errors import EmptyBase, InvalidCapacity, UnstableQueue
from dronenet.model import Design
from dronenet.queueing import (
    average_response,
    base_moments,
    delay_factor,
    erlang_c_wait,
    evaluate,
    mgk_delay,
    service_moments,
)

from helpers import colocated, line_instance


def test_service_moments_reference():
    # d = 1668 m at 27.8 m/s with beta = 2 is 120 s of flight
    probe = line_instance([1668.0], [0.0], 1e-4, p=1, q=1)
    # the offset helper is a flat-earth approximation; rescale onto 1668 m
    inst = line_instance([1668.0 * 1668.0 / probe.d[0, 0]], [0.0], 1e-4, p=1, q=1)
    m = service_moments(inst)
    d = inst.d[0, 0]
    assert abs(d - 1668.0) < 0.05
    assert m.s_ij_mean[0, 0] == pytest.approx(2 * d / 27.8 + 1500.0, rel=1e-12)
    assert m.s_ij_mean[0, 0] == pytest.approx(1620.0, abs=0.01)
    assert m.s_ij_second[0, 0] == pytest.approx((2 * d / 27.8 + 1500.0) ** 2, rel=1e-12)


def test_service_moments_zero_distance():
    inst = colocated(1e-4, 1500.0, p=1, q=1)
    m = service_moments(inst)
    assert m.s_ij_mean[0, 0] == 1500.0
    assert m.s_ij_second[0, 0] == 1500.0**2


def test_base_moments_weighted_mean():
    inst = line_instance([0.0, 0.0], [0.0], [1e-4, 3e-4], xi_mean=100.0, p=1, q=1)
    moments = service_moments(inst)
    moments.s_ij_mean[:, 0] = [100.0, 200.0]
    eta, s1, _ = base_moments(inst, moments, Design.from_counts([1], [0, 0], 2), 0)
    assert eta == pytest.approx(4e-4)
    assert s1 == pytest.approx(175.0, rel=1e-12)


def test_base_moments_empty():
    inst = line_instance([0.0], [0.0, 10.0], 1e-4, p=2, q=2)
    with pytest.raises(EmptyBase):
        base_moments(inst, service_moments(inst), Design.from_counts([1, 1], [0], 2), 1)


def test_mgk_reference_values():
    assert mgk_delay(5e-4, 1000.0, 1e6, 1) == pytest.approx(500.0, rel=1e-12)
    assert mgk_delay(1.0, 1.0, 2.0, 2) == pytest.approx(1.0 / 3.0, rel=1e-12)
    assert mgk_delay(0.0, 10.0, 100.0, 3) == 0.0


def test_mgk_errors():
    with pytest.raises(UnstableQueue):
        mgk_delay(1.0, 1.0, 1.0, 1)
    with pytest.raises(InvalidCapacity):
        mgk_delay(0.1, 1.0, 1.0, 0)


@given(st.floats(1e-6, 1.0), st.floats(0.01, 0.99), st.floats(1.0, 5.0))
def test_pollaczek_khinchine_reduction(eta, rho, scv):
    s = rho / eta
    s2 = s * s * scv
    assert mgk_delay(eta, s, s2, 1) == pytest.approx(eta * s2 / (2 * (1 - rho)), rel=1e-12)


@given(st.integers(1, 6), st.floats(0.01, 0.99), st.floats(1e-3, 1e3))
def test_erlang_c_agreement(K, frac, s):
    rho = frac * K
    eta = rho / s
    assert mgk_delay(eta, s, 2 * s * s, K) == pytest.approx(erlang_c_wait(eta, s, K), rel=1e-9)


@given(st.integers(1, 8), st.floats(0.01, 0.99), st.floats(1.0, 3.0))
def test_monotone_in_capacity(K, frac, scv):
    rho = frac * K
    assert mgk_delay(rho, 1.0, scv, K + 1) <= mgk_delay(rho, 1.0, scv, K)


@given(st.integers(1, 6), st.floats(0.01, 0.9), st.floats(0.1, 100.0))
def test_time_scaling(K, frac, c):
    rho = frac * K
    base = mgk_delay(rho, 1.0, 1.5, K)
    scaled = mgk_delay(rho / c, c, 1.5 * c * c, K)
    assert scaled == pytest.approx(c * base, rel=1e-10)


def test_delay_blows_up_near_capacity():
    vals = [delay_factor(3 * (1 - 10.0**-k), 3) for k in range(1, 8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 1e5


def test_delay_factor_large_K_is_finite():
    for K in (10, 15, 20):
        v = delay_factor(0.9 * K, K)
        assert math.isfinite(v) and v > 0
        assert mgk_delay(0.9 * K, 1.0, 2.0, K) == pytest.approx(erlang_c_wait(0.9 * K, 1.0, K), rel=1e-9)


def test_average_response_light_traffic():
    inst = line_instance([1000.0], [0.0], 1e-13, p=1, q=1)
    design = Design.from_counts([1], [0], 2)
    r = average_response(inst, service_moments(inst), design)
    assert r.avg_resp == pytest.approx(inst.d[0, 0] / inst.v, rel=1e-5)


def test_average_response_mm2_colocated():
    inst = colocated(1.0, 1.0, 2.0, p=2, q=1, M=2)
    r = average_response(inst, service_moments(inst), Design.from_counts([2], [0], 2))
    assert r.avg_resp == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_average_response_symmetric_pair():
    inst = line_instance([-800.0, 800.0], [0.0], 2e-4, p=1, q=1)
    r = average_response(inst, service_moments(inst), Design.from_counts([1], [0, 0], 2))
    assert r.resp[0] == pytest.approx(r.resp[1], rel=1e-9)
    assert r.avg_resp == pytest.approx(r.wq[0] + inst.d[0, 0] / inst.v, rel=1e-9)
    assert r.eta[0] == pytest.approx(4e-4)


def test_evaluate_unstable_is_inf():
    inst = colocated(1e-3, 1000.0, p=1, q=1)
    assert evaluate(inst, Design.from_counts([1], [0], 2)) == math.inf


def test_response_lower_bound():
    inst = line_instance([0.0, 900.0, 2000.0], [0.0, 1500.0], 1e-4, p=3, q=2)
    r = average_response(inst, service_moments(inst), Design.from_counts([2, 1], [0, 0, 1], 2))
    for i in range(3):
        assert r.resp[i] >= min(inst.d[i, j] for j in inst.J[i]) / inst.v
    assert (r.wq >= 0).all()
