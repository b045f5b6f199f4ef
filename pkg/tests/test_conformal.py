import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levy_loewner.conformal import (ChainError, SlitChain, capacity_factor, capacity_increment,
                                    chain_capacity, chain_deriv, chain_eval, chain_eval_circle,
                                    chain_eval_deriv, chain_from_path, circle_slit_map,
                                    inverse_slit_map, log_capacity, rotated_slit_map,
                                    rotated_slit_map_deriv, sample_chain, slit_length_from_capacity,
                                    slit_map, slit_map_deriv)
from levy_loewner.driver import DriverPath, DriverSpec, JumpModel, make_rng

DELTAS = [1e-6, 1e-4, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0]
deltas = st.floats(1e-6, 10.0)
exterior = st.tuples(st.floats(1.0001, 30.0), st.floats(-math.pi, math.pi)).map(
    lambda rp: rp[0] * complex(math.cos(rp[1]), math.sin(rp[1])))


def random_exterior(rng, n, rmax=3.0):
    r = rng.uniform(1.0, rmax, n) * (1 + 1e-9)
    return r * np.exp(1j * rng.uniform(-math.pi, math.pi, n))


@pytest.mark.parametrize("delta", DELTAS)
def test_tip_and_fixed_point(delta):
    assert abs(slit_map(delta, 1.0) - (1 + delta)) <= 1e-12 * (1 + delta)
    assert abs(slit_map(delta, -1.0) + 1) <= 1e-12


@pytest.mark.parametrize("delta", DELTAS)
def test_capacity_factor_against_far_field_slope(delta):
    R = 1e6
    slope = (slit_map(delta, 2 * R) - slit_map(delta, R)) / R
    assert abs(slope - capacity_factor(delta)) / capacity_factor(delta) < 1e-9


def test_zero_slit_is_identity_and_interior_rejected():
    z = np.array([1.5, -2j, 3 + 4j])
    np.testing.assert_array_equal(slit_map(0.0, z), z)
    with pytest.raises(ValueError):
        slit_map(1.0, 0.5)


@settings(max_examples=200, deadline=None)
@given(deltas, exterior)
def test_image_stays_outside_disk_and_off_slit(delta, z):
    w = slit_map(delta, z)
    assert abs(w) > 1.0
    assert not (abs(w.imag) < 1e-14 and 1.0 <= w.real <= 1.0 + delta)


@settings(max_examples=200, deadline=None)
@given(deltas, exterior)
def test_conjugation_symmetry(delta, z):
    assert abs(slit_map(delta, z.conjugate()) - slit_map(delta, z).conjugate()) <= 1e-13 * abs(z)


@settings(max_examples=200, deadline=None)
@given(deltas, exterior)
def test_inverse_round_trip(delta, z):
    # near the tip preimage h' -> 0 and the inverse is ill-conditioned by |w| / |h'|
    w = slit_map(delta, z)
    cond = abs(w) / abs(slit_map_deriv(delta, z))
    assert abs(inverse_slit_map(delta, w) - z) <= 1e-12 * abs(z) + 1e-14 * cond


@settings(max_examples=100, deadline=None)
@given(deltas, st.floats(1.05, 10.0), st.floats(-math.pi, math.pi))
def test_derivative_matches_central_difference(delta, r, a):
    z = r * complex(math.cos(a), math.sin(a))
    h = 1e-6 * r
    fd = (slit_map(delta, z + h) - slit_map(delta, z - h)) / (2 * h)
    assert abs(slit_map_deriv(delta, z) - fd) <= 1e-6 * abs(fd)


def test_capacity_factor_strictly_increasing():
    d = np.geomspace(1e-6, 10, 200)
    assert np.all(np.diff(capacity_factor(d)) > 0)
    np.testing.assert_allclose(np.exp(log_capacity(d)), capacity_factor(d), rtol=1e-15)


def test_circle_boundary_lands_on_circle_or_slit():
    phi = np.linspace(-math.pi, math.pi, 2001)
    for delta in (0.01, 1.0, 7.0):
        on, ang, pt = circle_slit_map(0.3, delta, phi)
        assert on.any() and (~on).any()
        # slit points lie on the ray at angle 0.3 between radius 1 and 1 + delta
        rad = np.abs(pt[~on])
        assert np.all((rad >= 1 - 1e-12) & (rad <= 1 + delta + 1e-12))
        np.testing.assert_allclose(np.angle(pt[~on]), 0.3, atol=1e-12)
        # and agree with the exterior formula just outside the circle
        z = (1 + 1e-13) * np.exp(1j * phi)
        w = rotated_slit_map(0.3, delta, z)
        img = np.where(on, np.exp(1j * ang), pt)
        assert np.max(np.abs(img - w)) < 1e-5


@pytest.mark.parametrize("tau", [1e-9, 1e-3, 0.1, 0.5, 2.0])
def test_capacity_consistent_length_inverts_capacity(tau):
    d = slit_length_from_capacity(tau)
    assert capacity_factor(d) == pytest.approx(math.exp(tau), rel=1e-14)
    assert capacity_increment(tau) == tau


def test_paper_convention_length_frozen_value():
    # 2 e^{2 tau}(1 + sqrt(1 - e^{-2 tau})) - 2 at tau = ln(2)/2 is 2 + 2 sqrt(2)
    tau = 0.5 * math.log(2.0)
    assert slit_length_from_capacity(tau, "paper") == pytest.approx(4.82842712474619, rel=1e-14)
    # its capacity factor is e^{2 tau}
    assert capacity_factor(4.82842712474619) == pytest.approx(2.0, rel=1e-14)
    assert capacity_increment(tau, "paper") == 2 * tau


def test_length_rejects_negative_wait_and_bad_convention():
    with pytest.raises(ValueError):
        slit_length_from_capacity(-0.1)
    with pytest.raises(ValueError):
        slit_length_from_capacity(0.1, "other")


def test_rotated_map_tip():
    th, d = 1.2, 0.7
    tip = rotated_slit_map(th, d, complex(math.cos(th), math.sin(th)))
    assert abs(tip - (1 + d) * complex(math.cos(th), math.sin(th))) < 1e-14
    z = 2.0 - 1.0j
    fd = (rotated_slit_map(th, d, z + 1e-7) - rotated_slit_map(th, d, z - 1e-7)) / 2e-7
    assert abs(rotated_slit_map_deriv(th, d, z) - fd) < 1e-7


def _chain(n=20, seed=0, r=0.3, lam=10.0, convention="capacity-consistent"):
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(r), lam)
    return sample_chain(spec, n, make_rng(seed), convention, random_rotation=True)


def test_chain_matches_explicit_composition():
    ch = _chain()
    z = random_exterior(make_rng(1), 50)
    w = z.copy()
    for k in range(len(ch) - 1, -1, -1):
        w = rotated_slit_map(ch.thetas[k], ch.deltas[k], w)
    np.testing.assert_allclose(chain_eval(ch, z), w, rtol=1e-13)
    np.testing.assert_allclose(chain_eval(ch, z, depth=5),
                               chain_eval(ch.prefix(5), z), rtol=0, atol=0)


def test_chain_derivative_matches_finite_difference():
    ch = _chain(15, seed=4)
    z = random_exterior(make_rng(2), 40) * 1.1
    val, der = chain_eval_deriv(ch, z)
    h = 1e-6 * np.abs(z)
    fd = (chain_eval(ch, z + h) - chain_eval(ch, z - h)) / (2 * h)
    assert np.max(np.abs(der - fd) / np.abs(fd)) < 1e-6
    np.testing.assert_array_equal(der, chain_deriv(ch, z))
    np.testing.assert_array_equal(val, chain_eval(ch, z))


def test_chain_capacity_is_product_of_factors():
    ch = _chain(30, seed=5)
    assert chain_capacity(ch) == pytest.approx(np.prod(capacity_factor(ch.deltas)), rel=1e-12)
    assert ch.log_capacity == pytest.approx(ch.taus.sum(), rel=1e-12)
    R = 1e6
    slope = (chain_eval(ch, 2 * R) - chain_eval(ch, R)) / R
    assert abs(slope - chain_capacity(ch)) / chain_capacity(ch) < 1e-8


def test_paper_convention_doubles_capacity_exponent():
    ch = _chain(10, seed=6, convention="paper")
    assert ch.log_capacity == pytest.approx(2 * ch.taus.sum(), rel=1e-12)


def test_empty_chain_and_single_event():
    e = SlitChain.empty()
    z = np.array([1.5, -3j])
    np.testing.assert_array_equal(chain_eval(e, z), z)
    assert chain_capacity(e) == 1.0
    one = SlitChain.from_waits([0.0], [0.3])
    assert chain_capacity(one) == pytest.approx(math.exp(0.3), rel=1e-14)


def test_chain_rejects_interior_points_and_reports_failures():
    ch = _chain(5)
    with pytest.raises(ValueError):
        chain_eval(ch, 0.5)
    err = ChainError("x", event_index=3)
    assert err.event_index == 3


def test_circle_evaluation_agrees_with_exterior_limit():
    ch = _chain(25, seed=8)
    phi = np.linspace(-math.pi, math.pi, 4000, endpoint=False)
    ring = chain_eval_circle(ch, phi)
    near = chain_eval(ch, (1 + 1e-13) * np.exp(1j * phi))
    scale = math.exp(ch.log_capacity)
    assert np.max(np.abs(ring - near)) < 1e-4 * scale
    assert np.all(np.abs(ring) >= 1 - 1e-12)


def test_chain_from_path_events_follow_pieces():
    p = DriverPath([0.2, 0.5], [0.4, -0.1], 1.0, rotation=0.1)
    ch = chain_from_path(p)
    np.testing.assert_allclose(ch.taus, [0.2, 0.3, 0.5])
    np.testing.assert_allclose(ch.thetas, [0.1, 0.5, 0.0])
    assert ch.log_capacity == pytest.approx(1.0)


def test_chain_round_trip_through_events():
    ch = _chain(7)
    again = SlitChain.from_events(ch.events, ch.convention)
    assert again == ch
    assert ch.cumulative_log_capacity()[0] == 0.0
    assert ch.cumulative_log_capacity()[-1] == pytest.approx(ch.log_capacity)
