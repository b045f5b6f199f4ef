import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scipy.spatial import cKDTree

from levy_loewner.conformal import (SlitChain, chain_deriv, chain_eval, chain_eval_circle,
                                    chain_from_path, sample_chain)
from levy_loewner.driver import DriverPath, DriverSpec, JumpModel, make_rng, sample_path
from levy_loewner.hull import (HullBoundary, annulus_energy, arc_length, arc_lengths, arc_points,
                               boundary_length_series, box_counting_dimension, cone_test,
                               diameter, hausdorff_distance, rescale, trace_boundary,
                               trace_flow_boundary)


def _chain(n=20, seed=0, r=0.0, lam=8.0):
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(r), lam)
    return sample_chain(spec, n, make_rng(seed), random_rotation=True)


def _polygon_length(pts):
    return float(np.abs(np.roll(pts, -1) - pts).sum())


def test_empty_chain_traces_the_circle():
    b = trace_boundary(SlitChain.empty(), 1e-2)
    assert abs(_polygon_length(b.points) - 2 * math.pi) < 1e-3
    assert np.allclose(np.abs(b.points), 1.0)
    assert not b.degraded and b.resolution <= 1e-2


def test_single_slit_contains_tip():
    ch = SlitChain([0.0], [1.0], [0.0], [math.log1p(1.0 / 8.0)])
    b = trace_boundary(ch, 1e-3)
    assert np.min(np.abs(b.points - 2.0)) <= 1e-3
    # every point is on the circle or on the segment [1, 2]
    on_circle = np.abs(np.abs(b.points) - 1) < 1e-12
    on_slit = (np.abs(b.points.imag) < 1e-12) & (b.points.real >= 1 - 1e-12) & (b.points.real <= 2 + 1e-12)
    assert np.all(on_circle | on_slit)


def test_single_slit_polygon_walks_the_slit_twice():
    b = trace_boundary(SlitChain([0.3], [1.0], [0.0], [math.log1p(1.0 / 8.0)]), 1e-4)
    assert _polygon_length(b.points) == pytest.approx(2 * math.pi + 2.0, abs=1e-3)


@pytest.mark.parametrize("seed", [0, 1])
def test_dense_circle_images_lie_near_the_trace(seed):
    # every f_n(e^{i phi}) is a boundary point, so it must be within tol of the polyline
    ch = _chain(8, seed=seed, r=0.4)
    b = trace_boundary(ch, 2e-3)
    ref = chain_eval_circle(ch, np.linspace(-math.pi, math.pi, 400_000, endpoint=False))
    tree = cKDTree(np.column_stack((b.points.real, b.points.imag)))
    assert tree.query(np.column_stack((ref.real, ref.imag)))[0].max() <= 2e-3


def test_nested_slits_of_a_constant_driver():
    # each slit grows from the tip of the previous one
    ch = SlitChain.from_waits(np.zeros(300), np.full(300, 0.01))
    b = trace_boundary(ch, 1e-2 * math.exp(ch.log_capacity), max_points=10 ** 6)
    assert not b.degraded
    tip = chain_eval(ch, 1.0 + 1e-12)
    assert np.min(np.abs(b.points - tip)) <= b.resolution
    assert cone_test(b, -1e-9, 1e-9)


def test_arcs_with_negligible_harmonic_measure_are_resolved():
    # about a hundred events: some early arcs are invisible to angles on the circle
    spec = DriverSpec.compound_poisson(JumpModel.poisson_kernel(0.0), 50.0)
    ch = chain_from_path(sample_path(spec, 2.0, rng=make_rng(9, 3), random_rotation=True))
    tol = 1e-3 * math.exp(ch.log_capacity)
    b = trace_boundary(ch, tol)
    assert not b.degraded and b.resolution <= tol
    # the arcs sampled directly are all on the trace
    pts = arc_points(ch, 16, 64)
    tree = cKDTree(np.column_stack((b.points.real, b.points.imag)))
    assert tree.query(np.column_stack((pts.real, pts.imag)))[0].max() <= tol


def test_spacing_and_degraded_flag():
    ch = _chain(30, seed=1)
    b = trace_boundary(ch, 0.05)
    gaps = np.abs(np.roll(b.points, -1) - b.points)
    assert gaps.max() <= 0.05 and b.resolution == pytest.approx(gaps.max())
    small = trace_boundary(ch, 1e-6, max_points=5000)
    assert small.degraded and len(small) <= 5000 and small.resolution > 1e-6


def test_refinement_is_monotone_in_hausdorff_distance():
    ch = _chain(8, seed=2)
    ref = trace_boundary(ch, 2e-4)
    assert not ref.degraded
    d = [hausdorff_distance(trace_boundary(ch, 1e-6, max_points=m), ref) for m in (2000, 4000, 8000)]
    assert d[0] >= d[1] >= d[2]
    coarse = trace_boundary(ch, 0.05)
    assert hausdorff_distance(coarse, ref) <= 0.05


def test_rescale_scales_diameter_exactly():
    ch = _chain(25, seed=3)
    b = trace_boundary(ch, 1e-2)
    r = rescale(b)
    assert r.rescaled and r.points[0] == b.points[0] * math.exp(-b.log_capacity)
    assert diameter(r) == pytest.approx(diameter(b) * math.exp(-b.log_capacity), rel=1e-12)
    with pytest.raises(ValueError):
        rescale(r)
    e = trace_boundary(SlitChain.empty(), 1e-2)
    np.testing.assert_array_equal(rescale(e).points, e.points)


def test_rescaled_diameter_distortion_bounds():
    for seed in range(10):
        ch = _chain(40, seed=seed, r=0.5 * (seed % 2), lam=5.0 + seed)
        d = diameter(rescale(trace_boundary(ch, 5e-3 * math.exp(ch.log_capacity))))
        assert 1.0 - 1e-2 <= d <= 4.0 + 1e-2


def test_diameter_and_hausdorff_hand_cases():
    circle = np.exp(1j * np.linspace(0, 2 * math.pi, 1000, endpoint=False))
    assert diameter(circle) == pytest.approx(2.0, abs=1e-5)
    a = 1 + np.linspace(0, 1, 101)
    b = 1 + np.linspace(0, 2, 201)
    assert hausdorff_distance(a, b) == pytest.approx(1.0)
    assert hausdorff_distance(a, a) == 0.0
    assert diameter(np.array([1 + 1j, 1 + 1j])) == 0.0
    assert diameter(np.array([0, 1, 2, 3.0])) == 3.0            # collinear input
    with pytest.raises(ValueError):
        hausdorff_distance([], a)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 60), st.integers(0, 10_000))
def test_diameter_equals_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=n) + 1j * rng.normal(size=n)
    brute = np.abs(pts[:, None] - pts[None, :]).max()
    assert diameter(pts) == pytest.approx(brute, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 10_000))
def test_hausdorff_equals_brute_force(n, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    b = rng.normal(size=m) + 1j * rng.normal(size=m)
    d = np.abs(a[:, None] - b[None, :])
    brute = max(d.min(axis=1).max(), d.min(axis=0).max())
    assert hausdorff_distance(a, b) == pytest.approx(brute, rel=1e-14)


def test_cone_test_constant_driver_and_monotonicity():
    ch = SlitChain.from_waits([0.0, 0.0, 0.0], [0.4, 0.3, 0.5])
    b = trace_boundary(ch, 1e-3)
    assert cone_test(b, -0.01, 0.01)
    assert cone_test(rescale(b), -0.01, 0.01)
    rough = trace_boundary(_chain(30, seed=4, lam=20.0), 1e-2)
    full = cone_test(rough, -math.pi, math.pi - 1e-15)
    assert full
    narrow = cone_test(rough, -0.2, 0.2)
    for wider in ((-0.3, 0.3), (-1.0, 0.5), (-3.0, 3.0)):
        assert cone_test(rough, *wider) >= narrow
    with pytest.raises(ValueError):
        cone_test(rough, 0.2, 0.1)


def test_box_counting_sanity_oracles():
    circle = np.exp(1j * np.linspace(0, 2 * math.pi, 20000, endpoint=False))
    assert 0.95 <= box_counting_dimension(circle, polyline=True).slope <= 1.05
    seg = np.linspace(0, 1, 2) + 0j
    s = box_counting_dimension(seg, 1e-3, 1e-1, polyline=True, closed=False)
    assert 0.95 <= s.slope <= 1.05 and s.accepted
    rng = make_rng(0)
    square = rng.uniform(0, 1, 400_000) + 1j * rng.uniform(0, 1, 400_000)
    sq = box_counting_dimension(square, 1e-2, 1e-1, polyline=False)
    assert 1.9 <= sq.slope <= 2.1


def test_box_counting_on_hulls_and_resolution_guard():
    one = trace_boundary(SlitChain([0.0], [1.0], [0.0], [math.log1p(1 / 8)]), 1e-3)
    assert 0.9 <= box_counting_dimension(one).slope <= 1.1
    coarse = trace_boundary(_chain(10), 0.2)
    with pytest.raises(ValueError):
        box_counting_dimension(coarse)


def test_arc_length_first_event_is_delta():
    ch = _chain(10, seed=5)
    assert arc_length(ch, 1) == pytest.approx(ch.deltas[0], rel=1e-14)
    with pytest.raises(ValueError):
        arc_length(ch, 0)
    with pytest.raises(ValueError):
        arc_length(ch, 11)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_arc_lengths_match_riemann_oracle(seed):
    ch = _chain(20, seed=seed)
    res = arc_lengths(ch)
    assert res.converged.all()
    N = 10 ** 6
    u = (np.arange(N) + 0.5) / N
    for k in (2, 7, 13, 20):
        d = ch.deltas[k - 1]
        z = (1 + d * u * u) * np.exp(1j * ch.thetas[k - 1])    # rho = 1 + d u^2 removes the endpoint singularity
        riemann = np.sum(np.abs(chain_deriv(ch.prefix(k - 1), z)) * 2 * d * u) / N
        assert res.lengths[k - 1] == pytest.approx(riemann, rel=1e-4)
    assert np.all(res.lengths > 0)


def test_arc_lengths_bounded_below_by_min_derivative():
    ch = _chain(12, seed=6)
    res = arc_lengths(ch)
    for k in range(2, 13):
        rho = np.linspace(1, 1 + ch.deltas[k - 1], 200)[1:]
        dmin = np.abs(chain_deriv(ch.prefix(k - 1), rho * np.exp(1j * ch.thetas[k - 1]))).min()
        assert res.lengths[k - 1] >= ch.deltas[k - 1] * dmin * (1 - 1e-9)


def test_boundary_length_series_properties():
    ch = _chain(60, seed=7)
    s = boundary_length_series(ch)
    assert s[0] == pytest.approx(2 * math.pi) and s.size == 61
    raw = s * np.exp(ch.cumulative_log_capacity())
    assert np.all(np.diff(raw) > 0)


def test_length_series_close_to_polygon_length_for_single_slit():
    # one slit: 2 pi + delta (the length counts the slit once)
    ch = SlitChain([0.0], [1.0], [0.0], [math.log1p(1 / 8)])
    s = boundary_length_series(ch)
    assert s[1] == pytest.approx((2 * math.pi + 1.0) / (1 + 1 / 8), rel=1e-12)


def test_arc_points_cover_hull():
    ch = _chain(20, seed=8)
    pts = arc_points(ch, 64, 2048)
    b = trace_boundary(ch, 1e-3 * math.exp(ch.log_capacity), max_points=10 ** 6)
    outside = b.points[np.abs(b.points) > 1 + 1e-6]
    d = cKDTree(np.column_stack((pts.real, pts.imag))).query(np.column_stack((outside.real, outside.imag)))[0]
    assert d.max() < 0.2 * math.exp(ch.log_capacity) / 64 * 10
    assert diameter(pts) <= diameter(b) + b.resolution


def test_annulus_energy_identity_and_monotone():
    e = SlitChain.empty()
    for d in (0.1, 1.0, 2.0):
        assert annulus_energy(e, d) == pytest.approx(d, rel=1e-10)
    ch = _chain(15, seed=9)
    vals = [annulus_energy(ch, d) for d in (0.1, 0.5, 1.0, 2.0)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        annulus_energy(ch, 0.0)


def test_annulus_energy_scaling_constant_is_uniform():
    ratios = []
    for seed in range(100):
        ch = _chain(10, seed=seed, r=0.3, lam=10.0)
        for d in (0.1, 0.5, 1.0, 2.0):
            ratios.append(annulus_energy(ch, d, n_theta=256) / (1 + d) ** 2)
    ratios = np.array(ratios)
    assert np.all(np.isfinite(ratios)) and ratios.max() < 2.0


def test_flow_boundary_is_approximate_and_close_to_exact():
    p = DriverPath([0.3], [0.5], 0.6)
    exact = trace_boundary(chain_from_path(p), 1e-3)
    approx = trace_flow_boundary(p, n_points=4096, eta=1e-9)
    assert approx.approximate and not exact.approximate
    # the flow samples the circle uniformly, so its gaps near the tips set the error
    assert hausdorff_distance(approx, exact) <= approx.resolution


def test_boundary_equality_is_bitwise():
    ch = _chain(5)
    a = trace_boundary(ch, 1e-2)
    b = trace_boundary(ch, 1e-2)
    assert a == b
    assert a != HullBoundary(a.points * 1.0000001, a.log_capacity)
