import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmflow.partition import (FOUR_PI, InsufficientResolution, build_quadrature,
                              graded_breakpoints, log_partition, logZ_grad, logZ_hess,
                              moments, partition_Z)

finite_mu = st.lists(st.floats(-40, 40), min_size=3, max_size=3).map(np.array)


def test_quadrature_size_and_measure():
    q = build_quadrature(8, 16)
    assert q.size == 128
    assert abs(q.weights.sum() - FOUR_PI) < 1e-12
    assert np.all(q.weights > 0)
    assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0, atol=1e-15)


@pytest.mark.parametrize("axis", [0, 1, 2])
def test_sphere_moments(axis):
    q = build_quadrature(8, 16, axis=axis)
    for j in range(3):
        assert abs(q.integrate(q.nodes[:, j] ** 2) - FOUR_PI / 3) < 1e-12
        assert abs(q.integrate(q.nodes[:, j] ** 4) - FOUR_PI / 5) < 1e-12
    # mixed moment <p1^2 p2^2> = 1/15
    assert abs(q.integrate(q.sq[:, 0] * q.sq[:, 1]) - FOUR_PI / 15) < 1e-12


def test_rejects_low_orders():
    with pytest.raises(InsufficientResolution):
        build_quadrature(4, 16)
    with pytest.raises(InsufficientResolution):
        build_quadrature(8, 8)


def test_graded_rule_integrates_polynomials():
    bp = graded_breakpoints([-1.0, 1.0], levels=10)
    q = build_quadrature(8, 16, breakpoints=bp)
    assert abs(q.weights.sum() - FOUR_PI) < 1e-12
    assert abs(q.integrate(q.sq[:, 2] ** 3) - FOUR_PI / 7) < 1e-12


def test_Z_at_zero(small_quad):
    assert abs(partition_Z(np.zeros(3), small_quad) - FOUR_PI) < 1e-12


def test_Z_shift_identity(small_quad):
    # |p|^2 = 1 on the sphere, so adding t to every multiplier scales Z by e^t
    for t in (-3.0, 0.5, 7.0):
        z = partition_Z(np.full(3, t), small_quad)
        assert abs(z / (np.exp(t) * FOUR_PI) - 1) < 1e-13


def test_Z_peaked_against_fine_rule():
    mu = np.array([10.0, -5.0, -5.0])
    ref = partition_Z(mu, build_quadrature(128, 256))
    val = partition_Z(mu, build_quadrature(32, 64))
    assert np.isfinite(val) and val > 0
    assert abs(val / ref - 1) < 1e-10


def test_log_partition_does_not_overflow(small_quad):
    mu = np.array([900.0, -450.0, -450.0])
    lz = log_partition(mu, small_quad)
    assert np.isfinite(lz) and lz > 800


def test_grad_at_zero(small_quad):
    assert np.allclose(logZ_grad(np.zeros(3), small_quad), 1 / 3, atol=1e-14)


@given(finite_mu)
def test_grad_components_sum_to_one(mu):
    g = logZ_grad(mu, build_quadrature(16, 32))
    assert abs(g.sum() - 1) < 1e-13
    assert np.all((g > 0) & (g < 1))


def test_grad_matches_finite_difference(quad):
    mu = np.array([6.0, -3.0, -3.0])
    g = logZ_grad(mu, quad)
    assert g[0] > 1 / 3
    h = 1e-5
    fd = [(log_partition(mu + h * e, quad) - log_partition(mu - h * e, quad)) / (2 * h)
          for e in np.eye(3)]
    assert np.max(np.abs(g - fd)) < 1e-7


def test_hess_at_zero(small_quad):
    n = logZ_hess(np.zeros(3), small_quad)
    expect = np.full((3, 3), -2 / 45) + np.eye(3) * (6 / 45)
    assert np.allclose(n, expect, atol=1e-14)
    f1 = np.array([-1, 1, 0]) / np.sqrt(2)
    f2 = np.array([1, 1, -2]) / np.sqrt(6)
    b = np.column_stack([f1, f2])
    assert np.allclose(b.T @ n @ b, 2 / 15 * np.eye(2), atol=1e-14)


@given(finite_mu, st.lists(st.floats(-1, 1), min_size=2, max_size=2))
def test_hess_positive_on_plane(mu, c):
    c = np.array(c)
    if np.linalg.norm(c) < 1e-3:
        return
    e = np.column_stack([[-1, 1, 0], [1, 1, -2]]) @ c
    n = logZ_hess(mu, build_quadrature(16, 32))
    assert e @ n @ e > 0
    assert np.allclose(n, n.T)
    assert np.allclose(n.sum(axis=1), 0, atol=1e-14)


def test_hess_matches_gradient_differences(quad):
    mu = np.array([2.0, 0.5, -2.5])
    h = 1e-5
    fd = np.column_stack([(logZ_grad(mu + h * e, quad) - logZ_grad(mu - h * e, quad)) / (2 * h)
                          for e in np.eye(3)])
    assert np.max(np.abs(logZ_hess(mu, quad) - fd)) < 1e-8


def test_moments_batch_agrees_with_single(small_quad, rng):
    mu = rng.normal(0, 5, (7, 4, 3))
    lz, g, n = moments(mu, small_quad)
    assert lz.shape == (7, 4) and g.shape == (7, 4, 3) and n.shape == (7, 4, 3, 3)
    one = moments(mu[3, 2], small_quad)
    assert abs(lz[3, 2] - one[0]) < 1e-13
    assert np.allclose(g[3, 2], one[1], atol=1e-15)
    assert np.allclose(n[3, 2], one[2], atol=1e-15)


def test_quadrature_self_convergence():
    # peaked off the polar axis: errors fall geometrically with the order
    mu = np.array([25.0, -5.0, -20.0])
    ref = log_partition(mu, build_quadrature(256, 512))
    err = [abs(log_partition(mu, build_quadrature(p, 2 * p)) - ref) for p in (16, 24, 32, 48)]
    assert all(b < 1e-2 * a for a, b in zip(err[:2], err[1:3]))
    assert err[3] < 1e-13


def test_large_mu_warns(small_quad):
    with pytest.warns(RuntimeWarning):
        partition_Z(np.array([500.0, -250.0, -250.0]), small_quad)


def test_rejects_bad_shapes(small_quad):
    with pytest.raises(ValueError):
        partition_Z(np.zeros(2), small_quad)
    with pytest.raises(ValueError):
        partition_Z(np.array([np.nan, 0, 0]), small_quad)
