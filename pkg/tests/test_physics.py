import numpy as np
import pytest

from bmflow import bm_potential as bm
from bmflow.sim import physics as ph
from bmflow.sim.params import ModelParams
from bmflow.sim.spectral import Grid
from conftest import random_physical, random_rotation

P = ModelParams()


@pytest.fixture(scope="module")
def grid():
    return Grid(8)


def _node_fields(rng, n=64, traceless=True):
    g = rng.standard_normal((3, 3, n))
    if traceless:
        g -= np.trace(g)[None, None] * np.eye(3)[:, :, None] / 3
    q = np.stack([random_physical(rng) for _ in range(n)], axis=-1)
    h = rng.standard_normal((3, 3, n))
    h = 0.5 * (h + ph.transpose(h))
    h -= np.trace(h)[None, None] * np.eye(3)[:, :, None] / 3
    return g, q, h


def test_sym5_round_trip(rng):
    q = np.stack([random_physical(rng) for _ in range(4)], axis=-1)
    assert np.allclose(ph.sym5_to_full(ph.full_to_sym5(q)), q, atol=1e-15)


def test_strain_vorticity_split(rng):
    g = rng.standard_normal((3, 3, 10))
    e, w = ph.strain_and_vorticity(g)
    assert np.array_equal(e + w, g) or np.max(np.abs(e + w - g)) < 1e-15
    assert np.allclose(e, ph.transpose(e)) and np.allclose(w, -ph.transpose(w))
    sym = g + ph.transpose(g)
    assert np.all(ph.strain_and_vorticity(sym)[1] == 0)
    anti = g - ph.transpose(g)
    assert np.all(ph.strain_and_vorticity(anti)[0] == 0)


def test_S_zero_gradient(rng):
    _, q, _ = _node_fields(rng)
    assert np.all(ph.compute_S(np.zeros_like(q), q, 0.5) == 0)


def test_S_pure_rotation_when_xi_zero(rng):
    g, q, _ = _node_fields(rng)
    _, w = ph.strain_and_vorticity(g)
    assert np.allclose(ph.compute_S(g, q, 0.0), ph.mm(w, q) - ph.mm(q, w), atol=1e-14)


def test_S_traceless_for_divergence_free(rng):
    g, q, _ = _node_fields(rng)
    s = ph.compute_S(g, q, 0.7)
    assert np.max(np.abs(np.trace(s))) < 1e-12
    assert np.allclose(s, ph.transpose(s), atol=1e-14)


def test_mat_identity_random(rng):
    g, q, h = _node_fields(rng, 500)
    for xi in (0.0, 0.5, -1.3):
        assert np.max(np.abs(ph.mat_residual(h, q, g, xi))) < 1e-12


def test_mat_identity_trace_term(rng):
    # for symmetric H with a trace the residual is exactly (2 xi / 3) tr H (Q : G)
    g, q, h = _node_fields(rng, 200)
    t = rng.standard_normal(200)
    h = h + t * np.eye(3)[:, :, None]
    res = ph.mat_residual(h, q, g, 0.5)
    assert np.max(np.abs(res - (2 * 0.5 / 3) * 3 * t * ph.ddot(q, g))) < 1e-12


def test_mat_identity_needs_symmetric_h(rng):
    g, q, h = _node_fields(rng)
    skew = rng.standard_normal(h.shape)
    skew = skew - ph.transpose(skew)
    assert np.max(np.abs(ph.mat_residual(h + skew, q, g, 0.5))) > 1e-6


def test_pointwise_rotation_covariance(rng):
    g, q, h = _node_fields(rng, 8)
    grad_q = rng.standard_normal((3, 3, 3, 8))
    grad_q = 0.5 * (grad_q + np.swapaxes(grad_q, 0, 1))
    r = random_rotation(rng)
    rot2 = lambda a: np.einsum("ia,jb,ab...->ij...", r, r, a)
    rot3 = lambda a: np.einsum("ia,jb,kc,abc...->ijk...", r, r, r, a)
    s = ph.compute_S(g, q, 0.5)
    assert np.allclose(ph.compute_S(rot2(g), rot2(q), 0.5), rot2(s), atol=1e-13)
    el = ph.elastic_stress(h, q, grad_q, 0.5)
    assert np.allclose(ph.elastic_stress(rot2(h), rot2(q), rot3(grad_q), 0.5), rot2(el),
                       atol=1e-12)
    sing = ph.NodewiseSingular()
    qn = q[..., None, None]
    df = sing(qn).df
    df_rot = ph.NodewiseSingular()(rot2(qn)).df
    assert np.allclose(df_rot, rot2(df), atol=1e-9)


def test_elastic_stress_xi_zero(rng):
    _, q, h = _node_fields(rng)
    grad_q = rng.standard_normal((3, 3, 3, q.shape[-1]))
    el = ph.elastic_stress(h, q, grad_q, 0.0)
    eri = np.einsum("abi...,abj...->ij...", grad_q, grad_q)
    assert np.allclose(el, ph.mm(q, h) - ph.mm(h, q) - eri, atol=1e-14)


def test_rest_state_stress(grid):
    z = np.zeros((3, 3) + grid.shape)
    theta = np.full(grid.shape, 1.3)
    p = np.full(grid.shape, 2.0)
    sig = ph.compute_stress(z, z, np.zeros((3, 3, 3) + grid.shape), theta, P, z, p)
    assert np.allclose(sig, -2.0 * np.eye(3)[:, :, None, None, None])
    assert np.max(np.abs(grid.div(sig))) < 1e-12


def test_singular_eval_matches_potential(rng):
    q = np.stack([random_physical(rng) for _ in range(6)], axis=-1).reshape(3, 3, 6, 1, 1)
    ev = ph.NodewiseSingular((32, 64), 1e-12)(q)
    for i in range(6):
        qi = q[:, :, i, 0, 0]
        assert abs(ev.f[i, 0, 0] - bm.f_of_Q(qi)) < 1e-11
        assert np.allclose(ev.df[:, :, i, 0, 0], bm.df_dQ(qi), atol=1e-9)


def test_singular_rejects_nonphysical(grid):
    q = np.zeros((3, 3) + grid.shape)
    q[:, :, 1, 2, 3] = np.diag([0.7, -0.35, -0.35])
    with pytest.raises(ph.PhysicalityLoss) as info:
        ph.NodewiseSingular()(q)
    assert info.value.node == (1, 2, 3)


def test_H_zero_and_uniform(grid):
    theta = np.full(grid.shape, 1.0)
    z = np.zeros((3, 3) + grid.shape)
    assert np.max(np.abs(ph.compute_H_field(z, theta, P, grid))) < 1e-14
    d = np.diag([0.2, -0.1, -0.1])
    q = np.broadcast_to(d[:, :, None, None, None], z.shape).copy()
    h = ph.compute_H_field(q, theta, P, grid)
    expect = -bm.df_dQ(d, 1e-11, bm.default_quadrature(16, 32)) + P.lambda_bulk * d
    assert np.allclose(h, expect[:, :, None, None, None], atol=1e-9)
    assert np.max(np.abs(np.trace(h))) < 1e-12


def test_H_laplacian_mode(grid):
    # at theta -> 0 only the Laplacian and bulk term remain; check the plane wave
    x, y, z = grid.x
    amp = 1e-3 * np.cos(x + 2 * y)
    q = np.zeros((3, 3) + grid.shape)
    q[0, 1] = q[1, 0] = amp
    theta = np.full(grid.shape, 1e-12)
    h = ph.compute_H_field(q, theta, P, grid)
    assert np.allclose(h[0, 1], (-5 + P.lambda_bulk) * amp, atol=1e-12)


def test_pressure_zero_state(grid):
    z = np.zeros((3,) + grid.shape)
    assert np.all(ph.recover_pressure(z, np.zeros((3, 3) + grid.shape), grid) == 0)


def test_pressure_taylor_green():
    grid = Grid(16)
    x, y, z = grid.x
    u = np.stack([np.sin(x) * np.cos(y) * np.cos(z), -np.cos(x) * np.sin(y) * np.cos(z),
                  np.zeros_like(x)])
    theta = np.full(grid.shape, 1.0)
    grad_u = grid.grad(u)
    zq = np.zeros((3, 3) + grid.shape)
    sig = ph.compute_stress(grad_u, zq, np.zeros((3, 3, 3) + grid.shape), theta, P, zq)
    p = ph.recover_pressure(u, sig, grid)
    exact = (np.cos(2 * x) + np.cos(2 * y)) * (np.cos(2 * z) + 2) / 16
    assert np.max(np.abs(p - exact)) < 1e-13
    assert abs(p.mean()) < 1e-15


def test_heat_rhs_equilibrium(grid):
    theta = np.full(grid.shape, 1.0)
    z3 = np.zeros((3,) + grid.shape)
    z33 = np.zeros((3, 3) + grid.shape)
    assert np.max(np.abs(ph.heat_rhs(theta, z3, z33, z33, z33, z33, P, grid))) < 1e-14


def test_heat_rhs_linear_decay_rate():
    grid = Grid(8)
    x = grid.x[0]
    eps = 1e-6
    theta = 1.0 + eps * np.cos(x)
    z3 = np.zeros((3,) + grid.shape)
    z33 = np.zeros((3, 3) + grid.shape)
    rate = P.kappa(1.0) / P.c_eff(1.0)
    rhs = ph.heat_rhs(theta, z3, z33, z33, z33, z33, P, grid)
    mask = np.abs(np.cos(x)) > 0.5
    measured = -rhs[mask] / (eps * np.cos(x[mask]))
    assert np.max(np.abs(measured / rate - 1)) < 0.01


def test_heat_source_positive(rng, grid):
    x, y, z = grid.x
    theta = np.full(grid.shape, 0.8)
    u = np.stack([np.sin(y), np.sin(z), np.sin(x)])
    q = np.zeros((3, 3) + grid.shape)
    h = rng.standard_normal((3, 3) + grid.shape)
    h = 0.5 * (h + ph.transpose(h))
    # with df = 0 (Q = 0) the right side is mu/2|G+G^t|^2 + Gamma|H|^2 - div(e u)
    # and the last term vanishes for constant theta and divergence-free u
    rhs = ph.heat_rhs(theta, u, q, grid.grad(u), h, np.zeros_like(q), P, grid)
    assert np.all(rhs >= -1e-13)
    assert rhs.max() > 0


def test_heat_rhs_positivity_error(grid):
    theta = np.full(grid.shape, 1.0)
    theta[0, 0, 0] = -0.1
    z3 = np.zeros((3,) + grid.shape)
    z33 = np.zeros((3, 3) + grid.shape)
    with pytest.raises(ph.PositivityLoss):
        ph.heat_rhs(theta, z3, z33, z33, z33, z33, P, grid)
