import json

import numpy as np
import pytest
from scipy import integrate

from bmflow import analysis as an
from bmflow import bm_potential as bm
from bmflow.partition import build_quadrature

G_UNI = np.array([2.0, -1.0, -1.0]) / np.sqrt(6)


def test_sampled_spectra_respect_margin(rng):
    lam = an.sample_spectra(rng, 2000, 0.02)
    assert np.allclose(lam.sum(axis=1), 0, atol=1e-15)
    assert lam.min() >= -1 / 3 + 0.02 - 1e-12
    _, q = an.sample_tensors(rng, 50, 0.02)
    assert np.allclose(q, np.swapaxes(q, 1, 2))
    assert np.allclose(np.trace(q, axis1=1, axis2=2), 0, atol=1e-15)
    v = an.random_traceless(rng, 50)
    assert np.allclose(np.linalg.norm(v, axis=(1, 2)), 1)


def test_ftest1_isotropic_sample_is_skipped(quad):
    v = np.diag([1.0, -1.0, 0.0]) / np.sqrt(2)
    grad = bm.df_dQ(np.zeros((3, 3)), 1e-12, quad)
    assert np.sum(grad * v) ** 2 == 0.0
    assert abs(bm.hess_contract(np.zeros((3, 3)), v, 1e-12, quad) - 7.5) < 1e-10


def test_ftest1_small_run(quad):
    rep = an.check_ftest1(300, 0.02, seed=3, quad=quad)
    assert rep.passed and rep.worst_value > 0
    again = an.check_ftest1(300, 0.02, seed=3, quad=quad)
    assert again.worst_value == rep.worst_value
    rec = json.loads(rep.to_json())
    assert rec["check_name"] == "ftest1" and rec["margin"] == 0.02
    w = rep.witness
    assert abs(w["numerator"] / w["denominator"] - rep.worst_value) < 1e-12


def test_ftest1_sweep_nested_infimum(quad):
    reps = an.ftest1_sweep((0.05, 0.02, 0.01), 300, seed=5, quad=quad)
    nested = [r.extra["nested_infimum"] for r in reps]
    assert nested[0] >= nested[1] >= nested[2] > 0
    assert all(n <= r.worst_value for n, r in zip(nested, reps))


def test_ftest1_rejects_bad_margin():
    with pytest.raises(ValueError):
        an.check_ftest1(10, 0.2)


def test_concavity_isotropic(quad):
    red, ev = an.concavity_matrix(np.zeros(3), 3.0, quad=quad)
    assert np.allclose(red, 7.5 * np.eye(2), atol=1e-10)


def test_concavity_at_half_epsilon(quad):
    rep = an.check_ftest1(300, 0.02, seed=9, quad=quad)
    assert an.check_h_concavity(rep.worst_value / 2, 300, 0.02, seed=9, quad=quad).passed


def test_concavity_fails_for_huge_epsilon(quad):
    rep = an.check_h_concavity(1e3, 300, 0.005, seed=1, quad=quad)
    assert not rep.passed
    assert rep.worst_value < 0 and "spectrum" in rep.witness


def test_concavity_matches_ftest_ratio_identity(quad, rng):
    # on diagonal V the ftest ratio and the concavity matrix are linked:
    # N^-1 - eps mu mu^T >= 0 iff  d^T N^-1 d >= eps (mu.d)^2 for all d in X
    lam = an.sample_spectra(rng, 1, 0.05)[0]
    ev = bm.fbm_eval(lam, 1e-12, quad)
    d = bm.BASIS @ rng.standard_normal(2)
    hc = bm.hess_contract(np.diag(lam), np.diag(d), 1e-12, quad)
    assert abs(hc - d @ ev.hess @ d) < 1e-9 * abs(hc)


def test_pair_integrals_factorized_equals_pairs():
    q = build_quadrature(8, 16)
    for g in an.random_directions(np.random.default_rng(2), 3):
        for rho in (0.0, 3.0, 20.0):
            a = an.pair_integrals(g, rho, q, "pairs")
            b = an.pair_integrals(g, rho, q)
            assert np.max(np.abs(a[0] - b[0])) < 1e-12 * max(1.0, np.abs(a[0]).max())
            assert abs(a[1] / b[1] - 1) < 1e-12


def test_Iij_zero_at_rho_zero():
    tab = an.asymptotic_Iij(G_UNI, [0.0, 1.0])
    assert np.all(tab[0] == 0)
    assert np.allclose(tab[1], tab[1].T)


def test_Iij_peak_rule_agrees_with_plain_rule():
    g = an.random_directions(np.random.default_rng(4), 1)[0]
    a = an.asymptotic_Iij(g, [2.0, 8.0])
    b = an.asymptotic_Iij(g, [2.0, 8.0], quad=build_quadrature(48, 96))
    assert np.max(np.abs(a - b)) < 1e-10


def test_Iij_plateau_uniaxial_direction():
    tab = an.asymptotic_Iij(G_UNI, [2.0**j for j in range(11)])
    ok, end = an.bounded_by_plateau(tab)
    assert ok and end == 10


def test_Iij_degenerate_top_pair_raises():
    with pytest.raises(an.DegenerateDirection):
        an.asymptotic_Iij(np.array([1.0, 1.0, -2.0]) / np.sqrt(6), [1.0])
    with pytest.raises(an.DegenerateDirection):
        an.check_laplace_coefficients(np.array([1.0, -2.0, 1.0]) / np.sqrt(6))


def test_plateau_helpers():
    assert an.plateau([1.0, 5.0, 2.0, 2.01, 2.02]) == 4
    assert an.plateau([1.0, 2.0, 4.0, 8.0]) is None
    assert an.bounded_by_plateau([1.0, 9.0, 2.0, 2.0, 2.0]) == (False, 4)


def test_laplace_slopes_uniaxial():
    rec = an.check_laplace_coefficients(G_UNI)
    assert abs(rec["denominator_slope"] + 2) <= 0.1
    assert abs(rec["numerator_slope"] + 4) <= 0.15
    assert abs(rec["ratio_slope"]) <= 0.2
    assert rec["passed"]


def _case2_reference(alpha, k):
    # (1 - y^2/a^2)^-1/2 = a (a + y)^-1/2 (a - y)^-1/2; QUADPACK handles the
    # algebraic endpoint weight
    def moment(power):
        f = lambda y: np.exp(-3 * y * y) * y**power * alpha / np.sqrt(alpha + y)
        return integrate.quad(f, 0, alpha, weight="alg", wvar=(0, -0.5),
                              epsabs=0, epsrel=1e-13, limit=200)[0]
    return moment(2 * k + 1) / moment(1)


@pytest.mark.parametrize("k", [1, 2])
def test_case2_against_quadpack(k):
    alphas = [0.3, 1.0, 2.0, 8.0, 64.0]
    vals = an.case2_f_alpha(alphas, k)
    for a, v in zip(alphas, vals):
        assert abs(v / _case2_reference(a, k) - 1) < 1e-10


@pytest.mark.parametrize("k", [1, 2])
def test_case2_majorant_and_limits(k):
    alphas = [float(2**j) for j in range(10)]
    vals = an.case2_f_alpha(alphas, k)
    assert all(v <= an.case2_majorant(a, k) for a, v in zip(alphas, vals))
    assert an.case2_f_alpha([0.01], k)[0] < 1e-3
    # large-alpha limit: <y^{2k}> under e^{-3y^2} y dy on (0, inf) = k!/3^k
    assert abs(vals[-1] - np.prod(range(1, k + 1)) / 3**k) < 1e-5


def test_case2_rejects_k():
    with pytest.raises(ValueError):
        an.case2_f_alpha([1.0], 3)


def test_boundary_blowup_logarithmic():
    rec = an.boundary_blowup_fit()
    assert rec["r2"] > 0.999
    assert abs(rec["slope"] + 0.5) < 1e-3
    assert np.all(np.diff(rec["f"]) > 0)


def test_boundary_ray_spectra():
    lam = an.boundary_ray([1e-2, 1e-4], axis=1, split=0.25)
    assert np.allclose(lam.sum(axis=1), 0, atol=1e-15)
    assert np.allclose(lam[:, 1], -1 / 3 + np.array([1e-2, 1e-4]))


def test_potential_table_shape_and_blowup(small_quad):
    header, rows = an.potential_table(12, 0.02, small_quad)
    assert len(header) == rows.shape[1] == 13
    assert rows.shape[0] == 12 * 13 // 2
    b = rows[:, :3]
    f = rows[:, 6]
    centre = f[b.min(axis=1) > 0.25]
    edge = f[b.min(axis=1) < 0.021]
    assert centre.max() < edge.min()
    assert f.min() >= -np.log(4 * np.pi) - 1e-12


def test_potential_table_monotone_along_rays(quad):
    # f increases along rays from the isotropic point toward the boundary
    t = np.linspace(0, 1, 25)[1:]
    for direction in (bm.BASIS[:, 0], bm.BASIS[:, 1], -bm.BASIS[:, 1]):
        lam = 0.3 * t[:, None] * direction / np.abs(direction).max()
        assert np.all(np.diff(bm.fbm_eval(lam, 1e-12, quad).value) > 0)


def test_oracle_suite_passes(quad):
    reps = an.potential_oracle_suite(40, seed=3, quad=quad)
    assert [r.check_name for r in reps] == ["duality", "gradient", "hessian_identity",
                                            "hessian_fd"]
    assert all(r.passed for r in reps)


@pytest.mark.parametrize("perm", [[0, 1, 2], [1, 0, 2], [2, 1, 0], [1, 2, 0]])
def test_Iij_every_maximum_position(perm):
    # the peak may sit on any axis; the table permutes with the labels
    g = np.array([0.75, -0.2, -0.55])
    g /= np.linalg.norm(g)
    rhos = [16.0, 64.0]
    base = an.asymptotic_Iij(g, rhos)
    moved = an.asymptotic_Iij(g[perm], rhos)
    assert np.max(np.abs(moved - base[:, perm][:, :, perm])) < 1e-12
