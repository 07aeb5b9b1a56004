import json

import numpy as np
import pytest

from eposet import errors
from eposet import qfamilies as qf
from eposet import spectral as spc
from eposet import walks as wk
from eposet.operators import down_matrix, weighted_dot
from eposet.poset import regularity_profile


@pytest.fixture(scope="module")
def complete73():
    return qf.complete_complex(7, 3)


def johnson_up_down(n, k, ell):
    """Eigenvalue of "add a vertex, drop a vertex" on k-sets of [n] (Johnson scheme)."""
    return 1 / (k + 1) + ((k - ell) * (n - k - ell) - ell) / ((k + 1) * (n - k))


def test_params_helpers():
    p = spc.EposetParams((0.5, 0.6, 0.7))
    assert p.d == 4
    assert p.delta_at(0) == 0.0
    assert p.delta_prod(3, 1) == pytest.approx(0.6 * 0.7)
    assert p.delta_prod(3, -1) == 1.0
    # rho^k_k is the empty product
    assert p.rho(3, 3) == 1.0
    assert p.rho(2, 1) == pytest.approx(1 - 0.5)
    with pytest.raises(errors.InputError):
        p.delta_at(4)


def test_estimated_delta_matches_complete_closed_form(complete73):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    np.testing.assert_allclose(pr.delta, [qf.complete_delta(i, 7) for i in (1, 2)], atol=1e-9)
    assert pr.gamma < 1e-10
    closed = spc.params_from_delta(P, m, [qf.complete_delta(i, 7) for i in (1, 2)])
    assert closed.gamma < 1e-12
    # a wrong delta leaves a visible residual
    assert spc.params_from_delta(P, m, [0.3, 0.3]).gamma > 1e-2


def test_dudu_residual_vanishes_on_complete(complete73):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    for k, j in [(1, 0), (2, 0), (2, 1)]:
        assert spc.dudu_residual(P, m, pr, k, j) < 1e-10


@pytest.mark.parametrize("k", [1, 2])
def test_approx_eigenvalues_match_johnson(complete73, k):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    desc = wk.PureWalkDescriptor.canonical_up(k, 1)
    for ell in range(k + 1):
        assert spc.approx_eigenvalue_pure(desc, pr, ell) == pytest.approx(johnson_up_down(7, k, ell), abs=1e-9)
    eigs = wk.canonical_up(P, m, k, 1).eigenvalues()
    expect = sorted(johnson_up_down(7, k, ell) for ell in range(k + 1))
    np.testing.assert_allclose(np.unique(np.round(eigs, 9)), expect, atol=1e-9)


def test_decomposition_contract(complete73, rng):
    P, m = complete73
    m = qf.perturbed_measure(P, m, 0.2, 1)
    f = rng.standard_normal(len(P.levels[3]))
    dec = spc.hd_level_set_decomposition(f, P, m, 3)
    assert dec.residual < 1e-10
    assert max(dec.kernel_residuals) < 1e-10
    np.testing.assert_allclose(dec.components.sum(axis=0), f, atol=1e-10)
    # each witness lies in ker D_i
    for i in range(1, 4):
        assert np.abs(down_matrix(P, m, i) @ dec.witnesses[i]).max() < 1e-10


def test_components_are_eigenvectors_when_gamma_zero(complete73, rng):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    walk = wk.canonical_down(P, m, 3, 1)
    f = rng.standard_normal(len(P.levels[3]))
    dec = spc.decomposer(P, m, 3).decompose(f)
    for ell in range(4):
        lam = spc.approx_eigenvalue_pure(wk.PureWalkDescriptor.canonical_down(3, 1), pr, ell)
        np.testing.assert_allclose(walk.matrix @ dec.components[ell], lam * dec.components[ell], atol=1e-9)


def test_level_dimensions(complete73):
    P, _ = complete73
    assert spc.level_dimensions(P, 3) == [1, 6, 14, 14]
    assert spc.decomposer(P, complete73[1], 3).level_dims == [1, 6, 14, 14]


def test_strip_report_synthetic():
    rep = spc.strip_report("toy", [1.0, 0.51, 0.49, 0.1], [1.0, 0.5, 0.1], [0.0, 0.01, 0.01], [1, 2, 1], slack=2, tol=1e-9)
    assert rep.contained and rep.disjoint and rep.counts_match
    assert rep.needed_slack == pytest.approx(1.0)
    assert rep.st_rank[0.25] == 2
    doc = json.loads(rep.to_json())
    assert doc["counts_found"] == [1, 2, 1]
    assert rep.to_csv().splitlines()[0].startswith("# schema_version,1")
    # the same report twice is byte-identical
    again = spc.strip_report("toy", [1.0, 0.51, 0.49, 0.1], [1.0, 0.5, 0.1], [0.0, 0.01, 0.01], [1, 2, 1], slack=2, tol=1e-9)
    assert again.to_json() == rep.to_json()


def test_strip_report_overlap_and_miss():
    rep = spc.strip_report("toy", [1.0, 0.5], [1.0, 0.9], [0.0, 0.1], [1, 1], slack=1, tol=0)
    assert not rep.disjoint and not rep.counts_match
    assert not rep.contained


def test_verify_eigenstripping_perturbed_and_strict():
    P, m = qf.complete_complex(8, 3)
    m = qf.perturbed_measure(P, m, 0.1, 0)
    pr = spc.estimate_eposet_params(P, m)
    walk = wk.canonical_down(P, m, 3, 1)
    rep = spc.verify_eigenstripping(walk, pr)
    assert rep.contained and rep.needed_slack <= spc.DEFAULT_SLACK
    with pytest.raises(errors.ContainmentViolated):
        spc.verify_eigenstripping(walk, pr, slack=0.0, tol=0.0, strict=True)
    with pytest.raises(errors.StripsOverlap):
        spc.verify_eigenstripping(walk, pr, slack=1e4, strict=True)


def test_strip_component_angles_small_when_exact(complete73):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    angles = spc.strip_component_angles(wk.canonical_down(P, m, 3, 1), pr)
    assert max(angles) < 1e-6


def test_regularity_spectrum_complete_limit():
    P, m = qf.complete_complex(16, 3)
    pr = spc.estimate_eposet_params(P, m)
    rep = spc.verify_regularity_spectrum(P, m, pr, 3, 1)
    assert rep["lower_ok"] and rep["upper_ok"] and rep["rho_ok"]
    # gaps are O(1/n); here well under beta
    assert max(r["gap"] for r in rep["lower"]) < rep["beta"]


def test_decay_profile_idealized_simplicial():
    P, _ = qf.complete_complex(8, 4)
    R = regularity_profile(P).R
    pr = spc.EposetParams(tuple(qf.simplicial_limit_delta(i) for i in range(1, 4)))
    for row in spc.decay_profile(pr, R, 4):
        assert row["lambda"] == pytest.approx((4 - row["i"]) / 4, abs=1e-12)
        assert row["gap"] < 1e-12


def test_norm_sum_check_exact_family(complete73, rng):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    dec = spc.decomposer(P, m, 3).decompose(rng.standard_normal(len(P.levels[3])))
    out = spc.norm_sum_check(dec, m, pr)
    assert out["sum_ok"] and out["ratios_ok"] and out["cross_ok"]
    # with gamma = 0 the norm ratio is rho^k_l itself
    for r in out["ratios"]:
        assert r["ratio"] == pytest.approx(r["rho"], rel=1e-8)


def test_norm_ratio_differs_from_inverse_regularity_at_finite_n(complete73, rng):
    P, m = complete73
    pr = spc.estimate_eposet_params(P, m)
    R = regularity_profile(P)
    dec = spc.decomposer(P, m, 3).decompose(rng.standard_normal(len(P.levels[3])))
    g = dec.witnesses[1]
    ratio = weighted_dot(m.pi[3], dec.components[1], dec.components[1]) / weighted_dot(m.pi[1], g, g)
    assert ratio == pytest.approx(pr.rho(3, 1), rel=1e-8)
    assert abs(ratio - 1 / R.R(3, 1)) > 1e-3


def test_decomposition_round_trip_of_lifted_kernel_vector():
    P, m = qf.grassmann_poset(2, 5, 3)
    dec = spc.decomposer(P, m, 3)
    from eposet.operators import compose_up_matrix

    # V^3 is empty here since |X(3)| = |X(2)| = 155
    assert dec.level_dims[3] == 0
    for i in range(3):
        g = dec.kernels[i][:, 0] if i else np.ones(1)
        f = compose_up_matrix(P, i, 3) @ g
        out = dec.decompose(f)
        assert out.residual < 1e-10
        np.testing.assert_allclose(out.components[i], f, atol=1e-10)
        others = [j for j in range(4) if j != i]
        assert np.abs(out.components[others]).max() < 1e-10


def test_low_level_weight_identity_exact_at_gamma_zero(rng):
    # Var(D^k_l f) = sum_{j=1}^{l} lambda_j(lower walk through l) <f, f_j>
    from eposet.expansion import variance_of_local_means

    for P, m in (qf.complete_complex(8, 3), qf.grassmann_poset(2, 5, 3)):
        pr = spc.estimate_eposet_params(P, m)
        k = 3
        f = rng.standard_normal(len(P.levels[k]))
        dec = spc.decomposer(P, m, k).decompose(f)
        for ell in range(1, k + 1):
            desc = wk.PureWalkDescriptor.canonical_down(k, k - ell)
            rhs = sum(
                spc.approx_eigenvalue_pure(desc, pr, j) * weighted_dot(m.pi[k], f, dec.components[j])
                for j in range(1, ell + 1)
            )
            assert variance_of_local_means(P, m, f, k, ell) == pytest.approx(rhs, abs=1e-9)


def test_dudu_residual_within_gamma_budget_on_perturbed():
    P, m = qf.complete_complex(9, 4)
    m = qf.perturbed_measure(P, m, 0.1, 3)
    pr = spc.estimate_eposet_params(P, m)
    for k in range(1, 4):
        for j in range(k):
            assert spc.dudu_residual(P, m, pr, k, j) <= spc.DEFAULT_SLACK * pr.gamma_kj(k, j) + 1e-12


def test_norm_sum_check_perturbed_records_slack(rng):
    P, m = qf.complete_complex(8, 3)
    m = qf.perturbed_measure(P, m, 0.05, 1)
    pr = spc.estimate_eposet_params(P, m)
    dec = spc.decomposer(P, m, 3).decompose(rng.standard_normal(len(P.levels[3])))
    out = spc.norm_sum_check(dec, m, pr)
    assert out["sum_ok"] and out["ratios_ok"] and out["cross_ok"]
