from fractions import Fraction

import numpy as np
import pytest

from eposet import errors
from eposet import walks as wk
from eposet.operators import down_matrix, up_matrix
from eposet.qfamilies import complete_complex, grassmann_poset, perturbed_measure, rref, swap_coefficients


@pytest.fixture(scope="module")
def g243():
    return grassmann_poset(2, 4, 3)


def test_descriptor_properties():
    d = wk.PureWalkDescriptor(2, ("U", "D", "D", "U"))
    assert d.height == 2
    assert d.down_positions == (2, 3)
    assert d.level_path == (2, 3, 2, 1, 2)
    assert wk.PureWalkDescriptor.canonical_down(3, 2).word == ("D", "D", "U", "U")
    with pytest.raises(errors.InputError):
        wk.PureWalkDescriptor(1, ("U", "U"))
    with pytest.raises(errors.InputError):
        wk.PureWalkDescriptor(1, ("U", "X"))


def test_pure_walk_is_operator_product():
    P, m = complete_complex(6, 3)
    m = perturbed_measure(P, m, 0.2, 0)
    desc = wk.PureWalkDescriptor(1, ("U", "D", "D", "U"))
    # path 1 -> 2 -> 1 -> 0 -> 1; the step pair "UD" from level 1 is the
    # operator D_2 U_1 on C_1, and "DU" is U_0 D_1
    expect = (down_matrix(P, m, 2) @ up_matrix(P, 1)) @ (up_matrix(P, 0) @ down_matrix(P, m, 1))
    np.testing.assert_allclose(wk.pure_walk_matrix(P, m, desc), expect, atol=1e-14)


def test_canonical_walks_stochastic_self_adjoint():
    P, m = complete_complex(7, 3)
    m = perturbed_measure(P, m, 0.3, 9)
    for w in (wk.canonical_up(P, m, 1, 2), wk.canonical_down(P, m, 3, 2), wk.identity_walk(P, m, 2)):
        assert w.stochastic and w.self_adjoint
        w.require_valid()


def test_hd_walk_affine_and_level_checks():
    P, m = complete_complex(5, 3)
    up = wk.PureWalkDescriptor.canonical_up(1, 1)
    with pytest.raises(errors.NotAffine):
        wk.hd_walk(P, m, [(0.5, up)])
    with pytest.raises(errors.InputError):
        wk.hd_walk(P, m, [(0.5, up), (0.5, wk.PureWalkDescriptor.identity(2))])
    # affine but signed: allowed, stochasticity only recorded
    w = wk.hd_walk(P, m, [(2, wk.PureWalkDescriptor.identity(1)), (-1, up)])
    assert not w.stochastic
    with pytest.raises(errors.NotStochastic):
        w.require_valid()


def oracle_swap(P, k, j):
    """Uniform over level-k W with dim(V ∩ W) = k - j, via explicit ranks."""
    q = P.q
    faces = P.levels[k]
    n = len(faces)
    M = np.zeros((n, n))
    for a, V in enumerate(faces):
        for b, W in enumerate(faces):
            dim_sum = len(rref(list(V) + list(W), q))
            if 2 * k - dim_sum == k - j:
                M[a, b] = 1.0
    return M / M.sum(axis=1, keepdims=True)


@pytest.mark.parametrize("q,n,d,k,j", [(2, 4, 3, 2, 1), (2, 4, 2, 1, 1), (3, 4, 2, 1, 1), (2, 5, 4, 2, 2)])
def test_swap_walk_against_rank_oracle(q, n, d, k, j):
    P, m = grassmann_poset(q, n, d)
    S = wk.swap_walk_restriction(P, m, k, j)
    np.testing.assert_allclose(S.matrix, oracle_swap(P, k, j), atol=1e-13)
    inv = wk.swap_walk_inversion(P, m, k, j)
    np.testing.assert_allclose(inv.matrix, S.matrix, atol=1e-12)


def test_canonical_from_swaps(g243):
    P, m = g243
    swaps = [wk.swap_walk_restriction(P, m, 2, i).matrix for i in range(2)]
    np.testing.assert_allclose(wk.canonical_from_swaps(swaps, 2, 2, 1), wk.canonical_up(P, m, 2, 1).matrix, atol=1e-14)


def test_swap_argument_checks(g243):
    P, m = g243
    with pytest.raises(errors.InputError):
        wk.swap_walk_restriction(P, m, 2, 2)
    C, cm = complete_complex(5, 3)
    with pytest.raises(errors.InputError):
        wk.swap_walk_restriction(C, cm, 1, 1)


def test_q_binomial_inversion_roundtrip():
    a = [Fraction(3), Fraction(-1, 2), Fraction(5, 7), Fraction(2)]
    for q in (2, 3):
        assert wk.q_binomial_forward(wk.q_binomial_inversion(a, q), q) == a
        assert wk.q_binomial_inversion(wk.q_binomial_forward(a, q), q) == a


def test_intersection_at_least(g243):
    P, _ = g243
    M = wk.intersection_at_least(P, 2, 2)
    np.testing.assert_array_equal(M, np.eye(len(P.levels[2]), dtype=bool))
    assert wk.intersection_at_least(P, 2, 0).all()


def test_walk_descriptor_parsing():
    kind, k, terms = wk.walk_terms_from_string("N:k=2,j=1")
    assert (kind, k) == ("N", 2) and terms[0][1].word == ("U", "D")
    kind, k, terms = wk.walk_terms_from_string("mix:[0.25*Nd:k=2,j=1;0.75*I]")
    assert kind == "mix" and k == 2
    assert sum(a for a, _ in terms) == pytest.approx(1.0)
    _, _, terms = wk.walk_terms_from_string("S:k=2,j=1", q=2)
    assert [a for a, _ in terms] == list(swap_coefficients(2, 2, 1))
    for bad in ("Q:k=1", "N:k=1", "N:j=1", "mix:0.5*I", "mix:[I]", "N:k=a,j=1"):
        with pytest.raises(errors.InputError):
            wk.walk_terms_from_string(bad)
    with pytest.raises(errors.InputError):
        wk.walk_terms_from_string("S:k=2,j=1")


def test_walk_from_string_builds_expected(g243):
    P, m = g243
    w = wk.walk_from_string(P, m, "mix:[0.5*N:k=1,j=1;0.5*I]")
    expect = 0.5 * wk.canonical_up(P, m, 1, 1).matrix + 0.5 * np.eye(len(P.levels[1]))
    np.testing.assert_allclose(w.matrix, expect)
    s = wk.walk_from_string(P, m, "S:k=2,j=1")
    assert s.info["construction"] == "restriction"


def test_built_walk_spectra_in_unit_interval():
    P, m = grassmann_poset(2, 5, 3)
    m = perturbed_measure(P, m, 0.2, 1)
    built = [wk.canonical_up(P, m, 1, 2), wk.canonical_down(P, m, 3, 3), wk.swap_walk_restriction(P, m, 1, 1)]
    built.append(wk.walk_from_string(P, m, "mix:[0.3*N:k=2,j=1;0.7*Nd:k=2,j=2]"))
    for w in built:
        eigs = w.eigenvalues()
        assert eigs.min() >= -1 - 1e-9 and eigs.max() <= 1 + 1e-9
        assert eigs.max() == pytest.approx(1.0)
