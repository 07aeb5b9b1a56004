import numpy as np
import pytest

from eposet import errors
from eposet import operators as op
from eposet.poset import uniform_measure
from eposet.qfamilies import complete_complex, grassmann_poset, hypergraph_closure, perturbed_measure


def oracle_up(P, i, f):
    """(U_i f)(sigma) = average of f over the rank-i elements sigma covers."""
    out = np.zeros(len(P.levels[i + 1]))
    for s, cov in enumerate(P.covers[i + 1]):
        out[s] = np.mean([f[t] for t in cov])
    return out


def oracle_down(P, m, i, g):
    """(D_i g)(tau) = E[g(sigma) | tau], with sigma ~ pi_i and tau a uniform cover of sigma."""
    num = np.zeros(len(P.levels[i - 1]))
    den = np.zeros(len(P.levels[i - 1]))
    for s, cov in enumerate(P.covers[i]):
        w = m.pi[i][s] / len(cov)
        for t in cov:
            num[t] += w * g[s]
            den[t] += w
    return num / den


@pytest.fixture(scope="module")
def weighted():
    P, m = hypergraph_closure([(0, 1, 2), (1, 2, 3), (0, 2, 3), (0, 1, 3), (2, 3, 4)], weights=[1, 2, 3, 4, 5])
    return P, m


def test_up_down_against_oracle(weighted, rng):
    P, m = weighted
    for i in range(1, P.d + 1):
        f = rng.standard_normal(len(P.levels[i - 1]))
        g = rng.standard_normal(len(P.levels[i]))
        np.testing.assert_allclose(op.up_matrix(P, i - 1) @ f, oracle_up(P, i - 1, f), atol=1e-14)
        np.testing.assert_allclose(op.down_matrix(P, m, i) @ g, oracle_down(P, m, i, g), atol=1e-14)


def test_up_and_down_are_adjoint(rng):
    P, m = complete_complex(7, 3)
    m = perturbed_measure(P, m, 0.3, 2)
    for i in range(1, 4):
        f = op.LevelFunction(i - 1, rng.standard_normal(len(P.levels[i - 1])))
        g = op.LevelFunction(i, rng.standard_normal(len(P.levels[i])))
        U = op.up_operator(P, m, i - 1)
        D = op.down_operator(P, m, i)
        assert op.inner_product(U(f), g, m) == pytest.approx(op.inner_product(f, D(g), m), abs=1e-14)


def test_operators_preserve_constants_and_expectation(weighted):
    P, m = weighted
    for i in range(1, P.d + 1):
        np.testing.assert_allclose(op.up_matrix(P, i - 1).sum(axis=1), 1.0)
        np.testing.assert_allclose(op.down_matrix(P, m, i).sum(axis=1), 1.0)
        # D preserves expectation
        g = np.arange(len(P.levels[i]), dtype=float)
        Dg = op.down_matrix(P, m, i) @ g
        assert np.dot(m.pi[i - 1], Dg) == pytest.approx(np.dot(m.pi[i], g))


@pytest.mark.parametrize("factory", [lambda: complete_complex(6, 3), lambda: grassmann_poset(2, 4, 3)])
def test_composition_product_equals_direct(factory):
    P, m = factory()
    for k in range(P.d + 1):
        for i in range(k):
            np.testing.assert_allclose(
                op.compose_up_matrix(P, i, k, "product"), op.compose_up_matrix(P, i, k, "direct"), atol=1e-14
            )
            np.testing.assert_allclose(
                op.compose_down_matrix(P, m, k, i, "product"), op.compose_down_matrix(P, m, k, i, "direct"), atol=1e-14
            )


def test_compose_up_complete_complex_averages_subsets():
    P, _ = complete_complex(5, 3)
    A = op.compose_up_matrix(P, 1, 3)
    f = np.arange(5, dtype=float)
    # each 3-set averages the values of its 3 vertices
    expect = np.array([np.mean([f[P.index(1, (v,))] for v in face]) for face in P.levels[3]])
    np.testing.assert_allclose(A @ f, expect)


def test_lower_walk_is_self_adjoint_and_stochastic():
    P, m = complete_complex(6, 3)
    m = perturbed_measure(P, m, 0.4, 1)
    for i in range(1, 4):
        W = op.lower_walk_matrix(P, m, i)
        assert op.is_self_adjoint(W, m.pi[i])
        np.testing.assert_allclose(W.sum(axis=1), 1.0)
    for i in range(0, 3):
        assert op.is_self_adjoint(op.upper_walk_matrix(P, m, i), m.pi[i])


def test_weighted_spectrum_matches_symmetrized():
    P, m = complete_complex(6, 2)
    m = perturbed_measure(P, m, 0.3, 5)
    W = op.lower_walk_matrix(P, m, 2)
    vals, vecs = op.weighted_eigh(W, m.pi[2])
    np.testing.assert_allclose(np.sort(vals), np.sort(np.linalg.eigvals(W).real), atol=1e-12)
    # eigenvectors are pi-orthonormal
    G = vecs.T @ np.diag(m.pi[2]) @ vecs
    np.testing.assert_allclose(G, np.eye(len(vals)), atol=1e-10)
    assert op.weighted_norm(W, m.pi[2]) == pytest.approx(1.0)


def test_weighted_op_norm_of_down_is_one():
    P, m = complete_complex(6, 3)
    assert op.weighted_op_norm(op.down_matrix(P, m, 2), m.pi[1], m.pi[2]) == pytest.approx(1.0)


def test_level_function_arithmetic_and_errors():
    f = op.LevelFunction(1, np.ones(3))
    g = op.LevelFunction(1, np.arange(3.0))
    np.testing.assert_allclose((f + g * 2 - f).values, [0, 2, 4])
    with pytest.raises(errors.LevelMismatch):
        f + op.LevelFunction(2, np.ones(3))


def test_operator_rejects_wrong_level():
    P, m = complete_complex(5, 2)
    U = op.up_operator(P, m, 0)
    with pytest.raises(errors.LevelMismatch):
        U(op.LevelFunction(1, np.ones(5)))
    with pytest.raises(errors.LevelOutOfRange):
        op.up_matrix(P, 2)


def test_expectation_uniform():
    P, _ = complete_complex(5, 2)
    m = uniform_measure(P)
    f = op.LevelFunction(1, np.arange(5.0))
    assert op.expectation(f, m) == pytest.approx(2.0)


def test_dump_csv(tmp_path):
    P, m = complete_complex(4, 2)
    path = tmp_path / "u.csv"
    op.dump_csv(path, op.up_operator(P, m, 1))
    lines = path.read_text().splitlines()
    assert len(lines) >= 6
