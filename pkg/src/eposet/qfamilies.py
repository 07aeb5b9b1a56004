"""Concrete poset families and exact q-combinatorics.

Subspaces of F_q^n are stored as their reduced row echelon basis, a tuple of
row tuples with entries in ``0..q-1``; equal subspaces have equal keys.
"""

from __future__ import annotations

import itertools
import os
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .errors import BudgetExceeded, InputError, NonPrimeQ
from .poset import (
    GradedPoset,
    Measure,
    build_downward_closure,
    induce_measure,
    uniform_measure,
)

DEFAULT_BUDGET = 5000


def enumeration_budget() -> int:
    raw = os.environ.get("EPOSET_BUDGET")
    if raw is None:
        return DEFAULT_BUDGET
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"EPOSET_BUDGET={raw!r} is not an integer") from exc


# -- exact q-combinatorics -------------------------------------------------


@lru_cache(maxsize=None)
def gaussian_binomial(n: int, k: int, q: int) -> int:
    """Number of k-dimensional subspaces of an n-dimensional space over F_q.

    Returns 0 outside ``0 <= k <= n``; ``q = 1`` gives the ordinary binomial.
    """
    if q < 1:
        raise InputError(f"q must be a positive integer, got {q}")
    if k < 0 or k > n:
        return 0
    if q == 1:
        return comb(n, k)
    num = den = 1
    for t in range(k):
        num *= q ** (n - t) - 1
        den *= q ** (t + 1) - 1
    return num // den


def q_integer(m: int, q: int) -> int:
    return gaussian_binomial(m, 1, q)


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    return all(q % p for p in range(2, int(q**0.5) + 1))


# -- subspaces over prime fields ---------------------------------------------


def rref(rows, q: int) -> tuple:
    """Canonical reduced row echelon basis of the row span, zero rows dropped."""
    m = [[v % q for v in row] for row in rows]
    if not m:
        return ()
    ncols = len(m[0])
    if any(len(row) != ncols for row in m):
        raise InputError("rows of unequal length")
    r = 0
    for c in range(ncols):
        piv = next((p for p in range(r, len(m)) if m[p][c]), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = pow(m[r][c], q - 2, q)
        m[r] = [(v * inv) % q for v in m[r]]
        for p in range(len(m)):
            if p != r and m[p][c]:
                f = m[p][c]
                m[p] = [(a - f * b) % q for a, b in zip(m[p], m[r])]
        r += 1
        if r == len(m):
            break
    return tuple(tuple(row) for row in m[:r])


def subspace_key(face: tuple):
    """Sort key: pivot columns first, then the entries row by row."""
    pivots = tuple(next(c for c, v in enumerate(row) if v) for row in face)
    return (pivots, face)


@lru_cache(maxsize=None)
def enumerate_subspaces(q: int, n: int, k: int) -> tuple:
    """All k-dimensional subspaces of F_q^n, lexicographic in pivots then entries."""
    out = []
    for pivots in itertools.combinations(range(n), k):
        pset = set(pivots)
        free = [(r, c) for r in range(k) for c in range(pivots[r] + 1, n) if c not in pset]
        for values in itertools.product(range(q), repeat=len(free)):
            rows = [[0] * n for _ in range(k)]
            for r, c in enumerate(pivots):
                rows[r][c] = 1
            for (r, c), v in zip(free, values):
                rows[r][c] = v
            out.append(tuple(tuple(row) for row in rows))
    return tuple(out)


def subspace_hyperplanes(face: tuple, q: int) -> list:
    """The codimension-1 subspaces of the span of ``face``."""
    k = len(face)
    if k == 0:
        return []
    out = []
    for coeffs in enumerate_subspaces(q, k, k - 1):
        rows = [
            [sum(c * face[t][col] for t, c in enumerate(crow)) % q for col in range(len(face[0]))]
            for crow in coeffs
        ]
        out.append(rref(rows, q) if rows else ())
    return out


def _check_q(q: int):
    if not is_prime(q):
        raise NonPrimeQ(f"q={q} is not prime; only prime fields are enumerated")


def grassmann_poset(q: int, n: int, d: int, budget: int | None = None):
    """All subspaces of F_q^n of dimension at most ``d``, ordered by inclusion, uniform on top."""
    _check_q(q)
    if not 1 <= d <= n:
        raise InputError(f"need 1 <= d <= n, got d={d}, n={n}")
    budget = enumeration_budget() if budget is None else budget
    for k in range(d + 1):
        count = gaussian_binomial(n, k, q)
        if count > budget:
            raise BudgetExceeded(k, count, budget)
    levels = [enumerate_subspaces(q, n, k) for k in range(d + 1)]
    ids = [{f: t for t, f in enumerate(level)} for level in levels]
    covers = [()]
    for k in range(1, d + 1):
        covers.append(
            tuple(tuple(sorted(ids[k - 1][h] for h in subspace_hyperplanes(f, q))) for f in levels[k])
        )
    poset = GradedPoset(d, tuple(levels), tuple(covers), "grassmann", {"q": q, "n": n})
    return poset, uniform_measure(poset)


def q_complex(top_subspaces, q: int, n: int, weights=None):
    """Downward closure of a weighted family of equal-dimension subspaces of F_q^n."""
    _check_q(q)
    tops = [rref(basis, q) for basis in top_subspaces]
    return build_downward_closure(
        tops,
        weights,
        subfaces=lambda f: subspace_hyperplanes(f, q),
        rank=len,
        sort_key=subspace_key,
        family="q-complex",
        meta={"q": q, "n": n},
    )


def complete_complex(n: int, d: int):
    """All subsets of ``range(n)`` with at most ``d`` elements, uniform on top."""
    if not 1 <= d <= n:
        raise InputError(f"need 1 <= d <= n, got d={d}, n={n}")
    tops = list(itertools.combinations(range(n), d))
    poset, measure = build_downward_closure(tops, family="complete", meta={"n": n})
    return poset, measure


def hypergraph_closure(edges, weights=None):
    """Downward closure of a k-uniform hypergraph."""
    tops = [tuple(sorted(e)) for e in edges]
    return build_downward_closure(tops, weights, family="simplicial")


def perturbed_measure(poset: GradedPoset, measure: Measure, rho: float, seed=0) -> Measure:
    """Multiply each top weight by ``1 + u`` with ``u`` uniform in ``[-rho, rho]``.

    The same seed draws the same unit perturbation for every ``rho``, so a
    sweep over ``rho`` scales one fixed direction.
    """
    if not 0 <= rho < 1:
        raise InputError(f"rho must lie in [0, 1), got {rho}")
    top = np.asarray(measure.pi[poset.d], dtype=float)
    if rho == 0:
        return measure
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=top.shape) * rho
    new = top * (1.0 + u)
    return induce_measure(poset, new / new.sum(), source=f"perturbed(rho={rho},seed={seed})")


# -- closed-form eposet parameters -------------------------------------------


def grassmann_delta(i: int, n: int, q: int) -> float:
    if not 1 <= i <= n - 1:
        raise InputError(f"grassmann_delta needs 1 <= i <= n-1, got i={i}, n={n}")
    return float(
        Fraction((q**i - 1) * (q ** (n - i + 1) - 1), (q ** (i + 1) - 1) * (q ** (n - i) - 1))
    )


def qeposet_delta(i: int, q: int) -> float:
    if i < 1:
        raise InputError("qeposet_delta needs i >= 1")
    return float(Fraction(q * (q**i - 1), q ** (i + 1) - 1))


def complete_delta(i: int, n: int) -> float:
    """Exact parameter of the complete complex on ``n`` vertices."""
    return float(Fraction(i * (n - i + 1), (i + 1) * (n - i)))


def simplicial_limit_delta(i: int) -> float:
    return float(Fraction(i, i + 1))


def colink_density(q: int, d: int, i: int, j: int, k: int) -> float:
    """Density of the co-link of an (d-i)-space inside a j-link, at level k.

    ``d`` is the ambient dimension.  Equals ``(d-i-j choose k-j)_q / (d-j choose k-j)_q``.
    """
    if not 0 <= j <= k:
        raise InputError("colink_density needs 0 <= j <= k")
    val = Fraction(1)
    for t in range(k - j):
        val *= Fraction(q ** (d - i - j - t) - 1, q ** (d - j - t) - 1)
    return float(val)


def colink_return_probability(q: int, d: int, i: int, k: int) -> float:
    """Lower-walk non-expansion of a dimension-i co-link at level k (ambient dimension d)."""
    return float(Fraction(q ** (d - i) - q ** (k - 1), q**d - q ** (k - 1)))


# -- closed-form Grassmann spectra ---------------------------------------------


def _gb(n, k, q):
    return Fraction(gaussian_binomial(n, k, q))


def grassmann_upper_eigenvalue(q: int, n: int, k: int, j: int, ell: int) -> float:
    """Eigenvalue of the upper canonical walk through level k+j on level-ell functions."""
    val = (
        Fraction(q ** (ell * j))
        * _gb(k + j - ell, j, q)
        / _gb(k + j, j, q)
        * _gb(n - k - ell, j, q)
        / _gb(n - k, j, q)
    )
    return float(val)


def grassmann_lower_eigenvalue(q: int, n: int, k: int, j: int, ell: int) -> float:
    """Eigenvalue of the lower canonical walk through level k-j on level-ell functions."""
    return grassmann_upper_eigenvalue(q, n, k - j, j, ell)


def swap_coefficients(q: int, k: int, j: int) -> list:
    """Exact coefficients ``c_i`` with ``S_k^j = sum_i c_i N_k^i`` (i = 0..j)."""
    norm = q ** (j * j) * gaussian_binomial(k, k - j, q)
    return [
        Fraction(
            (-1) ** (j - i) * q ** comb(j - i, 2) * gaussian_binomial(j, i, q) * gaussian_binomial(k + i, i, q),
            norm,
        )
        for i in range(j + 1)
    ]


def canonical_in_swap_coefficients(q: int, k: int, j: int) -> list:
    """Exact coefficients ``p_i`` with ``N_k^j = sum_i p_i S_k^i`` (i = 0..j)."""
    total = gaussian_binomial(k + j, k, q)
    return [
        Fraction(q ** (i * i) * gaussian_binomial(j, i, q) * gaussian_binomial(k, k - i, q), total)
        for i in range(j + 1)
    ]


def grassmann_swap_eigenvalue(q: int, n: int, k: int, j: int, ell: int) -> float:
    """Exact swap-walk eigenvalue on the full Grassmann of F_q^n."""
    coeffs = swap_coefficients(q, k, j)
    val = Fraction(0)
    for i, c in enumerate(coeffs):
        lam = (
            Fraction(q ** (ell * i))
            * _gb(k + i - ell, i, q)
            / _gb(k + i, i, q)
            * _gb(n - k - ell, i, q)
            / _gb(n - k, i, q)
        )
        val += c * lam
    return float(val)


def qeposet_upper_eigenvalue(q: int, k: int, j: int, ell: int) -> float:
    return float(_gb(k + j - ell, j, q) / _gb(k + j, j, q))


def qeposet_swap_eigenvalue(q: int, k: int, j: int, ell: int) -> float:
    return float(_gb(k - j, ell, q) / _gb(k, ell, q))
