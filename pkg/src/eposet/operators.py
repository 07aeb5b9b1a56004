"""Averaging operators between levels and the weighted inner product.

Every operator is a dense matrix acting on coefficient vectors, rows indexed
by the target level.  Adjointness is always meant with respect to the
``pi``-weighted inner product, so symmetry is tested as
``diag(pi) M == M.T diag(pi)`` rather than ``M == M.T``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import LevelMismatch, ZeroMass
from .poset import GradedPoset, Measure, regularity_profile

# per-measure operator cache; measures hash by identity
_CACHE: "weakref.WeakKeyDictionary[Measure, dict]" = weakref.WeakKeyDictionary()


def _store(measure: Measure) -> dict:
    store = _CACHE.get(measure)
    if store is None:
        store = {}
        _CACHE[measure] = store
    return store


@dataclass(frozen=True)
class LevelFunction:
    level: int
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __add__(self, other: "LevelFunction") -> "LevelFunction":
        if other.level != self.level:
            raise LevelMismatch(f"cannot add level {self.level} and level {other.level}")
        return LevelFunction(self.level, self.values + other.values)

    def __sub__(self, other: "LevelFunction") -> "LevelFunction":
        if other.level != self.level:
            raise LevelMismatch(f"cannot subtract level {other.level} from level {self.level}")
        return LevelFunction(self.level, self.values - other.values)

    def __mul__(self, c: float) -> "LevelFunction":
        return LevelFunction(self.level, c * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class LinearMap:
    from_level: int
    to_level: int
    matrix: np.ndarray

    def __call__(self, f: LevelFunction) -> LevelFunction:
        if f.level != self.from_level:
            raise LevelMismatch(f"map acts on level {self.from_level}, got level {f.level}")
        return LevelFunction(self.to_level, self.matrix @ f.values)

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        if other.to_level != self.from_level:
            raise LevelMismatch("composition levels do not line up")
        return LinearMap(other.from_level, self.to_level, self.matrix @ other.matrix)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def up_matrix(poset: GradedPoset, i: int) -> np.ndarray:
    """``U_i``: average of a level-i function over the elements covered by each y in X(i+1)."""
    poset.check_level(i, 0, poset.d - 1)
    key = ("U", i)
    if key not in poset._cache:
        A = poset.incidence(i + 1).toarray().astype(float)
        poset._cache[key] = _readonly(A / A.sum(axis=1, keepdims=True))
    return poset._cache[key]


def down_matrix(poset: GradedPoset, measure: Measure, i: int) -> np.ndarray:
    """``D_i``: pi_i-weighted average over the elements of X(i) covering each x in X(i-1)."""
    poset.check_level(i, 1)
    store = _store(measure)
    key = ("D", i)
    if key not in store:
        W = poset.incidence(i).T.toarray().astype(float) * measure.pi[i][None, :]
        mass = W.sum(axis=1, keepdims=True)
        if np.any(mass <= 0):
            raise ZeroMass(f"some element of level {i - 1} has no mass above it")
        store[key] = _readonly(W / mass)
    return store[key]


def up_operator(poset: GradedPoset, measure: Measure, i: int) -> LinearMap:
    return LinearMap(i, i + 1, up_matrix(poset, i))


def down_operator(poset: GradedPoset, measure: Measure, i: int) -> LinearMap:
    return LinearMap(i, i - 1, down_matrix(poset, measure, i))


def inner_product(f: LevelFunction, g: LevelFunction, measure: Measure) -> float:
    if f.level != g.level:
        raise LevelMismatch(f"inner product of level {f.level} with level {g.level}")
    return float(np.dot(measure.pi[f.level] * f.values, g.values))


def weighted_dot(pi: np.ndarray, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Column-wise ``<f, g>`` for arrays whose first axis is the level index."""
    return np.einsum("i,i...,i...->...", pi, f, g)


def expectation(f: LevelFunction, measure: Measure) -> float:
    return float(np.dot(measure.pi[f.level], f.values))


def compose_up_matrix(poset: GradedPoset, i: int, k: int, method: str = "product") -> np.ndarray:
    """``U^k_i = U_{k-1} ... U_i`` as a ``|X(k)| x |X(i)|`` matrix.

    ``method="direct"`` instead averages over all rank-i elements below each
    rank-k element with weight ``1/R(k, i)``.
    """
    poset.check_level(k)
    poset.check_level(i, 0, k)
    key = ("Uk", i, k, method)
    if key in poset._cache:
        return poset._cache[key]
    if method == "product":
        if i == k:
            M = np.eye(len(poset.levels[k]))
        else:
            M = up_matrix(poset, k - 1) @ compose_up_matrix(poset, i, k - 1)
    elif method == "direct":
        R = regularity_profile(poset).R(k, i)
        M = poset.containment(k, i).toarray().astype(float) / R
    else:
        raise ValueError(f"unknown method {method!r}")
    poset._cache[key] = _readonly(M)
    return M


def compose_down_matrix(
    poset: GradedPoset, measure: Measure, k: int, i: int, method: str = "product"
) -> np.ndarray:
    """``D^k_i = D_{i+1} ... D_k`` as a ``|X(i)| x |X(k)|`` matrix.

    The direct form is ``pi_k(y) / (R(k,i) pi_i(x))`` for ``y > x``.
    """
    poset.check_level(k)
    poset.check_level(i, 0, k)
    store = _store(measure)
    key = ("Dk", k, i, method)
    if key in store:
        return store[key]
    if method == "product":
        if i == k:
            M = np.eye(len(poset.levels[k]))
        else:
            M = down_matrix(poset, measure, i + 1) @ compose_down_matrix(poset, measure, k, i + 1)
    elif method == "direct":
        R = regularity_profile(poset).R(k, i)
        C = poset.containment(k, i).T.toarray().astype(float)
        M = C * measure.pi[k][None, :] / (R * measure.pi[i][:, None])
    else:
        raise ValueError(f"unknown method {method!r}")
    store[key] = _readonly(M)
    return M


def compose_up(poset: GradedPoset, measure: Measure, i: int, k: int, method: str = "product") -> LinearMap:
    return LinearMap(i, k, compose_up_matrix(poset, i, k, method))


def compose_down(poset: GradedPoset, measure: Measure, k: int, i: int, method: str = "product") -> LinearMap:
    return LinearMap(k, i, compose_down_matrix(poset, measure, k, i, method))


def upper_walk_matrix(poset: GradedPoset, measure: Measure, i: int) -> np.ndarray:
    """``D_{i+1} U_i`` on C_i."""
    return down_matrix(poset, measure, i + 1) @ up_matrix(poset, i)


def lower_walk_matrix(poset: GradedPoset, measure: Measure, i: int) -> np.ndarray:
    """``U_{i-1} D_i`` on C_i."""
    store = _store(measure)
    key = ("UD", i)
    if key not in store:
        store[key] = _readonly(up_matrix(poset, i - 1) @ down_matrix(poset, measure, i))
    return store[key]


def self_adjoint_residual(M: np.ndarray, pi: np.ndarray) -> float:
    """``max |diag(pi) M - M^T diag(pi)|``, divided by ``max(pi)``.

    The scaling makes the residual comparable with transition probabilities
    (it is exactly ``max |M - M^T|`` under a uniform measure).
    """
    A = pi[:, None] * M
    return float(np.abs(A - A.T).max() / pi.max()) if A.size else 0.0


def is_self_adjoint(M: np.ndarray, pi: np.ndarray, tol: float = 1e-12) -> bool:
    return self_adjoint_residual(M, pi) <= tol


def symmetrize(M: np.ndarray, pi: np.ndarray) -> np.ndarray:
    """Conjugate ``diag(pi)^{1/2} M diag(pi)^{-1/2}``, with rounding asymmetry averaged out."""
    s = np.sqrt(pi)
    S = s[:, None] * M / s[None, :]
    return 0.5 * (S + S.T)


def weighted_eigh(M: np.ndarray, pi: np.ndarray):
    """Eigenvalues (ascending) and pi-orthonormal eigenvectors of a pi-self-adjoint ``M``."""
    vals, vecs = np.linalg.eigh(symmetrize(M, pi))
    return vals, vecs / np.sqrt(pi)[:, None]


def weighted_eigvals(M: np.ndarray, pi: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(symmetrize(M, pi))


def weighted_norm(M: np.ndarray, pi: np.ndarray) -> float:
    """Operator norm of a pi-self-adjoint matrix on (C_k, <.,.>)."""
    vals = weighted_eigvals(M, pi)
    return float(np.abs(vals).max()) if vals.size else 0.0


def weighted_op_norm(A: np.ndarray, pi_out: np.ndarray, pi_in: np.ndarray) -> float:
    """Operator norm of ``A: (C_in, pi_in) -> (C_out, pi_out)``."""
    B = np.sqrt(pi_out)[:, None] * A / np.sqrt(pi_in)[None, :]
    return float(np.linalg.norm(B, 2)) if B.size else 0.0


def dump_csv(path, lmap: LinearMap):
    np.savetxt(path, lmap.matrix, delimiter=",", fmt="%.17g")
