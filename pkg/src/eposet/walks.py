"""Pure up/down words, HD-walks, canonical walks and partial-swap walks.

Words are written in application order: ``("U", "D")`` first goes up one
level, then comes back down, i.e. the operator ``D_{k+1} U_k``.  Down
positions count from 1 at the first applied step, so the upper canonical walk
through ``k+j`` has down positions ``j+1..2j`` and the lower canonical walk
through ``k-j`` has down positions ``1..j``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .errors import EmptySupport, InputError, NotAffine, NotSelfAdjoint, NotStochastic
from .operators import down_matrix, self_adjoint_residual, up_matrix, weighted_eigvals
from .poset import GradedPoset, Measure
from .qfamilies import canonical_in_swap_coefficients, gaussian_binomial, swap_coefficients


@dataclass(frozen=True)
class PureWalkDescriptor:
    k: int
    word: tuple = ()

    def __post_init__(self):
        word = tuple(self.word)
        if any(s not in ("U", "D") for s in word):
            raise InputError(f"word may only contain 'U' and 'D', got {word}")
        if word.count("U") != word.count("D"):
            raise InputError(f"word {''.join(word)} is not balanced")
        object.__setattr__(self, "word", word)

    @property
    def height(self) -> int:
        return len(self.word) // 2

    @property
    def down_positions(self) -> tuple:
        return tuple(p + 1 for p, s in enumerate(self.word) if s == "D")

    @property
    def level_path(self) -> tuple:
        path = [self.k]
        for s in self.word:
            path.append(path[-1] + (1 if s == "U" else -1))
        return tuple(path)

    @classmethod
    def identity(cls, k: int) -> "PureWalkDescriptor":
        return cls(k, ())

    @classmethod
    def canonical_up(cls, k: int, j: int) -> "PureWalkDescriptor":
        return cls(k, ("U",) * j + ("D",) * j)

    @classmethod
    def canonical_down(cls, k: int, j: int) -> "PureWalkDescriptor":
        return cls(k, ("D",) * j + ("U",) * j)

    def label(self) -> str:
        if not self.word:
            return f"I[k={self.k}]"
        return f"{''.join(self.word)}[k={self.k}]"


def pure_walk_matrix(poset: GradedPoset, measure: Measure, desc: PureWalkDescriptor) -> np.ndarray:
    path = desc.level_path
    if min(path) < 0 or max(path) > poset.d:
        raise InputError(f"walk {desc.label()} leaves levels [0, {poset.d}]")
    M = np.eye(len(poset.levels[desc.k]))
    level = desc.k
    for s in desc.word:
        if s == "U":
            M = up_matrix(poset, level) @ M
            level += 1
        else:
            M = down_matrix(poset, measure, level) @ M
            level -= 1
    return M


@dataclass
class HDWalk:
    """Affine combination of pure walks on one level, realized as a matrix.

    ``stochastic`` and ``self_adjoint`` are diagnostics; call
    :meth:`require_valid` before feeding the walk to expansion analysis.
    """

    poset: GradedPoset
    measure: Measure
    k: int
    terms: list
    matrix: np.ndarray
    name: str = ""
    min_entry: float = 0.0
    row_sum_error: float = 0.0
    adjoint_residual: float = 0.0
    tol: float = 1e-10
    info: dict = field(default_factory=dict)

    @property
    def height(self) -> int:
        return max((d.height for a, d in self.terms if a != 0), default=0)

    @property
    def weight(self) -> float:
        return float(sum(abs(a) for a, _ in self.terms))

    @property
    def stochastic(self) -> bool:
        return self.min_entry >= -self.tol and self.row_sum_error <= self.tol

    @property
    def self_adjoint(self) -> bool:
        return self.adjoint_residual <= self.tol

    def require_valid(self) -> "HDWalk":
        if not self.stochastic:
            raise NotStochastic(
                f"{self.name}: min entry {self.min_entry:.3g}, row-sum error {self.row_sum_error:.3g}"
            )
        if not self.self_adjoint:
            raise NotSelfAdjoint(f"{self.name}: weighted residual {self.adjoint_residual:.3g}")
        return self

    def eigenvalues(self) -> np.ndarray:
        return weighted_eigvals(self.matrix, self.measure.pi[self.k])


def _diagnose(walk: HDWalk) -> HDWalk:
    M = walk.matrix
    walk.min_entry = float(M.min()) if M.size else 0.0
    walk.row_sum_error = float(np.abs(M.sum(axis=1) - 1.0).max()) if M.size else 0.0
    walk.adjoint_residual = self_adjoint_residual(M, np.asarray(walk.measure.pi[walk.k]))
    return walk


def hd_walk(poset: GradedPoset, measure: Measure, terms, name: str = "", tol: float = 1e-10) -> HDWalk:
    """Realize ``sum_Y alpha_Y Y`` for ``terms = [(alpha, PureWalkDescriptor), ...]``.

    Raises NotAffine when the coefficients do not sum to one and
    NotSelfAdjoint when the realized matrix is not pi-self-adjoint.
    Stochasticity is only recorded.
    """
    terms = [(a, d) for a, d in terms]
    if not terms:
        raise InputError("an HD-walk needs at least one term")
    levels = {d.k for _, d in terms}
    if len(levels) != 1:
        raise InputError(f"terms live on different levels {sorted(levels)}")
    k = levels.pop()
    total = sum(Fraction(a) if isinstance(a, (int, Fraction)) else a for a, _ in terms)
    if abs(float(total) - 1.0) > 1e-12:
        raise NotAffine(f"coefficients sum to {float(total)!r}")
    M = np.zeros((len(poset.levels[k]),) * 2)
    for a, d in terms:
        if a != 0:
            M += float(a) * pure_walk_matrix(poset, measure, d)
    walk = _diagnose(HDWalk(poset, measure, k, terms, M, name or _terms_label(terms), tol=tol))
    if not walk.self_adjoint:
        raise NotSelfAdjoint(f"{walk.name}: weighted residual {walk.adjoint_residual:.3g}")
    return walk


def _terms_label(terms) -> str:
    return " + ".join(f"{float(a):g}*{d.label()}" for a, d in terms)


def canonical_up(poset: GradedPoset, measure: Measure, k: int, j: int) -> HDWalk:
    """Upper canonical walk through level ``k+j``."""
    poset.check_level(k)
    if j < 0 or k + j > poset.d:
        raise InputError(f"upper canonical walk needs 0 <= j and k+j <= {poset.d}")
    desc = PureWalkDescriptor.canonical_up(k, j)
    return hd_walk(poset, measure, [(1, desc)], name=f"N_up[k={k},j={j}]")


def canonical_down(poset: GradedPoset, measure: Measure, k: int, j: int) -> HDWalk:
    """Lower canonical walk through level ``k-j``."""
    poset.check_level(k)
    if not 0 <= j <= k:
        raise InputError(f"lower canonical walk needs 0 <= j <= k, got j={j}, k={k}")
    desc = PureWalkDescriptor.canonical_down(k, j)
    return hd_walk(poset, measure, [(1, desc)], name=f"N_down[k={k},j={j}]")


def identity_walk(poset: GradedPoset, measure: Measure, k: int) -> HDWalk:
    return hd_walk(poset, measure, [(1, PureWalkDescriptor.identity(k))], name=f"I[k={k}]")


def _swap_terms(q: int, k: int, j: int) -> list:
    coeffs = swap_coefficients(q, k, j)
    return [(c, PureWalkDescriptor.canonical_up(k, i)) for i, c in enumerate(coeffs)]


def _check_swap(poset: GradedPoset, k: int, j: int):
    if not poset.is_q_simplicial:
        raise InputError("partial-swap walks need a q-simplicial poset")
    poset.check_level(k)
    if j < 0 or k + j > poset.d:
        raise InputError(f"swap walk needs 0 <= j and k+j <= {poset.d}, got k={k}, j={j}")
    if j > k:
        raise InputError(f"swap walk needs j <= k, got k={k}, j={j}")


def intersection_at_least(poset: GradedPoset, k: int, r: int) -> np.ndarray:
    """Boolean ``|X(k)| x |X(k)|`` matrix: V and W share an element of rank ``r``.

    In a downward-closed complex this means ``dim(V ∩ W) >= r``.
    """
    if r <= 0:
        return np.ones((len(poset.levels[k]),) * 2, dtype=bool)
    C = poset.containment(k, r)
    return (C @ C.T).toarray() > 0


def swap_walk_restriction(poset: GradedPoset, measure: Measure, k: int, j: int) -> HDWalk:
    """Partial-swap walk built by restricting the upper canonical walk.

    Pairs whose intersection has dimension above ``k-j`` are removed and rows
    are renormalized.  The walk carries the alternating expansion in canonical
    walks as its ``terms`` so that approximate eigenvalues can be evaluated.
    """
    _check_swap(poset, k, j)
    terms = _swap_terms(poset.q, k, j)
    name = f"S_restrict[k={k},j={j}]"
    if j == 0:
        walk = hd_walk(poset, measure, [(1, PureWalkDescriptor.identity(k))], name=name)
        walk.terms = terms
        return walk
    N = pure_walk_matrix(poset, measure, PureWalkDescriptor.canonical_up(k, j))
    M = np.where(intersection_at_least(poset, k, k - j + 1), 0.0, N)
    rows = M.sum(axis=1)
    empty = np.flatnonzero(rows <= 0)
    if empty.size:
        raise EmptySupport(int(empty[0]))
    M = M / rows[:, None]
    walk = _diagnose(HDWalk(poset, measure, k, terms, M, name))
    walk.info["construction"] = "restriction"
    return walk


def swap_walk_inversion(poset: GradedPoset, measure: Measure, k: int, j: int) -> HDWalk:
    """Partial-swap walk as the alternating q-binomial combination of upper canonical walks."""
    _check_swap(poset, k, j)
    walk = hd_walk(poset, measure, _swap_terms(poset.q, k, j), name=f"S_invert[k={k},j={j}]")
    walk.info["construction"] = "inversion"
    return walk


def canonical_from_swaps(swaps: list, q: int, k: int, j: int) -> np.ndarray:
    """Rebuild ``N_up[k, j]`` from swap walks ``S_k^0..S_k^j`` (matrices)."""
    coeffs = canonical_in_swap_coefficients(q, k, j)
    return sum(float(c) * S for c, S in zip(coeffs, swaps))


def q_binomial_inversion(a, q: int) -> list:
    """``b_j = sum_{i=1}^{j} (-1)^i q^{C(j-i,2)} (j choose i)_q a_i`` for ``j = 1..len(a)``.

    ``a[0]`` holds ``a_1``.  Exact for integer or Fraction input.
    """
    out = []
    for j in range(1, len(a) + 1):
        out.append(
            sum((-1) ** i * q ** comb(j - i, 2) * gaussian_binomial(j, i, q) * a[i - 1] for i in range(1, j + 1))
        )
    return out


def q_binomial_forward(b, q: int) -> list:
    """``a_j = sum_{i=1}^{j} (-1)^i (j choose i)_q b_i``; inverse of :func:`q_binomial_inversion`."""
    return [
        sum((-1) ** i * gaussian_binomial(j, i, q) * b[i - 1] for i in range(1, j + 1))
        for j in range(1, len(b) + 1)
    ]


# -- descriptor strings -------------------------------------------------------

_SIMPLE = re.compile(r"^(N|Nd|S|UD):(.*)$")


def _params(body: str) -> dict:
    out = {}
    for part in filter(None, (p.strip() for p in body.split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise InputError(f"expected key=value, got {part!r}")
        try:
            out[key.strip()] = int(val)
        except ValueError as exc:
            raise InputError(f"parameter {key!r} must be an integer") from exc
    return out


def walk_terms_from_string(text: str, q: int | None = None, k: int | None = None):
    """Parse a descriptor into ``(kind, k, terms)``.

    Grammar: ``N:k=2,j=1`` (upper canonical), ``Nd:k=3,j=2`` (lower
    canonical), ``S:k=2,j=1`` (partial swap), ``UD:k=2`` (lower walk through
    k-1), ``I`` (identity, level taken from the surrounding mix) and
    ``mix:[0.5*N:k=2,j=1;0.5*I]``.
    """
    text = text.strip()
    if text.startswith("mix:"):
        inner = text[4:].strip()
        if not (inner.startswith("[") and inner.endswith("]")):
            raise InputError(f"mix descriptor needs brackets: {text!r}")
        parts = [p.strip() for p in inner[1:-1].split(";") if p.strip()]
        parsed = []
        for p in parts:
            coef, star, sub = p.partition("*")
            if not star:
                raise InputError(f"mix term needs 'coef*walk': {p!r}")
            try:
                alpha = float(coef)
            except ValueError as exc:
                raise InputError(f"bad coefficient {coef!r}") from exc
            parsed.append((alpha, sub.strip()))
        levels = [walk_terms_from_string(s, q)[1] for _, s in parsed if s != "I"]
        if not levels:
            raise InputError("mix needs at least one non-identity term to fix the level")
        level = levels[0]
        terms = []
        for alpha, sub in parsed:
            _, lk, sub_terms = walk_terms_from_string(sub, q, level)
            if lk != level:
                raise InputError("mix terms live on different levels")
            terms.extend((alpha * float(a), d) for a, d in sub_terms)
        return "mix", level, terms
    if text == "I":
        if k is None:
            raise InputError("identity needs a level")
        return "I", k, [(1, PureWalkDescriptor.identity(k))]
    m = _SIMPLE.match(text)
    if not m:
        raise InputError(f"unrecognised walk descriptor {text!r}")
    kind, params = m.group(1), _params(m.group(2))
    if "k" not in params:
        raise InputError(f"walk descriptor {text!r} needs k=")
    lk = params["k"]
    if kind == "UD":
        return kind, lk, [(1, PureWalkDescriptor.canonical_down(lk, 1))]
    if "j" not in params:
        raise InputError(f"walk descriptor {text!r} needs j=")
    j = params["j"]
    if kind == "N":
        return kind, lk, [(1, PureWalkDescriptor.canonical_up(lk, j))]
    if kind == "Nd":
        return kind, lk, [(1, PureWalkDescriptor.canonical_down(lk, j))]
    if q is None:
        raise InputError("swap walks need a q-simplicial poset")
    return kind, lk, _swap_terms(q, lk, j)


def walk_from_string(poset: GradedPoset, measure: Measure, text: str) -> HDWalk:
    kind, k, terms = walk_terms_from_string(text, poset.q)
    poset.check_level(k)
    if kind == "S":
        j = max(d.height for _, d in terms)
        walk = swap_walk_restriction(poset, measure, k, j)
    else:
        walk = hd_walk(poset, measure, terms)
    walk.name = text.strip()
    return walk
