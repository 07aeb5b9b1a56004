"""Measured graded posets: structure, regularity tables and induced measures.

Rank 0 holds the unique minimal element (the empty face or the zero subspace).
A simplicial face with ``k`` vertices and a ``k``-dimensional subspace both sit
at rank ``k``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    AllZeroWeights,
    DimensionMismatch,
    EmptyInput,
    InputError,
    InvalidPoset,
    LevelOutOfRange,
    MixedRank,
    NotDownwardRegular,
    NotMiddleRegular,
    NotNormalized,
)

Face = Hashable


@dataclass(frozen=True, eq=False)
class GradedPoset:
    """Pure graded poset with a unique minimum, stored level by level.

    ``covers[i][x]`` lists the ids in ``X(i-1)`` covered by element ``x`` of
    ``X(i)``; ``covers[0]`` is empty.  Instances hash by identity so derived
    tables can be cached against them.
    """

    d: int
    levels: tuple
    covers: tuple
    family: str = "custom"
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise InvalidPoset("max rank d must be at least 1")
        if len(self.levels) != self.d + 1 or len(self.covers) != self.d + 1:
            raise InvalidPoset("need one element table and one cover table per rank 0..d")
        if len(self.levels[0]) != 1:
            raise InvalidPoset(f"|X(0)| must be 1, got {len(self.levels[0])}")
        for i in range(1, self.d + 1):
            if len(self.covers[i]) != len(self.levels[i]):
                raise InvalidPoset(f"cover table of level {i} has the wrong length")
            lower = len(self.levels[i - 1])
            hit = np.zeros(lower, dtype=bool)
            for x, below in enumerate(self.covers[i]):
                if len(below) == 0:
                    raise InvalidPoset(f"element {x} of level {i} covers nothing")
                for y in below:
                    if not 0 <= y < lower:
                        raise InvalidPoset(f"cover edge ({i},{x}) -> {y} leaves level {i - 1}")
                hit[list(below)] = True
            if not hit.all():
                raise InvalidPoset(
                    f"not pure: level {i - 1} ids {np.flatnonzero(~hit)[:10].tolist()} are maximal"
                )

    # -- basic accessors -------------------------------------------------

    @property
    def sizes(self) -> tuple:
        return tuple(len(level) for level in self.levels)

    @property
    def q(self):
        return self.meta.get("q")

    @property
    def is_q_simplicial(self) -> bool:
        return self.q is not None

    def check_level(self, i: int, low: int = 0, high: int | None = None):
        high = self.d if high is None else high
        if not low <= i <= high:
            raise LevelOutOfRange(f"level {i} outside [{low}, {high}]")

    def index(self, i: int, face: Face) -> int:
        key = ("index", i)
        if key not in self._cache:
            self._cache[key] = {f: n for n, f in enumerate(self.levels[i])}
        return self._cache[key][face]

    def incidence(self, i: int) -> sp.csr_matrix:
        """0/1 cover matrix of shape ``(|X(i)|, |X(i-1)|)``."""
        self.check_level(i, 1)
        key = ("incidence", i)
        if key not in self._cache:
            rows, cols = [], []
            for x, below in enumerate(self.covers[i]):
                rows.extend([x] * len(below))
                cols.extend(below)
            data = np.ones(len(rows), dtype=np.int64)
            shape = (len(self.levels[i]), len(self.levels[i - 1]))
            self._cache[key] = sp.csr_matrix((data, (rows, cols)), shape=shape)
        return self._cache[key]

    def chain_counts(self, k: int, i: int) -> sp.csr_matrix:
        """Entry ``(x, y)`` counts maximal chains from ``x`` in X(k) down to ``y`` in X(i)."""
        self.check_level(k)
        self.check_level(i, 0, k)
        key = ("chains", k, i)
        if key not in self._cache:
            if k == i:
                mat = sp.identity(len(self.levels[k]), dtype=np.int64, format="csr")
            else:
                mat = self.incidence(k) @ self.chain_counts(k - 1, i)
                mat = sp.csr_matrix(mat)
            self._cache[key] = mat
        return self._cache[key]

    def containment(self, k: int, i: int) -> sp.csr_matrix:
        """Boolean ``x >= y`` relation between X(k) and X(i), as 0/1 integers."""
        key = ("contain", k, i)
        if key not in self._cache:
            mat = self.chain_counts(k, i).copy()
            mat.data = np.ones_like(mat.data)
            self._cache[key] = mat
        return self._cache[key]

    def down_degrees(self, i: int) -> np.ndarray:
        return np.asarray([len(c) for c in self.covers[i]], dtype=np.int64)


@dataclass(frozen=True)
class RegularityProfile:
    """Exact regularity tables of a regular poset.

    ``R1[i]`` is the down-degree of level ``i`` (``R1[0]`` is 0 by convention),
    ``m[(k, i)]`` the chain count and ``table[(k, i)]`` the number of rank-i
    elements under any rank-k element.
    """

    d: int
    R1: tuple
    m: dict
    table: dict

    def R(self, k: int, i: int) -> int:
        if k < i:
            return 0
        return self.table[(k, i)]

    def Rmax(self, k: int) -> int:
        return max(self.R(k, i) for i in range(k + 1))


def regularity_profile(poset: GradedPoset) -> RegularityProfile:
    """Verify downward and middle regularity exhaustively and tabulate R(k, i)."""
    if "profile" in poset._cache:
        return poset._cache["profile"]
    R1 = [0]
    for i in range(1, poset.d + 1):
        deg = poset.down_degrees(i)
        bad = np.flatnonzero(deg != deg[0])
        if bad.size:
            raise NotDownwardRegular(i, bad.tolist())
        R1.append(int(deg[0]))
    m, table = {}, {}
    for k in range(poset.d + 1):
        for i in range(k + 1):
            chains = poset.chain_counts(k, i).tocoo()
            vals = chains.data
            if vals.size == 0:
                raise NotMiddleRegular(k, i, None)
            off = np.flatnonzero(vals != vals[0])
            if off.size:
                j = off[0]
                raise NotMiddleRegular(k, i, (int(chains.row[j]), int(chains.col[j])))
            m[(k, i)] = int(vals[0])
            per_row = np.diff(poset.chain_counts(k, i).indptr)
            prod = 1
            for j in range(i + 1, k + 1):
                prod *= R1[j]
            count, rem = divmod(prod, m[(k, i)])
            if rem or np.any(per_row != count):
                raise NotMiddleRegular(k, i, None)
            table[(k, i)] = count
    profile = RegularityProfile(poset.d, tuple(R1), m, table)
    poset._cache["profile"] = profile
    return profile


@dataclass(frozen=True, eq=False)
class Measure:
    """Per-level probability vectors induced from the top level."""

    pi: tuple
    source: str = "uniform"

    @property
    def d(self) -> int:
        return len(self.pi) - 1

    @property
    def has_full_support(self) -> bool:
        return all(np.all(p > 0) for p in self.pi)


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def induce_measure(poset: GradedPoset, pi_d, source: str = "custom") -> Measure:
    """Push a top-level distribution down: pick ``y`` by ``pi_{i+1}``, then a uniform ``x < y``."""
    pi_d = np.asarray(pi_d, dtype=float)
    if pi_d.shape != (len(poset.levels[poset.d]),):
        raise DimensionMismatch(
            f"pi_d has shape {pi_d.shape}, top level has {len(poset.levels[poset.d])} elements"
        )
    if np.any(pi_d < 0):
        raise InputError("pi_d has negative entries")
    if abs(pi_d.sum() - 1.0) > 1e-12:
        raise NotNormalized(f"pi_d sums to {pi_d.sum()!r}")
    pis = [None] * (poset.d + 1)
    pis[poset.d] = pi_d
    for i in range(poset.d - 1, -1, -1):
        upper = pis[i + 1] / poset.down_degrees(i + 1)
        pis[i] = poset.incidence(i + 1).T @ upper
    return Measure(tuple(_frozen(p) for p in pis), source)


def uniform_measure(poset: GradedPoset) -> Measure:
    top = len(poset.levels[poset.d])
    return induce_measure(poset, np.full(top, 1.0 / top), source="uniform")


def restrict_to_support(poset: GradedPoset, measure: Measure):
    """Drop zero-mass elements; returns a fresh ``(poset, measure)`` pair."""
    keep_top = np.flatnonzero(measure.pi[poset.d] > 0)
    weights = measure.pi[poset.d][keep_top]
    return _closure_from_ids(poset, keep_top, weights, measure.source)


def _closure_from_ids(poset: GradedPoset, keep_top, weights, source):
    keep = [None] * (poset.d + 1)
    keep[poset.d] = sorted(int(x) for x in keep_top)
    for i in range(poset.d, 0, -1):
        below = set()
        for x in keep[i]:
            below.update(poset.covers[i][x])
        keep[i - 1] = sorted(below)
    remap = [{old: new for new, old in enumerate(ids)} for ids in keep]
    levels = tuple(tuple(poset.levels[i][x] for x in keep[i]) for i in range(poset.d + 1))
    covers = [()]
    for i in range(1, poset.d + 1):
        covers.append(tuple(tuple(remap[i - 1][y] for y in poset.covers[i][x]) for x in keep[i]))
    sub = GradedPoset(poset.d, levels, tuple(covers), poset.family, dict(poset.meta))
    order = np.argsort(np.asarray(keep_top))
    w = np.asarray(weights, dtype=float)[order]
    return sub, induce_measure(sub, w / w.sum(), source)


def simplicial_subfaces(face: tuple) -> list:
    return [face[:t] + face[t + 1 :] for t in range(len(face))]


def build_downward_closure(
    top_faces: Sequence[Face],
    weights: Iterable[float] | None = None,
    subfaces: Callable[[Face], list] = simplicial_subfaces,
    rank: Callable[[Face], int] = len,
    sort_key: Callable[[Face], object] | None = None,
    family: str = "simplicial",
    meta: dict | None = None,
):
    """Downward closure of a weighted family of equal-rank faces.

    Zero-weight faces are dropped before closing, so every element of the
    result carries positive mass.  Duplicate faces have their weights summed.
    """
    top_faces = list(top_faces)
    if not top_faces:
        raise EmptyInput("no top faces given")
    if weights is None:
        weights = np.ones(len(top_faces))
    weights = np.asarray(list(weights), dtype=float)
    if weights.shape != (len(top_faces),):
        raise DimensionMismatch("one weight per top face is required")
    if np.any(weights < 0) or not np.all(np.isfinite(weights)):
        raise InputError("weights must be finite and nonnegative")
    if not np.any(weights > 0):
        raise AllZeroWeights("every top face has zero weight")
    ranks = {rank(f) for f in top_faces}
    if len(ranks) != 1:
        raise MixedRank(f"top faces have ranks {sorted(ranks)}")
    d = ranks.pop()
    if d < 1:
        raise InputError("top faces must have rank at least 1")
    key = sort_key or (lambda f: f)

    mass = {}
    for f, w in zip(top_faces, weights):
        if w > 0:
            mass[f] = mass.get(f, 0.0) + w
    level_faces = [None] * (d + 1)
    level_faces[d] = sorted(mass, key=key)
    below_of = [None] * (d + 1)
    for i in range(d, 0, -1):
        below_of[i] = [subfaces(f) for f in level_faces[i]]
        nxt = {g for subs in below_of[i] for g in subs}
        level_faces[i - 1] = sorted(nxt, key=key)
    ids = [{f: n for n, f in enumerate(fs)} for fs in level_faces]
    covers = [()]
    for i in range(1, d + 1):
        covers.append(tuple(tuple(sorted(ids[i - 1][g] for g in subs)) for subs in below_of[i]))
    poset = GradedPoset(d, tuple(tuple(fs) for fs in level_faces), tuple(covers), family, dict(meta or {}))
    w = np.array([mass[f] for f in level_faces[d]])
    measure = induce_measure(poset, w / w.sum(), source="weighted" if np.ptp(w) else "uniform")
    return poset, measure


@dataclass(frozen=True)
class NonLaziness:
    beta: float
    max_transition: float
    max_offdiagonal: float


def non_laziness(poset: GradedPoset, measure: Measure, i: int | None = None) -> NonLaziness:
    """Largest return probability of the one-step lower walk ``U_{i-1} D_i``.

    With ``i=None`` the maximum over all levels 1..d is returned.
    """
    from .operators import lower_walk_matrix

    if i is None:
        parts = [non_laziness(poset, measure, j) for j in range(1, poset.d + 1)]
        return NonLaziness(
            max(p.beta for p in parts),
            max(p.max_transition for p in parts),
            max(p.max_offdiagonal for p in parts),
        )
    poset.check_level(i, 1)
    walk = lower_walk_matrix(poset, measure, i)
    diag = np.diag(walk)
    beta = float(diag.max())
    top = float(walk.max())
    off = walk.copy()
    np.fill_diagonal(off, -np.inf)
    off_max = float(off.max()) if walk.shape[0] > 1 else 0.0
    # max laziness equals max transition (same matrix, exact comparison)
    assert beta == top, (beta, top)
    return NonLaziness(beta, top, off_max)


# -- JSON poset files ------------------------------------------------------


def _face_to_json(face):
    if len(face) and isinstance(face[0], tuple):
        return [list(row) for row in face]
    return list(face)


def _face_from_json(obj, q_simplicial: bool):
    if q_simplicial:
        return tuple(tuple(int(v) for v in row) for row in obj)
    return tuple(int(v) for v in obj)


def poset_to_dict(poset: GradedPoset, measure: Measure) -> dict:
    out = {
        "d": poset.d,
        "family": poset.family,
        "levels": [[_face_to_json(f) for f in level] for level in poset.levels],
        "covers": [[list(c) for c in level] for level in poset.covers],
        "pi_d": [float(x) for x in measure.pi[poset.d]],
    }
    for k, v in sorted(poset.meta.items()):
        out[k] = v
    return out


def save_poset(path, poset: GradedPoset, measure: Measure):
    with open(path, "w") as fh:
        json.dump(poset_to_dict(poset, measure), fh)


def poset_from_dict(doc: dict):
    try:
        d = int(doc["d"])
        q_simplicial = "q" in doc
        levels = tuple(
            tuple(_face_from_json(f, q_simplicial) for f in level) for level in doc["levels"]
        )
        covers = tuple(tuple(tuple(int(y) for y in c) for c in level) for level in doc["covers"])
        meta = {k: doc[k] for k in ("q", "n") if k in doc}
        poset = GradedPoset(d, levels, covers, doc.get("family", "custom"), meta)
        pi_d = np.asarray(doc["pi_d"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed poset document: {exc}") from exc
    measure = induce_measure(poset, pi_d / pi_d.sum(), source="file")
    if not measure.has_full_support:
        return restrict_to_support(poset, measure)
    return poset, measure


def load_poset(path):
    with open(path) as fh:
        return poset_from_dict(json.load(fh))
