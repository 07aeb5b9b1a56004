"""Edge expansion, links, co-links, pseudorandomness and level-i inequalities."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import EmptySet, InputError, NoLocalConstantSign, ZeroMean
from .operators import compose_down_matrix, lower_walk_matrix, weighted_dot
from .poset import GradedPoset, Measure, non_laziness, regularity_profile
from .qfamilies import (
    colink_density,
    colink_return_probability,
    gaussian_binomial,
    rref,
)
from .spectral import (
    DEFAULT_SLACK,
    SCHEMA_VERSION,
    EposetParams,
    approx_eigenvalues_hd,
    decomposer,
    level_dimensions,
    strip_report,
)
from .walks import HDWalk


@dataclass(frozen=True)
class FaceSet:
    level: int
    ids: np.ndarray
    indicator: np.ndarray
    density: float

    def __len__(self):
        return len(self.ids)


def face_set(poset: GradedPoset, measure: Measure, k: int, ids) -> FaceSet:
    poset.check_level(k)
    ids = np.unique(np.asarray(list(ids), dtype=np.int64))
    n = len(poset.levels[k])
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise InputError(f"ids outside level {k} (size {n})")
    ind = np.zeros(n)
    ind[ids] = 1.0
    return FaceSet(k, ids, ind, float(np.dot(measure.pi[k], ind)))


def random_face_set(poset: GradedPoset, measure: Measure, k: int, density: float, rng) -> FaceSet:
    """Uniformly random set with ``max(1, round(density * |X(k)|))`` elements."""
    n = len(poset.levels[k])
    size = min(n, max(1, int(round(density * n))))
    return face_set(poset, measure, k, rng.choice(n, size=size, replace=False))


def edge_expansion(walk: HDWalk, S: FaceSet, form: str = "spectral") -> float:
    """``Phi(S) = 1 - <1_S, M 1_S> / <1_S, 1_S>``, or the row-sum form
    ``E_{v ~ pi|_S} M(v, X(k) minus S)`` with ``form="rowsum"``."""
    if S.level != walk.k:
        raise InputError(f"set lives on level {S.level}, walk on level {walk.k}")
    if S.density <= 0:
        raise EmptySet("expansion of an empty set")
    pi = np.asarray(walk.measure.pi[walk.k])
    f = S.indicator
    if form == "spectral":
        return float(1.0 - weighted_dot(pi, f, walk.matrix @ f) / S.density)
    if form == "rowsum":
        out_mass = walk.matrix[S.ids][:, f == 0].sum(axis=1)
        return float(np.dot(pi[S.ids], out_mass) / S.density)
    raise ValueError(f"unknown form {form!r}")


def link(poset: GradedPoset, measure: Measure, i: int, tau: int, k: int) -> FaceSet:
    """All elements of X(k) above element ``tau`` of X(i)."""
    poset.check_level(i, 0, k)
    col = poset.containment(k, i)[:, tau]
    return face_set(poset, measure, k, col.nonzero()[0])


def _span_basis(W, q: int):
    W = rref(W, q)
    if not W:
        raise InputError("co-link of the zero subspace")
    return W


def colink(poset: GradedPoset, measure: Measure, W, k: int) -> FaceSet:
    """All level-k subspaces contained in the span of the rows of ``W``."""
    if not poset.is_q_simplicial:
        raise InputError("co-links need a q-simplicial poset")
    q = poset.q
    W = _span_basis(W, q)
    if k > len(W):
        raise InputError(f"level {k} exceeds dim W = {len(W)}")
    ids = [x for x, V in enumerate(poset.levels[k]) if len(rref(list(W) + list(V), q)) == len(W)]
    return face_set(poset, measure, k, ids)


# -- pseudorandomness ---------------------------------------------------------------


@dataclass
class PseudorandomnessProfile:
    mean: float
    eps_l2: list
    eps_linf: list
    local_constant_sign: list


def local_means(poset: GradedPoset, measure: Measure, f: np.ndarray, k: int, i: int) -> np.ndarray:
    """``D^k_i f``: the average of ``f`` over each i-link."""
    return compose_down_matrix(poset, measure, k, i) @ f


def has_local_constant_sign(poset, measure, f, k, i, tol: float = 1e-14) -> bool:
    mean = float(np.dot(measure.pi[k], f))
    if abs(mean) <= tol:
        return False
    loc = local_means(poset, measure, f, k, i)
    nz = np.abs(loc) > tol
    return bool(np.all(np.sign(loc[nz]) == np.sign(mean)))


def pseudorandomness(poset: GradedPoset, measure: Measure, f, k: int, ell: int) -> PseudorandomnessProfile:
    """Tightest ``eps_i`` for ``i = 0..ell``: variance and sup forms of the local means."""
    f = np.asarray(getattr(f, "indicator", f), dtype=float)
    mean = float(np.dot(measure.pi[k], f))
    if mean == 0:
        raise ZeroMean("E[f] = 0 leaves the variance form undefined")
    l2, linf, sign = [], [], []
    for i in range(ell + 1):
        loc = local_means(poset, measure, f, k, i)
        var = float(weighted_dot(np.asarray(measure.pi[i]), loc - mean, loc - mean))
        l2.append(max(var, 0.0) / abs(mean))
        linf.append(float(np.abs(loc - mean).max()))
        sign.append(has_local_constant_sign(poset, measure, f, k, i))
    return PseudorandomnessProfile(mean, l2, linf, sign)


def variance_of_local_means(poset, measure, f, k, i) -> float:
    mean = float(np.dot(measure.pi[k], f))
    loc = local_means(poset, measure, f, k, i)
    return float(weighted_dot(np.asarray(measure.pi[i]), loc, loc)) - mean**2


def reduction_linf_to_l2(poset: GradedPoset, measure: Measure, f, k: int, i: int) -> dict:
    """For ``f`` with i-local constant sign, ``|Var(D^k_i f) / E f| <= ||D^k_i f - E f||_inf``."""
    f = np.asarray(getattr(f, "indicator", f), dtype=float)
    if not has_local_constant_sign(poset, measure, f, k, i):
        raise NoLocalConstantSign(f"f has no {i}-local constant sign")
    mean = float(np.dot(measure.pi[k], f))
    lhs = abs(variance_of_local_means(poset, measure, f, k, i) / mean)
    rhs = float(np.abs(local_means(poset, measure, f, k, i) - mean).max())
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs + 1e-12}


def shift_to_constant_sign(poset: GradedPoset, measure: Measure, f, k: int, i: int) -> np.ndarray:
    """``f + (eps_i - E f) 1`` (or its mirror when ``E f < 0``), eps_i the sup-deviation."""
    f = np.asarray(f, dtype=float)
    mean = float(np.dot(measure.pi[k], f))
    eps = float(np.abs(local_means(poset, measure, f, k, i) - mean).max())
    sign = 1.0 if mean >= 0 else -1.0
    return f + (sign * eps - mean)


# -- level-i inequalities --------------------------------------------------------------


def level_projection(poset: GradedPoset, measure: Measure, f, k: int) -> np.ndarray:
    """``<f, f_i>`` for ``i = 0..k`` from the level-set decomposition of ``f``."""
    f = np.asarray(getattr(f, "indicator", f), dtype=float)
    comps, _ = decomposer(poset, measure, k).decompose_many(f)
    return weighted_dot(np.asarray(measure.pi[k]), f, comps[:, :, 0].T)


def level_i_check(
    poset: GradedPoset,
    measure: Measure,
    f,
    k: int,
    ell: int,
    params: EposetParams,
    slack: float = DEFAULT_SLACK,
) -> list:
    """Level-i bounds for ``i = 1..ell`` in every available form.

    ``l2``: ``R(k,i) eps2 |E f| + slack gamma ||f||^2``.
    ``l2_exact``: ``eps2 |E f| / rho^k_i + slack gamma ||f||^2``.
    ``linf``: ``(R(k,i) + slack gamma) epsinf |E f| + slack gamma ||f||^2``
    (meaningful when ``f`` has i-local constant sign; the flag is reported).
    ``linf_general``: ``(R(k,i) + slack gamma) epsinf^2 + slack gamma ||f||^2``.
    """
    f = np.asarray(getattr(f, "indicator", f), dtype=float)
    R = regularity_profile(poset)
    prof = pseudorandomness(poset, measure, f, k, ell)
    proj = level_projection(poset, measure, f, k)
    pi = np.asarray(measure.pi[k])
    ff = float(weighted_dot(pi, f, f))
    g = params.gamma * slack
    E = abs(prof.mean)
    rows = []
    for i in range(1, ell + 1):
        r = R.R(k, i)
        e2, ei = prof.eps_l2[i], prof.eps_linf[i]
        bounds = {
            "l2": r * e2 * E + g * ff,
            "l2_exact": e2 * E / params.rho(k, i) + g * ff,
            "linf": (r + g) * ei * E + g * ff,
            "linf_general": (r + g) * ei**2 + g * ff,
        }
        rows.append({
            "i": i,
            "projection": float(proj[i]),
            "R": r,
            "eps_l2": e2,
            "eps_linf": ei,
            "local_constant_sign": prof.local_constant_sign[i],
            "bounds": bounds,
            "holds": {name: abs(proj[i]) <= b for name, b in bounds.items()},
        })
    return rows


# -- links and expansion ----------------------------------------------------------------


def link_expansion_check(
    walk: HDWalk,
    params: EposetParams,
    i: int,
    tau: int,
    slack: float = DEFAULT_SLACK,
) -> dict:
    """``Phi(X_tau)`` against ``1 - lambda_i(M)`` for an i-link, plus its level masses."""
    poset, measure, k = walk.poset, walk.measure, walk.k
    S = link(poset, measure, i, tau, k)
    phi = edge_expansion(walk, S)
    lam = approx_eigenvalues_hd(walk, params, slack).lambdas
    beta = non_laziness(poset, measure).beta
    proj = level_projection(poset, measure, S.indicator, k)
    mass = [abs(float(p)) / S.density for p in proj]
    return {
        "i": i,
        "tau": tau,
        "phi": phi,
        "target": 1.0 - lam[i],
        "gap": abs(phi - (1.0 - lam[i])),
        "beta": beta,
        "allowed": slack * beta,
        "ok": abs(phi - (1.0 - lam[i])) <= slack * beta,
        "level_mass": mass,
        "off_level_mass": float(sum(m for j, m in enumerate(mass) if j != i)),
    }


def st_rank(walk: HDWalk, params: EposetParams, eta: float, slack: float = DEFAULT_SLACK) -> int:
    approx = approx_eigenvalues_hd(walk, params, slack)
    rep = strip_report(
        walk.name, walk.eigenvalues(), approx.lambdas, approx.base, level_dimensions(walk.poset, walk.k), slack, etas=[eta]
    )
    return rep.st_rank[float(eta)]


def expansion_lower_bound(
    walk: HDWalk,
    S: FaceSet,
    eta: float,
    params: EposetParams,
    profile: PseudorandomnessProfile | None = None,
    slack: float = DEFAULT_SLACK,
    eps_kind: str = "linf",
    lambdas=None,
    r: int | None = None,
) -> dict:
    """``1 - a - (1-a) eta - sum_{i<=r} (lambda_i - eta) R(k,i) eps_i - slack gamma``.

    ``r = R_eta(M) - 1`` unless given.  ``lambdas`` defaults to the walk's
    approximate eigenvalues for ``params``.  ``slack_needed`` is the least
    multiple of ``gamma`` that makes the bound hold (0 when it holds outright).
    """
    poset, measure, k = walk.poset, walk.measure, walk.k
    R = regularity_profile(poset)
    if r is None:
        r = st_rank(walk, params, eta, slack) - 1
    lam = approx_eigenvalues_hd(walk, params, slack).lambdas if lambdas is None else np.asarray(lambdas)
    if profile is None:
        profile = pseudorandomness(poset, measure, S.indicator, k, max(r, 0))
    eps = profile.eps_linf if eps_kind == "linf" else profile.eps_l2
    a = S.density
    core = 1 - a - (1 - a) * eta - sum((lam[i] - eta) * R.R(k, i) * eps[i] for i in range(1, r + 1))
    bound = core - slack * params.gamma
    actual = edge_expansion(walk, S)
    if core <= actual:
        needed = 0.0
    elif params.gamma > 0:
        needed = (core - actual) / params.gamma
    else:
        needed = float("inf")
    return {"bound": float(bound), "core": float(core), "actual": actual, "r": r, "eta": eta, "slack_needed": needed}


def q_expansion_bound(q: int, k: int, j: int, ell: int, density: float, eps) -> float:
    """``1 - E[1_S] - sum_{i=1}^{ell} (k-j choose i)_q eps_i - q^{-(ell+1) j}``."""
    return float(
        1 - density - sum(gaussian_binomial(k - j, i, q) * eps[i] for i in range(1, ell + 1)) - q ** (-(ell + 1) * j)
    )


def colink_tightness(poset: GradedPoset, measure: Measure, W, k: int, i: int, c: float = 0.6) -> dict:
    """Co-link of a codimension-i subspace: level masses, return probability and the tightness flag."""
    if not poset.is_q_simplicial:
        raise InputError("co-links need a q-simplicial poset")
    q, n = poset.q, poset.meta["n"]
    W = _span_basis(W, q)
    if len(W) != n - i:
        raise InputError(f"W must have dimension n - i = {n - i}, got {len(W)}")
    S = colink(poset, measure, W, k)
    pi = np.asarray(measure.pi[k])
    proj = level_projection(poset, measure, S.indicator, k)
    ratio = float(proj[i] / S.density)
    alpha_i = colink_density(q, n, i, i, k)
    bound = gaussian_binomial(k, i, q) * alpha_i
    walk = lower_walk_matrix(poset, measure, k)
    ret = float(weighted_dot(pi, S.indicator, walk @ S.indicator) / S.density)
    closed = colink_return_probability(q, n, i, k)
    prof = pseudorandomness(poset, measure, S.indicator, k, i)
    return {
        "q": q,
        "n": n,
        "k": k,
        "i": i,
        "c": c,
        "size": len(S),
        "density": S.density,
        "density_formula": colink_density(q, n, i, 0, k),
        "projections": [float(p) for p in proj],
        "beyond_level_i": float(np.abs(proj[i + 1 :]).max()) if i < k else 0.0,
        "ratio": ratio,
        "alpha_i": alpha_i,
        "eps_linf_i": prof.eps_linf[i],
        "bound": bound,
        "tight": ratio > c * bound,
        "within": c * bound < ratio <= bound + 1e-12,
        "return_probability": ret,
        "return_closed_form": closed,
        "return_error": abs(ret - closed),
    }


def expansion_csv(rows) -> str:
    """CSV with one line per (set, level)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# schema_version", SCHEMA_VERSION])
    w.writerow(["set_id", "level", "density", "eps_l2", "eps_linf", "projection", "phi", "bound", "slack_needed"])
    for row in rows:
        w.writerow([row.get(key, "") for key in ("set_id", "level", "density", "eps_l2", "eps_linf", "projection", "phi", "bound", "slack_needed")])
    return buf.getvalue()
