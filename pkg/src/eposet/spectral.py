"""Eposet parameters, approximate eigenvalues, level-set decompositions and strip reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from math import sqrt

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize_scalar

from .errors import ContainmentViolated, InputError, RankDeficient, StripsOverlap
from .operators import (
    compose_up_matrix,
    down_matrix,
    lower_walk_matrix,
    symmetrize,
    upper_walk_matrix,
    weighted_dot,
    weighted_eigh,
    weighted_op_norm,
)
from .poset import GradedPoset, Measure, non_laziness, regularity_profile
from .walks import HDWalk, PureWalkDescriptor

DEFAULT_SLACK = 10.0
SCHEMA_VERSION = 1


# -- parameters ----------------------------------------------------------------


@dataclass(frozen=True)
class EposetParams:
    """``delta[i-1]`` holds ``delta_i`` for ``i = 1..d-1``; ``delta_0 = 0`` by convention.

    The convention ``delta_0 = 0`` matches ``D_1 U_0 = I`` on the one-point
    level and makes every balanced walk fix constants.
    """

    delta: tuple
    gamma: float = 0.0
    per_level_gamma: tuple = ()
    source: str = "estimated"

    @property
    def d(self) -> int:
        return len(self.delta) + 1

    def delta_at(self, i: int) -> float:
        if i == 0:
            return 0.0
        if not 1 <= i <= len(self.delta):
            raise InputError(f"delta_{i} is not defined (known for 1..{len(self.delta)})")
        return self.delta[i - 1]

    def delta_prod(self, m: int, j: int) -> float:
        """``delta^m_j = prod_{i=m-j}^{m} delta_i``, equal to 1 for ``j < 0``."""
        if j < 0:
            return 1.0
        out = 1.0
        for i in range(m - j, m + 1):
            out *= self.delta_at(i)
        return out

    def gamma_kj(self, k: int, j: int) -> float:
        return self.gamma * sum(self.delta_prod(k, i) for i in range(-1, j))

    def rho(self, k: int, ell: int) -> float:
        out = 1.0
        for i in range(1, k - ell + 1):
            out *= 1.0 - self.delta_prod(k - i, k - ell - i)
        return out

    def rho_min(self, k: int) -> float:
        return min(self.rho(k, ell) for ell in range(k + 1))


def _residual_parts(poset: GradedPoset, measure: Measure, i: int):
    pi = measure.pi[i]
    n = len(pi)
    P = symmetrize(upper_walk_matrix(poset, measure, i), pi) - np.eye(n)
    Q = np.eye(n) - symmetrize(lower_walk_matrix(poset, measure, i), pi)
    return P, Q


def _spec_norm(A: np.ndarray) -> float:
    vals = np.linalg.eigvalsh(A)
    return float(max(abs(vals[0]), abs(vals[-1])))


def params_from_delta(poset: GradedPoset, measure: Measure, delta, source: str = "closed-form") -> EposetParams:
    """Residuals of the given ``delta`` vector on this instance."""
    delta = tuple(float(x) for x in delta)
    if len(delta) != poset.d - 1:
        raise InputError(f"need {poset.d - 1} delta values, got {len(delta)}")
    res = []
    for i, dl in enumerate(delta, start=1):
        P, Q = _residual_parts(poset, measure, i)
        res.append(_spec_norm(P + dl * Q))
    return EposetParams(delta, max(res, default=0.0), tuple(res), source)


def estimate_eposet_params(poset: GradedPoset, measure: Measure, xtol: float = 1e-13) -> EposetParams:
    """Fit ``delta_i`` minimizing ``||D U - (1-delta) I - delta U D||`` level by level.

    The objective is convex in ``delta``; a bounded scalar search over [0, 1]
    is compared with the Frobenius least-squares fit, and the better of the
    two is kept.
    """
    key = ("params", measure)
    if key in poset._cache:
        return poset._cache[key]
    delta, res = [], []
    for i in range(1, poset.d):
        P, Q = _residual_parts(poset, measure, i)
        qq = float(np.vdot(Q, Q))
        d_f = float(np.clip(-np.vdot(P, Q) / qq, 0.0, 1.0)) if qq > 0 else 0.0

        def obj(x):
            return _spec_norm(P + x * Q)

        best_x, best = d_f, obj(d_f)
        if best > 1e-13:
            opt = minimize_scalar(obj, bounds=(0.0, 1.0), method="bounded", options={"xatol": xtol})
            if opt.fun < best:
                best_x, best = float(opt.x), float(opt.fun)
        delta.append(best_x)
        res.append(best)
    params = EposetParams(tuple(delta), max(res, default=0.0), tuple(res), "estimated")
    poset._cache[key] = params
    return params


def dudu_residual(poset: GradedPoset, measure: Measure, params: EposetParams, k: int, j: int) -> float:
    """Norm of ``D_{k+1} U^{k+1}_{k-j} - (1-delta^k_j) U^k_{k-j} - delta^k_j U^k_{k-j-1} D_{k-j}``."""
    if not (0 <= j <= k - 1 and k + 1 <= poset.d):
        raise InputError(f"need 0 <= j < k and k < d, got k={k}, j={j}")
    dkj = params.delta_prod(k, j)
    lhs = down_matrix(poset, measure, k + 1) @ compose_up_matrix(poset, k - j, k + 1)
    rhs = (1 - dkj) * compose_up_matrix(poset, k - j, k) + dkj * (
        compose_up_matrix(poset, k - j - 1, k) @ down_matrix(poset, measure, k - j)
    )
    return weighted_op_norm(lhs - rhs, measure.pi[k], measure.pi[k - j])


# -- approximate eigenvalues -----------------------------------------------------


def approx_eigenvalue_pure(desc: PureWalkDescriptor, params: EposetParams, ell: int) -> float:
    """``prod_s (1 - delta^{m_s}_{m_s - ell})`` with ``m_s = k - 2s + i_s`` over down positions ``i_s``."""
    if not 0 <= ell <= desc.k:
        raise InputError(f"ell={ell} outside [0, {desc.k}]")
    out = 1.0
    for s, i_s in enumerate(desc.down_positions, start=1):
        m = desc.k - 2 * s + i_s
        out *= 1.0 - params.delta_prod(m, m - ell)
    return out


@dataclass
class ApproxSpectrum:
    lambdas: np.ndarray
    radii: np.ndarray
    base: np.ndarray
    slack: float


def approx_eigenvalues_hd(walk: HDWalk, params: EposetParams, slack: float = DEFAULT_SLACK) -> ApproxSpectrum:
    """``lambda_ell = sum_Y alpha_Y lambda_{Y,ell}`` with radii ``slack (h+k) h R(k,ell) w gamma``."""
    k = walk.k
    R = regularity_profile(walk.poset)
    lams = np.array(
        [sum(float(a) * approx_eigenvalue_pure(d, params, ell) for a, d in walk.terms) for ell in range(k + 1)]
    )
    h, w = walk.height, walk.weight
    base = np.array([(h + k) * h * R.R(k, ell) * w * params.gamma for ell in range(k + 1)], dtype=float)
    return ApproxSpectrum(lams, slack * base, base, slack)


def is_monotonic(lams, tol: float = 1e-12) -> bool:
    lams = np.asarray(lams)
    return bool(np.all(np.diff(lams) <= tol))


# -- level-set decomposition --------------------------------------------------------


@dataclass
class Decomposition:
    """``f = f_0 + ... + f_k`` with ``f_i = U^k_i g_i`` and ``D_i g_i = 0``."""

    level: int
    f: np.ndarray
    components: np.ndarray  # shape (k+1, |X(k)|)
    witnesses: list
    residual: float
    kernel_residuals: list

    def component(self, i: int) -> np.ndarray:
        return self.components[i]


class Decomposer:
    """Reusable solver for the level-set decomposition on one level.

    Kernel bases are computed once; ``decompose`` then costs one matrix
    product per function.
    """

    def __init__(self, poset: GradedPoset, measure: Measure, k: int, rcond: float = 1e-10):
        poset.check_level(k)
        self.poset, self.measure, self.k = poset, measure, k
        self.pi = np.asarray(measure.pi[k])
        kernels = [np.ones((1, 1))]
        for i in range(1, k + 1):
            kernels.append(sla.null_space(down_matrix(poset, measure, i), rcond=rcond))
        self.kernels = kernels
        self.blocks = [compose_up_matrix(poset, i, k) @ kernels[i] for i in range(k + 1)]
        self.dims = [K.shape[1] for K in kernels]
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)])
        B = np.hstack(self.blocks)
        W = np.sqrt(self.pi)[:, None] * B
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
        rank = int(np.sum(s > rcond * s[0]))
        if rank < B.shape[1]:
            raise RankDeficient(rank, B.shape[1])
        # weighted least-squares solve: coefficients = pinv(W) diag(sqrt(pi)) f
        self.solver = (Vt.T / s) @ U.T * np.sqrt(self.pi)[None, :]
        self.basis = B

    @property
    def level_dims(self) -> list:
        return list(self.dims)

    def coefficients(self, F: np.ndarray) -> np.ndarray:
        return self.solver @ F

    def decompose_many(self, F: np.ndarray):
        """Components for every column of ``F``: array of shape ``(k+1, |X(k)|, m)``."""
        F = np.asarray(F, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        C = self.coefficients(F)
        comps = np.stack(
            [self.blocks[i] @ C[self.offsets[i] : self.offsets[i + 1]] for i in range(self.k + 1)]
        )
        return comps, C

    def witnesses(self, C: np.ndarray) -> list:
        return [self.kernels[i] @ C[self.offsets[i] : self.offsets[i + 1]] for i in range(self.k + 1)]

    def decompose(self, f) -> Decomposition:
        f = np.asarray(getattr(f, "values", f), dtype=float)
        comps, C = self.decompose_many(f)
        comps = comps[:, :, 0]
        gs = [g[:, 0] for g in self.witnesses(C)]
        resid = float(np.sqrt(weighted_dot(self.pi, comps.sum(0) - f, comps.sum(0) - f)))
        kres = [0.0]
        for i in range(1, self.k + 1):
            Dg = down_matrix(self.poset, self.measure, i) @ gs[i]
            kres.append(float(np.sqrt(weighted_dot(self.measure.pi[i - 1], Dg, Dg))))
        return Decomposition(self.k, f, comps, gs, resid, kres)


def decomposer(poset: GradedPoset, measure: Measure, k: int) -> Decomposer:
    key = ("decomposer", measure, k)
    if key not in poset._cache:
        poset._cache[key] = Decomposer(poset, measure, k)
    return poset._cache[key]


def hd_level_set_decomposition(f, poset: GradedPoset, measure: Measure, k: int | None = None) -> Decomposition:
    k = getattr(f, "level", k)
    if k is None:
        raise InputError("pass a LevelFunction or the level k")
    return decomposer(poset, measure, k).decompose(f)


def level_dimensions(poset: GradedPoset, k: int) -> list:
    """``dim V^ell_k = |X(ell)| - |X(ell-1)|``, with ``dim V^0_k = 1``."""
    sizes = poset.sizes
    return [1] + [sizes[ell] - sizes[ell - 1] for ell in range(1, k + 1)]


# -- eigenstripping -----------------------------------------------------------------


@dataclass
class StripReport:
    walk: str
    lambdas: list
    radii: list
    spectrum: list
    assignment: list
    disjoint: bool
    contained: bool
    counts_expected: list
    counts_found: list
    worst_deviation: list
    needed_slack: float
    slack: float
    tol: float
    st_rank: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @property
    def counts_match(self) -> bool:
        return self.disjoint and self.counts_found == self.counts_expected

    def to_json(self) -> str:
        doc = asdict(self)
        doc["st_rank"] = {f"{eta:.6g}": r for eta, r in self.st_rank.items()}
        return json.dumps(doc, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# schema_version", self.schema_version, "walk", self.walk, "slack", self.slack, "tol", self.tol])
        w.writerow(["strip", "lambda", "radius", "count_expected", "count_found", "worst_deviation"])
        for ell, lam in enumerate(self.lambdas):
            w.writerow([
                ell,
                f"{lam:.15g}",
                f"{self.radii[ell]:.6g}",
                self.counts_expected[ell],
                self.counts_found[ell],
                f"{self.worst_deviation[ell]:.6g}",
            ])
        return buf.getvalue()


def strip_report(
    name: str,
    eigenvalues,
    lambdas,
    base,
    dims,
    slack: float = DEFAULT_SLACK,
    tol: float = 1e-9,
    etas=None,
) -> StripReport:
    """Compare a spectrum with approximate eigenvalues and radii ``slack * base + tol``."""
    mu = np.sort(np.asarray(eigenvalues, dtype=float))[::-1]
    lam = np.asarray(lambdas, dtype=float)
    base = np.asarray(base, dtype=float)
    rad = slack * base + tol
    n = len(lam)
    disjoint = all(
        abs(lam[a] - lam[b]) > rad[a] + rad[b] for a in range(n) for b in range(a + 1, n)
    )
    dev = np.abs(mu[:, None] - lam[None, :])
    inside = dev <= rad[None, :]
    contained = bool(inside.any(axis=1).all())
    # assignment: the containing strip with the closest centre, else the closest centre
    masked = np.where(inside, dev, np.inf)
    assign = np.where(inside.any(axis=1), masked.argmin(axis=1), dev.argmin(axis=1))
    counts = [int(np.sum(assign == ell)) for ell in range(n)]
    worst = [float(dev[assign == ell, ell].max()) if counts[ell] else 0.0 for ell in range(n)]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(base[None, :] > 0, np.maximum(dev - tol, 0) / base[None, :], np.where(dev <= tol, 0.0, np.inf))
    needed = float(ratio.min(axis=1).max()) if len(mu) else 0.0
    etas = list(etas) if etas is not None else [0.5, 0.25, 0.1, 0.05, 0.01]
    st = {float(eta): int(len({int(a) for a, m in zip(assign, mu) if m > eta})) for eta in etas}
    return StripReport(
        name,
        lam.tolist(),
        rad.tolist(),
        mu.tolist(),
        assign.tolist(),
        bool(disjoint),
        contained,
        list(dims),
        counts,
        worst,
        needed,
        slack,
        tol,
        st,
    )


def verify_eigenstripping(
    walk: HDWalk,
    params: EposetParams,
    slack: float = DEFAULT_SLACK,
    tol: float = 1e-9,
    etas=None,
    strict: bool = False,
) -> StripReport:
    """Check that the spectrum of ``walk`` sits in the strips ``lambda_ell +- c_ell``.

    With ``strict=True`` overlapping strips raise StripsOverlap and an
    uncovered eigenvalue raises ContainmentViolated.
    """
    approx = approx_eigenvalues_hd(walk, params, slack)
    report = strip_report(
        walk.name,
        walk.eigenvalues(),
        approx.lambdas,
        approx.base,
        level_dimensions(walk.poset, walk.k),
        slack,
        tol,
        etas,
    )
    if strict:
        if not report.disjoint:
            raise StripsOverlap(f"{walk.name}: strips overlap at slack {slack}")
        if not report.contained:
            dev = np.abs(np.array(report.spectrum)[:, None] - np.array(report.lambdas)[None, :])
            worst = int(np.argmax(dev.min(axis=1)))
            raise ContainmentViolated(report.spectrum[worst], report.needed_slack)
    return report


def strip_component_angles(walk: HDWalk, params: EposetParams, slack: float = DEFAULT_SLACK) -> list:
    """Largest principal angle between each strip's eigenspace and ``V^ell``.

    Reported only; no bound on these angles is asserted anywhere.
    """
    pi = np.asarray(walk.measure.pi[walk.k])
    dec = decomposer(walk.poset, walk.measure, walk.k)
    vals, vecs = weighted_eigh(walk.matrix, pi)
    lam = approx_eigenvalues_hd(walk, params, slack).lambdas
    assign = np.abs(vals[:, None] - lam[None, :]).argmin(axis=1)
    s = np.sqrt(pi)[:, None]
    out = []
    for ell in range(walk.k + 1):
        eig = vecs[:, assign == ell]
        if eig.shape[1] == 0:
            out.append(float("nan"))
            continue
        out.append(float(np.max(sla.subspace_angles(s * dec.blocks[ell], s * eig))))
    return out


# -- regularity versus spectrum ---------------------------------------------------------


def verify_regularity_spectrum(
    poset: GradedPoset,
    measure: Measure,
    params: EposetParams,
    k: int,
    i: int,
    slack: float = DEFAULT_SLACK,
) -> dict:
    """Gaps between approximate eigenvalues and regularity ratios.

    Rows compare ``lambda_j`` of the lower canonical walk through level ``i``
    with ``R(i,j)/R(k,j)``, ``lambda_i`` of the upper walk through ``k+1``
    with ``R(k,i)/R(k+1,i)`` and ``rho^k_i`` with ``1/R(k,i)``.  Each gap is
    compared with ``slack * beta``.
    """
    if not 0 <= i <= k <= poset.d:
        raise InputError(f"need 0 <= i <= k <= d, got i={i}, k={k}")
    R = regularity_profile(poset)
    beta = non_laziness(poset, measure).beta
    bound = slack * beta
    lower = []
    desc = PureWalkDescriptor.canonical_down(k, k - i)
    for j in range(k + 1):
        lam = approx_eigenvalue_pure(desc, params, j)
        target = R.R(i, j) / R.R(k, j)
        lower.append({"j": j, "lambda": lam, "target": target, "gap": abs(lam - target)})
    upper = None
    if k + 1 <= poset.d and k <= params.d - 1:
        lam = approx_eigenvalue_pure(PureWalkDescriptor.canonical_up(k, 1), params, i)
        target = R.R(k, i) / R.R(k + 1, i)
        upper = {"lambda": lam, "target": target, "gap": abs(lam - target)}
    rho = params.rho(k, i)
    rho_row = {"rho": rho, "target": 1.0 / R.R(k, i), "gap": abs(rho - 1.0 / R.R(k, i))}
    return {
        "k": k,
        "i": i,
        "beta": beta,
        "slack": slack,
        "bound": bound,
        "lower": lower,
        "upper": upper,
        "rho": rho_row,
        "lower_ok": all(r["gap"] <= bound for r in lower),
        "upper_ok": upper is None or upper["gap"] <= bound,
        "rho_ok": rho_row["gap"] <= bound,
    }


def decay_profile(params: EposetParams, R, k: int) -> list:
    """``lambda_i`` of the one-step lower walk on level ``k`` next to ``R(k-1,i)/R(k,i)``."""
    desc = PureWalkDescriptor.canonical_down(k, 1)
    rows = []
    for i in range(k + 1):
        lam = approx_eigenvalue_pure(desc, params, i)
        ratio = R(k - 1, i) / R(k, i)
        rows.append({"i": i, "lambda": lam, "ratio": ratio, "gap": abs(lam - ratio)})
    return rows


# -- norm bookkeeping ---------------------------------------------------------------


def norm_sum_check(dec: Decomposition, measure: Measure, params: EposetParams, slack: float = DEFAULT_SLACK, tol: float = 1e-9) -> dict:
    """Norm-sum, norm-ratio and cross-term checks for one decomposition."""
    k = dec.level
    pi = np.asarray(measure.pi[k])
    f_norm = sqrt(max(weighted_dot(pi, dec.f, dec.f), 0.0))
    norms = [sqrt(max(weighted_dot(pi, c, c), 0.0)) for c in dec.components]
    sum_bound = slack * sqrt(max(k, 1)) * f_norm
    ratios = []
    for ell in range(k + 1):
        g = dec.witnesses[ell]
        gg = float(weighted_dot(np.asarray(measure.pi[ell]), g, g))
        ff = norms[ell] ** 2
        rho = params.rho(k, ell)
        ratio = ff / gg if gg > 0 else float("nan")
        ratios.append({
            "ell": ell,
            "ratio": ratio,
            "rho": rho,
            "gap": abs(ratio - rho) if gg > 0 else 0.0,
            "allowed": k * k * params.gamma * slack + tol,
        })
    rho_min = params.rho_min(k)
    cross = []
    for a in range(k + 1):
        for b in range(a + 1, k + 1):
            val = float(weighted_dot(pi, dec.components[a], dec.components[b]))
            allowed = slack * (k * k / rho_min) * params.gamma * norms[a] * norms[b] + tol
            cross.append({"pair": (a, b), "value": val, "allowed": allowed})
    return {
        "sum_norms": float(sum(norms)),
        "sum_bound": sum_bound,
        "sum_ok": sum(norms) <= sum_bound + tol,
        "ratios": ratios,
        "ratios_ok": all(r["gap"] <= r["allowed"] for r in ratios),
        "cross": cross,
        "cross_ok": all(abs(c["value"]) <= c["allowed"] for c in cross),
    }
