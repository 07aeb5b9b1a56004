"""Command line entry point: ``eposet build`` and ``eposet verify``.

Exit codes: 0 when every hard assertion passes, 1 when one fails, 2 for
input or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import expansion as ex
from . import qfamilies as qf
from . import spectral as spc
from .errors import EposetError, InputError, NotAffine, NotDownwardRegular, NotMiddleRegular
from .poset import load_poset, non_laziness, regularity_profile, save_poset
from .walks import walk_from_string, walk_terms_from_string

SUITES = ("spectra", "strips", "expansion", "colink", "regularity")


def _add_family_args(p: argparse.ArgumentParser):
    p.add_argument("--family", choices=["grassmann", "complete"], help="poset family to build")
    p.add_argument("--q", type=int, default=2, help="field size (grassmann)")
    p.add_argument("--n", type=int, help="ground set size or ambient dimension")
    p.add_argument("--d", type=int, help="top rank")
    p.add_argument("--rho", type=float, default=0.0, help="top-weight perturbation in [0, 1)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eposet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a poset family and write it as JSON")
    _add_family_args(b)
    b.add_argument("--out", required=True, help="output JSON file")

    v = sub.add_parser("verify", help="run verification suites")
    _add_family_args(v)
    v.add_argument("--poset", help="JSON poset file (instead of --family)")
    v.add_argument("--walk", action="append", default=[], help="walk descriptor, repeatable")
    v.add_argument("--suite", default="all", choices=SUITES + ("all",))
    v.add_argument("--slack", type=float, default=spc.DEFAULT_SLACK)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--out", default="reports", help="output directory")
    v.add_argument("--format", default="csv", choices=["csv", "json"])
    v.add_argument("--sets", type=int, default=20, help="random sets per density (expansion suite)")
    return parser


def _family(args):
    if args.family is None:
        raise InputError("--family (or --poset) is required")
    if args.n is None or args.d is None:
        raise InputError("--n and --d are required")
    if args.family == "grassmann":
        poset, measure = qf.grassmann_poset(args.q, args.n, args.d)
    else:
        poset, measure = qf.complete_complex(args.n, args.d)
    if args.rho:
        measure = qf.perturbed_measure(poset, measure, args.rho, args.seed)
    return poset, measure


def _instance(args):
    if getattr(args, "poset", None):
        return load_poset(args.poset)
    return _family(args)


def cmd_build(args, out=None) -> int:
    out = out or sys.stdout
    poset, measure = _family(args)
    prof = regularity_profile(poset)
    save_poset(args.out, poset, measure)
    print(f"wrote {args.out}", file=out)
    print("level sizes: " + ", ".join(str(s) for s in poset.sizes), file=out)
    print("R(k,i):", file=out)
    for k in range(poset.d + 1):
        print(f"  k={k}: " + " ".join(str(prof.R(k, i)) for i in range(k + 1)), file=out)
    return 0


# -- verify --------------------------------------------------------------------------


class Run:
    """Collects report files and hard-assertion outcomes."""

    def __init__(self, args):
        self.args = args
        self.failures = []
        self.files = {}
        self.header = {
            "schema_version": spc.SCHEMA_VERSION,
            "slack": args.slack,
            "tol": args.tol,
            "seed": args.seed,
        }

    def check(self, ok: bool, message: str):
        if not ok:
            self.failures.append(message)

    def table(self, name: str, columns: list, rows: list):
        self.files[name] = (columns, rows)

    def write(self, out_dir: Path):
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, (columns, rows) in sorted(self.files.items()):
            if self.args.format == "json":
                doc = dict(self.header, columns=columns, rows=[dict(zip(columns, r)) for r in rows])
                text = json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"
                (out_dir / f"{name}.json").write_text(text)
            else:
                buf = io.StringIO()
                w = csv.writer(buf, lineterminator="\n")
                w.writerow(["# " + " ".join(f"{k}={v}" for k, v in self.header.items())])
                w.writerow(columns)
                for r in rows:
                    w.writerow([_fmt(x) for x in r])
                (out_dir / f"{name}.csv").write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return x


def _params(poset, measure, args):
    if poset.family == "grassmann" and not args.rho and poset.d >= 2:
        n = poset.meta["n"]
        delta = [qf.grassmann_delta(i, n, poset.q) for i in range(1, poset.d)]
        return spc.params_from_delta(poset, measure, delta, source="grassmann closed form")
    return spc.estimate_eposet_params(poset, measure)


def _default_walks(poset) -> list:
    d = poset.d
    walks = [f"Nd:k={d},j=1"]
    if d >= 2:
        walks.insert(0, f"N:k={d - 1},j=1")
        if poset.is_q_simplicial:
            walks.append(f"S:k={d - 1},j=1")
    return walks


def _grassmann_closed_form(poset, measure, text):
    """Exact finite-n eigenvalues for canonical and swap walks on a uniform full Grassmann."""
    if poset.family != "grassmann" or measure.source != "uniform":
        return None
    kind, k, terms = walk_terms_from_string(text, poset.q)
    q, n = poset.q, poset.meta["n"]
    j = max(d.height for _, d in terms)
    forms = {
        "N": qf.grassmann_upper_eigenvalue,
        "Nd": qf.grassmann_lower_eigenvalue,
        "UD": qf.grassmann_lower_eigenvalue,
        "S": qf.grassmann_swap_eigenvalue,
    }
    if kind not in forms:
        return None
    return [forms[kind](q, n, k, j, ell) for ell in range(k + 1)]


def suite_spectra(run: Run, poset, measure, params, walks):
    rows = []
    for text in walks:
        w = walk_from_string(poset, measure, text)
        rep = spc.verify_eigenstripping(w, params, run.args.slack, run.args.tol)
        run.check(w.stochastic and w.self_adjoint, f"{text}: not a valid walk")
        run.check(rep.contained, f"{text}: spectrum leaves the strips (needs slack {rep.needed_slack:.3g})")
        if rep.disjoint:
            run.check(rep.counts_match, f"{text}: strip counts {rep.counts_found} != {rep.counts_expected}")
        closed = _grassmann_closed_form(poset, measure, text)
        if closed is not None:
            exact = spc.strip_report(text, rep.spectrum, closed, [0.0] * len(closed), rep.counts_expected, tol=run.args.tol)
            run.check(exact.contained, f"{text}: spectrum differs from the closed form")
            if exact.disjoint:
                run.check(exact.counts_match, f"{text}: closed-form multiplicities {exact.counts_found}")
        for ell, lam in enumerate(rep.lambdas):
            rows.append([
                text, ell, lam, "" if closed is None else closed[ell], rep.radii[ell],
                rep.counts_expected[ell], rep.counts_found[ell], rep.worst_deviation[ell],
            ])
    run.table("spectra", ["walk", "strip", "lambda", "closed_form", "radius", "count_expected", "count_found", "worst_deviation"], rows)
    _decay_table(run, poset, params)


def suite_strips(run: Run, poset, measure, params, walks):
    rows, st_rows = [], []
    etas = [0.5, 0.25, 0.1, 0.05, 0.01]
    for text in walks:
        w = walk_from_string(poset, measure, text)
        rep = spc.verify_eigenstripping(w, params, run.args.slack, run.args.tol, etas=etas)
        run.check(rep.contained, f"{text}: spectrum leaves the strips (needs slack {rep.needed_slack:.3g})")
        if rep.disjoint:
            run.check(rep.counts_match, f"{text}: strip counts {rep.counts_found} != {rep.counts_expected}")
        for ell, lam in enumerate(rep.lambdas):
            rows.append([
                text, ell, lam, rep.radii[ell], rep.counts_expected[ell], rep.counts_found[ell],
                rep.worst_deviation[ell], rep.disjoint, rep.needed_slack, params.gamma,
            ])
        for eta, r in rep.st_rank.items():
            st_rows.append([text, eta, r])
    run.table("strips", ["walk", "strip", "lambda", "radius", "count_expected", "count_found", "worst_deviation", "disjoint", "needed_slack", "gamma"], rows)
    run.table("st_rank", ["walk", "eta", "st_rank"], st_rows)


def _decay_table(run: Run, poset, params):
    R = regularity_profile(poset).R
    rows = []
    ideal = None
    if poset.is_q_simplicial:
        ideal = spc.EposetParams(tuple(qf.qeposet_delta(i, poset.q) for i in range(1, poset.d)), 0.0, (), "q-eposet")
    else:
        ideal = spc.EposetParams(tuple(qf.simplicial_limit_delta(i) for i in range(1, poset.d)), 0.0, (), "simplicial limit")
    for k in range(1, poset.d + 1):
        inst = spc.decay_profile(params, R, k)
        idl = spc.decay_profile(ideal, R, k)
        for a, b in zip(inst, idl):
            rows.append([k, a["i"], a["lambda"], b["lambda"], a["ratio"], a["gap"], b["gap"]])
    run.table("decay_profile", ["k", "i", "lambda_instance", "lambda_idealized", "R_ratio", "gap_instance", "gap_idealized"], rows)


def suite_regularity(run: Run, poset, measure, params, walks):
    rows = []
    for k in range(1, poset.d + 1):
        for i in range(k + 1):
            rep = spc.verify_regularity_spectrum(poset, measure, params, k, i, run.args.slack)
            run.check(rep["lower_ok"] and rep["upper_ok"], f"regularity gap above slack*beta at k={k}, i={i}")
            upper_gap = rep["upper"]["gap"] if rep["upper"] else ""
            max_lower = max(r["gap"] for r in rep["lower"])
            rows.append([k, i, max_lower, upper_gap, rep["rho"]["rho"], rep["rho"]["target"], rep["rho"]["gap"], rep["beta"], rep["bound"]])
    run.table("regularity", ["k", "i", "lower_gap_max", "upper_gap", "rho", "inv_R", "rho_gap", "beta", "bound"], rows)
    _decay_table(run, poset, params)


def suite_expansion(run: Run, poset, measure, params, walks):
    rng = np.random.default_rng(run.args.seed)
    rows, link_rows = [], []
    exact = params.gamma <= 1e-10
    for text in walks:
        w = walk_from_string(poset, measure, text)
        if not (w.stochastic and w.self_adjoint):
            run.check(False, f"{text}: not a valid walk")
            continue
        k = w.k
        r = ex.st_rank(w, params, 0.1, run.args.slack) - 1
        set_id = 0
        for density in (0.1, 0.5):
            for _ in range(run.args.sets):
                S = ex.random_face_set(poset, measure, k, density, rng)
                ell = min(k, max(r, 2))
                prof = ex.pseudorandomness(poset, measure, S, k, ell)
                levels = ex.level_i_check(poset, measure, S, k, ell, params, run.args.slack)
                bound = ex.expansion_lower_bound(w, S, 0.1, params, prof, run.args.slack, r=r)
                run.check(bound["bound"] <= bound["actual"] + run.args.tol, f"{text}: expansion bound fails on set {set_id}")
                for row in levels:
                    if exact:
                        run.check(row["holds"]["linf"], f"{text}: level-{row['i']} inequality fails on set {set_id}")
                    rows.append([text, set_id, row["i"], S.density, row["eps_l2"], row["eps_linf"], row["projection"], bound["actual"], bound["bound"], bound["slack_needed"]])
                set_id += 1
        for i in range(min(k, 2) + 1):
            for tau in range(min(len(poset.levels[i]), 5)):
                rep = ex.link_expansion_check(w, params, i, tau, run.args.slack)
                run.check(rep["ok"], f"{text}: link expansion gap at i={i}, tau={tau}")
                link_rows.append([text, i, tau, rep["phi"], rep["target"], rep["gap"], rep["allowed"], rep["off_level_mass"]])
    run.table("expansion", ["walk", "set_id", "level", "density", "eps_l2", "eps_linf", "projection", "phi", "bound", "slack_needed"], rows)
    run.table("links", ["walk", "i", "tau", "phi", "one_minus_lambda", "gap", "allowed", "off_level_mass"], link_rows)


def suite_colink(run: Run, poset, measure, params, walks):
    if not poset.is_q_simplicial:
        raise InputError("the colink suite needs a q-simplicial poset")
    n = poset.meta.get("n")
    if n is None:
        raise InputError("the colink suite needs the ambient dimension n")
    rows = []
    for k in range(1, poset.d + 1):
        for i in range(1, min(k, n - k) + 1):
            W = [[1 if c == r else 0 for c in range(n)] for r in range(n - i)]
            rep = ex.colink_tightness(poset, measure, W, k, i)
            run.check(rep["beyond_level_i"] <= 1e-9, f"co-link k={k}, i={i} has mass beyond level {i}")
            run.check(rep["return_error"] <= 1e-10, f"co-link k={k}, i={i} return probability mismatch")
            rows.append([
                k, i, rep["size"], rep["density"], rep["ratio"], rep["alpha_i"], rep["bound"], rep["c"],
                rep["tight"], rep["within"], rep["beyond_level_i"], rep["return_probability"], rep["return_closed_form"],
            ])
    run.table("colink", ["k", "i", "size", "density", "ratio", "alpha_i", "bound", "c", "tight", "within", "beyond_level_i", "return_probability", "return_closed_form"], rows)


SUITE_FUNCS = {
    "spectra": suite_spectra,
    "strips": suite_strips,
    "expansion": suite_expansion,
    "colink": suite_colink,
    "regularity": suite_regularity,
}


def cmd_verify(args, out=None) -> int:
    out = out or sys.stdout
    poset, measure = _instance(args)
    params = _params(poset, measure, args)
    walks = args.walk or _default_walks(poset)
    run = Run(args)
    run.header.update({"family": poset.family, "sizes": "/".join(map(str, poset.sizes)), "gamma": f"{params.gamma:.3e}"})
    run.header["beta"] = f"{non_laziness(poset, measure).beta:.6g}"
    suites = SUITES if args.suite == "all" else (args.suite,)
    for name in suites:
        if name == "colink" and args.suite == "all" and not poset.is_q_simplicial:
            continue
        SUITE_FUNCS[name](run, poset, measure, params, walks)
    run.write(Path(args.out))
    for msg in run.failures:
        print(f"FAIL {msg}", file=out)
    print(f"{len(run.files)} report(s) in {args.out}; {len(run.failures)} failure(s)", file=out)
    return 1 if run.failures else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "build":
            return cmd_build(args)
        return cmd_verify(args)
    except (InputError, NotDownwardRegular, NotMiddleRegular, NotAffine) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except EposetError as exc:
        # a hard property of the instance failed while building a report
        print(f"FAIL {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
