"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage / parse / I/O error,
3 unphysical input state.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__, criteria, suites
from .bloch import Bloch2Q, StateError, UnphysicalStateError, bloch_arrays, load_state, random_densities, save_state
from .cloning import (
    DEFAULT_MU_CAP,
    ClonerSpec,
    Family,
    SpecError,
    bell_diagonal,
    broadcast_pipeline,
    werner,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_UNPHYSICAL = 3

SAMPLER_NOTE = (
    "Random states come from the purification sampler: a Haar-random pure state on "
    "4 x k (k = --rank, default 4) traced over the k-dimensional ancilla."
)

_CHSH_CAP = 1.0 / math.sqrt(2.0)


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def fmt(v) -> str:
    """Round-trip-exact number formatting for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _spec_line(spec: ClonerSpec | None) -> str:
    return "none" if spec is None else json.dumps(spec.to_json(), sort_keys=True)


def _header(seed: int | None, spec_lines: Sequence[str], extra: Sequence[str] = ()) -> list[str]:
    lines = [f"# nonlocal_cast {__version__}", f"# seed: {'none' if seed is None else seed}"]
    lines += [f"# cloner: {s}" for s in spec_lines]
    lines += [f"# {e}" for e in extra]
    return lines


def _render_csv(header: Sequence[str], columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror}") from None


def _load(path: str) -> Bloch2Q:
    try:
        return load_state(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


def _table(d: dict, indent: str = "") -> str:
    width = max(len(k) for k in d)
    lines = []
    for k, v in d.items():
        if isinstance(v, dict):
            lines.append(f"{indent}{k}:")
            lines.append(_table(v, indent + "  "))
        else:
            if isinstance(v, (bool, np.bool_)) or v is None:
                cell = json.dumps(v if v is None else bool(v))
            elif isinstance(v, (int, float, np.number)):
                cell = repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
            else:
                cell = json.dumps(v)
            lines.append(f"{indent}{k.ljust(width)}  {cell}")
    return "\n".join(lines)


def _flat(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flat(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def _render(doc: dict, form: str, seed: int | None = None, spec: ClonerSpec | None = None) -> str:
    if form == "json":
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if form == "table":
        return _table(doc) + "\n"
    flat = _flat(doc)
    return _render_csv(_header(seed, [_spec_line(spec)]), list(flat), [list(flat.values())])


def _spec_from_args(args, required: bool = True) -> ClonerSpec | None:
    if args.family is None:
        if required:
            raise CliError("--family is required")
        return None
    return ClonerSpec(args.family, args.lam, args.mu_cap)


# --- subcommands -------------------------------------------------------------


def cmd_eval(args) -> int:
    s = _load(args.state)
    doc = criteria.report(s).to_dict()
    _emit(_render(doc, args.format), args.out)
    return EXIT_OK


def cmd_clone(args) -> int:
    s = _load(args.state)
    spec = _spec_from_args(args)
    criterion = args.criterion
    outcome = broadcast_pipeline(s, spec, criterion, use_oracle=args.oracle, convention=args.convention)
    if args.write_state:
        try:
            save_state(outcome.nonlocal_pair_state, args.write_state)
        except OSError as exc:
            raise CliError(f"cannot write {args.write_state}: {exc.strerror}") from None
    doc = {
        "cloner": spec.to_json(),
        "mu": spec.mu,
        "state": outcome.nonlocal_pair_state.to_dict(),
        "before": outcome.input_report.to_dict(),
        "after": outcome.nonlocal_pair_report.to_dict(),
        "criterion": criterion,
        "broadcast_achieved": outcome.broadcast_achieved,
        "optimal_broadcast_achieved": outcome.optimal_broadcast_achieved,
    }
    if outcome.local_pair_reports is not None:
        doc["within_lab"] = {"13": outcome.local_pair_reports[0].to_dict(),
                             "24": outcome.local_pair_reports[1].to_dict()}
        doc["oracle_matching_pairs"] = outcome.crosscheck.matching
    _emit(_render(doc, args.format, spec=spec), args.out)
    return EXIT_OK


_THEOREM_GROUPS = {"chsh": (1, 2), "f3": (3, 4), "lhs": (5, 6), "all": (1, 2, 3, 4, 5, 6)}
# theorem -> (family, criterion, mu cap)
_BOUND_THEOREMS = {
    1: (Family.LOCAL_SD, "chsh", DEFAULT_MU_CAP[True]),
    2: (Family.NONLOCAL_SD, "chsh", _CHSH_CAP),
    3: (Family.LOCAL_SD, "f3", DEFAULT_MU_CAP[True]),
    4: (Family.NONLOCAL_SD, "f3", DEFAULT_MU_CAP[False]),
}
_VERIFY_COLUMNS = ["theorem", "case", "params", "mu", "lambda", "pre", "post", "post_value", "bound", "margin",
                   "passed"]


def run_verification(count: int, seed: int, theorems: Sequence[int], mu_grid: Sequence[float] | None = None,
                     p_step: float = 1e-3, bd_step: float = 0.05, rank: int = 4,
                     mu_cap: float | None = None) -> list[suites.SuiteResult]:
    """Run the selected theorem suites; state samples are seeded per criterion."""
    if count < 1:
        raise CliError("--count must be >= 1")
    streams = dict(zip(("chsh", "f3"), np.random.SeedSequence(seed).spawn(2)))
    samples: dict[str, list[Bloch2Q]] = {}
    results = []
    for th in theorems:
        if th in _BOUND_THEOREMS:
            family, crit, cap = _BOUND_THEOREMS[th]
            cap = cap if mu_cap is None else mu_cap
            if crit not in samples:
                samples[crit] = suites.sample_hypothesis_states(np.random.default_rng(streams[crit]), count, crit,
                                                                k=rank)
            mus = suites.default_mu_grid(cap) if mu_grid is None else mu_grid
            r = suites.run_bound_theorem(samples[crit], family, crit, mus, cap)
            r.extra["mu_cap"] = cap
        else:
            cap = DEFAULT_MU_CAP[True] if mu_cap is None else mu_cap
            mus = suites.default_mu_grid(cap) if mu_grid is None else mu_grid
            if th == 5:
                r = suites.run_werner_lhs(suites.parse_grid(f"0:1:{p_step}"), mus, cap)
            else:
                r = suites.run_bell_diagonal_lhs(bd_step, mus, cap)
            r.extra["mu_cap"] = cap
        r.extra["mu_grid"] = list(mus)
        results.append(r)
    return results


def verification_csv(results: Sequence[suites.SuiteResult], seed: int, count: int) -> str:
    header = _header(seed, [], [f"count: {count}", SAMPLER_NOTE])
    rows = []
    for r in results:
        family = Family.LOCAL_SD if r.theorem in (1, 3, 5, 6) else Family.NONLOCAL_SD
        spec = {"family": family.value, "lambda": "per-row", "mu_cap": fmt(r.extra["mu_cap"]),
                "mu_grid": [fmt(m) for m in r.extra["mu_grid"]]}
        header.append(f"# cloner: theorem {r.theorem}: {json.dumps(spec, sort_keys=True)}")
        for note in r.skipped:
            header.append(f"# skipped: theorem {r.theorem}: {note}")
        for c in r.worst(10):
            rows.append([c.theorem, c.case, c.params, c.mu, c.lam, c.pre, c.post, c.post_value, c.bound, c.margin,
                         c.passed])
    return _render_csv(header, _VERIFY_COLUMNS, rows)


def cmd_verify_theorems(args) -> int:
    theorems = _THEOREM_GROUPS[args.criterion]
    if args.theorem:
        theorems = tuple(sorted({int(t) for t in args.theorem.split(",")}))
        if any(t not in range(1, 7) for t in theorems):
            raise CliError("--theorem takes numbers between 1 and 6")
    mu_grid = _grid(args.grid) if args.grid else None
    results = run_verification(args.count, args.seed, theorems, mu_grid, rank=args.rank, mu_cap=args.mu_cap)
    _emit(verification_csv(results, args.seed, args.count), args.out)
    all_ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        all_ok &= r.passed
        print(f"theorem {r.theorem}: {status} {r.checked - r.failures}/{r.checked} checks ({r.description})",
              file=sys.stderr)
    return EXIT_OK if all_ok else EXIT_FAILED


def _grid(text: str) -> list[float]:
    try:
        return suites.parse_grid(text)
    except ValueError as exc:
        raise CliError(str(exc)) from None


_SCAN_METRICS = ["m_value", "chsh_s", "f2", "f3", "negativity", "bell_nonlocal", "steerable3", "lhs_unsteerable",
                 "entangled"]


def _scan_row(s: Bloch2Q, spec: ClonerSpec | None) -> list:
    pre = criteria.report(s).to_dict()
    row = [pre[k] for k in _SCAN_METRICS]
    if spec is not None:
        post = broadcast_pipeline(s, spec).nonlocal_pair_report.to_dict()
        row += [post[k] for k in _SCAN_METRICS]
    return row


def cmd_scan(args) -> int:
    spec = _spec_from_args(args, required=False)
    extra = [f"states: {args.states}"]
    if args.states == "werner":
        ps = _grid(args.grid or "0:1:0.01")
        items = [(f"{p:.12g}",) for p in ps]
        states = [werner(p) for p in ps]
        params = ["p"]
    elif args.states == "bell_diagonal":
        axis = _grid(args.grid or "-1:1:0.1")
        items, states, skipped = [], [], 0
        for c1 in axis:
            for c2 in axis:
                for c3 in axis:
                    try:
                        states.append(bell_diagonal(c1, c2, c3))
                    except StateError:
                        skipped += 1
                        continue
                    items.append((f"{c1:.12g}", f"{c2:.12g}", f"{c3:.12g}"))
        params = ["c1", "c2", "c3"]
        extra.append(f"unphysical skipped: {skipped}")
        print(f"scan: skipped {skipped} unphysical Bell-diagonal triples", file=sys.stderr)
    else:
        if args.count < 1:
            raise CliError("--count must be >= 1")
        rng = np.random.default_rng(args.seed)
        x, y, T = bloch_arrays(random_densities(rng, args.count, args.rank))
        states = [Bloch2Q(x[i], y[i], T[i]) for i in range(args.count)]
        items = [(str(i),) for i in range(args.count)]
        params = ["index"]
        extra += [f"count: {args.count}", f"rank: {args.rank}", SAMPLER_NOTE]
    columns = params + [f"pre_{k}" for k in _SCAN_METRICS]
    if spec is not None:
        columns += [f"post_{k}" for k in _SCAN_METRICS]
    rows = suites.parallel_map(lambda s: _scan_row(s, spec), states)
    seed = args.seed if args.states == "random" else None
    text = _render_csv(_header(seed, [_spec_line(spec)], extra), columns,
                       [list(it) + r for it, r in zip(items, rows)])
    _emit(text, args.out)
    return EXIT_OK


_LOCAL_LAMBDAS = (1 / 6 - 1e-3, 1 / 6 + 1e-3, 0.2, 0.25, 0.3, 0.4, 0.5)
_NONLOCAL_LAMBDAS = (0.1 - 1e-3, 0.1 + 1e-3, 0.15, 0.2, 0.25)


def run_oracle_check(count: int, seed: int, conventions: Sequence[str], families: Sequence[Family],
                     lambdas: Sequence[float] | None = None, mu_cap: float = 1.0) -> dict:
    """Aggregate oracle-versus-closed-form deviations over random input states."""
    from .oracle import MATCH_TOL, GramNotRealizable, clone_fidelities, crosscheck_reduced_maps, isometry_for
    from .bloch import random_pure_qubit

    rng = np.random.default_rng(seed)
    x, y, T = bloch_arrays(random_densities(rng, count, 4))
    states = [Bloch2Q(x[i], y[i], T[i]) for i in range(count)]

    def aggregate(spec: ClonerSpec, convention: str) -> dict:
        reps = suites.parallel_map(lambda s: crosscheck_reduced_maps(s, spec, convention), states)
        pairs = list(reps[0].deviations)
        dev = {p: max(r.deviations[p] for r in reps) for p in pairs}
        return {
            "family": spec.family.value,
            "convention": reps[0].convention,
            "lambda": spec.lam,
            "mu": spec.mu,
            "status": "ok",
            "isometry_residual": reps[0].isometry_residual,
            "max_deviation": dev,
            "matching_pairs": [p for p in pairs if dev[p] <= MATCH_TOL],
            "fitted_shrinks": reps[0].shrinks,
            "symmetry_residual": {k: max(r.symmetry_residual[k] for r in reps) for k in reps[0].symmetry_residual},
        }

    si_rows = []
    si_ok = True
    for fam in (Family.LOCAL_SI, Family.NONLOCAL_SI):
        row = aggregate(ClonerSpec(fam), "bh_standard")
        row["gated"] = True
        ok = bool(row["matching_pairs"]) and row["isometry_residual"] <= 1e-10
        if fam is Family.LOCAL_SI:
            V = isometry_for(ClonerSpec(fam))
            fids = [clone_fidelities(random_pure_qubit(rng), V) for _ in range(count)]
            worst = max(abs(f - 5.0 / 6.0) for pair in fids for f in pair)
            row["clone_fidelity_max_error"] = worst
            ok &= worst <= 1e-9
        row["passed"] = ok
        si_ok &= ok
        si_rows.append(row)

    sd_rows = []
    for fam in families:
        grid = lambdas if lambdas is not None else (_LOCAL_LAMBDAS if fam.local else _NONLOCAL_LAMBDAS)
        for lam in grid:
            for conv in conventions:
                base = {"family": fam.value, "convention": conv, "lambda": lam, "gated": False}
                try:
                    spec = ClonerSpec(fam, lam, mu_cap)
                except SpecError as exc:
                    sd_rows.append({**base, "status": "invalid", "reason": str(exc)})
                    continue
                try:
                    row = aggregate(spec, conv)
                except GramNotRealizable as exc:
                    sd_rows.append({**base, "mu": spec.mu, "status": "unrealizable",
                                    "gram_min_eigenvalue": exc.min_eigenvalue})
                    continue
                row["gated"] = False
                sd_rows.append(row)
    return {"count": count, "seed": seed, "match_tol": MATCH_TOL, "si_passed": si_ok, "state_independent": si_rows,
            "state_dependent": sd_rows}


def cmd_oracle_check(args) -> int:
    conventions = ["paper_literal", "bh_standard"] if args.convention == "both" else [args.convention]
    if args.family is None:
        families = [Family.LOCAL_SD, Family.NONLOCAL_SD]
    else:
        fam = Family.parse(args.family)
        if not fam.state_dependent:
            raise CliError("--family selects the state-dependent rows; the state-independent check always runs")
        families = [fam]
    if args.count < 1:
        raise CliError("--count must be >= 1")
    lambdas = _grid(args.grid) if args.grid else None
    mu_cap = 1.0 if args.mu_cap is None else args.mu_cap
    summary = run_oracle_check(args.count, args.seed, conventions, families, lambdas, mu_cap)
    _emit(json.dumps(summary, indent=2) + "\n", args.out)
    for row in summary["state_dependent"]:
        if row["status"] != "ok":
            print(f"oracle-check: {row['family']} lambda={row['lambda']:.6g} {row['convention']}: {row['status']}",
                  file=sys.stderr)
    print(f"oracle-check: state-independent {'PASS' if summary['si_passed'] else 'FAIL'}", file=sys.stderr)
    return EXIT_OK if summary["si_passed"] else EXIT_FAILED


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonlocal-cast",
        description="Evaluate two-qubit nonlocality criteria and their fate under quantum cloning.",
        epilog=SAMPLER_NOTE + " Set NONLOCAL_CAST_THREADS to evaluate grid points in parallel.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def cloner_flags(p, required=False):
        p.add_argument("--family", required=required,
                       help="local_sd, nonlocal_sd, local_si or nonlocal_si (full names also accepted)")
        p.add_argument("--lambda", dest="lam", type=float, default=None, help="machine parameter lambda")
        p.add_argument("--mu-cap", type=float, default=None, help="upper bound on mu (default per family)")

    def common(p, formats=None):
        p.add_argument("--out", default=None, help="output path (default stdout)")
        if formats:
            p.add_argument("--format", choices=formats, default=formats[0])

    p = sub.add_parser("eval", help="report every criterion for a state file")
    p.add_argument("--state", required=True)
    common(p, ["json", "table", "csv"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("clone", help="apply a cloner and report before / after")
    p.add_argument("--state", required=True)
    cloner_flags(p, required=True)
    p.add_argument("--criterion", choices=["chsh", "f3", "entanglement"], default="chsh",
                   help="correlation whose broadcasting is judged")
    p.add_argument("--oracle", action="store_true", help="simulate the isometries to judge within-lab pairs")
    p.add_argument("--convention", choices=["bh_standard", "paper_literal"], default="bh_standard")
    p.add_argument("--write-state", default=None, help="write the cloned cross-lab state to this file")
    common(p, ["json", "table", "csv"])
    p.set_defaults(func=cmd_clone)

    p = sub.add_parser("verify-theorems", help="bulk-check the no-broadcasting theorems",
                       description="Summary goes to stderr; the CSV of the 10 closest-to-boundary cases per "
                                   "theorem goes to --out or stdout. " + SAMPLER_NOTE)
    p.add_argument("--count", type=int, default=1000, help="sampled states per hypothesis")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", default=None, help="mu grid, start:stop:step or a,b,c (default 0.1, 0.2, ..., cap)")
    p.add_argument("--criterion", choices=sorted(_THEOREM_GROUPS), default="all")
    p.add_argument("--theorem", default=None, help="comma-separated theorem numbers 1-6, overrides --criterion")
    p.add_argument("--mu-cap", type=float, default=None)
    p.add_argument("--rank", type=int, default=4, help="ancilla dimension of the purification sampler")
    common(p)
    p.set_defaults(func=cmd_verify_theorems)

    p = sub.add_parser("scan", help="CSV table of criteria over a state family")
    p.add_argument("--states", choices=["werner", "bell_diagonal", "random"], default="werner")
    p.add_argument("--grid", default=None,
                   help="werner: p grid (default 0:1:0.01); bell_diagonal: per-axis grid (default -1:1:0.1)")
    p.add_argument("--count", type=int, default=100, help="random states")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank", type=int, default=4)
    cloner_flags(p)
    common(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("oracle-check", help="compare simulated cloners with the closed-form maps")
    p.add_argument("--convention", choices=["paper_literal", "bh_standard", "both"], default="both")
    p.add_argument("--family", default=None, help="state-dependent family for the lambda rows (default both)")
    p.add_argument("--grid", default=None, help="lambda grid (default brackets the restricted value)")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mu-cap", type=float, default=None, help="mu cap for the lambda rows (default 1)")
    common(p)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "rank", 4) < 1:
        parser.error("--rank must be >= 1")
    try:
        return args.func(args)
    except UnphysicalStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNPHYSICAL
    except (StateError, SpecError, CliError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return getattr(exc, "code", EXIT_USAGE)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
