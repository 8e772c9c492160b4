"""Command-line front end.

Every subcommand writes one document (CSV table or JSON report) to stdout or
``--out``.  CSV output starts with ``# key=value`` metadata lines.  Failures
print a JSON error record on stderr and exit with a code specific to the
error class (see ``properscore.errors``).
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

from . import __version__
from .approx import build_polynomial_rule, odd_chebyshev_content
from .calculus import DEFAULT_REL_TOL, mean_reward
from .errors import ParameterError, ScoringError, exit_code_for
from .index import INDEX_REL_TOL, incentivization_index, load_rule, precision_ratio
from .optimal import optimal_rule
from .rules import PROPER_TOL, check_proper, check_respectful, parse_rule_spec
from .simulate import CSV_COLUMNS, SimConfig, monte_carlo


class OutputDoc:
    """A table (CSV) or record list (JSON) plus metadata."""

    def __init__(self, schema: str, columns: Sequence[str], rows: list, metadata: dict,
                 records: list | None = None):
        self.schema = schema
        self.columns = list(columns)
        self.rows = rows
        self.metadata = {"schema": schema, "version": __version__, **metadata}
        self.records = records

    def render(self, fmt: str) -> str:
        if fmt == "json":
            records = self.records
            if records is None:
                records = [dict(zip(self.columns, r)) for r in self.rows]
            return json.dumps({"metadata": self.metadata, "records": records},
                              indent=2, sort_keys=True, default=_json_default) + "\n"
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={_cell(self.metadata[key])}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ParameterError(f"--{name} expects a comma-separated list of numbers, got {text!r}")
    if not vals:
        raise ParameterError(f"--{name} is empty")
    return vals


def _split_rules(text: str) -> list[str]:
    """Comma-separated rule specs; commas inside ``poly:`` lists are kept."""
    out: list[str] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if out and out[-1].startswith("poly:") and _is_coefficient(tok):
            out[-1] += "," + tok
        else:
            out.append(tok)
    if not out:
        raise ParameterError("at least one rule is required")
    return out


def _is_coefficient(tok: str) -> bool:
    try:
        from fractions import Fraction
        Fraction(tok)
        return True
    except (ValueError, ZeroDivisionError):
        return False


def _rules_arg(args) -> list[str]:
    if not args.rules:
        raise ParameterError("--rules is required")
    specs = _split_rules(args.rules)
    for s in specs:
        parse_rule_spec(s)
    return specs


def _ell_label(ell: float) -> str:
    return "inf" if math.isinf(ell) else (str(int(ell)) if float(ell).is_integer() else repr(ell))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_index(args) -> OutputDoc:
    specs, ells = _rules_arg(args), _floats(args.ell, "ell")
    rows = []
    for s in specs:
        rule = load_rule(s)
        for ell in ells:
            r = incentivization_index(rule, ell)
            rows.append([s, ell, r.ind, r.mu_ell, r.predicted_error_coeff, r.quad_error])
    return OutputDoc("index/1", ["rule", "ell", "ind", "mu_ell", "predicted_error_coeff",
                                 "quad_error"], rows, {"rel_tol": INDEX_REL_TOL})


def cmd_compare(args) -> OutputDoc:
    specs, ells = _rules_arg(args), _floats(args.ell, "ell")
    cols = ["rule"] + [f"ind_{_ell_label(e)}" for e in ells]
    if args.ratio:
        cols += [f"ratio_{_ell_label(e)}" for e in ells]
    rows = []
    for s in specs:
        rule = load_rule(s)
        reps = [incentivization_index(rule, e) for e in ells]
        row = [s] + [r.ind for r in reps]
        if args.ratio:
            row += [precision_ratio(rule, e, report=r) for e, r in zip(ells, reps)]
        rows.append(row)
    return OutputDoc("compare/1", cols, rows, {"rel_tol": INDEX_REL_TOL})


def cmd_simulate(args) -> OutputDoc:
    if args.seed is None:
        raise ParameterError("simulate requires an explicit --seed")
    if args.cost is None:
        raise ParameterError("simulate requires --cost")
    specs, costs = _rules_arg(args), _floats(args.cost, "cost")
    ells = _floats(args.ell, "ell") if args.ell else [1.0]
    p_mode = "uniform" if args.p is None else args.p
    rows, records = [], []
    for c in costs:
        for s in specs:
            cfg = SimConfig(s, c, args.trials, args.seed, args.mode, tuple(ells), p_mode,
                            args.coupled, args.workers)
            rep = monte_carlo(cfg, load_rule(s))
            rows.append(rep.csv_row(ells[0]))
            records.append(rep.to_dict())
    meta = {"seed": args.seed, "trials": args.trials, "mode": args.mode,
            "coupled": args.coupled, "ell": ells[0], "p": p_mode}
    doc = OutputDoc("simulate/1", CSV_COLUMNS, rows, meta, records)
    return doc


def cmd_optimal(args) -> OutputDoc:
    ell = float(args.ell_single)
    rule = optimal_rule(ell)
    x = _grid(args.samples)
    rows = [[xi, gi, gpi, r2]
            for xi, gi, gpi, r2 in zip(x, rule.f(x), rule.fprime(x), rule.R_second(x))]
    rep = incentivization_index(rule, ell) if not math.isinf(ell) else None
    meta = {"ell": ell, "kappa": rule.kappa}
    if rep is not None:
        meta["ind"] = rep.ind
    return OutputDoc("optimal/1", ["x", "g", "g_prime", "R_second"], rows, meta)


def cmd_approx(args) -> OutputDoc:
    if args.eps is None:
        raise ParameterError("approx requires --eps")
    ell = float(args.ell_single)
    degree = "auto" if args.degree in (None, "auto") else _int(args.degree, "degree")
    res = build_polynomial_rule(ell, args.eps, degree)
    rule = res.rule
    diag = check_proper(rule)
    record = {
        "ell": ell, "eps": args.eps, "degree": res.degree, "criterion": res.criterion,
        "ind": res.report.ind, "optimal_ind": res.optimal_ind, "index_gap": res.index_gap,
        "uniform_gap": res.uniform_gap, "lower_bound": res.lower_bound,
        "proper_violation": diag.proper_identity_max_violation,
        "normalized_residuals": list(diag.normalized_residuals),
        "odd_chebyshev_max": odd_chebyshev_content(rule, res.degree),
        "history": [{"degree": d, "ind": i, "uniform_gap": g} for d, i, g in res.history],
        "spec": str(rule.to_poly_spec()),
    }
    cols = ["ell", "eps", "degree", "ind", "optimal_ind", "index_gap", "uniform_gap",
            "lower_bound", "spec"]
    return OutputDoc("approx/1", cols, [[record[c] for c in cols]],
                     {"criterion": res.criterion, "grid": 2049}, [record])


def cmd_check(args) -> OutputDoc:
    specs = _rules_arg(args)
    costs = _floats(args.cost, "cost") if args.cost else []
    records = []
    for s in specs:
        rule = load_rule(s)
        diag = check_proper(rule, args.grid)
        resp = [check_respectful(rule, c, args.t) for c in costs]
        mr = mean_reward(rule)
        records.append({
            "rule": s, "proper": diag.proper,
            "proper_identity_max_violation": diag.proper_identity_max_violation,
            "fprime_min": diag.fprime_min, "r2_min": diag.r2_min, "r2_max": diag.r2_max,
            "normalized_residuals": list(diag.normalized_residuals),
            "mean_reward_forms": [mr.direct, mr.via_derivative, mr.via_half_integral],
            "respectful": [{"c": r.c, "t": r.t, "pass": r.passed, "witness": r.witness,
                            "condition": r.condition} for r in resp],
        })
    cols = ["rule", "proper", "proper_identity_max_violation", "fprime_min", "r2_min", "r2_max"]
    rows = [[r[c] for c in cols] for r in records]
    return OutputDoc("check/1", cols, rows,
                     {"grid": args.grid, "tol": PROPER_TOL, "t": args.t,
                      "quad_rel_tol": DEFAULT_REL_TOL}, records)


def cmd_curve(args) -> OutputDoc:
    specs = _rules_arg(args)
    if args.samples < 2:
        raise ParameterError("--samples must be >= 2")
    x = _grid(args.samples)
    rows = []
    for s in specs:
        rule = load_rule(s)
        if args.quantity == "sqrt_variance":
            y = np.sqrt(x * (1 - x) / np.asarray(rule.R_second(x)))
        else:
            y = np.asarray(rule.f(x))
        rows.extend([s, xi, yi] for xi, yi in zip(x, y))
    return OutputDoc("curve/1", ["rule", "x", args.quantity], rows,
                     {"quantity": args.quantity, "samples": args.samples})


def _grid(samples: int) -> np.ndarray:
    """``samples`` interior points, strictly increasing: i/(samples+1)."""
    if samples < 2:
        raise ParameterError("--samples must be >= 2")
    return np.arange(1, samples + 1) / (samples + 1)


def _int(text, name):
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ParameterError(f"--{name} must be an integer or 'auto', got {text!r}")


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="properscore",
                                     description="Proper scoring rules and precision incentives.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rules=True):
        if rules:
            p.add_argument("-r", "--rules", "--rule", dest="rules",
                           help="comma-separated rule specs")
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--format", choices=("csv", "json"), default=None)

    p = sub.add_parser("index", help="incentivization index per rule and ell")
    common(p)
    p.add_argument("--ell", default="1,2,4")
    p.set_defaults(func=cmd_index, default_format="csv")

    p = sub.add_parser("compare", help="rules x ell index table")
    common(p)
    p.add_argument("--ell", default="1,2,4")
    p.add_argument("--ratio", action="store_true", help="add precision ratios vs optimal")
    p.set_defaults(func=cmd_compare, default_format="csv")

    p = sub.add_parser("simulate", help="Monte Carlo of coin-flipping experts")
    common(p)
    p.add_argument("--cost", help="flip cost(s), comma-separated")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("local", "global"), default="local")
    p.add_argument("--coupled", action="store_true", help="common random numbers")
    p.add_argument("--ell", default=None, help="error exponents (first one goes in the CSV)")
    p.add_argument("--p", type=float, default=None, help="fixed coin bias instead of uniform")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_simulate, default_format="csv")

    p = sub.add_parser("optimal", help="tabulate the optimal rule for one ell")
    common(p, rules=False)
    p.add_argument("--ell", dest="ell_single", type=float, required=True)
    p.add_argument("--samples", type=int, default=99)
    p.set_defaults(func=cmd_optimal, default_format="csv")

    p = sub.add_parser("approx", help="near-optimal respectful polynomial rule")
    common(p, rules=False)
    p.add_argument("--ell", dest="ell_single", type=float, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--degree", default="auto")
    p.set_defaults(func=cmd_approx, default_format="json")

    p = sub.add_parser("check", help="properness and respectfulness diagnostics")
    common(p)
    p.add_argument("--cost", help="costs c at which to test respectfulness")
    p.add_argument("--t", type=float, default=0.29)
    p.add_argument("--grid", type=int, default=4097)
    p.set_defaults(func=cmd_check, default_format="json")

    p = sub.add_parser("curve", help="per-rule curves on an interior grid")
    common(p)
    p.add_argument("--quantity", choices=("sqrt_variance", "rule_value"),
                   default="sqrt_variance")
    p.add_argument("--samples", type=int, default=99)
    p.set_defaults(func=cmd_curve, default_format="csv")
    return parser


def run_command(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Parse ``argv``, run one subcommand, and return the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    fmt = args.format or args.default_format
    try:
        text = args.func(args).render(fmt)
    except (ScoringError, OSError) as exc:
        code = exit_code_for(exc) if isinstance(exc, ScoringError) else 3
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        for attr in ("value", "error_estimate", "degree", "gap", "state"):
            if hasattr(exc, attr):
                record[attr] = getattr(exc, attr)
        stderr.write(json.dumps(record, default=_json_default) + "\n")
        return code
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
