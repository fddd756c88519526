"""Command-line front end.

Commands::

    reinsopt solve            --config cfg.json --out DIR
    reinsopt psi-curve        --config cfg.json --out DIR
    reinsopt contract-curve   --config cfg.json --out DIR
    reinsopt compare-problems --config cfg.json --out DIR
    reinsopt oracle-check     --seed 1 --count 100 --n-atoms 10 --out DIR

CSV files are comma separated with a header row, LF line endings and
numbers written with 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfg
from . import oracle
from .errors import ReinsoptError, ValidationError
from .solver import psi, psi_tail, solve

PSI_HEADER = ["alpha", "beta", "rho", "s", "F", "psi"]
CONTRACT_HEADER = ["alpha", "beta", "rho", "s", "k"]
SOLVE_HEADER = [
    "alpha", "beta", "rho", "problem", "classification", "breakpoints", "slopes",
    "minimum_value", "objective_at_optimum",
]
ORACLE_HEADER = [
    "seed", "n", "exhaustive_min", "greedy_min", "argmin_bitmask", "solver_min", "solver_delta",
    "interior_gap", "passed",
]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return fmt(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_atomic(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _run_cells(func, cells, workers):
    # map keeps input order, so output does not depend on scheduling
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, cells))


def _labels(cell):
    return [cell.alpha, cell.beta, cell.rho]


def loss_grid(d, n, tail_eps):
    lo = d.support()[0]
    hi = d.tail_point(tail_eps)
    return np.linspace(lo, hi, n)


def psi_rows(cell, scenario):
    p = cell.problem()
    d = p.loss
    rows = []
    for s in loss_grid(d, scenario.grid_points, scenario.tail_eps):
        F = float(d.cdf(s))
        if F > 0.5:
            value = psi_tail(p, float(d.upper_tail(s)))
        else:
            value = psi(p, F)
        rows.append(_labels(cell) + [float(s), F, value])
    return rows


def contract_rows(cell, scenario):
    sol = solve(cell.problem(), scenario.tail_eps)
    grid = loss_grid(sol.problem.loss, scenario.grid_points, scenario.tail_eps)
    points = sorted(set(grid.tolist()) | {s for s, _ in sol.sign_changes})
    return [_labels(cell) + [s, float(sol.marginal(s))] for s in points]


def _solution_row(cell, sol, kind):
    c = sol.contract
    return _labels(cell) + [
        kind,
        sol.classification,
        ";".join(fmt(b) for b in c.breakpoints),
        ";".join(fmt(v) for v in c.slopes),
        sol.minimum_value,
        sol.objective_at_optimum,
    ]


def cmd_solve(scenario, out, workers=None):
    def run(cell):
        return cell, solve(cell.problem(), scenario.tail_eps)

    results = _run_cells(run, scenario.cells(), workers)
    report = [
        {"scenario": cell.labels(), "solution": sol.to_dict()} for cell, sol in results
    ]
    write_atomic(os.path.join(out, "solution.json"), json.dumps(_jsonable(report), indent=2) + "\n")
    rows = [_solution_row(cell, sol, cell.kind) for cell, sol in results]
    write_atomic(os.path.join(out, "solve.csv"), csv_text(SOLVE_HEADER, rows))
    return results


def cmd_psi_curve(scenario, out, workers=None):
    chunks = _run_cells(lambda c: psi_rows(c, scenario), scenario.cells(), workers)
    rows = [r for chunk in chunks for r in chunk]
    write_atomic(os.path.join(out, "psi_curve.csv"), csv_text(PSI_HEADER, rows))
    return rows


def cmd_contract_curve(scenario, out, workers=None):
    chunks = _run_cells(lambda c: contract_rows(c, scenario), scenario.cells(), workers)
    rows = [r for chunk in chunks for r in chunk]
    write_atomic(os.path.join(out, "contract_curve.csv"), csv_text(CONTRACT_HEADER, rows))
    return rows


def cmd_compare_problems(scenario, out, workers=None):
    jobs = [(cell, kind) for cell in scenario.cells() for kind in cfg.KINDS]

    def run(job):
        cell, kind = job
        return _solution_row(cell, solve(cell.problem(kind), scenario.tail_eps), kind)

    rows = _run_cells(run, jobs, workers)
    write_atomic(os.path.join(out, "compare.csv"), csv_text(SOLVE_HEADER, rows))
    return rows


def cmd_oracle_check(seed, count, n_atoms, out=None):
    report = oracle.certify(seed, count, n_atoms)
    rows = [
        [r.seed, r.n, r.exhaustive_min, r.greedy_min, r.argmin_bitmask, r.solver_min,
         r.solver_delta, r.interior_gap, r.passed]
        for r in report.instances
    ]
    if out is not None:
        write_atomic(os.path.join(out, "oracle_report.csv"), csv_text(ORACLE_HEADER, rows))
    return report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reinsopt", description="Distortion risk measures and optimal reinsurance contracts"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [
        ("solve", "solve every scenario cell and write the solutions"),
        ("psi-curve", "tabulate the sign function along the loss axis"),
        ("contract-curve", "tabulate the optimal marginal indemnification"),
        ("compare-problems", "solve the ceding, reinsurer and social problems side by side"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default=".", help="output directory (default: current)")
        p.add_argument("--tail-eps", type=float, default=None, help="tail probability for truncating unbounded supports")
        p.add_argument("--workers", type=int, default=None, help="threads for sweep cells")
    p = sub.add_parser("oracle-check", help="certify the solver against brute force on random discrete problems")
    p.add_argument("--seed", type=int, default=1, help="master seed (unsigned 64-bit)")
    p.add_argument("--count", type=int, default=100, help="number of random instances")
    p.add_argument("--n-atoms", type=int, default=10, help="atoms per instance (at most 20)")
    p.add_argument("--out", default=None, help="directory for oracle_report.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle-check":
            if not 0 <= args.seed < 2**64:
                raise ValidationError("seed must be an unsigned 64-bit integer")
            report = cmd_oracle_check(args.seed, args.count, args.n_atoms, args.out)
            print(
                f"oracle-check seed={args.seed} count={args.count} n={args.n_atoms} "
                f"max_solver_delta={fmt(report.max_solver_delta)} "
                f"max_mode_delta={fmt(report.max_mode_delta)}"
            )
            bad = report.failures()
            if bad:
                for r in bad:
                    print(f"FAIL instance seed={r.seed} delta={fmt(r.solver_delta)}", file=sys.stderr)
                return 1
            print("PASS")
            return 0

        scenario = cfg.load(args.config)
        if args.tail_eps is not None:
            if not 0.0 < args.tail_eps < 1.0:
                raise ValidationError("--tail-eps must lie in (0, 1)")
            scenario.tail_eps = args.tail_eps
        command = {
            "solve": cmd_solve,
            "psi-curve": cmd_psi_curve,
            "contract-curve": cmd_contract_curve,
            "compare-problems": cmd_compare_problems,
        }[args.command]
        command(scenario, args.out, args.workers)
        return 0
    except (ReinsoptError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"reinsopt {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
