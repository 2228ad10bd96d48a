"""Command-line front end.

``scalekit run CONFIG`` executes every task of a YAML config in order and
writes one CSV per task, plus ``report.json`` when any verification task
ran.  ``scalekit verify CONFIG`` runs only the verification tasks.  The exit
status is 0 iff every report row passes, 1 otherwise and 2 for a bad config.
"""
import argparse
import csv
import sys

import numpy as np

from .config import load_config, windows
from .duality import DualPair, check_local_time_duality, check_scale_symmetry
from .exceptions import ConfigError, ScaleKitError
from .exit import (ExitSpec, down_exit, expected_discounted_exit, green_density,
                   scale_provider, up_exit)
from .levy import LevyScale
from .models import SNLPModel, phi, psi
from .report import VerificationReport, VerificationRow
from .verify import verify_exit_chain, verify_exit_identities, verify_laplace

REPORT_NAME = "report.json"
ROW_COLUMNS = ["identity", "anchor", "analytic", "oracle", "budget", "verdict"]


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _qs(task):
    return task.node.get("q", [0.0]).numbers(minimum=0)


def _need_levy(cfg, task):
    if not isinstance(cfg.model, SNLPModel):
        raise task.node.error(f"task {task.type!r} needs a levy model")


def _points(task, key, window):
    b, a = window
    node = task.node.get(key, required=True)
    vals = node.numbers()
    for v in vals:
        if not b < v < a:
            raise node.error(f"{key}={v!r} is not inside the window ({b}, {a})")
    return vals


# -- tasks -------------------------------------------------------------------

def task_psi_table(cfg, task):
    _need_levy(cfg, task)
    lams = task.node.get("lam", required=True).numbers(minimum=0)
    return ["lam", "psi"], [(lam, psi(cfg.model, lam)) for lam in lams], []


def task_scale_table(cfg, task):
    xs = task.node.get("x", required=True).numbers()
    ys = task.node.get("y", [0.0]).numbers()
    rows = []
    for q in _qs(task):
        for y in ys:
            right = max(xs) if max(xs) > y else y + cfg.step
            sp = scale_provider(cfg.model, q, right=right, step=cfg.step)
            w = np.asarray(sp.w(xs, y), dtype=float)
            z = np.asarray(sp.z(xs, y), dtype=float)
            rows.extend((x, y, q, wi, zi) for x, wi, zi in zip(xs, w, z))
    return ["x", "y", "q", "W", "Z"], rows, []


def task_exit(cfg, task):
    rows = []
    n = task.node.get("points", 2001).integer(5)
    for q in _qs(task):
        for b, a in windows(task.node):
            sp = scale_provider(cfg.model, q, right=a, step=cfg.step)
            for x in _points(task, "x", (b, a)):
                spec = ExitSpec(b, a, x, q)
                rows.append((b, a, x, q, up_exit(sp, spec), down_exit(sp, spec),
                             expected_discounted_exit(sp, spec, n)))
    return ["b", "a", "x", "q", "up_exit", "down_exit", "mean_discounted_occupation"], rows, []


def task_resolvent(cfg, task):
    kind = task.node.get("kind", "killed").string(("killed", "free"))
    rows = []
    if kind == "free":
        _need_levy(cfg, task)
        xs = task.node.get("x", required=True).numbers()
        for q in _qs(task):
            if q == 0:
                raise task.node.get("q").error("the free resolvent density needs q > 0")
            scale = LevyScale(cfg.model, q).fit()
            rows.extend((x, q, r) for x, r in zip(xs, scale.resolvent_density(xs)))
        return ["x", "q", "density"], rows, []
    for q in _qs(task):
        for b, a in windows(task.node):
            sp = scale_provider(cfg.model, q, right=a, step=cfg.step)
            ys = _points(task, "y", (b, a))
            for x in _points(task, "x", (b, a)):
                g = np.atleast_1d(green_density(sp, ExitSpec(b, a, x, q), np.asarray(ys)))
                rows.extend((b, a, x, q, y, gi) for y, gi in zip(ys, g))
    return ["b", "a", "x", "q", "y", "density"], rows, []


def task_verify_identities(cfg, task):
    mc = cfg.require_mc(task)
    qs = _qs(task)
    chain = task.node.get("chain", True).boolean()
    out = []
    for b, a in windows(task.node):
        ys = _points(task, "y", (b, a)) if task.node.has("y") else []
        for x in _points(task, "x", (b, a)):
            out.extend(verify_exit_identities(cfg.model, b, a, x, qs, mc, ys=ys,
                                              step=cfg.step))
            if chain:
                out.extend(verify_exit_chain(cfg.model, b, a, x, q, step=cfg.step)
                           for q in qs if q > 0)
    return ROW_COLUMNS, [_row_tuple(r) for r in out], out


def task_verify_duality(cfg, task):
    pair = DualPair.from_model(cfg.model)
    qs = _qs(task)
    n = task.node.get("symmetry_points", 10).integer(2)
    tol = task.node.get("symmetry_tolerance", 1e-5).number(0)
    out = []
    for b, a in windows(task.node):
        # n x n grid strictly inside the window, pairs with y < x
        grid = np.linspace(b, a, n + 2)[1:-1]
        pts = [(x, y) for x in grid for y in grid if y < x]
        for q in qs:
            resid = check_scale_symmetry(pair, q, pts, step=cfg.step)
            out.append(VerificationRow.judge(
                f"scale symmetry b={b!r} a={a!r} q={q!r}",
                "W_X(x,y) = W_{-X^}(-y,-x)", 0.0, resid, tol))
        if task.node.has("pairs"):
            mc = cfg.require_mc(task)
            for item in task.node.child("pairs").items():
                xy = item.items()
                if len(xy) != 2:
                    raise item.error("a pair is [x, y]")
                x, y = xy[0].number(), xy[1].number()
                if not (b < x < a and b < y < a):
                    raise item.error(f"pair ({x}, {y}) is not inside ({b}, {a})")
                for q in qs:
                    out.append(check_local_time_duality(pair, ExitSpec(b, a, x, q), y, mc,
                                                        step=cfg.step))
    return ROW_COLUMNS, [_row_tuple(r) for r in out], out


def task_laplace_check(cfg, task):
    _need_levy(cfg, task)
    tol = task.node.get("tolerance", 1e-6).number(0, strict_min=True)
    rows, out = [], []
    for q in _qs(task):
        scale = LevyScale(cfg.model, q).fit()
        if task.node.has("beta"):
            betas = task.node.child("beta").numbers()
        else:
            offsets = task.node.get("beta_offset", [0.1, 1.0, 5.0]).numbers()
            betas = [phi(cfg.model, q) + d for d in offsets]
        for beta in betas:
            if not beta > scale.phi_q_:
                raise task.node.error(f"beta={beta!r} must exceed phi(q)={scale.phi_q_!r}")
        checks = verify_laplace(scale, betas, rtol=tol)
        out.extend(checks)
        for beta, r in zip(betas, checks):
            rows.append((q, beta, r.oracle, r.analytic, r.discrepancy / abs(r.analytic),
                         r.verdict))
    return ["q", "beta", "lhs", "rhs", "rel_error", "verdict"], rows, out


def _row_tuple(r):
    return (r.identity, r.anchor, r.analytic, r.oracle, r.budget, r.verdict)


TASKS = {
    "psi-table": task_psi_table,
    "scale-table": task_scale_table,
    "exit": task_exit,
    "resolvent": task_resolvent,
    "verify-identities": task_verify_identities,
    "verify-duality": task_verify_duality,
    "laplace-check": task_laplace_check,
}


def execute(cfg, only_verification=False, log=None):
    """Run the tasks of ``cfg``; returns the report (``None`` if none was due)."""
    tasks = [t for t in cfg.tasks if t.verification or not only_verification]
    if not tasks:
        return None
    cfg.output.mkdir(parents=True, exist_ok=True)
    report = VerificationReport()
    report_due = False
    for task in tasks:
        report_due |= task.verification
        try:
            columns, rows, checks = TASKS[task.type](cfg, task)
        except ConfigError:
            raise
        except (ScaleKitError, ValueError, ArithmeticError) as exc:
            report_due = True
            report.extend([VerificationRow.failure(f"task {task.stem}",
                                                   f"{type(exc).__name__}: {exc}")])
            if log:
                log(f"{task.stem}: failed: {exc}")
            continue
        write_csv(cfg.output / f"{task.stem}.csv", columns, rows)
        report.extend(checks)
        if log:
            failed = sum(not r.passed for r in checks)
            tail = f", {failed}/{len(checks)} checks failed" if checks else ""
            log(f"{task.stem}: {len(rows)} rows{tail}")
    if report_due:
        report.write(cfg.output / REPORT_NAME)
        return report
    return None


def build_parser():
    parser = argparse.ArgumentParser(prog="scalekit", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run every task of a config"),
                       ("verify", "run only the verification tasks of a config")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config's seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("-q", "--quiet", action="store_true", help="no progress lines")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, output=args.out)
        log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
        report = execute(cfg, only_verification=args.command == "verify", log=log)
    except ConfigError as exc:
        print(f"scalekit: config error: {exc}", file=sys.stderr)
        return 2
    if report is None:
        return 0
    s = report.summary
    if not args.quiet:
        print(f"{s['passed']}/{s['total']} checks passed", file=sys.stderr)
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
