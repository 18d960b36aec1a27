"""Command line front end: ``alexflow run|verify|sweep <config>``.

Exit codes: 0 when every certificate holds, 1 on a configuration error,
2 on a certificate violation (the offending row or witness is printed).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfg
from .errors import AlexflowError, ConvergenceFailure, InvalidArgument
from .flows import (
    MeasureSpec,
    child_seed,
    cyclic_ppa,
    envelope_kconvex,
    expectation_and_variance,
    inductive_mean,
    jensen_run,
    loglog_fit,
    ppa,
    stochastic_ppa,
)
from .functionals import weighted_sum
from .oracle import verify_curvature, verify_k_convexity, verify_variance_inequality

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


# ---------------------------------------------------------------------------
# run


def trial_seed(doc: dict, index: int) -> int:
    seed = int(doc.get("seed", 0))
    return seed if int(doc.get("trials", 1)) == 1 else child_seed(seed, index)


def _measure(doc, fs) -> MeasureSpec:
    w = doc.get("weights")
    return MeasureSpec.uniform(fs) if w is None else MeasureSpec(tuple(fs), tuple(w))


def build_and_run(doc: dict, index: int = 0, tolerance: float | None = None):
    """Run trial ``index`` of a run document; returns the RunRecord."""
    flow = cfg.need(doc, "flow")
    if flow not in cfg.FLOWS:
        raise cfg.ConfigError(f"unknown flow {flow!r}; expected one of {', '.join(cfg.FLOWS)}")
    space = cfg.space_of(doc)
    G = cfg.region_of(doc, space)
    fs = cfg.functionals_of(doc, G)
    max_k = int(doc.get("max_k", 1000))
    seed = trial_seed(doc, index)
    x0 = cfg.point_of(space, doc.get("x0"), G.center)
    ref = doc.get("reference")
    ref = None if ref is None else cfg.point_of(space, ref)
    mode = doc.get("mode", "upper")
    stop = float(doc.get("stop_tol", 1e-12))

    if flow == "ppa":
        w = doc.get("weights")
        f = fs[0] if len(fs) == 1 and w is None else weighted_sum(fs, w or [1.0] * len(fs))
        rec = ppa(f, cfg.schedule_of(doc), x0, G, max_k, ref, stop)
    elif flow == "cyclic_ppa":
        rec = cyclic_ppa(
            fs, cfg.schedule_of(doc), x0, G, mode, max_k, ref, bool(doc.get("shuffle", False)), seed, stop
        )
        if doc.get("envelope", False):
            envelope_kconvex(rec, rec.K, rec.L, len(fs), mode)
    elif flow == "stochastic_ppa":
        mu = _measure(doc, fs)
        rec = stochastic_ppa(mu, cfg.schedule_of(doc), x0, G, seed, max_k, ref, mode)
    elif flow == "inductive_mean":
        order = doc.get("order")
        rec = inductive_mean(
            [f.anchor for f in _measure(doc, fs).support], G, seed, doc.get("weights"), order, max_k, ref
        )
    else:
        mu = _measure(doc, fs)
        f_convex = cfg.functional_of(G, cfg.need(doc, "f_convex"))
        rec = jensen_run(mu, f_convex, seed, max_k, ref)
    if tolerance is not None:
        rec.tolerance = tolerance
        rec.finish()
        gap = rec.summary.get("jensen_gap")
        if gap is not None and gap < -tolerance:
            rec.status = "violated"
    rec.config = {**doc, "trial": index, "trial_seed": seed}
    return rec


def _run_task(args):
    doc, index, tolerance = args
    try:
        rec = build_and_run(doc, index, tolerance)
    except ConvergenceFailure as e:
        return {"index": index, "error": str(e), "code": EXIT_VIOLATION}
    except (AlexflowError, ValueError, KeyError, TypeError) as e:
        return {"index": index, "error": str(e), "code": EXIT_CONFIG}
    violation = None
    bad = rec.violations()
    if bad:
        row, name, r = bad[0]
        violation = f"m={row.m} residual {name}={r:.6g} point={row.point.to_list()}"
    elif rec.status != "certified":
        violation = f"terminal check failed: {rec.summary}"
    return {
        "index": index,
        "csv": rec.csv_text(),
        "json": rec.to_dict(),
        "violation": violation,
        "decay": [(row.m, row.dist_ref**2) for row in rec.rows],
    }


def _map(tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_task, tasks))


def _write_trials(out: Path, results, trials: int, fit_start: int = 10) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    for res in results:
        stem = "run" if trials == 1 else f"trial_{res['index']:03d}"
        (out / f"{stem}.csv").write_text(res["csv"])
        _dump(out / f"{stem}.json", res["json"])
    summary = {"trials": trials}
    if trials > 1 and results:
        n = min(len(r["decay"]) for r in results)
        ms = np.array([m for m, _ in results[0]["decay"][:n]], dtype=float)
        D = np.array([[d for _, d in r["decay"][:n]] for r in results])
        med = np.median(D, axis=0)
        with open(out / "median_decay.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "median_dist2", "min_dist2", "max_dist2"])
            for m, a, b, c in zip(ms, med, D.min(axis=0), D.max(axis=0)):
                w.writerow([str(int(m)), "%.17g" % a, "%.17g" % b, "%.17g" % c])
        summary.update(_fit_summary(ms, med, fit_start))
        _dump(out / "summary.json", summary)
    return summary


def _fit_summary(ms, values, start: int) -> dict:
    keep = ms >= start
    try:
        slope, C = loglog_fit(ms[keep], values[keep])
    except InvalidArgument:
        return {"slope": None, "C": None}
    return {"slope": slope, "C": C, "fit_start": start}


def _report(results) -> int:
    code = EXIT_OK
    for res in results:
        if "error" in res:
            print(f"trial {res['index']}: error: {res['error']}", file=sys.stderr)
            if res["code"] == EXIT_CONFIG:
                return EXIT_CONFIG
            code = EXIT_VIOLATION
        elif res["violation"]:
            print(f"trial {res['index']}: certificate violated: {res['violation']}")
            code = EXIT_VIOLATION
    return code


def cmd_run(doc: dict, out: Path, jobs: int, tolerance) -> int:
    trials = int(doc.get("trials", 1))
    if trials < 1:
        raise cfg.ConfigError("trials must be at least 1")
    results = _map([(doc, i, tolerance) for i in range(trials)], jobs)
    code = _report(results)
    if code == EXIT_CONFIG:
        return code
    summary = _write_trials(out, [r for r in results if "csv" in r], trials, int(doc.get("fit_start", 10)))
    if code == EXIT_OK:
        print(f"{doc['flow']}: {trials} run(s) certified; outputs in {out}")
        if summary.get("slope") is not None:
            print(f"median decay slope {summary['slope']:.4f}")
    return code


# ---------------------------------------------------------------------------
# verify


def run_check(check: dict, tolerance=None):
    kind = cfg.need(check, "check")
    space = cfg.space_of(check)
    G = cfg.region_of(check, space) if "region" in check else None
    samples = int(check.get("samples", 1000))
    seed = int(check.get("seed", 0))
    tol = {} if tolerance is None else {"tolerance": tolerance}
    if kind == "curvature":
        return verify_curvature(space, G, samples, check.get("side", "upper"), seed, **tol)
    if G is None:
        raise cfg.ConfigError(f"{kind} check needs a region")
    if kind == "k_convexity":
        f = cfg.functional_of(G, cfg.need(check, "functional"))
        K = check.get("K")
        return verify_k_convexity(f, G, K, samples, seed, bool(check.get("negate", False)), **tol)
    if kind == "variance":
        mu = _measure(check, cfg.functionals_of(check, G))
        E, _ = expectation_and_variance(mu)
        return verify_variance_inequality(mu, samples, seed, E, **tol)
    raise cfg.ConfigError(f"unknown check {kind!r}")


def cmd_verify(doc: dict, out: Path, tolerance) -> int:
    checks = doc.get("checks")
    if not checks:
        raise cfg.ConfigError("verify needs a nonempty 'checks' list")
    reports, code = [], EXIT_OK
    for check in checks:
        expect = check.get("expect", "pass")
        if expect not in ("pass", "fail"):
            raise cfg.ConfigError("expect is 'pass' or 'fail'")
        rep = run_check(check, tolerance)
        ok = rep.passed == (expect == "pass")
        d = {**rep.to_dict(), "expect": expect, "within_contract": ok}
        reports.append(d)
        print(f"{'ok  ' if ok else 'FAIL'} {rep.check}: min margin {rep.min_margin:.3e} (expect {expect})")
        if not ok:
            print(f"     witness: {json.dumps(rep.witness, default=_json_default)}")
            code = EXIT_VIOLATION
    out.mkdir(parents=True, exist_ok=True)
    _dump(out / "verify_report.json", {"reports": reports, "exit": code})
    return code


# ---------------------------------------------------------------------------
# sweep


def sweep_cells(doc: dict) -> list:
    base = cfg.need(doc, "base")
    grid = doc.get("grid") or {}
    if not isinstance(base, dict) or not isinstance(grid, dict):
        raise cfg.ConfigError("sweep needs a 'base' mapping and a 'grid' mapping")
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise cfg.ConfigError(f"grid entry {k!r} must be a nonempty list")
    cells = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        cells.append(({**base, **dict(zip(keys, combo))}, dict(zip(keys, combo))))
    return cells


def cmd_sweep(doc: dict, out: Path, jobs: int, tolerance) -> int:
    cells = sweep_cells(doc)
    tasks, owner = [], []
    for j, (cell, _) in enumerate(cells):
        for i in range(int(cell.get("trials", 1))):
            tasks.append((cell, i, tolerance))
            owner.append(j)
    results = _map(tasks, jobs)
    code = _report(results)
    if code == EXIT_CONFIG:
        return code
    rows = []
    for j, (cell, params) in enumerate(cells):
        mine = [r for r, o in zip(results, owner) if o == j and "csv" in r]
        trials = int(cell.get("trials", 1))
        summary = _write_trials(out / f"cell_{j:03d}", mine, trials, int(cell.get("fit_start", 10)))
        if "slope" not in summary and mine:
            dec = mine[0]["decay"]
            ms = np.array([m for m, _ in dec], dtype=float)
            summary.update(_fit_summary(ms, np.array([d for _, d in dec]), int(cell.get("fit_start", 10))))
        status = "certified" if all(not r["violation"] for r in mine) and len(mine) == trials else "violated"
        rows.append([j, json.dumps(params, sort_keys=True), status, summary.get("slope"), summary.get("C")])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "params", "status", "slope", "C"])
        for j, params, status, slope, C in rows:
            w.writerow([j, params, status, "" if slope is None else "%.17g" % slope, "" if C is None else "%.17g" % C])
    for j, params, status, slope, _ in rows:
        s = "n/a" if slope is None or not math.isfinite(slope) else f"{slope:.4f}"
        print(f"cell {j} {params}: {status}, slope {s}")
    return code


# ---------------------------------------------------------------------------
# entry point


def parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="alexflow", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=("run", "verify", "sweep"))
    p.add_argument("config", help="YAML configuration document")
    p.add_argument("--out", help="output directory (default: the config's 'output' or ./out)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes across runs")
    p.add_argument("--tolerance", type=float, help="override residual tolerances")
    return p


def main(argv=None) -> int:
    args = parser().parse_args(argv)
    try:
        doc = cfg.load(args.config)
        if args.seed is not None:
            if args.seed < 0 or args.seed >= 2**64:
                raise cfg.ConfigError("--seed must be an unsigned 64-bit integer")
            doc["seed"] = args.seed
            if isinstance(doc.get("base"), dict):
                doc["base"]["seed"] = args.seed
        out = Path(args.out or doc.get("output", "out"))
        if args.command == "run":
            return cmd_run(doc, out, args.jobs, args.tolerance)
        if args.command == "verify":
            return cmd_verify(doc, out, args.tolerance)
        return cmd_sweep(doc, out, args.jobs, args.tolerance)
    except ConvergenceFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    except (AlexflowError, ValueError, KeyError, TypeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot write outputs: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
