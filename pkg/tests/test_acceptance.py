"""Acceptance gate: one PASS/FAIL line per criterion, printed in the terminal summary."""

import math
import time
from pathlib import Path

import numpy as np
import yaml

from alexflow import (
    GeodesicBall,
    MeasureSpec,
    Point,
    check_estimate_lower,
    check_estimate_upper,
    constant,
    distance,
    euclidean,
    geodesic_point,
    hyperbolic,
    inductive_mean,
    jensen_run,
    ppa,
    prox_upper,
    rate_envelope,
    sphere,
    spider,
    squared_distance,
    step_lower,
    verify_curvature,
    verify_k_convexity,
    verify_variance_inequality,
    weighted_sum,
)
from alexflow import config as cfg
from alexflow.cli import build_and_run, main
from alexflow.flows import child_seed, envelope_closed_form, envelope_constant, expectation_and_variance, loglog_fit
from alexflow.functionals import concavity_constant
from alexflow.oracle import grid_minimize, grid_spacing
from alexflow.sampling import sample_region
from alexflow.schedules import rate_recursion

from conftest import record

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def load(name: str) -> dict:
    return yaml.safe_load((CONFIGS / name).read_text())


def test_curvature_suite():
    t0 = time.perf_counter()
    worst, ok = math.inf, True
    for space in (euclidean(2), sphere(2), hyperbolic(2), spider(3)):
        G = GeodesicBall(space.base_point(), 1.0)
        for side in ("upper", "lower"):
            r = verify_curvature(space, G, samples=10_000, side=side)
            if space.kind == "spider" and side == "lower":
                witness = r
                continue
            worst = min(worst, r.min_margin)
            ok &= r.min_margin >= -1e-8
    w = witness.witness
    has_witness = witness.min_margin < 0 and w["actual"] < w["comparison"]
    dt = time.perf_counter() - t0
    assert record(1, "curvature comparison", ok and has_witness, dt, 30,
                  f"worst margin {worst:.2e} over 7 checks, spider lower witness margin {witness.min_margin:.3f}")


def test_k_convexity_constants():
    t0 = time.perf_counter()
    S2 = sphere(2)
    eps = math.pi / 4
    cap = GeodesicBall(Point(S2, [1, 0, 0]), (math.pi / 2 - eps) / 2)
    # anchor on the boundary: the reach equals the diameter, where the constant is sharp
    f = squared_distance(Point(S2, [math.cos(cap.radius), 0.0, math.sin(cap.radius)]), cap)
    K = (math.pi - 2 * eps) * math.tan(eps)
    sharp = verify_k_convexity(f, K=K, samples=1000)
    over = verify_k_convexity(f, K=K + 0.1, samples=1000)
    H2 = hyperbolic(2)
    ball = GeodesicBall(H2.base_point(), 0.5)
    g = squared_distance(Point(H2, [math.cosh(0.5), 0.0, math.sinh(0.5)]), ball)
    conc = verify_k_convexity(g, K=-4.0, samples=1000, negate=True)
    tighter = verify_k_convexity(g, K=-3.9, samples=1000, negate=True)
    ok = (f.K == K and sharp.min_margin >= -1e-8 and conc.min_margin >= -1e-8
          and over.min_margin < -1e-8 and "defect" in over.witness)
    dt = time.perf_counter() - t0
    assert record(2, "K-convexity constants", ok, dt, 10,
                  f"sphere K={K:.4f} defect {sharp.min_margin:.1e}, K+0.1 witness defect {over.min_margin:.2e}; "
                  f"hyperbolic concavity 4 defect {conc.min_margin:.1e} (3.9 gives {tighter.min_margin:.1e})")


def _estimate_instances(space, n, seed):
    """Random (f, lam, x, y): f a weighted sum of 1 to 3 squared distances on a ball of radius 0.5.

    Every other y sits within a short geodesic of the resolvent output, where the estimate is tightest.
    """
    G = GeodesicBall(space.base_point(), 0.5)
    rng = np.random.default_rng(seed)
    A = sample_region(G, 3 * n, seed, boundary_fraction=0.2)
    X = sample_region(G, n, seed + 1, boundary_fraction=0.2)
    Y = sample_region(G, n, seed + 2, boundary_fraction=0.2)
    K = 2.0 if space.kappa <= 0 else None
    for i in range(n):
        m = 1 + i % 3
        f = weighted_sum([squared_distance(Point(space, A[3 * i + j]), G, K=K) for j in range(m)],
                         rng.uniform(0.2, 1.5, m))
        yield G, f, float(rng.uniform(0.01, 1.0)), Point(space, X[i]), Point(space, Y[i]), float(rng.uniform(0, 0.05))


def test_per_step_estimates():
    t0 = time.perf_counter()
    worst = {}
    spaces = {"euclidean": euclidean(2), "sphere": sphere(2), "hyperbolic": hyperbolic(2), "spider": spider(3)}
    for name, space in spaces.items():
        lo = math.inf
        for i, (G, f, lam, x, y, s) in enumerate(_estimate_instances(space, 1000, 100)):
            step = prox_upper(f, lam, x, G)
            if i % 2:
                y = geodesic_point(step.output, y, s)
            lo = min(lo, check_estimate_upper(step, y))
        worst[f"{name} upper"] = lo
        if not space.has_lower_bound:
            continue
        lo = math.inf
        for i, (G, f, lam, x, y, s) in enumerate(_estimate_instances(space, 1000, 200)):
            step = step_lower(f, lam / (2 * sum(f.weights)), x)
            if i % 2:
                y = geodesic_point(step.output, y, s) if G.contains(step.output, 1e-12) else y
            lo = min(lo, check_estimate_lower(step, y, concavity_constant(G)))
        worst[f"{name} lower"] = lo
    dt = time.perf_counter() - t0
    ok = min(worst.values()) >= -1e-7
    assert record(3, "per-step estimates", ok, dt, 30,
                  f"min residual {min(worst.values()):.2e} over {len(worst)} space/mode pairs x 1000")


def test_ppa_bound():
    t0 = time.perf_counter()
    E1 = euclidean(1)
    G = GeodesicBall(E1.base_point(), 2.0)
    y = E1.base_point()
    rec = ppa(squared_distance(y, G), constant(0.5), Point(E1, [1.0]), G, max_k=10_000, reference=y, stop_tol=0.0)
    xs = np.array([r.point.coords[0] for r in rec.rows])
    f = rec.column("f")
    k = np.arange(len(xs))
    bound = np.full(len(k), math.inf)
    bound[1:] = 1.0 / (2 * 0.5 * k[1:])
    err = float(np.max(np.abs(xs - 2.0 ** -k)))
    ok = len(xs) == 10_001 and err <= 1e-12 and bool(np.all(f <= bound)) and rec.status == "certified"
    dt = time.perf_counter() - t0
    assert record(4, "PPA bound", ok, dt, 1, f"10^4 steps, max |x_k - 2^-k| = {err:.1e}, f(x_k) <= 1/k everywhere")


def test_cyclic_envelope():
    t0 = time.perf_counter()
    doc = load("cyclic_sphere.yaml")
    assert doc["max_k"] == 10_000
    rec = build_and_run(doc)
    G = rec.region
    fs = rec.functionals
    grid_point, _ = grid_minimize(weighted_sum(fs, [1.0] * len(fs)), G)
    gap = distance(rec.final, grid_point)
    env = rec.column("envelope")
    env = env[~np.isnan(env)]
    lams = rec.extra["cycle_lambdas"]
    closed = envelope_closed_form(lams, rec.K, envelope_constant(rec.L, len(fs), "upper"), rec.envelope[0])
    rel = float(np.max(np.abs(np.array(rec.envelope) - closed) / closed))
    ok = (gap <= 2 * grid_spacing(G) and len(env) == 10_001 and float(env.min()) >= 0.0 and rel <= 1e-12
          and rec.status == "certified")
    dt = time.perf_counter() - t0
    assert record(5, "cyclic PPA envelope", ok, dt, 120,
                  f"terminal gap {gap:.1e} (2 x grid {2 * grid_spacing(G):.1e}), min envelope slack "
                  f"{env.min():.1e} over {len(env)} cycles, recursion vs closed form {rel:.1e}")


def test_rate_bound():
    t0 = time.perf_counter()
    n = 100_000
    bad_cells, bad_k, last = 0, 0, -1
    for alpha in (0.5, 1.0, 1.5, 2.0):
        for beta in (0.1, 1.0, 10.0):
            for a0 in (0.0, 1.0, 10.0):
                a = rate_recursion(alpha, beta, a0, n)
                env = np.array([rate_envelope(alpha, beta, a0, k) for k in range(n + 1)])
                viol = np.flatnonzero(a > env + 1e-10)
                if viol.size:
                    bad_cells += 1
                    bad_k += viol.size
                    last = max(last, int(viol[-1]))
    dt = time.perf_counter() - t0
    detail = f"{36 - bad_cells}/36 cells hold for all k <= 10^5"
    if bad_cells:
        detail += f"; {bad_k} violations, all at k <= {last}"
    assert record(6, "rate bound", bad_cells == 0, dt, 30, detail)


def test_law_of_large_numbers():
    t0 = time.perf_counter()
    doc = load("lln_sphere.yaml")
    G = cfg.region_of(doc)
    anchors = [f.anchor for f in cfg.functionals_of(doc, G)]
    ref, _ = expectation_and_variance(MeasureSpec.uniform([squared_distance(a, G) for a in anchors]))
    start = int(doc["fit_start"])
    D = np.array([
        [r.dist_ref**2 for r in inductive_mean(anchors, G, child_seed(doc["seed"], i), max_k=doc["max_k"],
                                                reference=ref).rows]
        for i in range(doc["trials"])
    ])
    ks = np.arange(1, D.shape[1] + 1, dtype=float)
    keep = ks >= start
    C = float(np.max(ks[keep] * D[:, keep]))
    below = bool(np.all(D[:, keep] <= C / ks[keep]))
    slope, _ = loglog_fit(ks[keep], np.median(D, axis=0)[keep])
    E2 = euclidean(2)
    pts = [Point(E2, p) for p in ([0.3, -0.2], [-1.0, 0.5], [0.8, 0.9], [0.0, -1.2])]
    rec = inductive_mean(pts, GeodesicBall(E2.base_point(), 2.0), seed=5, max_k=10_000)
    Y = np.array([p.coords for p in pts])[rec.extra["draws"]]
    running = np.cumsum(Y, axis=0) / ks[:, None]
    err = float(np.max(np.abs(np.array([r.point.coords for r in rec.rows]) - running)))
    ok = D.shape == (50, 10_000) and below and -1.3 <= slope <= -0.7 and err <= 1e-12
    dt = time.perf_counter() - t0
    assert record(7, "law of large numbers", ok, dt, 120,
                  f"median slope {slope:.3f}, C = {C:.3g} fitted in-sample, euclidean running mean error {err:.1e}")


def test_variance_and_jensen():
    t0 = time.perf_counter()
    doc = load("jensen_sphere.yaml")
    G = cfg.region_of(doc)
    mu = MeasureSpec.uniform(cfg.functionals_of(doc, G))
    ref, _ = expectation_and_variance(mu)
    var = verify_variance_inequality(mu, samples=1000, expectation=ref)
    f_convex = cfg.functional_of(G, doc["f_convex"])
    gaps = []
    for i in range(doc["trials"]):
        rec = jensen_run(mu, f_convex, seed=child_seed(doc["seed"], i), max_k=doc["max_k"], expectation=ref)
        gaps.append(float(np.min(rec.column("jensen"))))
    E2 = euclidean(2)
    B = GeodesicBall(E2.base_point(), 1.0)
    two = MeasureSpec.uniform([squared_distance(Point(E2, [-0.4, 0.1]), B), squared_distance(Point(E2, [0.5, 0.3]), B)])
    eq = verify_variance_inequality(two, samples=1000)
    flat = max(abs(eq.min_margin), abs(eq.details["max_residual"]))
    ok = var.min_margin >= -1e-7 and len(gaps) == 20 and min(gaps) >= 0.0 and flat <= 1e-10
    dt = time.perf_counter() - t0
    assert record(8, "variance inequality and Jensen", ok, dt, 60,
                  f"variance residual {var.min_margin:.1e}, min Z_k - f(S_k) {min(gaps):.1e} over 20 runs, "
                  f"euclidean equality {flat:.1e}")


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    same = True
    runs = (("run", "stochastic_sphere.yaml", (1, 1, 4)), ("run", "lln_sphere.yaml", (1, 3)),
            ("sweep", "sweep_ppa.yaml", (1, 2)))
    for cmd, name, jobs in runs:
        doc = load(name)
        doc.pop("output", None)
        if name == "lln_sphere.yaml":
            doc.update(trials=6, max_k=2000)
        path = tmp_path / name
        path.write_text(yaml.safe_dump(doc))
        trees = []
        for i, j in enumerate(jobs):
            out = tmp_path / f"{name}.{i}"
            assert main([cmd, str(path), "--out", str(out), "--jobs", str(j)]) == 0
            trees.append(_tree(out))
        same &= bool(trees[0]) and all(t == trees[0] for t in trees[1:])
    dt = time.perf_counter() - t0
    assert record(9, "determinism", same, dt, None,
                  "byte-identical outputs across repeat runs and --jobs 1/2/3/4 for run and sweep")
