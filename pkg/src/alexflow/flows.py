"""Discrete-time gradient flows with per-iteration certificates.

Every flow returns a :class:`RunRecord`: a dense log of iterates together
with residuals of the inequalities the iteration is supposed to satisfy.
A residual is a "slack" -- nonnegative when the inequality holds.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, InvalidArgument
from .functionals import FunctionalSpec, concavity_constant, evaluate_many, squared_distance, weighted_sum
from .oracle import grid_minimize, grid_spacing, verify_k_convexity
from .resolvent import argmin_on_region, check_estimate_lower, check_estimate_upper, prox_upper, step_lower
from .schedules import StepSchedule
from .spaces import GeodesicBall, Point, _dist, _geodesic, distance

GENERATOR = "philox4x64"
RESIDUAL_TOL = 1e-7
STOP_TOL = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def child_seed(seed: int, index: int) -> int:
    """Seed of the index-th independent trial derived from a master seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, np.uint64)[0])


def _f(f: FunctionalSpec, x: Point) -> float:
    return float(evaluate_many(f, x.coords))


# ---------------------------------------------------------------------------
# records


@dataclass
class IterateRow:
    m: int
    point: Point
    f: float
    dist_ref: float
    lam: float = math.nan
    residuals: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)


@dataclass
class RunRecord:
    flow: str
    region: GeodesicBall
    functionals: list
    K: float
    L: float
    schedule: StepSchedule | None
    x0: Point
    reference: Point | None = None
    seed: int | None = None
    generator: str | None = None
    tolerance: float = RESIDUAL_TOL
    rows: list = field(default_factory=list)
    envelope: list = field(default_factory=list)
    events: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    config: dict | None = None
    status: str = "running"

    @property
    def space(self):
        return self.region.space

    def append(self, row: IterateRow) -> None:
        first = self.rows[0].m if self.rows else row.m
        if row.m != first + len(self.rows):
            raise InvalidArgument("iterate log must stay dense in m")
        self.rows.append(row)

    def residual_names(self) -> list:
        names = {}
        for row in self.rows:
            names.update(dict.fromkeys(row.residuals))
        return list(names)

    def value_names(self) -> list:
        names = {}
        for row in self.rows:
            names.update(dict.fromkeys(row.values))
        return list(names)

    def min_residual(self):
        """(value, row, name) of the smallest stored residual."""
        best = (math.inf, None, None)
        for row in self.rows:
            for name, r in row.residuals.items():
                if r < best[0]:
                    best = (r, row, name)
        return best

    def violations(self, tol: float | None = None) -> list:
        tol = self.tolerance if tol is None else tol
        return [
            (row, name, r) for row in self.rows for name, r in row.residuals.items() if not r >= -tol
        ]

    def finish(self) -> "RunRecord":
        self.status = "violated" if self.violations() else "certified"
        return self

    @property
    def final(self) -> Point:
        return self.rows[-1].point

    def column(self, name: str) -> np.ndarray:
        if name in ("f", "dist_ref", "lam", "m"):
            return np.array([getattr(row, name) for row in self.rows], dtype=float)
        return np.array(
            [row.residuals.get(name, row.values.get(name, math.nan)) for row in self.rows], dtype=float
        )

    # export

    def coordinate_names(self) -> list:
        if self.space.kind == "spider":
            return ["leg", "r"]
        return [f"x{i}" for i in range(self.space.ambient_dim)]

    def csv_header(self) -> list:
        return (
            ["m", *self.coordinate_names(), "f", "dist_ref", "lambda"]
            + self.residual_names()
            + self.value_names()
        )

    def to_csv(self, fh) -> None:
        res, vals = self.residual_names(), self.value_names()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.csv_header())
        for row in self.rows:
            coords = row.point.to_list()
            if self.space.kind == "spider":
                coords = [str(coords[0]), _num(coords[1])]
            else:
                coords = [_num(c) for c in coords]
            w.writerow(
                [str(row.m), *coords, _num(row.f), _num(row.dist_ref), _num(row.lam)]
                + [_num(row.residuals[n]) if n in row.residuals else "" for n in res]
                + [_num(row.values[n]) if n in row.values else "" for n in vals]
            )

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    def to_dict(self) -> dict:
        worst, row, name = self.min_residual()
        return {
            "flow": self.flow,
            "status": self.status,
            "space": self.space.to_dict(),
            "region": self.region.to_dict(),
            "functionals": [f.to_dict() for f in self.functionals],
            "K": self.K,
            "L": self.L,
            "schedule": self.schedule.to_dict() if self.schedule else None,
            "x0": self.x0.to_list(),
            "reference": self.reference.to_list() if self.reference is not None else None,
            "seed": self.seed,
            "generator": self.generator,
            "tolerance": self.tolerance,
            "iterations": len(self.rows),
            "final": self.final.to_list() if self.rows else None,
            "min_residual": None if row is None else {"value": worst, "name": name, "m": row.m},
            "envelope": [float(a) for a in self.envelope],
            "events": self.events,
            "summary": self.summary,
            "config": self.config,
        }


def _num(v: float) -> str:
    return "%.17g" % v


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """A finitely supported probability measure on functionals."""

    support: tuple
    weights: tuple

    def __post_init__(self):
        support = tuple(self.support)
        weights = tuple(float(w) for w in self.weights)
        if not support or len(support) != len(weights):
            raise InvalidArgument("need one weight per support functional")
        if any(w < 0 for w in weights) or abs(math.fsum(weights) - 1.0) > 1e-12:
            raise InvalidArgument("weights must be a probability vector")
        G = support[0].region
        for f in support[1:]:
            if f.space != G.space or f.region.radius != G.radius or distance(f.region.center, G.center) > 0:
                raise InvalidArgument("support functionals must share one region")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, support) -> "MeasureSpec":
        support = tuple(support)
        return cls(support, (1.0 / len(support),) * len(support))

    @property
    def region(self) -> GeodesicBall:
        return self.support[0].region

    @property
    def K(self) -> float:
        return min(f.K for f in self.support)

    @property
    def L(self) -> float:
        return max(f.L for f in self.support)

    def check_moduli(self) -> None:
        if not all(f.K_certified for f in self.support):
            raise InvalidArgument("support functionals need certified convexity moduli")
        if not self.K > 0:
            raise InvalidArgument("support functionals need a common modulus K > 0")

    def functional(self) -> FunctionalSpec:
        return weighted_sum(self.support, self.weights)

    def anchors(self) -> list:
        pts = []
        for f in self.support:
            if not f.is_single_squared_distance or f.kind == "weighted_sum":
                raise InvalidArgument("measure must be supported on squared distances")
            pts.append(f.anchor)
        return pts

    def to_dict(self) -> dict:
        return {"support": [f.to_dict() for f in self.support], "weights": list(self.weights)}


# ---------------------------------------------------------------------------
# reference minimizers


def reference_minimizer(f: FunctionalSpec, G: GeodesicBall | None = None, resolution: int | None = None):
    """Grid-oracle minimizer polished by descent; returns ``(point, info)``.

    The polished point must land within two grid spacings of the grid
    minimizer, otherwise the two disagree and ConvergenceFailure is raised.
    """
    G = G or f.region
    grid_pt, grid_val = grid_minimize(f, G, resolution)
    y = argmin_on_region(f, G, grid_pt)
    h = grid_spacing(G, resolution)
    gap = distance(y, grid_pt)
    if gap > 2 * h or _f(f, y) > grid_val + 1e-12 * max(1.0, abs(grid_val)):
        raise ConvergenceFailure("polished minimizer disagrees with the grid oracle", y, gap)
    return y, {"grid_point": grid_pt.to_list(), "grid_value": grid_val, "grid_spacing": h, "grid_gap": gap}


def _reference(f, G, reference):
    if reference is not None:
        return reference, {}
    return reference_minimizer(f, G)


def _check_start(x0: Point, G: GeodesicBall) -> None:
    if x0.space != G.space:
        raise InvalidArgument("start point and region live in different spaces")
    if not G.contains(x0, 1e-9):
        raise InvalidArgument("start point must lie in the region")


# ---------------------------------------------------------------------------
# proximal point algorithm


def ppa(f: FunctionalSpec, schedule: StepSchedule, x0: Point, G: GeodesicBall | None = None,
        max_k: int = 1000, reference: Point | None = None, stop_tol: float = STOP_TOL) -> RunRecord:
    """x_k = J_{lam_{k-1}}(x_{k-1}) with certificates for monotonicity and the
    suboptimality bound f(x_k) - f(y) <= d(y, x0)^2 / (2 sum lam)."""
    G = G or f.region
    if not schedule.divergent_sum:
        raise InvalidArgument("ppa needs a schedule with divergent sum")
    G.require_upper()
    _check_start(x0, G)
    y, info = _reference(f, G, reference)
    fy = _f(f, y)
    d0 = distance(y, x0) ** 2
    rec = RunRecord("ppa", G, [f], f.K, f.L, schedule, x0, y)
    rec.summary["reference"] = info
    x, fx, total = x0, _f(f, x0), 0.0
    rec.append(IterateRow(0, x, fx, distance(x, y)))
    for k in range(1, max_k + 1):
        lam = schedule.value(k - 1)
        step = prox_upper(f, lam, x, G)
        total += lam
        res = {
            "monotone": fx - step.f_value_out,
            "prox_descent": step.certificate["prox_descent"],
            "suboptimality": d0 / (2 * total) - (step.f_value_out - fy),
            "estimate": check_estimate_upper(step, y, fy),
        }
        x, fx = step.output, step.f_value_out
        rec.append(IterateRow(k, x, fx, distance(x, y), lam, res))
        if step.displacement < stop_tol:
            rec.events.append({"m": k, "event": "stopped", "displacement": step.displacement})
            break
    return rec.finish()


def cyclic_ppa(fs, schedule: StepSchedule, x0: Point, G: GeodesicBall | None = None, mode: str = "upper",
               max_k: int = 1000, reference: Point | None = None, shuffle: bool = False,
               seed: int | None = None, stop_tol: float = STOP_TOL) -> RunRecord:
    """Cyclic proximal splitting x_{kn+i} = J^{f_i}_{lam_k}(x_{kn+i-1}).

    ``max_k`` counts cycles.  ``mode='upper'`` uses Moreau-Yosida resolvents,
    ``mode='lower'`` gradient-exponential steps; in lower mode a step that
    would leave G is retried with half the step size, and the shrink is
    logged as an event.  Certificates per sub-step: the intra-cycle drift
    bound and the per-step estimate against the reference minimizer.
    """
    fs = list(fs)
    if not fs:
        raise InvalidArgument("need at least one functional")
    G = G or fs[0].region
    if not (schedule.divergent_sum and schedule.square_summable):
        raise InvalidArgument("cyclic_ppa needs a divergent-sum, square-summable schedule")
    if mode == "upper":
        G.require_upper()
    elif mode == "lower":
        if not G.space.has_lower_bound:
            raise InvalidArgument(f"{G.space.kind} has no lower curvature bound: use mode='upper'")
        Kc = concavity_constant(G)
    else:
        raise InvalidArgument("mode is 'upper' or 'lower'")
    _check_start(x0, G)
    n = len(fs)
    total = fs[0] if n == 1 else weighted_sum(fs, [1.0] * n)
    y, info = _reference(total, G, reference)
    L = max(f.L for f in fs)
    drift_c = 2.0 if mode == "upper" else 1.0
    rng = make_rng(seed if seed is not None else 0) if shuffle else None
    rec = RunRecord(
        "cyclic_ppa", G, fs, total.K, L, schedule, x0, y,
        seed=seed if shuffle else None, generator=GENERATOR if shuffle else None,
    )
    rec.summary.update({"mode": mode, "n": n, "reference": info})
    rec.extra["cycle_lambdas"] = []
    rec.extra["cycle_rows"] = []
    x = x0
    rec.append(IterateRow(0, x, _f(total, x), distance(x, y)))
    m = 0
    for k in range(max_k):
        lam = schedule.value(k)
        rec.extra["cycle_lambdas"].append(lam)
        rec.extra["cycle_rows"].append(len(rec.rows) - 1)
        start = x
        order = rng.permutation(n) if rng is not None else range(n)
        biggest = 0.0
        for i, idx in enumerate(order, start=1):
            f = fs[idx]
            if mode == "upper":
                step = prox_upper(f, lam, x, G)
                est = check_estimate_upper(step, y)
            else:
                lam_i = lam
                step = step_lower(f, lam_i, x)
                while not G.contains(step.output, 1e-12):
                    lam_i /= 2
                    step = step_lower(f, lam_i, x)
                    if lam_i < 1e-300:
                        raise ConvergenceFailure("step size collapsed while staying in the region", x)
                if lam_i != lam:
                    rec.events.append({"m": m + 1, "event": "lambda_shrink", "from": lam, "to": lam_i})
                est = check_estimate_lower(step, y, Kc)
            m += 1
            x = step.output
            biggest = max(biggest, step.displacement)
            res = {"drift": drift_c * lam * L * i - distance(start, x), "estimate": est}
            res.update({key: v for key, v in step.certificate.items() if key in ("prox_descent", "contraction")})
            rec.append(IterateRow(m, x, _f(total, x), distance(x, y), step.lam, res, {"component": float(idx)}))
        if biggest < stop_tol:
            rec.events.append({"m": m, "event": "stopped", "cycle": k})
            break
    rec.extra["cycle_rows"].append(len(rec.rows) - 1)
    return rec.finish()


# ---------------------------------------------------------------------------
# envelopes


def envelope_constant(L: float, n: int, mode: str, concavity: float | None = None) -> float:
    if mode == "upper":
        return 2.0 * L * L * n * (n + 1)
    if mode == "lower":
        if concavity is None:
            raise InvalidArgument("lower mode needs the concavity constant")
        return L * L * n * (concavity / 2 + n - 1)
    raise InvalidArgument("mode is 'upper' or 'lower'")


def envelope_recursion(lams, K: float, C: float, a0: float) -> np.ndarray:
    """a_0..a_N of a_{k+1} = (1 - lam_k K) a_k + C lam_k^2."""
    lams = np.asarray(lams, dtype=float)
    if np.any(lams * K >= 1):
        raise InvalidArgument("the envelope needs lam_k K < 1 for every k")
    a = np.empty(len(lams) + 1)
    a[0] = a0
    for k, lam in enumerate(lams):
        a[k + 1] = (1 - lam * K) * a[k] + C * lam * lam
    return a


def envelope_closed_form(lams, K: float, C: float, a0: float) -> np.ndarray:
    """Unrolled envelope:
    a_k = a0 prod_{i<k} (1 - lam_i K) + C sum_{j<k} lam_j^2 prod_{j<i<k} (1 - lam_i K).
    """
    lams = np.asarray(lams, dtype=float)
    q = 1 - lams * K
    out = np.empty(len(lams) + 1)
    out[0] = a0
    for k in range(1, len(lams) + 1):
        # suffix products prod_{j<i<k} q_i for j = k-1, ..., 0
        suffix = np.concatenate(([1.0], np.cumprod(q[k - 1:0:-1])))[::-1]
        out[k] = a0 * suffix[0] * q[0] + C * math.fsum(lams[:k] ** 2 * suffix)
    return out


def envelope_kconvex(run: RunRecord, K: float, L: float, n: int, mode: str) -> np.ndarray:
    """Envelope a_k for d(x_{kn}, y)^2 and its certificate in the run record.

    ``a_0 = d(x_0, y)^2`` with y the run's reference minimizer.  The residual
    ``envelope = a_k - d(x_{kn}, y)^2`` is stored on the row m = kn.
    """
    if not K > 0:
        raise InvalidArgument("the envelope needs K > 0")
    lams = run.extra.get("cycle_lambdas")
    if lams is None:
        raise InvalidArgument("run has no cycle structure")
    concavity = concavity_constant(run.region) if mode == "lower" else None
    C = envelope_constant(L, n, mode, concavity)
    a = envelope_recursion(lams, K, C, distance(run.x0, run.reference) ** 2)
    if any(e["event"] == "lambda_shrink" for e in run.events):
        run.events.append({"event": "envelope_uses_nominal_lambdas"})
    run.envelope = list(a)
    for k, idx in enumerate(run.extra["cycle_rows"]):
        if k >= len(a):
            break
        row = run.rows[idx]
        row.residuals["envelope"] = a[k] - row.dist_ref**2
    run.finish()
    return a


# ---------------------------------------------------------------------------
# stochastic flows


def _draws(weights, n: int, seed: int) -> np.ndarray:
    return make_rng(seed).choice(len(weights), size=n, p=np.asarray(weights))


def stochastic_ppa(mu: MeasureSpec, schedule: StepSchedule, S0: Point, G: GeodesicBall | None = None,
                   seed: int = 0, max_k: int = 1000, expectation: Point | None = None,
                   mode: str = "upper") -> RunRecord:
    """S_{k+1} = J^{f_k}_{lam_k}(S_k) with f_k drawn i.i.d. from mu."""
    G = G or mu.region
    mu.check_moduli()
    K, L = mu.K, mu.L
    if not schedule.divergent_sum or schedule.kind == "constant":
        raise InvalidArgument("stochastic_ppa needs lam_k -> 0 with divergent sum")
    if np.any(schedule.values(max_k) * K >= 1):
        raise InvalidArgument("stochastic_ppa needs lam_k K < 1; cap the schedule")
    if mode == "upper":
        G.require_upper()
    elif mode == "lower":
        if not G.space.has_lower_bound:
            raise InvalidArgument(f"{G.space.kind} has no lower curvature bound")
        Kc = concavity_constant(G)
    else:
        raise InvalidArgument("mode is 'upper' or 'lower'")
    _check_start(S0, G)
    if expectation is None:
        expectation, _ = expectation_and_variance(mu)
    g = mu.functional()
    draws = _draws(mu.weights, max_k, seed)
    rec = RunRecord(
        "stochastic_ppa", G, list(mu.support), K, L, schedule, S0, expectation, seed=seed,
        generator=GENERATOR,
    )
    rec.summary["mode"] = mode
    rec.extra["draws"] = draws
    S = S0
    rec.append(IterateRow(0, S, _f(g, S), distance(S, expectation)))
    for k in range(max_k):
        lam = schedule.value(k)
        f = mu.support[draws[k]]
        if mode == "upper":
            step = prox_upper(f, lam, S, G)
            res = {"estimate": check_estimate_upper(step, expectation), "drift": 2 * lam * L - step.displacement}
        else:
            lam_i = lam
            step = step_lower(f, lam_i, S)
            while not G.contains(step.output, 1e-12):
                lam_i /= 2
                step = step_lower(f, lam_i, S)
            if lam_i != lam:
                rec.events.append({"m": k + 1, "event": "lambda_shrink", "from": lam, "to": lam_i})
            res = {"estimate": check_estimate_lower(step, expectation, Kc), "drift": lam * L - step.displacement}
        S = step.output
        rec.append(IterateRow(k + 1, S, _f(g, S), distance(S, expectation), step.lam, res, {"draw": float(draws[k])}))
    return rec.finish()


def _stream_path(space, anchor_coords: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Coordinates of S_1..S_N for S_{k+1} = S_k #_{1/(k+1)} Y_{k+1}."""
    Y = anchor_coords[idx]
    out = np.empty_like(Y)
    out[0] = Y[0]
    for k in range(1, len(idx)):
        out[k] = _geodesic(space, out[k - 1], Y[k], 1.0 / (k + 1))
    return out


def inductive_mean(anchors, G: GeodesicBall, seed: int | None = 0, weights=None, order=None,
                   max_k: int = 1000, reference: Point | None = None) -> RunRecord:
    """S_1 = Y_1, S_{k+1} = S_k #_{1/(k+1)} Y_{k+1}.

    The stream Y is either the explicit ``order`` (indices into ``anchors``)
    or i.i.d. draws from ``weights`` (uniform by default) with the seeded
    generator.  Rows start at m = 1.
    """
    anchors = list(anchors)
    if not anchors:
        raise InvalidArgument("need at least one anchor")
    G.require_upper()
    for a in anchors:
        _check_start(a, G)
    n = len(anchors)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if order is not None:
        idx = np.asarray(order, dtype=int)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= n:
            raise InvalidArgument("stream order must index the anchors")
        seed = None
    else:
        idx = _draws(w, max_k, seed)
    mu = MeasureSpec(tuple(squared_distance(a, G) for a in anchors), tuple(w / w.sum()))
    g = mu.functional()
    if reference is None:
        reference, _ = expectation_and_variance(mu)
    space = G.space
    P = _stream_path(space, np.array([a.coords for a in anchors]), idx)
    fv = evaluate_many(g, P)
    dv = _dist(space, P, reference.coords)
    rec = RunRecord(
        "inductive_mean", G, list(mu.support), mu.K, mu.L, None, anchors[idx[0]], reference,
        seed=seed, generator=GENERATOR if seed is not None else None,
    )
    rec.extra["draws"] = idx
    for k in range(len(idx)):
        rec.rows.append(IterateRow(
            k + 1, Point._trusted(space, P[k]), float(fv[k]), float(dv[k]), math.nan, {},
            {"draw": float(idx[k])},
        ))
    return rec.finish()


def jensen_run(mu: MeasureSpec, f_convex: FunctionalSpec, seed: int = 0, max_k: int = 1000,
               expectation: Point | None = None, convexity_samples: int = 1000) -> RunRecord:
    """Coupled inductive mean S_k and running average Z_k of f(Y_k).

    Certifies f(S_k) <= Z_k at every k and, at the end, f(E mu) <= E f.
    """
    anchors = mu.anchors()
    G = mu.region
    G.require_upper()
    if f_convex.space != G.space:
        raise InvalidArgument("f_convex lives in another space")
    report = verify_k_convexity(f_convex, G, 0.0, convexity_samples)
    if not report.passed:
        raise InvalidArgument(f"f_convex is not convex on the region (defect {report.min_margin:.3g})")
    if expectation is None:
        expectation, _ = expectation_and_variance(mu)
    space = G.space
    draws = _draws(mu.weights, max_k, seed)
    A = np.array([a.coords for a in anchors])
    P = _stream_path(space, A, draws)
    fS = evaluate_many(f_convex, P)
    fY = evaluate_many(f_convex, A)[draws]
    dv = _dist(space, P, expectation.coords)
    rec = RunRecord(
        "jensen", G, [f_convex, *mu.support], mu.K, mu.L, None, anchors[draws[0]], expectation,
        seed=seed, generator=GENERATOR,
    )
    rec.extra["draws"] = draws
    Z = 0.0
    for k in range(max_k):
        Z = float(fY[k]) if k == 0 else (k / (k + 1)) * Z + (1 / (k + 1)) * float(fY[k])
        rec.rows.append(IterateRow(
            k + 1, Point._trusted(space, P[k]), float(fS[k]), float(dv[k]), math.nan,
            {"jensen": Z - float(fS[k])}, {"Z": Z},
        ))
    f_exp = _f(f_convex, expectation)
    exp_f = math.fsum(w * _f(f_convex, a) for w, a in zip(mu.weights, anchors))
    rec.summary.update({"f_of_expectation": f_exp, "expected_f": exp_f, "jensen_gap": exp_f - f_exp})
    rec.finish()
    if exp_f - f_exp < -rec.tolerance:
        rec.status = "violated"
    return rec


def expectation_and_variance(mu: MeasureSpec, resolution: int | None = None):
    """(E mu, var mu): minimizer and minimum of the mu-average over the region."""
    if not mu.K > 0:
        raise InvalidArgument("expectation needs a common modulus K > 0")
    g = mu.functional()
    y, _ = reference_minimizer(g, mu.region, resolution)
    return y, _f(g, y)


# ---------------------------------------------------------------------------
# rate fits


def loglog_fit(ks, values):
    """Least-squares fit log v = log C + slope log k; returns (slope, C)."""
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (ks > 0) & (values > 0)
    if keep.sum() < 2:
        raise InvalidArgument("need two positive points to fit a slope")
    slope, icpt = np.polyfit(np.log(ks[keep]), np.log(values[keep]), 1)
    return float(slope), float(math.exp(icpt))


def median_decay(records, start: int = 1):
    """Pointwise median of d(., ref)^2 over runs with a common length; returns (ks, medians)."""
    n = min(len(r.rows) for r in records)
    D = np.array([[row.dist_ref**2 for row in r.rows[:n]] for r in records])
    ks = np.array([row.m for row in records[0].rows[:n]], dtype=float)
    keep = ks >= start
    return ks[keep], np.median(D, axis=0)[keep]


__all__ = [
    "GENERATOR", "IterateRow", "MeasureSpec", "RunRecord", "child_seed",
    "cyclic_ppa", "envelope_closed_form", "envelope_constant", "envelope_kconvex", "envelope_recursion",
    "expectation_and_variance", "inductive_mean", "jensen_run", "loglog_fit", "make_rng",
    "median_decay", "ppa", "reference_minimizer", "stochastic_ppa",
]
