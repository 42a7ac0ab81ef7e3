"""Perturbation experiments on the solution map and the optimal value.

Every experiment perturbs only the objective: ``f + eps * g`` with ``g`` of
unit coefficient norm in the degree-``d`` monomial basis.  Distances to
Sol(K, f) are measured against the finite list of minimisers returned by the
solver, which overestimates the true distance when Sol(K, f) is a continuum.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import Polyhedron
from .poly import Polynomial, basis_size, l2_norm
from .regularity import Status, classify_problem
from .solver import SolveOptions, SolveStatus, solve

NORM_TOL = 1e-12
EXCESS_FLOOR = 1e-10


def _threads():
    try:
        return max(1, int(os.environ.get("ASYMPTOPT_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    """Ordered map, threaded when ASYMPTOPT_THREADS > 1.  Results do not depend
    on the thread count because each cell carries its own seed."""
    items = list(items)
    k = _threads()
    if k == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


@dataclass(eq=False)
class PerturbationPlan:
    base: Polynomial
    directions: list
    scales: list
    d: int
    seed: int = 0

    def __post_init__(self):
        self.scales = [float(s) for s in self.scales]
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if any(a <= b for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError("scales must be strictly decreasing")
        for k, g in enumerate(self.directions):
            if g.n != self.base.n:
                raise ValueError(f"direction {k} has {g.n} variables, expected {self.base.n}")
            if abs(l2_norm(g, self.d) - 1.0) > NORM_TOL:
                raise ValueError(f"direction {k} does not have unit degree-{self.d} norm")


def random_direction(n: int, d: int, rng) -> Polynomial:
    """Uniform point on the unit sphere of the degree-<=d coefficient space."""
    v = rng.standard_normal(basis_size(n, d))
    v /= np.linalg.norm(v)
    return Polynomial.from_coefficients(v, n, d)


def make_plan(f: Polynomial, scales, d: int | None = None, random: int = 0,
              coordinate: bool = True, directions=None, seed: int = 0) -> PerturbationPlan:
    """Plan with the given directions, or else the degree-1 coordinate monomials
    (both signs) followed by ``random`` uniform directions."""
    d = f.degree if d is None else d
    if directions is None:
        directions = []
        if coordinate:
            for i in range(f.n):
                e = [0] * f.n
                e[i] = 1
                directions += [Polynomial.monomial(e), Polynomial.monomial(e, -1.0)]
        rng = np.random.default_rng(seed)
        directions += [random_direction(f.n, d, rng) for _ in range(random)]
    return PerturbationPlan(f, list(directions), list(scales), d, seed)


def distance_to_set(x, points) -> float:
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return math.inf
    return float(np.min(np.linalg.norm(points - np.asarray(x, dtype=float), axis=1)))


def _excess(minimizers, base_points) -> float:
    if len(minimizers) == 0:
        return math.nan
    return max(distance_to_set(x, base_points) for x in minimizers)


@dataclass
class StabilityRecord:
    direction_id: int
    epsilon: float
    value_gap: float
    excess: float
    status: str


@dataclass(eq=False)
class StabilityReport:
    records: list
    base_value: float
    base_minimizers: np.ndarray
    H_hat: float | None = None
    ell_hat: float | None = None
    L_hat: float | None = None
    usable_scales: int = 0
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"base_value": self.base_value,
                "base_minimizers": self.base_minimizers.tolist(),
                "H_hat": self.H_hat, "ell_hat": self.ell_hat, "L_hat": self.L_hat,
                "usable_scales": self.usable_scales, "notes": list(self.notes),
                "records": [vars(r).copy() for r in self.records]}

    def to_csv(self) -> str:
        return records_to_csv(self.records)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["direction_id", "epsilon", "value_gap", "excess", "status"])
    for r in records:
        w.writerow([r.direction_id, repr(r.epsilon), repr(r.value_gap), repr(r.excess),
                    r.status])
    return buf.getvalue()


def _base_solution(K, f, d, opts):
    report = solve(K, f, opts, d=d)
    if report.status is not SolveStatus.FOUND_MINIMUM:
        raise ValueError(f"base problem did not solve: {report.status}")
    return report


def _run_cells(K, plan, opts, base):
    cells = [(j, g, eps) for j, g in enumerate(plan.directions) for eps in plan.scales]

    def run(cell):
        j, g, eps = cell
        rep = solve(K, plan.base + eps * g, opts, d=plan.d)
        if rep.status is SolveStatus.FOUND_MINIMUM:
            return StabilityRecord(j, eps, abs(rep.value - base.value),
                                   _excess(rep.minimizers, base.minimizers), str(rep.status))
        value = rep.value if rep.status is SolveStatus.UNBOUNDED_BELOW else math.nan
        return StabilityRecord(j, eps, abs(value - base.value), math.nan, str(rep.status))

    return _map(run, cells)


def fit_power_law(eps, y):
    """Least-squares fit of log y = log c + H log eps; returns (H, c)."""
    slope, icpt = np.polyfit(np.log(eps), np.log(y), 1)
    return float(slope), float(math.exp(icpt))


def holder_experiment(K: Polyhedron, f: Polynomial, plan: PerturbationPlan,
                      opts: SolveOptions | None = None) -> StabilityReport:
    """Fit excess(eps) ~ ell * eps^H over the plan's cells."""
    opts = opts or SolveOptions(seed=plan.seed)
    base = _base_solution(K, f, plan.d, opts)
    records = _run_cells(K, plan, opts, base)
    report = StabilityReport(records, base.value, base.minimizers)
    if len(base.minimizers) > 1:
        report.notes.append("discrete solution approximation")
    ok = [r for r in records if r.status == str(SolveStatus.FOUND_MINIMUM)]
    if ok:
        report.L_hat = max(r.value_gap / r.epsilon for r in ok)
    usable = [r for r in ok if r.excess > EXCESS_FLOOR]
    scales = sorted({r.epsilon for r in usable})
    report.usable_scales = len(scales)
    if len(scales) < 3 or scales[-1] / scales[0] < 100.0 * (1 - 1e-9):
        report.notes.append("insufficient data")
        return report
    H, ell = fit_power_law([r.epsilon for r in usable], [r.excess for r in usable])
    report.H_hat, report.ell_hat = H, ell
    if not 0.0 < H <= 2.0:
        report.notes.append("anomalous exponent")
    return report


@dataclass(eq=False)
class LipschitzReport:
    L_hat: float | None
    violations: int
    records: list
    base_value: float
    gk: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def to_json(self):
        return {"L_hat": self.L_hat, "violations": self.violations,
                "base_value": self.base_value, "notes": list(self.notes),
                "gk": [dict(g) for g in self.gk],
                "records": [vars(r).copy() for r in self.records]}

    def to_csv(self) -> str:
        return records_to_csv(self.records)


def gk_family(K: Polyhedron, f: Polynomial, witness, d: int | None = None, ks=range(1, 11),
              opts: SolveOptions | None = None) -> list:
    """Solve g^k = f - (1/k)(w_l x_l)^d for the largest witness coordinate l."""
    d = f.degree if d is None else d
    w = np.asarray(witness, dtype=float)
    l = int(np.argmax(np.abs(w)))
    xl = Polynomial.variables(f.n)[l]
    bump = (float(w[l]) * xl) ** d
    out = []
    for k in ks:
        rep = solve(K, f - bump / k, opts, d=d)
        out.append({"k": int(k), "index": l, "status": str(rep.status),
                    "value": rep.value,
                    "unbounded": rep.status is SolveStatus.UNBOUNDED_BELOW})
    return out


def count_growth_violations(records, factor=10.0) -> int:
    """Count consecutive scale pairs (per direction) where gap/eps jumps by more
    than ``factor`` as eps decreases."""
    by_dir = {}
    for r in records:
        if r.status == str(SolveStatus.FOUND_MINIMUM):
            by_dir.setdefault(r.direction_id, []).append(r)
    bad = 0
    for rs in by_dir.values():
        rs.sort(key=lambda r: -r.epsilon)
        ratios = [r.value_gap / r.epsilon for r in rs]
        for a, b in zip(ratios, ratios[1:]):
            if b > factor * max(a, 1e-9):
                bad += 1
    return bad


def value_lipschitz_experiment(K: Polyhedron, f: Polynomial, plan: PerturbationPlan,
                               opts: SolveOptions | None = None, ks=range(1, 11)) -> LipschitzReport:
    opts = opts or SolveOptions(seed=plan.seed)
    base = _base_solution(K, f, plan.d, opts)
    if not math.isfinite(base.value):
        raise ValueError("optimal value of the base problem is not finite")
    records = _run_cells(K, plan, opts, base)
    ok = [r for r in records if r.status == str(SolveStatus.FOUND_MINIMUM)]
    L = max((r.value_gap / r.epsilon for r in ok), default=None)
    report = LipschitzReport(L, count_growth_violations(records), records, base.value)
    verdict = base.verdict
    if verdict.status is Status.NON_REGULAR:
        report.notes.append("non-regular base: no Lipschitz guarantee")
        if len(verdict.witnesses):
            report.gk = gk_family(K, f, verdict.witnesses[0], plan.d, ks, opts)
    return report


def local_boundedness_probe(K: Polyhedron, f: Polynomial, eps: float, num_directions: int = 16,
                            seed: int = 0, d: int | None = None,
                            opts: SolveOptions | None = None) -> dict:
    """Solve f + g for g uniform in the eps-ball of the degree-d coefficient space."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    d = f.degree if d is None else d
    opts = opts or SolveOptions(seed=seed)
    verdict = classify_problem(K, f, d, tol=opts.tol_mu, seed=opts.seed)
    rng = np.random.default_rng(seed)
    rho = basis_size(f.n, d)
    gs = []
    for _ in range(num_directions):
        g = random_direction(f.n, d, rng)
        gs.append(eps * rng.uniform() ** (1.0 / rho) * g)
    reports = _map(lambda g: solve(K, f + g, opts, d=d), gs)
    radius = 0.0
    for rep in reports:
        if len(rep.minimizers):
            radius = max(radius, float(np.max(np.linalg.norm(rep.minimizers, axis=1))))
    return {"radius": radius,
            "all_bounded": all(r.status is SolveStatus.FOUND_MINIMUM for r in reports),
            "guaranteed": verdict.status.is_regular,
            "statuses": [str(r.status) for r in reports]}


def usc_probe(K: Polyhedron, f: Polynomial, scales, delta: float, seed: int = 0,
              directions=None, d: int | None = None, opts: SolveOptions | None = None) -> list:
    """Per scale: True if every perturbed minimiser lies within delta of Sol(K, f),
    None if some perturbed solve was inconclusive."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    d = f.degree if d is None else d
    opts = opts or SolveOptions(seed=seed)
    plan = make_plan(f, scales, d, directions=directions, seed=seed)
    base = _base_solution(K, f, d, opts)
    flags = []
    for eps in plan.scales:
        reps = _map(lambda g: solve(K, f + eps * g, opts, d=d), plan.directions)
        if any(r.status is not SolveStatus.FOUND_MINIMUM for r in reps):
            flags.append(None)
            continue
        flags.append(all(_excess(r.minimizers, base.minimizers) <= delta for r in reps))
    return flags


def residual_F(K: Polyhedron, f: Polynomial, phi: float, X) -> np.ndarray:
    """sum |Ex - c| + sum [b - Ax]_+ + |f(x) - phi| for each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.abs(f.evaluate_many(X) - phi)
    if K.E.shape[0]:
        out += np.abs(X @ K.E.T - K.c).sum(axis=1)
    if K.m:
        out += np.maximum(K.b - X @ K.A.T, 0.0).sum(axis=1)
    return out


def error_bound_probe(K: Polyhedron, f: Polynomial, sample_region=None, count: int = 2000,
                      seed: int = 0, quantile: float = 0.99,
                      opts: SolveOptions | None = None) -> dict:
    """Empirical (c, H) with d(x, Sol) <= c F(x)^H on a sampled region.

    ``sample_region`` is ``(center, radius)`` of a cube; by default a unit cube
    around the first minimiser.  H is the log-log least-squares slope and c the
    ``quantile`` of d / F^H, so about 1 - quantile of the pairs violate the bound.
    """
    opts = opts or SolveOptions(seed=seed)
    base = _base_solution(K, f, f.degree, opts)
    sol = base.minimizers
    if sample_region is None:
        center, radius = sol[0], 1.0
    else:
        center, radius = sample_region
    rng = np.random.default_rng(seed)
    X = np.asarray(center, dtype=float) + rng.uniform(-radius, radius, size=(count, K.n))
    dist = np.array([distance_to_set(x, sol) for x in X])
    F = residual_F(K, f, base.value, X)
    keep = (dist > 1e-12) & (F > 1e-14)
    if keep.sum() < 3:
        raise ValueError("degenerate sample: residuals vanish")
    H, _ = fit_power_law(F[keep], dist[keep])
    ratio = dist[keep] / F[keep] ** H
    c = float(np.quantile(ratio, quantile, method="higher"))
    viol = float(np.mean(ratio > c * (1 + 1e-12)))
    return {"c_hat": c, "H_hat": H, "violating_fraction": viol, "pairs": int(keep.sum())}
