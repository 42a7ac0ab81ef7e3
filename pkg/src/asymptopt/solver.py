"""Global minimisation of a polynomial over a polyhedron, driven by regularity.

``solve`` first classifies OP(K, f).  Coercive problems are minimised by
multistart projected-gradient descent over ``K`` intersected with growing
boxes; the box stops growing once no accepted minimiser touches its boundary
and two further doublings leave the minimiser set unchanged.  Problems that
are unbounded below get a descent-ray certificate instead, and non-regular
problems get the same bounded search, labelled heuristic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import EmptySetError, IterationLimitError, VerdictError
from .geometry import (Polyhedron, PolyhedralCone, _null_space, project,
                       sample_polyhedron)
from .poly import Polynomial
from .regularity import (TOL_MU, RegularityVerdict, Status, asymptotic_problem,
                         classify)


class SolveStatus(str, enum.Enum):
    FOUND_MINIMUM = "FoundMinimum"
    UNBOUNDED_BELOW = "UnboundedBelow"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self):
        return self.value


@dataclass
class SolveOptions:
    starts: int = 8
    random_starts: int = 4
    samples: int = 256
    box_init: float = 10.0
    max_rounds: int = 10
    confirm_doublings: int = 2
    value_tol: float = 1e-7
    dedupe_radius: float = 1e-5
    max_iter: int = 1000
    tol_mu: float = TOL_MU
    strict_tol: float = 1e-7
    seed: int = 0


@dataclass(eq=False)
class RayCertificate:
    """Unboundedness witness: f(anchor + t ray) decreases to -inf for t > t0."""

    ray: np.ndarray
    anchor: np.ndarray
    leading_value: float
    t0: float
    table: list

    def to_json(self):
        return {"ray": self.ray.tolist(), "anchor": self.anchor.tolist(),
                "leading_value": self.leading_value, "t0": self.t0,
                "table": [{"t": t, "value": v} for t, v in self.table]}


@dataclass(eq=False)
class SolveReport:
    status: SolveStatus
    minimizers: np.ndarray
    value: float
    verdict: RegularityVerdict
    certificate: RayCertificate | None = None
    kkt_residual: float = math.nan
    iterations: int = 0
    heuristic: bool = False
    trace: list = field(default_factory=list)

    def to_json(self):
        return {
            "status": self.status.value,
            "value": self.value,
            "minimizers": self.minimizers.tolist(),
            "heuristic": self.heuristic,
            "kkt_residual": self.kkt_residual,
            "iterations": self.iterations,
            "certificate": self.certificate.to_json() if self.certificate else None,
            "verdict": self.verdict.to_json(),
            "trace": self.trace,
        }


class _Objective:
    """A polynomial with cached derivative polynomials."""

    def __init__(self, f: Polynomial):
        self.f = f
        self.grad = f.gradient()
        self.hess = [[g.derivative(j) for j in range(f.n)] for g in self.grad]

    def value(self, x):
        return self.f.evaluate(x)

    def gradient(self, x):
        return np.array([g.evaluate(x) for g in self.grad])

    def hessian(self, x):
        return np.array([[h.evaluate(x) for h in row] for row in self.hess])


# local descent


def _armijo_projected_gradient(P, obj, x, max_iter):
    fx = obj.value(x)
    g = obj.gradient(x)
    t = 1.0 / max(1.0, float(np.max(np.abs(g))))
    it = 0
    for it in range(1, max_iter + 1):
        # Armijo backtracking along the projected path t -> P(x - t g)
        for _ in range(60):
            y = project(P, x - t * g, start=x)
            fy = obj.value(y)
            if fy <= fx + 1e-4 * float(g @ (y - x)):
                break
            t *= 0.5
        else:
            break
        s = y - x
        if np.linalg.norm(s) <= 1e-13 * (1.0 + np.linalg.norm(x)):
            break
        gy = obj.gradient(y)
        sy = float(s @ (gy - g))
        # Barzilai-Borwein trial step for the next iteration
        t = float(s @ s) / sy if sy > 1e-300 else 10.0 * t
        t = min(max(t, 1e-12), 1e12)
        stalled = abs(fx - fy) <= 1e-16 * (1.0 + abs(fx))
        x, fx, g = y, fy, gy
        if stalled:
            break
    return x, it


def _active_rows(P, x, tol):
    if not P.m:
        return np.zeros(0, dtype=int)
    slack = P.A @ x - P.b
    return np.flatnonzero(slack <= tol * (1.0 + np.abs(P.b)))


def _snap(P, obj, x, tol):
    """Move x onto the constraints it nearly touches, when that does not hurt."""
    act = _active_rows(P, x, tol)
    M = np.vstack([P.A[act], P.E])
    if M.shape[0] == 0:
        return x
    r = np.concatenate([P.b[act], P.c])
    y = x - np.linalg.lstsq(M, M @ x - r, rcond=None)[0]
    if P.contains(y, 1e-12) and obj.value(y) <= obj.value(x) + 1e-14 * (1 + abs(obj.value(x))):
        return y
    return x


def _face_newton(P, obj, x, max_iter=200):
    """Newton's method restricted to the face of P active at x."""
    act = _active_rows(P, x, 1e-12)
    Z = _null_space(np.vstack([P.A[act], P.E]))
    if Z.shape[1] == 0:
        return x
    fx = obj.value(x)
    for _ in range(max_iter):
        gz = Z.T @ obj.gradient(x)
        Hz = Z.T @ obj.hessian(x) @ Z
        try:
            ev = np.linalg.eigvalsh(Hz)
        except np.linalg.LinAlgError:
            break
        if ev[0] <= 1e-14 * max(1.0, abs(ev[-1])):
            break
        dx = Z @ np.linalg.solve(Hz, -gz)
        if np.linalg.norm(dx) <= 1e-15 * (1.0 + np.linalg.norm(x)):
            break
        # stay inside the inactive constraints
        alpha = 1.0
        if P.m:
            Ad = P.A @ dx
            slack = P.A @ x - P.b
            blocking = Ad < 0
            blocking[act] = False
            if blocking.any():
                alpha = min(1.0, float(np.min(slack[blocking] / -Ad[blocking])))
        if alpha < 1.0:
            break
        y = x + dx
        fy = obj.value(y)
        if fy > fx + 1e-12 * (1.0 + abs(fx)):
            break
        x, fx = y, fy
    return x


def local_minimize(P: Polyhedron, f, x0, max_iter=1000):
    """Projected-gradient descent from x0 followed by a face Newton polish.

    Returns ``(x, value, iterations)`` with x feasible for P.
    """
    obj = f if isinstance(f, _Objective) else _Objective(f)
    x = project(P, np.asarray(x0, dtype=float))
    x, it = _armijo_projected_gradient(P, obj, x, max_iter)
    for tol in (1e-9, 1e-7):
        y = _snap(P, obj, x, tol)
        y = _face_newton(P, obj, y)
        y = _snap(P, obj, y, tol)
        # accept ties at roundoff level: the polished point is more stationary
        fx = obj.value(x)
        if P.contains(y, 1e-12) and obj.value(y) <= fx + 1e-12 * (1.0 + abs(fx)):
            x = y
    return x, obj.value(x), it


def polyhedral_kkt_residual(K: Polyhedron, f, x, act_tol=1e-7):
    """Max of stationarity, feasibility and complementarity defects at x."""
    obj = f if isinstance(f, _Objective) else _Objective(f)
    x = np.asarray(x, dtype=float)
    g = obj.gradient(x)
    viol = K.violation(x)
    scale = 1.0 + np.linalg.norm(x)
    act = np.flatnonzero(np.abs(K.A @ x - K.b) <= act_tol * scale) if K.m else np.zeros(0, int)
    # grad f = A_act^T lam + E^T nu with lam >= 0, nu free (split into two signs)
    M = np.vstack([K.A[act], K.E, -K.E]).T
    if M.shape[1] == 0:
        return max(viol, float(np.linalg.norm(g)))
    coef, stat = nnls(M, g)
    lam = coef[:act.size]
    comp = float(np.max(np.abs(lam * (K.A[act] @ x - K.b[act])))) if act.size else 0.0
    return max(viol, float(stat), comp)


# global search


def _touches_box(x, center, radius):
    return bool(np.max(np.abs(x - center)) >= radius * (1 - 1e-6))


def _dedupe_points(X, radius):
    keep = []
    for x in X:
        if all(np.linalg.norm(x - y) > radius for y in keep):
            keep.append(x)
    return keep


def _search_round(K, obj, center, radius, opts, rng, carry):
    P = K.with_box(center, radius)
    pool = sample_polyhedron(K, center, radius, opts.samples, rng)
    vals = obj.f.evaluate_many(pool)
    order = np.argsort(vals, kind="stable")
    starts = [pool[i] for i in order[:opts.starts]]
    if len(order) > opts.starts and opts.random_starts:
        extra = rng.choice(order[opts.starts:], size=min(opts.random_starts,
                                                          len(order) - opts.starts),
                           replace=False)
        starts.extend(pool[i] for i in sorted(extra))
    starts.append(np.clip(center, center - radius, center + radius))
    starts.extend(carry)
    results = []
    iters = 0
    for s in starts:
        try:
            x, v, it = local_minimize(P, obj, s, opts.max_iter)
        except IterationLimitError:
            continue
        iters += it
        results.append((v, tuple(x), x))
    if not results:
        raise IterationLimitError("every local start hit an iteration cap")
    results.sort(key=lambda r: (r[0], r[1]))
    best = results[0][0]
    window = opts.value_tol * max(1.0, abs(best))
    accepted = _dedupe_points([r[2] for r in results if r[0] <= best + window],
                              opts.dedupe_radius)
    return best, accepted, iters


def _same_set(X, Y, radius):
    if len(X) != len(Y):
        return False
    return all(min(np.linalg.norm(x - y) for y in Y) <= radius for x in X)


def _bounded_search(K, f, opts):
    obj = _Objective(f)
    rng = np.random.default_rng(opts.seed)
    center = K.anchor
    radius = opts.box_init
    trace = []
    prev = None
    confirmations = 0
    carry = []
    iterations = 0
    for _ in range(opts.max_rounds):
        best, accepted, it = _search_round(K, obj, center, radius, opts, rng, carry)
        iterations += it
        touching = any(_touches_box(x, center, radius) for x in accepted)
        trace.append({"radius": radius, "best": best, "minimizers": len(accepted),
                      "touches_boundary": touching})
        carry = accepted[:8]
        if touching:
            prev, confirmations = None, 0
        else:
            if (prev is not None
                    and abs(best - prev[0]) <= opts.value_tol * max(1.0, abs(best))
                    and _same_set(accepted, prev[1], 10 * opts.dedupe_radius)):
                confirmations += 1
            else:
                confirmations = 0
            prev = (best, accepted)
            if confirmations >= opts.confirm_doublings:
                return True, best, accepted, iterations, trace
        radius *= 2.0
    best_pts = accepted
    return False, best, best_pts, iterations, trace


def _sort_points(X, n):
    X = sorted((np.asarray(x) for x in X), key=lambda x: tuple(np.round(x, 12)))
    return np.array(X).reshape(len(X), n)


def solve(K: Polyhedron, f: Polynomial, opts: SolveOptions | None = None, d: int | None = None,
          cone_override: PolyhedralCone | None = None,
          verdict: RegularityVerdict | None = None) -> SolveReport:
    opts = opts or SolveOptions()
    if f.degree is None or f.degree < 1:
        raise ValueError("objective must have degree >= 1")
    if K.is_empty():
        raise EmptySetError("constraint set is empty")
    d = f.degree if d is None else d
    if verdict is None:
        verdict = classify(asymptotic_problem(K, f, d, cone_override), tol=opts.tol_mu,
                           seed=opts.seed)
    if verdict.status is Status.REGULAR_UNBOUNDED_BELOW:
        cert = descent_ray_certificate(K, f, verdict, d=d)
        return SolveReport(SolveStatus.UNBOUNDED_BELOW, np.zeros((0, K.n)), -math.inf,
                           verdict, certificate=cert)
    try:
        stable, best, pts, iterations, trace = _bounded_search(K, f, opts)
    except IterationLimitError:
        return SolveReport(SolveStatus.INCONCLUSIVE, np.zeros((0, K.n)), math.nan, verdict)
    minimizers = _sort_points(pts, K.n)
    kkt = max((polyhedral_kkt_residual(K, f, x) for x in minimizers), default=math.nan)
    heuristic = verdict.status is not Status.REGULAR_COERCIVE
    status = SolveStatus.FOUND_MINIMUM if stable else SolveStatus.INCONCLUSIVE
    return SolveReport(status, minimizers, float(best), verdict, kkt_residual=kkt,
                       iterations=iterations, heuristic=heuristic, trace=trace)


def optimal_value(K: Polyhedron, f: Polynomial, opts: SolveOptions | None = None, **kw):
    """phi(f) = inf f over K: a float, -inf, or None when the solve is inconclusive."""
    report = solve(K, f, opts, **kw)
    if report.status is SolveStatus.INCONCLUSIVE:
        return None
    return report.value


def descent_ray_certificate(K: Polyhedron, f: Polynomial, verdict: RegularityVerdict | None = None,
                            d: int | None = None) -> RayCertificate:
    d = f.degree if d is None else d
    if verdict is None:
        verdict = classify(asymptotic_problem(K, f, d))
    if verdict.status is not Status.REGULAR_UNBOUNDED_BELOW:
        raise VerdictError(f"descent ray needs RegularUnboundedBelow, got {verdict.status}")
    fd = f.homogeneous_component(d)
    vals = [fd.evaluate(w) for w in verdict.witnesses]
    v = np.asarray(verdict.witnesses[int(np.argmin(vals))], dtype=float)
    anchor = K.anchor
    line = f.restrict_to_line(anchor, v)
    dline = np.polynomial.polynomial.polyder(line)
    roots = np.polynomial.polynomial.polyroots(dline) if dline.size > 1 else np.zeros(0)
    real = roots[np.abs(roots.imag) <= 1e-9 * (1 + np.abs(roots))].real
    t0 = float(max(0.0, real.max())) if real.size else 0.0
    table = [(t, f.evaluate(anchor + t * v)) for t in (1.0, 10.0, 100.0, 1000.0)]
    return RayCertificate(v, anchor, float(fd.evaluate(v)), t0, table)


# existence for non-regular problems


@dataclass(eq=False)
class EavesRecord:
    ray: np.ndarray
    x: np.ndarray | None
    inner_product: float
    satisfied: bool

    @property
    def undetermined(self):
        return not self.satisfied

    def to_json(self):
        return {"ray": self.ray.tolist(),
                "x": None if self.x is None else self.x.tolist(),
                "inner_product": self.inner_product, "satisfied": self.satisfied}


@dataclass(eq=False)
class EavesReport:
    records: list
    condition_a_holds: bool
    pseudoconvex_asserted: bool = False
    probe: dict | None = None
    conclusion: str | None = None

    def to_json(self):
        return {"records": [r.to_json() for r in self.records],
                "condition_a_holds": self.condition_a_holds,
                "pseudoconvex_asserted": self.pseudoconvex_asserted,
                "probe": self.probe, "conclusion": self.conclusion}


def eaves_check(K: Polyhedron, f: Polynomial, verdict: RegularityVerdict,
                opts: SolveOptions | None = None, pseudoconvex: bool = False,
                doublings: int = 3) -> EavesReport:
    """For every witness ray v of a non-regular problem, search K for a point
    with <grad f(x), v> > strict_tol.

    If every ray succeeds and f is (asserted) pseudoconvex without a Hessian
    counterexample from :func:`convexity_probe`, the report concludes that
    Sol(K, f) is nonempty and compact.
    """
    opts = opts or SolveOptions()
    if verdict.status is not Status.NON_REGULAR:
        raise VerdictError(f"Eaves condition applies to NonRegular problems, got {verdict.status}")
    rng = np.random.default_rng(opts.seed)
    center = K.anchor
    records = []
    for v in verdict.witnesses:
        v = np.asarray(v, dtype=float)
        q = f.directional_derivative(v)
        neg = _Objective(-q)
        best_x, best = None, -math.inf
        radius = opts.box_init
        for _ in range(doublings):
            P = K.with_box(center, radius)
            pool = sample_polyhedron(K, center, radius, opts.samples, rng)
            order = np.argsort(-q.evaluate_many(pool), kind="stable")
            for s in [pool[i] for i in order[:opts.starts]] + [center]:
                x, val, _ = local_minimize(P, neg, s, opts.max_iter)
                if -val > best:
                    best, best_x = -val, x
            if best > opts.strict_tol:
                break
            radius *= 2.0
        records.append(EavesRecord(v, best_x, float(q.evaluate(best_x)), best > opts.strict_tol))
    holds = bool(records) and all(r.satisfied for r in records)
    probe = None
    conclusion = None
    if pseudoconvex:
        probe = convexity_probe(K, f, seed=opts.seed)
        if holds and probe["counterexample"] is None:
            conclusion = "Sol(K,f) nonempty and compact"
    return EavesReport(records, holds, pseudoconvex, probe, conclusion)


def convexity_probe(K: Polyhedron, f: Polynomial, samples: int = 200, seed: int = 0,
                    radius: float = 10.0) -> dict:
    """Fraction of sampled feasible points with a PSD Hessian (a probe, not a proof)."""
    rng = np.random.default_rng(seed)
    obj = _Objective(f)
    pts = sample_polyhedron(K, K.anchor, radius, samples, rng)
    pts = np.vstack([K.anchor[None, :], pts])
    mins = np.array([np.linalg.eigvalsh(obj.hessian(x))[0] for x in pts])
    ok = mins >= -1e-8
    counter = None
    if not ok.all():
        counter = pts[int(np.argmin(mins))].tolist()
    return {"psd_fraction": float(ok.mean()), "counterexample": counter,
            "min_eigenvalue": float(mins.min())}
