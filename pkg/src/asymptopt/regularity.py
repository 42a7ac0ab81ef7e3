"""Regularity of OP(K, f) from the leading form on the asymptotic cone.

The verdict is read off ``mu = min f_d`` over the unit-sphere slice of the
asymptotic cone:

* ``mu > tol``: the leading form is positive on every nonzero direction, so
  the asymptotic solution set is {0} and f is coercive on K.
* ``mu < -tol``: some direction makes f_d negative; the asymptotic problem
  has no solution and f is unbounded below on K.
* ``|mu| <= tol``: f_d vanishes along the witness directions, the asymptotic
  solution set is an unbounded cone and the problem is non-regular.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import EmptySetError, IterationLimitError
from .geometry import PolyhedralCone, Polyhedron, extreme_rays, recession_cone
from .poly import Polynomial

TOL_MU = 1e-6
TOL_OPT = 1e-6
DEDUPE_RADIUS = 1e-5


class Status(str, enum.Enum):
    REGULAR_COERCIVE = "RegularCoercive"
    REGULAR_UNBOUNDED_BELOW = "RegularUnboundedBelow"
    NON_REGULAR = "NonRegular"
    INDETERMINATE = "Indeterminate"

    def __str__(self):
        return self.value

    @property
    def is_regular(self):
        return self in (Status.REGULAR_COERCIVE, Status.REGULAR_UNBOUNDED_BELOW)


@dataclass(frozen=True, eq=False)
class AsymptoticProblem:
    cone: PolyhedralCone
    leading_form: Polynomial
    ambient_degree: int

    def __post_init__(self):
        h = self.leading_form
        if not h.is_zero() and not h.is_homogeneous(self.ambient_degree):
            raise ValueError("leading form must be homogeneous of the ambient degree")


@dataclass(eq=False)
class RegularityVerdict:
    status: Status
    mu: float
    witnesses: np.ndarray
    tol: float
    grid_mu: float | None = None

    def to_json(self):
        out = {"status": self.status.value, "mu": self.mu,
               "witnesses": self.witnesses.tolist(), "tol": self.tol}
        if self.grid_mu is not None:
            out["grid_mu"] = self.grid_mu
        return out


@dataclass(eq=False)
class AsymptoticSolutionSet:
    """``kind`` is 'origin' ({0}), 'rays' (cone spanned by ``rays``) or 'empty'."""

    kind: str
    rays: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))


def asymptotic_problem(K, f: Polynomial, d: int, cone_override: PolyhedralCone | None = None):
    """Pair the asymptotic cone of K with the degree-d component of f."""
    if d < 1:
        raise ValueError("ambient degree must be >= 1")
    if f.degree is not None and f.degree > d:
        raise ValueError(f"objective degree {f.degree} exceeds ambient degree {d}")
    if cone_override is not None:
        cone = cone_override
    elif isinstance(K, PolyhedralCone):
        cone = K
    elif isinstance(K, Polyhedron):
        if K.is_empty():
            raise EmptySetError("constraint set is empty")
        cone = recession_cone(K)
    else:
        raise TypeError("K must be a Polyhedron or a PolyhedralCone")
    if cone.n != f.n:
        raise ValueError(f"cone dimension {cone.n} does not match objective ({f.n} variables)")
    return AsymptoticProblem(cone, f.homogeneous_component(d), d)


# grid oracle


def sphere_grid(n: int, resolution: float = 1e-2) -> np.ndarray:
    """Deterministic near-uniform points on the unit sphere of R^n, n <= 3."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        k = int(math.ceil(2 * math.pi / resolution))
        t = 2 * math.pi * np.arange(k) / k
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        # Fibonacci lattice with mean spacing ~ resolution
        k = int(math.ceil(4 * math.pi / resolution ** 2))
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        r = np.sqrt(1 - z * z)
        phi = math.pi * (3 - math.sqrt(5)) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    raise ValueError("sphere grid only for n <= 3")


def grid_min_on_cone_sphere(C: PolyhedralCone, h: Polynomial, resolution: float = 1e-2):
    """Brute-force min of h over grid points of C on the sphere, plus the
    extreme rays (so that one-point slices are covered)."""
    pts = sphere_grid(C.n, resolution)
    pts = pts[np.all(pts @ C.A.T >= -1e-12, axis=1)
              & np.all(np.abs(pts @ C.E.T) <= 1e-12, axis=1)]
    G = extreme_rays(C).generators()
    pts = np.vstack([pts, G])
    if pts.shape[0] == 0:
        return math.inf, np.zeros((0, C.n))
    vals = h.evaluate_many(pts)
    return float(vals.min()), pts[np.argsort(vals, kind="stable")]


# multistart minimisation on the ray simplex


def _project_simplex(V):
    """Row-wise Euclidean projection onto the probability simplex."""
    m = V.shape[1]
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    idx = np.arange(1, m + 1)
    cond = U - css / idx > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho] / (rho + 1)
    return np.maximum(V - theta[:, None], 0.0)


def _dedupe(points, values, radius):
    order = np.lexsort(tuple(points.T[::-1]) + (np.round(values, 12),))
    keep = []
    for i in order:
        if all(np.linalg.norm(points[i] - points[j]) > radius for j in keep):
            keep.append(i)
    return points[keep]


def min_on_cone_sphere(C: PolyhedralCone, h: Polynomial, tol_opt: float = TOL_OPT,
                       samples: int = 128, seed: int = 0, max_iter: int = 3000,
                       grid: bool = True, return_grid: bool = False):
    """Minimise a homogeneous form over ``C`` intersected with the unit sphere.

    Points are parametrised as ``u = G^T w / ||G^T w||`` with ``w`` on the
    simplex over the cone generators ``G``.  Seeds are the generators, their
    pairwise midpoints, Dirichlet samples and (for n <= 3) the best points of
    a sphere grid; each seed is refined by projected gradient with Armijo
    backtracking on the projected path.

    Returns ``(mu, argmins)``; ``mu = inf`` with no argmins when C = {0}.
    """
    if not h.is_homogeneous():
        raise ValueError("min_on_cone_sphere needs a homogeneous form")
    G = extreme_rays(C).generators()
    m = G.shape[0]
    grid_mu = None
    if m == 0:
        empty = np.zeros((0, C.n))
        return (math.inf, empty, None) if return_grid else (math.inf, empty)
    if h.is_zero():
        argmins = _dedupe(G, np.zeros(m), DEDUPE_RADIUS)
        return (0.0, argmins, 0.0) if return_grid else (0.0, argmins)
    d = h.degree
    scale = h.norm()
    hn = h / scale
    grads = hn.gradient()

    rng = np.random.default_rng(seed)
    seeds = [np.eye(m)]
    if m > 1:
        iu, ju = np.triu_indices(m, 1)
        mid = np.zeros((iu.size, m))
        mid[np.arange(iu.size), iu] = 0.5
        mid[np.arange(iu.size), ju] = 0.5
        seeds.append(mid)
        seeds.append(rng.dirichlet(np.ones(m), size=samples))
    if grid and C.n <= 3:
        grid_mu, ranked = grid_min_on_cone_sphere(C, hn)
        grid_mu *= scale
        for v in ranked[:8]:
            w = nnls(G.T, v)[0]
            if w.sum() > 0:
                seeds.append((w / w.sum())[None, :])
    W = np.vstack(seeds)

    def evaluate(W):
        U = W @ G
        nu = np.linalg.norm(U, axis=1)
        bad = nu < 1e-9
        nu = np.where(bad, 1.0, nu)
        hv = hn.evaluate_many(U)
        q = hv / nu ** d
        q[bad] = np.inf
        return q, U, nu, hv, bad

    def gradient(U, nu, hv):
        gu = np.column_stack([g.evaluate_many(U) for g in grads])
        gq = gu / nu[:, None] ** d - d * hv[:, None] * U / nu[:, None] ** (d + 2)
        return gq @ G.T

    q, U, nu, hv, bad = evaluate(W)
    keep = ~bad
    W, q, U, nu, hv = W[keep], q[keep], U[keep], nu[keep], hv[keep]
    g = gradient(U, nu, hv)
    step = np.ones(W.shape[0])
    active = np.ones(W.shape[0], dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Wa, ga = W[idx], g[idx]
        pg = _project_simplex(Wa - ga) - Wa
        done = np.max(np.abs(pg), axis=1) < 1e-12
        active[idx[done]] = False
        idx, Wa, ga = idx[~done], Wa[~done], ga[~done]
        if idx.size == 0:
            break
        t = step[idx]
        accepted = np.zeros(idx.size, dtype=bool)
        Wn = Wa.copy()
        qn = q[idx].copy()
        for _bt in range(60):
            todo = ~accepted
            if not todo.any():
                break
            trial = _project_simplex(Wa[todo] - t[todo, None] * ga[todo])
            qt, *_ = evaluate(trial)
            dec = np.sum(ga[todo] * (trial - Wa[todo]), axis=1)
            ok = qt <= q[idx[todo]] + 1e-4 * dec
            sub = np.flatnonzero(todo)
            Wn[sub[ok]] = trial[ok]
            qn[sub[ok]] = qt[ok]
            accepted[sub[ok]] = True
            t[sub[~ok]] *= 0.5
        # rows that cannot make Armijo progress are stationary to machine precision
        active[idx[~accepted]] = False
        acc = idx[accepted]
        if acc.size == 0:
            continue
        Wold, gold = W[acc], g[acc]
        W[acc] = Wn[accepted]
        q[acc], U_acc, nu_acc, hv_acc, _ = evaluate(W[acc])
        g[acc] = gradient(U_acc, nu_acc, hv_acc)
        s = W[acc] - Wold
        y = g[acc] - gold
        sy = np.sum(s * y, axis=1)
        ss = np.sum(s * s, axis=1)
        bb = np.where(sy > 1e-300, ss / np.where(sy > 1e-300, sy, 1.0), 1e3)
        step[acc] = np.clip(bb, 1e-8, 1e8)
        small = np.max(np.abs(s), axis=1) < 1e-15
        active[acc[small]] = False
    else:
        if active[np.argmin(q)]:
            raise IterationLimitError("cone-sphere minimisation did not converge")

    U = W @ G
    nu = np.linalg.norm(U, axis=1)
    P = U / nu[:, None]
    vals = q * scale
    mu = float(vals.min())
    if not math.isfinite(mu):
        raise IterationLimitError("no finite candidate on the cone slice")
    sel = vals <= mu + tol_opt
    argmins = _dedupe(P[sel], vals[sel], DEDUPE_RADIUS)
    if return_grid:
        return mu, argmins, grid_mu
    return mu, argmins


def classify(ap: AsymptoticProblem, tol: float = TOL_MU, tol_opt: float = TOL_OPT,
             seed: int = 0, samples: int = 128) -> RegularityVerdict:
    """Regularity trichotomy for the pair (K_inf, f_d)."""
    C, h = ap.cone, ap.leading_form
    try:
        mu, argmins, grid_mu = min_on_cone_sphere(C, h, tol_opt=tol_opt, seed=seed,
                                                  samples=samples, return_grid=True)
    except IterationLimitError:
        return RegularityVerdict(Status.INDETERMINATE, math.nan, np.zeros((0, C.n)), tol)
    if grid_mu is not None and grid_mu < mu - max(tol_opt, tol):
        return RegularityVerdict(Status.INDETERMINATE, mu, argmins, tol, grid_mu)
    if mu > tol:
        status = Status.REGULAR_COERCIVE
        argmins = argmins if math.isfinite(mu) else np.zeros((0, C.n))
    elif mu < -tol:
        status = Status.REGULAR_UNBOUNDED_BELOW
    else:
        status = Status.NON_REGULAR
    return RegularityVerdict(status, mu, argmins, tol, grid_mu)


def classify_problem(K, f: Polynomial, d: int | None = None, tol: float = TOL_MU,
                     cone_override: PolyhedralCone | None = None, **opts) -> RegularityVerdict:
    """Shorthand for ``classify(asymptotic_problem(K, f, d))``; d defaults to deg f."""
    d = f.degree if d is None else d
    return classify(asymptotic_problem(K, f, d, cone_override), tol=tol, **opts)


def asymptotic_solution_set(ap: AsymptoticProblem, tol: float = TOL_MU,
                            verdict: RegularityVerdict | None = None) -> AsymptoticSolutionSet:
    """Sol(K_inf, f_d): {0}, the cone spanned by the witness rays, or empty."""
    verdict = verdict or classify(ap, tol)
    n = ap.cone.n
    if verdict.status is Status.REGULAR_COERCIVE:
        return AsymptoticSolutionSet("origin", np.zeros((0, n)))
    if verdict.status is Status.NON_REGULAR:
        return AsymptoticSolutionSet("rays", verdict.witnesses)
    if verdict.status is Status.REGULAR_UNBOUNDED_BELOW:
        return AsymptoticSolutionSet("empty", np.zeros((0, n)))
    raise IterationLimitError("regularity could not be decided")
