"""KKT points of homogeneous forms on polyhedral cones, face by face.

The KKT set of a homogeneous objective on a cone is itself a cone, so
nonzero KKT points are reported as unit-norm representatives, one per ray,
and the origin is always listed.  Isolation is judged by the smallest
singular value of the raw face system

    Phi_alpha(x, lam) = (grad h(x) - A_alpha^T lam - E^T nu, A_alpha x, E x)

at the point.  At a nonzero KKT point (x, lam, nu) the vector
(x, (d-1) lam, (d-1) nu) lies in the kernel of that Jacobian, so the check
passes exactly when the origin is the only KKT point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import DimensionMismatchError
from .geometry import Polyhedron, PolyhedralCone, pseudo_faces, recession_cone, _null_space
from .poly import Polynomial, homogeneous_exponents, random_polynomial
from .regularity import classify_problem

RESIDUAL_TOL = 1e-8
LAMBDA_TOL = 1e-9
FACE_TOL = 1e-8
DEDUPE_RADIUS = 1e-6


@dataclass(frozen=True, eq=False)
class HomogeneousForm:
    """Coefficients of a degree-d form in the graded-lex basis of degree-d monomials."""

    n: int
    d: int
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size != len(homogeneous_exponents(self.n, self.d)):
            raise DimensionMismatchError(
                f"form of degree {self.d} in {self.n} variables needs "
                f"{len(homogeneous_exponents(self.n, self.d))} coefficients, got {b.size}")
        object.__setattr__(self, "b", b)

    @property
    def eta(self):
        return self.b.size

    def to_polynomial(self) -> Polynomial:
        return Polynomial.from_coefficients(self.b, self.n, self.d, homogeneous=True)

    @classmethod
    def from_polynomial(cls, h: Polynomial, d: int | None = None) -> HomogeneousForm:
        d = h.degree if d is None else d
        if d is None or not h.is_homogeneous(d):
            raise ValueError("expected a homogeneous polynomial")
        return cls(h.n, d, h.coefficient_vector(d, homogeneous=True))


def _as_form(h, d=None) -> Polynomial:
    if isinstance(h, HomogeneousForm):
        return h.to_polynomial()
    return h


@dataclass(eq=False)
class KKTPoint:
    x: np.ndarray
    lam: np.ndarray
    face: tuple
    residual: float
    min_jacobian_sv: float

    def to_json(self):
        return {"x": self.x.tolist(), "lambda": self.lam.tolist(), "face": list(self.face),
                "residual": self.residual, "min_jacobian_sv": self.min_jacobian_sv}


@dataclass
class KKTOptions:
    starts_per_dim: int = 50
    max_newton: int = 40
    newton_tol: float = 1e-11
    dedupe_radius: float = DEDUPE_RADIUS
    isolation_tol: float = 1e-7
    seed: int = 0


@dataclass(eq=False)
class KKTEnumeration:
    points: list
    full_rank: bool
    stats: dict = field(default_factory=dict)

    def to_json(self):
        faces = {}
        for pt in self.points:
            faces.setdefault(",".join(map(str, pt.face)), []).append(pt.to_json())
        return {"full_rank": self.full_rank, "stats": dict(self.stats),
                "faces": [{"face": k, "points": v} for k, v in sorted(faces.items())]}

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def _stationarity(C, grad, lam):
    """Residual of grad - A^T lam after removing the best E^T nu."""
    r = grad - C.A.T @ lam
    if C.E.shape[0]:
        nu = np.linalg.lstsq(C.E.T, r, rcond=None)[0]
        r = r - C.E.T @ nu
    return float(np.linalg.norm(r))


def kkt_residual(C: PolyhedralCone, g: Polynomial, x, lam) -> float:
    """Max of stationarity, complementarity and sign/feasibility defects."""
    g = _as_form(g)
    x = np.asarray(x, dtype=float).ravel()
    lam = np.asarray(lam, dtype=float).ravel()
    if x.size != C.n or g.n != C.n:
        raise DimensionMismatchError("point, form and cone dimensions differ")
    if lam.size != C.p:
        raise DimensionMismatchError(f"lambda has length {lam.size}, expected {C.p}")
    Ax = C.A @ x
    grad = np.array([q.evaluate(x) for q in g.gradient()])
    parts = [_stationarity(C, grad, lam), abs(float(lam @ Ax)),
             float(np.max(np.maximum(-lam, 0.0), initial=0.0)),
             float(np.max(np.maximum(-Ax, 0.0), initial=0.0))]
    if C.E.shape[0]:
        parts.append(float(np.max(np.abs(C.E @ x))))
    return max(parts)


class _Form:
    """Batched gradient and Hessian of a polynomial."""

    def __init__(self, h: Polynomial):
        self.n = h.n
        self.grad = h.gradient()
        self.hess = [[gi.derivative(j) for j in range(h.n)] for gi in self.grad]

    def gradient(self, X):
        return np.stack([g.evaluate_many(X) for g in self.grad], axis=-1)

    def hessian(self, X):
        H = np.empty((X.shape[0], self.n, self.n))
        for i in range(self.n):
            for j in range(i, self.n):
                H[:, i, j] = H[:, j, i] = self.hess[i][j].evaluate_many(X)
        return H


def raw_face_jacobian(C: PolyhedralCone, form, x, alpha) -> np.ndarray:
    """Jacobian of (grad h - A_a^T lam - E^T nu, A_a x, E x) in (x, lam, nu)."""
    if not isinstance(form, _Form):
        form = _Form(_as_form(form))
    Aa = C.A[list(alpha)]
    E = C.E
    a, e, n = Aa.shape[0], E.shape[0], C.n
    H = form.hessian(np.asarray(x, dtype=float)[None, :])[0]
    J = np.zeros((n + a + e, n + a + e))
    J[:n, :n] = H
    J[:n, n:n + a] = -Aa.T
    J[:n, n + a:] = -E.T
    J[n:n + a, :n] = Aa
    J[n + a:, :n] = E
    return J


def _min_sv(J):
    if J.size == 0:
        return math.inf
    return float(np.linalg.svd(J, compute_uv=False)[-1])


def _batched_solve(J, F):
    try:
        return np.linalg.solve(J, F[..., None])[..., 0]
    except np.linalg.LinAlgError:
        return (np.linalg.pinv(J) @ F[..., None])[..., 0]


def _newton_on_face(C, form, alpha, starts, opts):
    """Newton on the sphere-normalised face system, batched over starts.

    Unknowns (x, lam_alpha, nu, sigma); equations
    grad h - A_a^T lam - E^T nu - sigma x = 0, A_a x = 0, E x = 0, (|x|^2 - 1)/2 = 0.
    Returns converged rows (x, lam) with sigma ~ 0.
    """
    Aa = C.A[list(alpha)]
    E = C.E
    n, a, e = C.n, Aa.shape[0], E.shape[0]
    B = starts.shape[0]
    N = n + a + e + 1
    x = starts.copy()
    lam = np.zeros((B, a))
    nu = np.zeros((B, e))
    sigma = np.zeros(B)
    eye = np.eye(n)
    for _ in range(opts.max_newton):
        g = form.gradient(x)
        F = np.concatenate([g - lam @ Aa - nu @ E - sigma[:, None] * x,
                            x @ Aa.T, x @ E.T,
                            (0.5 * (np.sum(x * x, axis=1) - 1.0))[:, None]], axis=1)
        if np.all(np.abs(F) <= opts.newton_tol):
            break
        J = np.zeros((B, N, N))
        J[:, :n, :n] = form.hessian(x) - sigma[:, None, None] * eye
        J[:, :n, n:n + a] = -Aa.T
        J[:, :n, n + a:n + a + e] = -E.T
        J[:, :n, -1] = -x
        J[:, n:n + a, :n] = Aa
        J[:, n + a:n + a + e, :n] = E
        J[:, -1, :n] = x
        step = _batched_solve(J, -F)
        step = np.nan_to_num(step, nan=0.0, posinf=0.0, neginf=0.0)
        norm = np.linalg.norm(step, axis=1)
        step *= np.minimum(1.0, 1.0 / np.maximum(norm, 1e-300))[:, None]
        x = x + step[:, :n]
        lam = lam + step[:, n:n + a]
        nu = nu + step[:, n + a:n + a + e]
        sigma = sigma + step[:, -1]
    g = form.gradient(x)
    F = np.concatenate([g - lam @ Aa - nu @ E - sigma[:, None] * x, x @ Aa.T, x @ E.T,
                        (0.5 * (np.sum(x * x, axis=1) - 1.0))[:, None]], axis=1)
    ok = np.all(np.abs(F) <= 1e3 * opts.newton_tol, axis=1) & (np.abs(sigma) <= 1e-8)
    return x[ok], lam[ok], int(ok.sum())


def _face_starts(C, alpha, count, rng):
    Z = _null_space(np.vstack([C.A[list(alpha)], C.E]))
    if Z.shape[1] == 0:
        return np.zeros((0, C.n))
    X = rng.standard_normal((count, Z.shape[1])) @ Z.T
    X /= np.maximum(np.linalg.norm(X, axis=1), 1e-300)[:, None]
    # flip towards the cone where that helps the inactive rows
    rest = [i for i in range(C.p) if i not in alpha]
    if rest:
        flip = (X @ C.A[rest].T).sum(axis=1) < 0
        X[flip] *= -1
    return X


def _in_open_face(C, x, alpha):
    vals = C.A @ x
    mask = np.zeros(C.p, dtype=bool)
    mask[list(alpha)] = True
    return bool(np.all(np.abs(vals[mask]) <= FACE_TOL) and np.all(vals[~mask] > FACE_TOL))


def _origin_point(C, h, form):
    n = C.n
    grad = form.gradient(np.zeros((1, n)))[0]
    M = np.hstack([C.A.T, C.E.T, -C.E.T])
    if M.shape[1]:
        coef, _ = nnls(M, grad)
        lam = coef[:C.p]
    else:
        lam = np.zeros(0)
    alpha = tuple(range(C.p))
    J = raw_face_jacobian(C, form, np.zeros(n), alpha)
    return KKTPoint(np.zeros(n), lam, alpha, kkt_residual(C, h, np.zeros(n), lam), _min_sv(J))


def is_full_rank(A) -> bool:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return True
    return int(np.linalg.matrix_rank(A)) == min(A.shape)


def enumerate_kkt(C: PolyhedralCone, h, opts: KKTOptions | None = None,
                  starts_scale: int = 1) -> KKTEnumeration:
    """Origin plus unit representatives of nonzero KKT rays of h on C."""
    opts = opts or KKTOptions()
    h = _as_form(h)
    if h.n != C.n:
        raise DimensionMismatchError(f"form has {h.n} variables, cone has {C.n}")
    full_rank = is_full_rank(C.A)
    if not full_rank:
        warnings.warn("constraint matrix of the cone is not full rank", RuntimeWarning,
                      stacklevel=2)
    scale = h.norm()
    hn = h / scale if scale > 0 else h
    form = _Form(hn)
    raw_form = _Form(h)
    rng = np.random.default_rng(opts.seed)
    points = [_origin_point(C, h, raw_form)]
    converged = 0
    faces = [F for F in pseudo_faces(C) if F.nonempty]
    for F in faces:
        alpha = F.alpha
        count = starts_scale * opts.starts_per_dim * (C.n + len(alpha))
        starts = _face_starts(C, alpha, count, rng)
        if starts.shape[0] == 0:
            continue
        X, L, k = _newton_on_face(C, form, alpha, starts, opts)
        converged += k
        for x, la in zip(X, L):
            if np.any(la < -LAMBDA_TOL) or not _in_open_face(C, x, alpha):
                continue
            lam = np.zeros(C.p)
            lam[list(alpha)] = la * scale
            res = kkt_residual(C, h, x, lam)
            if res > RESIDUAL_TOL:
                continue
            if any(np.linalg.norm(x - q.x) <= opts.dedupe_radius for q in points):
                continue
            J = raw_face_jacobian(C, raw_form, x, alpha)
            points.append(KKTPoint(x, lam, alpha, res, _min_sv(J)))
    origin, rest = points[0], points[1:]
    rest.sort(key=lambda q: tuple(np.round(q.x, 9)))
    stats = {"faces": len(faces), "converged_starts": converged,
             "nonzero_rays": len(rest)}
    return KKTEnumeration([origin] + rest, full_rank, stats)


def jacobian_rank_check(n: int, d: int, x=None, probe_count: int = 1, seed: int = 0) -> dict:
    """Rank of the n x eta matrix d/db grad(b^T X_d(x)).

    With ``x`` given, one point is checked; otherwise ``probe_count`` gaussian
    points are drawn and the minimum rank and singular value are reported.
    """
    exps = np.array(homogeneous_exponents(n, d))
    if x is None:
        rng = np.random.default_rng(seed)
        pts = rng.standard_normal((probe_count, n))
    else:
        pts = np.asarray(x, dtype=float).reshape(1, -1)
        if pts.shape[1] != n:
            raise DimensionMismatchError(f"point has dimension {pts.shape[1]}, expected {n}")
    ranks, svs = [], []
    for p in pts:
        if not np.any(p):
            raise ValueError("rank check is undefined at the origin")
        D = np.zeros((n, exps.shape[0]))
        for i in range(n):
            e = exps.copy()
            coef = e[:, i].astype(float)
            e[:, i] = np.maximum(e[:, i] - 1, 0)
            D[i] = coef * np.prod(p ** e, axis=1)
        s = np.linalg.svd(D, compute_uv=False)
        ranks.append(int(np.sum(s > 1e-10 * s[0])))
        svs.append(float(s[-1]))
    return {"rank": min(ranks), "min_sv": min(svs), "probes": len(ranks)}


def finiteness_probe(C: PolyhedralCone, h, opts: KKTOptions | None = None,
                     enumeration: KKTEnumeration | None = None) -> dict:
    opts = opts or KKTOptions()
    first = enumeration if enumeration is not None else enumerate_kkt(C, h, opts)
    min_sv = min(q.min_jacobian_sv for q in first.points)
    isolated = all(q.min_jacobian_sv > opts.isolation_tol for q in first.points)
    new = 0
    if isolated:
        # a second pass with doubled starts and a fresh stream
        second_opts = KKTOptions(**{**vars(opts), "seed": opts.seed + 1})
        second = enumerate_kkt(C, h, second_opts, starts_scale=2)
        new = sum(1 for q in second.points
                  if all(np.linalg.norm(q.x - r.x) > opts.dedupe_radius for r in first.points))
    return {"finite": bool(isolated and new == 0), "points": len(first.points),
            "min_isolation_sv": min_sv, "new_in_confirmation": new}


@dataclass(eq=False)
class GenericityReport:
    regular_fraction: float
    finite_kkt_fraction: float | None
    rows: list

    def to_json(self):
        return {"regular_fraction": self.regular_fraction,
                "finite_kkt_fraction": self.finite_kkt_fraction, "trials": len(self.rows)}

    def to_csv(self) -> str:
        lines = ["trial,regular,finite,mu"]
        for r in self.rows:
            finite = "" if r["finite"] is None else str(r["finite"]).lower()
            lines.append(f"{r['trial']},{str(r['regular']).lower()},{finite},{r['mu']!r}")
        return "\n".join(lines) + "\n"


def genericity_mc(K: Polyhedron, d: int, trials: int, seed: int = 0, kkt: bool = True,
                  kkt_opts: KKTOptions | None = None) -> GenericityReport:
    """Fraction of gaussian degree-d polynomials that are regular on K, and
    (with ``kkt``) whose leading form has finitely many KKT points on K_inf."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    C = recession_cone(K)
    kkt_opts = kkt_opts or KKTOptions(starts_per_dim=10, seed=seed)
    rows = []
    for t in range(trials):
        f = random_polynomial(K.n, d, rng)
        verdict = classify_problem(K, f, d, seed=seed)
        finite = None
        if kkt:
            fd = f.homogeneous_component(d)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                finite = finiteness_probe(C, fd, kkt_opts)["finite"]
        rows.append({"trial": t, "regular": bool(verdict.status.is_regular),
                     "finite": finite, "mu": float(verdict.mu)})
    reg = sum(r["regular"] for r in rows) / trials
    fin = sum(bool(r["finite"]) for r in rows) / trials if kkt else None
    return GenericityReport(reg, fin, rows)
