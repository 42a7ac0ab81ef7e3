"""Polyhedral sets and cones.

Conventions: a polyhedron is ``{x : A x >= b, E x = c}`` and a polyhedral
cone is ``{x : A x >= 0, E x = 0}``.  Row indices are 0-based everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import (CapExceededError, DimensionMismatchError, EmptySetError,
                     IterationLimitError, SchemaError)

FEAS_TOL = 1e-9
PROJ_TOL = 1e-8
MAX_RAY_DIM = 8
MAX_RAY_ROWS = 16
MAX_FACE_ROWS = 16


def _matrix(M, n=None, name="matrix"):
    M = np.asarray(M if M is not None else [], dtype=float)
    if M.size == 0:
        if n is None:
            if M.ndim == 2:
                n = M.shape[1]
            else:
                raise DimensionMismatchError(f"cannot infer the dimension of an empty {name}")
        return np.zeros((0, n))
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if M.ndim != 2:
        raise DimensionMismatchError(f"{name} must be two-dimensional")
    if n is not None and M.shape[1] != n:
        raise DimensionMismatchError(f"{name} has {M.shape[1]} columns, expected {n}")
    return M


def _infer_n(*mats):
    for M in mats:
        M = np.asarray(M if M is not None else [], dtype=float)
        if M.size:
            return M.shape[-1] if M.ndim == 2 else M.size
        if M.ndim == 2 and M.shape[1]:
            return M.shape[1]
    return None


def _vector(v, m, name):
    v = np.asarray(v if v is not None else np.zeros(m), dtype=float).ravel()
    if v.size != m:
        raise DimensionMismatchError(f"{name} has length {v.size}, expected {m}")
    return v


@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """The cone ``{x : A x >= 0, E x = 0}``."""

    A: np.ndarray
    E: np.ndarray = None
    n: int = None

    def __post_init__(self):
        n = self.n if self.n is not None else _infer_n(self.A, self.E)
        if n is None or n < 1:
            raise DimensionMismatchError("cannot infer the dimension of the cone")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "A", _matrix(self.A, n, "A"))
        object.__setattr__(self, "E", _matrix(self.E, n, "E"))

    @classmethod
    def free(cls, n):
        return cls(np.zeros((0, n)), n=n)

    @classmethod
    def orthant(cls, n):
        return cls(np.eye(n))

    @property
    def p(self):
        return self.A.shape[0]

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.A @ x >= -tol) and np.all(np.abs(self.E @ x) <= tol))

    @cached_property
    def rays(self):
        return extreme_rays(self)

    def is_trivial(self):
        """True when the cone is ``{0}``."""
        return is_bounded(self)

    def to_json(self):
        return {"A": self.A.tolist(), "E": self.E.tolist()}

    @classmethod
    def from_json(cls, obj, n, path=""):
        _check_keys(obj, {"A", "E"}, {"A"}, path)
        try:
            return cls(_json_matrix(obj["A"], n, _p(path, "A")),
                       _json_matrix(obj.get("E", []), n, _p(path, "E")), n=n)
        except DimensionMismatchError as exc:
            raise SchemaError(path, str(exc)) from exc


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """The set ``{x : A x >= b, E x = c}``; either block may be empty."""

    A: np.ndarray
    b: np.ndarray = None
    E: np.ndarray = None
    c: np.ndarray = None
    n: int = None

    def __post_init__(self):
        n = self.n if self.n is not None else _infer_n(self.A, self.E)
        if n is None or n < 1:
            raise DimensionMismatchError("cannot infer the dimension of the polyhedron")
        A = _matrix(self.A, n, "A")
        E = _matrix(self.E, n, "E")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "b", _vector(self.b, A.shape[0], "b"))
        object.__setattr__(self, "c", _vector(self.c, E.shape[0], "c"))

    @classmethod
    def free(cls, n):
        return cls(np.zeros((0, n)), n=n)

    @classmethod
    def box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        n = lower.size
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([lower, -upper]))

    def with_box(self, center, radius):
        """Intersection with the cube ``||x - center||_inf <= radius``."""
        center = np.asarray(center, dtype=float)
        I = np.eye(self.n)
        return Polyhedron(np.vstack([self.A, I, -I]),
                          np.concatenate([self.b, center - radius, -center - radius]),
                          self.E, self.c)

    @property
    def m(self):
        return self.A.shape[0]

    def violation(self, x):
        """Largest constraint violation at x (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        v = 0.0
        if self.m:
            v = max(v, float(np.max(self.b - self.A @ x)))
        if self.E.shape[0]:
            v = max(v, float(np.max(np.abs(self.E @ x - self.c))))
        return max(v, 0.0)

    def contains(self, x, tol=FEAS_TOL):
        return self.violation(x) <= tol

    def contains_many(self, X, tol=FEAS_TOL):
        X = np.asarray(X, dtype=float)
        ok = np.ones(X.shape[0], dtype=bool)
        if self.m:
            ok &= np.all(X @ self.A.T >= self.b - tol, axis=1)
        if self.E.shape[0]:
            ok &= np.all(np.abs(X @ self.E.T - self.c) <= tol, axis=1)
        return ok

    @cached_property
    def _feasible(self):
        if self.m == 0 and self.E.shape[0] == 0:
            return np.zeros(self.n)
        res = linprog(np.zeros(self.n),
                      A_ub=-self.A if self.m else None, b_ub=-self.b if self.m else None,
                      A_eq=self.E if self.E.shape[0] else None,
                      b_eq=self.c if self.E.shape[0] else None,
                      bounds=[(None, None)] * self.n, method="highs")
        if res.status != 0:
            return None
        return np.asarray(res.x, dtype=float)

    def feasible_point(self):
        x = self._feasible
        if x is None:
            raise EmptySetError("polyhedron is empty")
        return x.copy()

    def is_empty(self):
        return self._feasible is None

    @cached_property
    def anchor(self):
        """The point of the polyhedron closest to the origin."""
        return project(self, np.zeros(self.n))

    def to_json(self):
        return {"A": self.A.tolist(), "b": self.b.tolist(),
                "E": self.E.tolist(), "c": self.c.tolist()}

    @classmethod
    def from_json(cls, obj, n, path=""):
        _check_keys(obj, {"A", "b", "E", "c"}, set(), path)
        A = _json_matrix(obj.get("A", []), n, _p(path, "A"))
        E = _json_matrix(obj.get("E", []), n, _p(path, "E"))
        b = _json_vector(obj.get("b", []), _p(path, "b"))
        c = _json_vector(obj.get("c", []), _p(path, "c"))
        if b.size != A.shape[0]:
            raise SchemaError(_p(path, "b"),
                              f"length {b.size} does not match {A.shape[0]} rows of A")
        if c.size != E.shape[0]:
            raise SchemaError(_p(path, "c"),
                              f"length {c.size} does not match {E.shape[0]} rows of E")
        return cls(A, b, E, c, n=n)


def _p(path, key):
    return f"{path}.{key}" if path else key


def _check_keys(obj, allowed, required, path):
    if not isinstance(obj, dict):
        raise SchemaError(path, "must be an object")
    for key in obj:
        if key not in allowed:
            raise SchemaError(_p(path, key), "unknown key")
    for key in required:
        if key not in obj:
            raise SchemaError(_p(path, key), "missing key")


def _json_matrix(rows, n, path):
    if not isinstance(rows, list):
        raise SchemaError(path, "must be a list of rows")
    for i, row in enumerate(rows):
        if not isinstance(row, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in row):
            raise SchemaError(f"{path}[{i}]", "must be a list of numbers")
        if len(row) != n:
            raise SchemaError(f"{path}[{i}]", f"has {len(row)} entries, expected n={n}")
    return np.array(rows, dtype=float).reshape(len(rows), n)


def _json_vector(vals, path):
    if not isinstance(vals, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
        raise SchemaError(path, "must be a list of numbers")
    return np.array(vals, dtype=float)


# recession cone and boundedness


def recession_cone(P: Polyhedron) -> PolyhedralCone:
    if isinstance(P, PolyhedralCone):
        return P
    if P.is_empty():
        raise EmptySetError("the recession cone of an empty polyhedron is undefined")
    return PolyhedralCone(P.A.copy(), P.E.copy(), n=P.n)


def is_bounded(P, tol=FEAS_TOL) -> bool:
    """Decide whether the recession cone is {0} by LPs over the unit cube."""
    C = recession_cone(P)
    n = C.n
    A_ub = -C.A if C.p else None
    b_ub = np.zeros(C.p) if C.p else None
    A_eq = C.E if C.E.shape[0] else None
    b_eq = np.zeros(C.E.shape[0]) if C.E.shape[0] else None
    for i in range(n):
        for sign in (1.0, -1.0):
            cost = np.zeros(n)
            cost[i] = -sign
            res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                          bounds=[(-1.0, 1.0)] * n, method="highs")
            if res.status == 0 and -res.fun > tol:
                return False
    return True


# generators


@dataclass(frozen=True, eq=False)
class RayBasis:
    """Generators of a cone: nonnegative combinations of ``rays`` plus any
    combination of ``lineality`` vectors.  All vectors have unit length."""

    rays: np.ndarray
    lineality: np.ndarray

    def generators(self):
        """Rays followed by +/- each lineality vector, as rows."""
        return np.vstack([self.rays, self.lineality, -self.lineality])

    def __len__(self):
        return self.rays.shape[0]


def _row_space_basis(M, rtol=1e-10):
    if M.shape[0] == 0:
        return np.zeros((M.shape[1], 0))
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    if s.size == 0 or s[0] == 0:
        return np.zeros((M.shape[1], 0))
    r = int(np.sum(s > rtol * s[0]))
    return Vt[:r].T


def _null_space(M, rtol=1e-10):
    n = M.shape[1]
    if M.shape[0] == 0:
        return np.eye(n)
    return scipy.linalg.null_space(M, rcond=rtol)


def _sorted_unit_rows(V):
    if V.shape[0] == 0:
        return V
    V = V / np.linalg.norm(V, axis=1, keepdims=True)
    V = np.where(np.abs(V) < 1e-15, 0.0, V)
    keys = np.round(V, 9)
    order = sorted(range(V.shape[0]), key=lambda i: tuple(keys[i]))
    return V[order]


def _canonical_lineality(L):
    """Orthonormal lineality basis made deterministic (reduced row echelon)."""
    if L.shape[1] == 0:
        return np.zeros((0, L.shape[0]))
    # rref of the basis rows gives a sign- and rotation-free representative
    B = L.T.copy()
    rows, cols = B.shape
    r = 0
    for j in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(B[r:, j])))
        if abs(B[piv, j]) < 1e-10:
            continue
        B[[r, piv]] = B[[piv, r]]
        B[r] /= B[r, j]
        for i in range(rows):
            if i != r:
                B[i] -= B[i, j] * B[r]
        r += 1
    B = np.where(np.abs(B) < 1e-13, 0.0, B)
    return B / np.linalg.norm(B, axis=1, keepdims=True)


def _double_description(M, tol=1e-9):
    """Extreme rays of the pointed cone {y : M y >= 0} with rank(M) = ncols."""
    p, k = M.shape
    _, _, piv = scipy.linalg.qr(M.T, pivoting=True)
    basis = list(piv[:k])
    B = M[basis]
    R = np.linalg.inv(B).T  # rows r_j with B r_j = e_j
    rays = [r / np.linalg.norm(r) for r in R]
    row_norm = np.linalg.norm(M, axis=1)
    processed = list(basis)

    def zero_set(r):
        return frozenset(i for i in processed if abs(M[i] @ r) <= tol * row_norm[i])

    zsets = [zero_set(r) for r in rays]
    for i in range(p):
        if i in basis:
            continue
        vals = [M[i] @ r for r in rays]
        scale = tol * row_norm[i]
        pos = [j for j, v in enumerate(vals) if v > scale]
        neg = [j for j, v in enumerate(vals) if v < -scale]
        keep = [j for j, v in enumerate(vals) if v >= -scale]
        new_rays = [rays[j] for j in keep]
        for a in pos:
            for b_ in neg:
                common = zsets[a] & zsets[b_]
                if len(common) < k - 2:
                    continue
                if k > 2 and np.linalg.matrix_rank(M[sorted(common)], tol=1e-9) != k - 2:
                    continue
                r = -vals[b_] * rays[a] + vals[a] * rays[b_]
                new_rays.append(r / np.linalg.norm(r))
        processed.append(i)
        rays = new_rays
        zsets = [zero_set(r) for r in rays]
    if not rays:
        return np.zeros((0, k))
    return np.array(rays)


def extreme_rays(C: PolyhedralCone, max_dim=MAX_RAY_DIM, max_rows=MAX_RAY_ROWS,
                 tol=FEAS_TOL) -> RayBasis:
    """Generator representation of a polyhedral cone (double description)."""
    if C.n > max_dim or C.p > max_rows:
        raise CapExceededError(
            f"ray enumeration capped at n <= {max_dim}, p <= {max_rows} (got n={C.n}, p={C.p})")
    L = _null_space(np.vstack([C.A, C.E]))
    lineality = _canonical_lineality(L)
    Z = _null_space(np.vstack([C.E, L.T]))
    if Z.shape[1] == 0 or C.p == 0:
        return RayBasis(np.zeros((0, C.n)), lineality)
    Y = _double_description(C.A @ Z, tol)
    rays = Y @ Z.T
    # drop numerically duplicated rays
    rays = _sorted_unit_rows(rays)
    keep = []
    for r in rays:
        if all(np.linalg.norm(r - q) > 1e-9 for q in keep):
            keep.append(r)
    rays = np.array(keep).reshape(len(keep), C.n)
    return RayBasis(rays, lineality)


def sample_cone_sphere(C: PolyhedralCone, count: int, seed=None, concentration=1.0):
    """Unit vectors of C from Dirichlet-weighted combinations of its generators."""
    G = extreme_rays(C).generators()
    if G.shape[0] == 0:
        raise EmptySetError("the cone is {0}; its unit-sphere slice is empty")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    out = []
    while len(out) < count:
        W = rng.dirichlet(np.full(G.shape[0], concentration), size=max(count - len(out), 1))
        U = W @ G
        norms = np.linalg.norm(U, axis=1)
        good = norms > 1e-8
        out.extend(U[good] / norms[good, None])
    return np.array(out[:count]).reshape(count, C.n)


# projection


def project(P: Polyhedron, x, start=None, tol=PROJ_TOL, max_iter=None):
    """Euclidean projection onto P by a primal active-set method.

    ``start`` may be any feasible point (typically the previous projection);
    without it the stored feasible point of P is used.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.size != P.n:
        raise DimensionMismatchError(f"point has dimension {x.size}, expected {P.n}")
    if P.contains(x, tol=1e-13):
        return x.copy()
    if start is not None and P.contains(start, tol=1e-10):
        y = np.asarray(start, dtype=float).copy()
    else:
        y = P.feasible_point()
    A, b, E = P.A, P.b, P.E
    m = A.shape[0]
    if max_iter is None:
        max_iter = 20 * (m + P.n) + 50
    row_norm = np.maximum(np.linalg.norm(A, axis=1), 1e-300) if m else np.zeros(0)

    # initial working set: an independent subset of the constraints active at y
    W = []
    if m:
        slack = (A @ y - b) / row_norm
        for i in np.argsort(slack):
            if slack[i] > 1e-10:
                break
            M = np.vstack([E, A[W + [int(i)]]])
            if np.linalg.matrix_rank(M, tol=1e-10) == M.shape[0] - _deficiency(E):
                W.append(int(i))

    for _ in range(max_iter):
        M = np.vstack([A[W], E])
        Q = _row_space_basis(M)
        dvec = x - y
        step = dvec - Q @ (Q.T @ dvec)
        if np.linalg.norm(step) <= 1e-12 * (1.0 + np.linalg.norm(y) + np.linalg.norm(dvec)):
            if not W:
                return y
            coef = np.linalg.lstsq(M.T, y - x, rcond=None)[0]
            lam = coef[:len(W)]
            j = int(np.argmin(lam))
            if lam[j] >= -1e-12 * (1.0 + np.linalg.norm(x - y)):
                return y
            W.pop(j)
            continue
        alpha = 1.0
        block = None
        if m:
            Ap = A @ step
            cand = Ap < -1e-15 * row_norm * np.linalg.norm(step)
            cand[W] = False
            if cand.any():
                idx = np.flatnonzero(cand)
                ratios = np.maximum((b[idx] - A[idx] @ y) / Ap[idx], 0.0)
                j = int(np.argmin(ratios))
                if ratios[j] < 1.0:
                    alpha, block = float(ratios[j]), int(idx[j])
        y = y + alpha * step
        if block is not None:
            W.append(block)
    raise IterationLimitError("projection active-set method hit its iteration cap")


def _deficiency(E):
    if E.shape[0] == 0:
        return 0
    return E.shape[0] - np.linalg.matrix_rank(E, tol=1e-10)


def sample_polyhedron(P: Polyhedron, center, radius, count, rng):
    """Feasible points of P within the cube of the given radius around center.

    Uniform rejection sampling, topped up with projections of uniform cube
    points when the acceptance rate is low (e.g. under equality constraints).
    """
    center = np.asarray(center, dtype=float)
    Pb = P.with_box(center, radius)
    out = np.zeros((0, P.n))
    if not P.E.shape[0]:
        X = center + rng.uniform(-radius, radius, size=(8 * count, P.n))
        out = X[Pb.contains_many(X)][:count]
    if out.shape[0] < count:
        X = center + rng.uniform(-radius, radius, size=(count - out.shape[0], P.n))
        start = Pb.feasible_point()
        extra = np.array([project(Pb, x, start=start) for x in X]).reshape(-1, P.n)
        out = np.vstack([out, extra])
    return out


def projection_residual(P: Polyhedron, x, y):
    """KKT residual of y as the projection of x onto P."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    viol = P.violation(y)
    g = y - x
    scale = max(1.0, np.linalg.norm(x - y))
    act = np.flatnonzero(np.abs(P.A @ y - P.b) <= 1e-9 * scale) if P.m else np.zeros(0, int)
    M = np.vstack([P.A[act], P.E])
    if M.shape[0] == 0:
        return max(viol, float(np.linalg.norm(g)))
    coef = np.linalg.lstsq(M.T, g, rcond=None)[0]
    lam = coef[:act.size]
    stat = float(np.linalg.norm(g - M.T @ coef))
    neg = float(max(0.0, -lam.min())) if lam.size else 0.0
    return max(viol, stat, neg)


# pseudo-faces


@dataclass(frozen=True, eq=False)
class PseudoFace:
    """Points of the cone where exactly the rows in ``alpha`` are active."""

    alpha: tuple
    cone: PolyhedralCone = field(repr=False)
    nonempty: bool = True

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        C = self.cone
        if C.E.shape[0] and np.any(np.abs(C.E @ x) > tol):
            return False
        vals = C.A @ x
        mask = np.zeros(C.p, dtype=bool)
        mask[list(self.alpha)] = True
        return bool(np.all(np.abs(vals[mask]) <= tol) and np.all(vals[~mask] > tol))

    @property
    def contains_origin(self):
        return len(self.alpha) == self.cone.p


def face_of(C: PolyhedralCone, x, tol=FEAS_TOL):
    """Active index set of a cone point, or None when x is outside C."""
    x = np.asarray(x, dtype=float)
    if not C.contains(x, tol):
        return None
    vals = C.A @ x
    return tuple(int(i) for i in np.flatnonzero(np.abs(vals) <= tol))


def face_is_nonempty(C: PolyhedralCone, alpha) -> bool:
    alpha = list(alpha)
    rest = [i for i in range(C.p) if i not in alpha]
    A_eq = np.vstack([C.A[alpha], C.E])
    res = linprog(np.zeros(C.n),
                  A_ub=-C.A[rest] if rest else None,
                  b_ub=-np.ones(len(rest)) if rest else None,
                  A_eq=A_eq if A_eq.shape[0] else None,
                  b_eq=np.zeros(A_eq.shape[0]) if A_eq.shape[0] else None,
                  bounds=[(None, None)] * C.n, method="highs")
    return res.status == 0


def pseudo_faces(C: PolyhedralCone, max_rows=MAX_FACE_ROWS):
    """All 2^p pseudo-faces, in bitmask order, each tagged nonempty or not.

    The open inequalities ``A_i x > 0`` are probed as ``A_i x >= 1``, which is
    equivalent for a homogeneous system.
    """
    if C.p > max_rows:
        raise CapExceededError(f"pseudo-face enumeration capped at p <= {max_rows}")
    faces = []
    for mask in range(1 << C.p):
        alpha = tuple(i for i in range(C.p) if mask >> i & 1)
        faces.append(PseudoFace(alpha, C, face_is_nonempty(C, alpha)))
    return faces
