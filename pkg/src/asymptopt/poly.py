"""Sparse multivariate polynomials over the reals.

A polynomial in ``n`` variables is stored as a mapping from exponent tuples
to nonzero float coefficients.  Exponent tuples double as monomials; the
dense coefficient vector (``coefficient_vector``) lists monomials of degree
at most ``d`` in graded lexicographic order, degree ascending and, within a
degree, lexicographic with ``x1 > x2 > ... > xn``::

    1, x1, ..., xn, x1^2, x1 x2, ..., x1 xn, x2^2, ..., xn^d

The l2 norm of a polynomial is the Euclidean norm of that vector.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError, SchemaError

# coefficients smaller than this after arithmetic are treated as cancelled
DROP_TOL = 1e-14

Exponent = tuple


def total_degree(exponent: Sequence[int]) -> int:
    return int(sum(exponent))


@lru_cache(maxsize=None)
def homogeneous_exponents(n: int, l: int) -> tuple:
    """Exponent tuples of total degree ``l`` in ``n`` variables, x1 > ... > xn."""
    if n < 1:
        raise ValueError("need at least one variable")
    if l < 0:
        return ()
    out = []
    for combo in itertools.combinations_with_replacement(range(n), l):
        e = [0] * n
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    # combinations_with_replacement already yields descending-lex order
    out.sort(reverse=True)
    return tuple(out)


@lru_cache(maxsize=None)
def monomial_basis(n: int, d: int) -> tuple:
    """All exponents of degree <= d in graded lexicographic order."""
    out = []
    for l in range(d + 1):
        out.extend(homogeneous_exponents(n, l))
    return tuple(out)


def basis_size(n: int, d: int) -> int:
    """rho = C(n + d, d), the dimension of polynomials of degree <= d."""
    return math.comb(n + d, d)


def monomial_vector(x, d: int, homogeneous: bool = False) -> np.ndarray:
    """X(x): every monomial of degree <= d (or exactly d) evaluated at x."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    exps = homogeneous_exponents(n, d) if homogeneous else monomial_basis(n, d)
    E = np.array(exps, dtype=int).reshape(len(exps), n)
    return np.prod(x[..., None, :] ** E, axis=-1)


class Polynomial:
    """Immutable sparse polynomial in ``n`` variables.

    >>> x1, x2 = Polynomial.variables(2)
    >>> f = x2**3 - x1 * x2
    >>> f(2.0, 1.0)
    -1.0
    """

    __slots__ = ("n", "_terms", "_E", "_c")

    def __init__(self, n: int, terms: Mapping[Sequence[int], float] | Iterable = ()):
        if int(n) < 1:
            raise ValueError("a polynomial needs n >= 1 variables")
        self.n = int(n)
        items = terms.items() if isinstance(terms, Mapping) else terms
        clean: dict = {}
        for exp, coeff in items:
            exp = tuple(int(e) for e in exp)
            if len(exp) != self.n:
                raise DimensionMismatchError(
                    f"exponent {exp} has length {len(exp)}, expected {self.n}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            clean[exp] = clean.get(exp, 0.0) + float(coeff)
        self._terms = MappingProxyType(
            {e: c for e, c in sorted(clean.items(), key=_term_order) if abs(c) >= DROP_TOL})
        self._E = None
        self._c = None

    # construction helpers

    @classmethod
    def zero(cls, n: int) -> Polynomial:
        return cls(n)

    @classmethod
    def constant(cls, n: int, value: float) -> Polynomial:
        return cls(n, {(0,) * n: value})

    @classmethod
    def variables(cls, n: int) -> tuple:
        return tuple(cls(n, {tuple(int(i == j) for j in range(n)): 1.0}) for i in range(n))

    @classmethod
    def monomial(cls, exponent: Sequence[int], coeff: float = 1.0) -> Polynomial:
        return cls(len(exponent), {tuple(exponent): coeff})

    @classmethod
    def from_coefficients(cls, coeffs, n: int, d: int, homogeneous: bool = False) -> Polynomial:
        """Inverse of :meth:`coefficient_vector`."""
        exps = homogeneous_exponents(n, d) if homogeneous else monomial_basis(n, d)
        coeffs = np.asarray(coeffs, dtype=float).ravel()
        if coeffs.size != len(exps):
            raise DimensionMismatchError(
                f"expected {len(exps)} coefficients for n={n}, d={d}, got {coeffs.size}")
        return cls(n, zip(exps, coeffs))

    # basic properties

    @property
    def terms(self) -> Mapping:
        return self._terms

    @property
    def degree(self) -> int | None:
        """Maximum total degree, or None for the zero polynomial."""
        if not self._terms:
            return None
        return max(total_degree(e) for e in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def is_homogeneous(self, l: int | None = None) -> bool:
        degs = {total_degree(e) for e in self._terms}
        if not degs:
            return True
        if len(degs) != 1:
            return False
        return l is None or degs == {l}

    def coefficient(self, exponent: Sequence[int]) -> float:
        return self._terms.get(tuple(exponent), 0.0)

    def _arrays(self):
        if self._E is None:
            if self._terms:
                E = np.array(list(self._terms.keys()), dtype=int)
                c = np.array(list(self._terms.values()), dtype=float)
            else:
                E = np.zeros((0, self.n), dtype=int)
                c = np.zeros(0)
            self._E, self._c = E, c
        return self._E, self._c

    # evaluation

    def evaluate(self, x) -> float:
        x = _as_point(x, self.n)
        total = 0.0
        for exp, coeff in self._terms.items():
            term = coeff
            for xi, e in zip(x, exp):
                if e:
                    term *= xi ** e
            total += term
        return float(total)

    def __call__(self, *x) -> float:
        if len(x) == 1:
            return self.evaluate(x[0])
        return self.evaluate(x)

    def evaluate_many(self, X) -> np.ndarray:
        """Vectorised evaluation at the rows of ``X`` (shape ``(m, n)``)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n:
            raise DimensionMismatchError(f"expected shape (m, {self.n}), got {X.shape}")
        E, c = self._arrays()
        if c.size == 0:
            return np.zeros(X.shape[0])
        return np.prod(X[:, None, :] ** E[None, :, :], axis=2) @ c

    # arithmetic

    def _coerce(self, other) -> Polynomial:
        if isinstance(other, Polynomial):
            if other.n != self.n:
                raise DimensionMismatchError(f"variable counts differ: {self.n} vs {other.n}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.n, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(self.n, itertools.chain(self._terms.items(), other._terms.items()))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.n, {e: -c for e, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial(self.n, {e: c * float(other) for e, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: dict = {}
        for (e1, c1), (e2, c2) in itertools.product(self._terms.items(), other._terms.items()):
            e = tuple(a + b for a, b in zip(e1, e2))
            out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(self.n, out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self * (1.0 / float(other))
        return NotImplemented

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = Polynomial.constant(self.n, 1.0)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and dict(self._terms) == dict(other._terms)

    def __hash__(self):
        return hash((self.n, tuple(self._terms.items())))

    def __repr__(self):
        if not self._terms:
            return f"Polynomial(n={self.n}, 0)"
        return f"Polynomial(n={self.n}, {self.to_string()})"

    def to_string(self) -> str:
        parts = []
        for exp, c in self._terms.items():
            mono = "*".join(
                f"x{i + 1}" if e == 1 else f"x{i + 1}^{e}" for i, e in enumerate(exp) if e)
            parts.append(f"{c:g}*{mono}" if mono else f"{c:g}")
        return " + ".join(parts) if parts else "0"

    # calculus

    def derivative(self, i: int) -> Polynomial:
        out = {}
        for exp, c in self._terms.items():
            if exp[i]:
                e = list(exp)
                e[i] -= 1
                out[tuple(e)] = c * exp[i]
        return Polynomial(self.n, out)

    def gradient(self) -> list:
        return [self.derivative(i) for i in range(self.n)]

    def hessian(self) -> list:
        grad = self.gradient()
        return [[g.derivative(j) for j in range(self.n)] for g in grad]

    def directional_derivative(self, v) -> Polynomial:
        """The polynomial x -> <grad p(x), v>."""
        v = _as_point(v, self.n)
        out = Polynomial.zero(self.n)
        for vi, g in zip(v, self.gradient()):
            if vi:
                out = out + g * vi
        return out

    def homogeneous_component(self, l: int) -> Polynomial:
        if l < 0:
            raise ValueError("degree of a homogeneous component must be >= 0")
        return Polynomial(self.n, {e: c for e, c in self._terms.items() if total_degree(e) == l})

    def restrict_to_line(self, x, v) -> np.ndarray:
        """Coefficients (ascending powers of t) of t -> p(x + t v)."""
        x = _as_point(x, self.n)
        v = _as_point(v, self.n)
        P = np.polynomial.polynomial
        total = np.zeros(1)
        for exp, c in self._terms.items():
            term = np.array([c])
            for xi, vi, e in zip(x, v, exp):
                if e:
                    term = P.polymul(term, P.polypow([xi, vi], e))
            total = P.polyadd(total, term)
        return total

    # coefficient space

    def coefficient_vector(self, d: int, homogeneous: bool = False) -> np.ndarray:
        if self._terms:
            top = self.degree
            if homogeneous and not self.is_homogeneous(d):
                raise ValueError(f"polynomial is not homogeneous of degree {d}")
            if top > d:
                raise ValueError(f"degree {top} exceeds ambient degree {d}")
        exps = homogeneous_exponents(self.n, d) if homogeneous else monomial_basis(self.n, d)
        return np.array([self._terms.get(e, 0.0) for e in exps])

    def norm(self) -> float:
        """l2 norm of the coefficients; independent of the basis ordering."""
        return math.sqrt(sum(c * c for c in self._terms.values()))

    # serialisation

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "terms": [{"exponents": list(e), "coeff": c} for e, c in self._terms.items()],
        }

    @classmethod
    def from_json(cls, obj, path: str = "") -> Polynomial:
        if not isinstance(obj, dict):
            raise SchemaError(path, "polynomial must be an object")
        unknown = set(obj) - {"n", "terms"}
        if unknown:
            raise SchemaError(f"{path}.{sorted(unknown)[0]}" if path else sorted(unknown)[0],
                              "unknown key")
        n = obj.get("n")
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise SchemaError(_join(path, "n"), "must be an integer >= 1")
        terms = obj.get("terms")
        if not isinstance(terms, list):
            raise SchemaError(_join(path, "terms"), "must be a list")
        seen = {}
        for k, term in enumerate(terms):
            tp = _join(path, f"terms[{k}]")
            if not isinstance(term, dict) or set(term) != {"exponents", "coeff"}:
                raise SchemaError(tp, "term must be {exponents, coeff}")
            exps = term["exponents"]
            if (not isinstance(exps, list)
                    or not all(isinstance(e, int) and not isinstance(e, bool) and e >= 0
                               for e in exps)):
                raise SchemaError(tp + ".exponents", "must be a list of non-negative integers")
            if len(exps) != n:
                raise SchemaError(tp + ".exponents", f"length {len(exps)} does not equal n={n}")
            coeff = term["coeff"]
            if not isinstance(coeff, (int, float)) or isinstance(coeff, bool):
                raise SchemaError(tp + ".coeff", "must be a number")
            key = tuple(exps)
            if key in seen:
                raise SchemaError(tp + ".exponents", f"duplicate of terms[{seen[key]}]")
            seen[key] = k
        return cls(n, ((tuple(t["exponents"]), t["coeff"]) for t in terms))


def _term_order(item):
    exp = item[0]
    return (total_degree(exp), tuple(-e for e in exp))


def _join(path, key):
    return f"{path}.{key}" if path else key


def _as_point(x, n):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != n:
        raise DimensionMismatchError(f"point has dimension {x.size}, expected {n}")
    return x


# Functional interface


def evaluate(p: Polynomial, x) -> float:
    return p.evaluate(x)


def gradient(p: Polynomial) -> list:
    return p.gradient()


def homogeneous_component(p: Polynomial, l: int) -> Polynomial:
    return p.homogeneous_component(l)


def leading_limit_check(p: Polynomial, x, schedule: Sequence[float]) -> list:
    """f(lam x) / lam^d for each lam in ``schedule``; tends to f_d(x)."""
    schedule = list(schedule)
    if not schedule:
        raise ValueError("empty lambda schedule")
    d = p.degree
    if d is None or d < 1:
        raise ValueError("leading limit needs a polynomial of degree >= 1")
    x = _as_point(x, p.n)
    return [p.evaluate(lam * x) / lam ** d for lam in schedule]


def l2_norm(p: Polynomial, d: int) -> float:
    if p.degree is not None and p.degree > d:
        raise ValueError(f"degree {p.degree} exceeds ambient degree {d}")
    return p.norm()


def cauchy_schwarz_bound(p: Polynomial, x, d: int) -> tuple:
    """Return ``(bound, value)`` with ``|value| <= bound = ||X(x)|| ||p||``."""
    norm = l2_norm(p, d)
    x = _as_point(x, p.n)
    return float(np.linalg.norm(monomial_vector(x, d)) * norm), p.evaluate(x)


def random_polynomial(n: int, d: int, seed=None, distribution: str = "gaussian",
                      homogeneous_only: bool = False) -> Polynomial:
    """Polynomial with i.i.d. coefficients in the degree-<=d (or exactly d) basis."""
    if n < 1 or d < 1:
        raise ValueError("random_polynomial needs n >= 1 and d >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    exps = homogeneous_exponents(n, d) if homogeneous_only else monomial_basis(n, d)
    if distribution == "gaussian":
        coeffs = rng.standard_normal(len(exps))
    elif distribution == "uniform":
        coeffs = rng.uniform(-1.0, 1.0, len(exps))
    else:
        raise ValueError(f"unknown distribution {distribution!r}; use 'gaussian' or 'uniform'")
    return Polynomial(n, zip(exps, coeffs))
