import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import asymptopt.regularity as reg
from asymptopt.errors import IterationLimitError
from asymptopt.geometry import Polyhedron, PolyhedralCone
from asymptopt.poly import Polynomial, random_polynomial
from asymptopt.regularity import (Status, asymptotic_problem, asymptotic_solution_set, classify,
                                  classify_problem, min_on_cone_sphere, sphere_grid)

x1, x2 = Polynomial.variables(2)
(x,) = Polynomial.variables(1)
ORTHANT = PolyhedralCone.orthant(2)
WEDGE = PolyhedralCone(np.array([[1.0, 0.0], [-1.0, 1.0]]))
SHIFTED = Polyhedron(np.eye(2), np.ones(2))
LINE = Polyhedron.free(1)


def _has_row(M, row, tol=1e-6):
    return any(np.allclose(r, row, atol=tol) for r in M)


def test_asymptotic_problem_of_shifted_orthant():
    ap = asymptotic_problem(SHIFTED, x1 * x2, 2)
    assert np.array_equal(ap.cone.A, np.eye(2))
    assert ap.leading_form == x1 * x2


def test_asymptotic_problem_of_wedge():
    ap = asymptotic_problem(WEDGE, x2 ** 3 - x1 * x2, 3)
    assert ap.cone is WEDGE and ap.leading_form == x2 ** 3


def test_asymptotic_problem_of_box():
    ap = asymptotic_problem(Polyhedron.box(-np.ones(2), np.ones(2)), x1 ** 2 - x2, 2)
    assert ap.cone.is_trivial()


def test_min_on_orthant_of_product():
    mu, argmins = min_on_cone_sphere(ORTHANT, x1 * x2)
    assert abs(mu) <= 1e-9
    assert _has_row(argmins, [1, 0]) and _has_row(argmins, [0, 1])


def test_min_on_wedge_of_cube():
    # brute-force arc oracle: 0.3535533905932737 at (0.70710678, 0.70710678)
    mu, argmins = min_on_cone_sphere(WEDGE, x2 ** 3)
    assert mu == pytest.approx(0.3535533905932737, abs=1e-7)
    assert _has_row(argmins, [0.7071067811865476, 0.7071067811865475])


def test_min_on_line():
    mu, argmins = min_on_cone_sphere(PolyhedralCone.free(1), x ** 2)
    assert mu == pytest.approx(1.0)
    assert _has_row(argmins, [1.0]) and _has_row(argmins, [-1.0])


def test_classify_examples():
    v = classify(asymptotic_problem(ORTHANT, x1 * x2, 2))
    assert v.status is Status.NON_REGULAR
    assert np.allclose(sorted(map(tuple, v.witnesses)), [(0, 1), (1, 0)], atol=1e-6)
    assert classify(asymptotic_problem(WEDGE, x2 ** 3 - x1 * x2, 3)).status is Status.REGULAR_COERCIVE


@pytest.mark.parametrize("a2,status", [(1.0, Status.REGULAR_COERCIVE),
                                       (-1.0, Status.REGULAR_UNBOUNDED_BELOW),
                                       (0.0, Status.NON_REGULAR)])
@pytest.mark.parametrize("a1,a0", [(0.0, 0.0), (3.0, -2.0)])
def test_quadratic_family(a2, a1, a0, status):
    v = classify_problem(LINE, a2 * x ** 2 + a1 * x + Polynomial.constant(1, a0), d=2)
    assert v.status is status


def test_asymptotic_solution_sets():
    ap = asymptotic_problem(ORTHANT, x1 * x2, 2)
    sol = asymptotic_solution_set(ap)
    assert sol.kind == "rays" and len(sol.rays) == 2
    assert asymptotic_solution_set(asymptotic_problem(WEDGE, x2 ** 3, 3)).kind == "origin"
    assert asymptotic_solution_set(asymptotic_problem(LINE, -x ** 2, 2)).kind == "empty"


def test_bounded_set_is_always_coercive():
    box = Polyhedron.box(-np.ones(2), np.ones(2))
    for seed in range(5):
        v = classify_problem(box, random_polynomial(2, 3, seed=seed))
        assert v.status is Status.REGULAR_COERCIVE and v.mu == math.inf


def test_indeterminate_on_solver_failure(monkeypatch):
    def boom(*a, **k):
        raise IterationLimitError("stalled")
    monkeypatch.setattr(reg, "min_on_cone_sphere", boom)
    assert classify(asymptotic_problem(ORTHANT, x1 * x2, 2)).status is Status.INDETERMINATE


def test_witnesses_are_unit_and_feasible():
    v = classify(asymptotic_problem(ORTHANT, x1 * x2 + x2 ** 2, 2))
    for w in v.witnesses:
        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert ORTHANT.contains(w)


def test_sphere_grid_is_on_sphere():
    for n in (1, 2, 3):
        G = sphere_grid(n, 0.05)
        assert np.allclose(np.linalg.norm(G, axis=1), 1.0)


@pytest.mark.parametrize("seed", range(8))
def test_lower_order_invariance(seed):
    rng = np.random.default_rng(seed)
    n, d = 2, 3
    K = Polyhedron(np.eye(2), rng.normal(size=2))
    f = random_polynomial(n, d, rng)
    v0 = classify_problem(K, f, d)
    for _ in range(5):
        g = random_polynomial(n, d - 1, rng) * 10
        v1 = classify_problem(K, f + g, d)
        assert v1.status is v0.status
        assert v1.mu == pytest.approx(v0.mu, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 100))
def test_positive_scaling(seed, c):
    f = random_polynomial(2, 2, seed=seed, homogeneous_only=True)
    v0 = classify(asymptotic_problem(ORTHANT, f, 2))
    v1 = classify(asymptotic_problem(ORTHANT, c * f, 2))
    assert v1.status is v0.status
    assert v1.mu == pytest.approx(c * v0.mu, rel=1e-6, abs=1e-6 * max(1, c))


def test_witness_cone_property():
    v = classify(asymptotic_problem(ORTHANT, x1 * x2, 2))
    for w in v.witnesses:
        for t in (0.5, 2.0):
            assert ORTHANT.contains(t * w)
            assert (x1 * x2).evaluate(t * w) == pytest.approx(t ** 2 * (x1 * x2).evaluate(w), abs=1e-12)
