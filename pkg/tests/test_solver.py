import math

import numpy as np
import pytest

from asymptopt.errors import VerdictError
from asymptopt.geometry import Polyhedron, PolyhedralCone, sample_polyhedron
from asymptopt.poly import Polynomial
from asymptopt.regularity import Status, asymptotic_problem, classify, classify_problem
from asymptopt.solver import (SolveOptions, SolveStatus, convexity_probe, descent_ray_certificate,
                              eaves_check, local_minimize, optimal_value,
                              polyhedral_kkt_residual, solve)

x1, x2 = Polynomial.variables(2)
(x,) = Polynomial.variables(1)
SHIFTED = Polyhedron(np.eye(2), np.ones(2))
ORTHANT = Polyhedron(np.eye(2), np.zeros(2))
LINE = Polyhedron.free(1)


def test_shifted_product():
    rep = solve(SHIFTED, x1 * x2)
    assert rep.status is SolveStatus.FOUND_MINIMUM
    assert rep.heuristic
    assert np.allclose(rep.minimizers, [[1.0, 1.0]], atol=1e-6)
    assert rep.value == pytest.approx(1.0, abs=1e-6)
    assert rep.kkt_residual <= 1e-6


def test_proxy_cubic():
    # brute-force grid oracle on the proxy set: min -0.148148148 near (0.6667, 0.6667)
    K = Polyhedron(np.array([[1.0, 0.0], [-1.0, 1.0], [1.0, -1.0]]), np.array([0.0, 0.0, -10.0]))
    rep = solve(K, x2 ** 3 - x1 * x2)
    assert rep.verdict.status is Status.REGULAR_COERCIVE
    assert rep.status is SolveStatus.FOUND_MINIMUM
    assert rep.value == pytest.approx(-0.14814814703700002, abs=1e-7)
    assert np.allclose(rep.minimizers, [[2 / 3, 2 / 3]], atol=1e-4)


def test_unbounded_certificate():
    rep = solve(ORTHANT, -x1 ** 2)
    assert rep.status is SolveStatus.UNBOUNDED_BELOW
    assert rep.value == -math.inf
    assert np.allclose(rep.certificate.ray, [1.0, 0.0])


@pytest.mark.parametrize("K,f,rays", [
    (ORTHANT, -x1 ** 2, [[1.0, 0.0]]),
    (LINE, -x ** 2 + 5 * x, [[1.0], [-1.0]]),
    (SHIFTED, -x1 * x2, [[2 ** -0.5, 2 ** -0.5]]),
])
def test_descent_rays(K, f, rays):
    cert = descent_ray_certificate(K, f)
    assert any(np.allclose(cert.ray, r, atol=1e-6) for r in rays)
    assert cert.leading_value < 0
    a = cert.anchor
    assert f.evaluate(a + 1e3 * cert.ray) < f.evaluate(a) - 1
    values = [v for _, v in cert.table]
    assert values == sorted(values, reverse=True)


def test_descent_ray_needs_unbounded_verdict():
    with pytest.raises(VerdictError):
        descent_ray_certificate(SHIFTED, x1 * x2)


@pytest.mark.parametrize("K,f,expected", [
    (SHIFTED, x1 * x2, 1.0),
    (LINE, x ** 2, 0.0),
    (ORTHANT, -x1 ** 2, -math.inf),
])
def test_optimal_value(K, f, expected):
    assert optimal_value(K, f) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("eps,expected", [(1e-1, 0.2924017738212866),
                                          (1e-2, 0.13572088082974534),
                                          (1e-3, 0.06299605249474367)])
def test_quartic_tilt(eps, expected):
    K = Polyhedron(np.eye(1), np.zeros(1))
    rep = solve(K, x ** 4 - eps * x)
    assert rep.minimizers[0, 0] == pytest.approx(expected, rel=1e-7)


def test_local_minimize_stays_feasible():
    K = Polyhedron(np.array([[1.0, 1.0]]), np.array([1.0]))
    xs, v, _ = local_minimize(K.with_box(np.zeros(2), 5.0), x1 ** 2 + x2 ** 2, [3.0, -4.0])
    assert np.allclose(xs, [0.5, 0.5], atol=1e-8)
    assert v == pytest.approx(0.5)


def test_kkt_residual_detects_nonstationary_point():
    assert polyhedral_kkt_residual(SHIFTED, x1 * x2, [1.0, 1.0]) <= 1e-12
    assert polyhedral_kkt_residual(SHIFTED, x1 * x2, [2.0, 2.0]) == pytest.approx(math.hypot(2, 2))


def test_eaves_holds_for_shifted_product():
    verdict = classify_problem(SHIFTED, x1 * x2)
    rep = eaves_check(SHIFTED, x1 * x2, verdict)
    assert rep.condition_a_holds
    for r in rep.records:
        assert SHIFTED.contains(r.x)
        assert r.inner_product == pytest.approx(
            float(np.dot([g.evaluate(r.x) for g in (x1 * x2).gradient()], r.ray)), abs=1e-9)


def test_eaves_fails_for_linear_objective():
    verdict = classify_problem(ORTHANT, x1)
    assert verdict.status is Status.NON_REGULAR
    rep = eaves_check(ORTHANT, x1, verdict)
    assert not rep.condition_a_holds
    failing = [r for r in rep.records if not r.satisfied]
    assert any(np.allclose(r.ray, [0.0, 1.0]) for r in failing)
    assert all(r.inner_product == 0.0 for r in failing)


def test_eaves_rejects_regular_verdict():
    with pytest.raises(VerdictError):
        eaves_check(SHIFTED, x1 ** 2 + x2 ** 2, classify_problem(SHIFTED, x1 ** 2 + x2 ** 2))


def test_eaves_pseudoconvex_conclusion():
    f = x1 * x1 + x2
    K = Polyhedron(np.eye(2), np.zeros(2))
    rep = eaves_check(K, f, classify_problem(K, f), pseudoconvex=True)
    assert rep.condition_a_holds
    assert rep.conclusion is not None


@pytest.mark.parametrize("K,f,frac", [
    (SHIFTED, x1 ** 2 + x2 ** 2, 1.0),
    (ORTHANT, x1 * x2, 0.0),
    (Polyhedron(np.array([[0.0, 1.0]]), np.array([1.0])),
     x2 ** 3 / 6 + x1 ** 2 / 2 - x1 * x2, 1.0),
])
def test_convexity_probe(K, f, frac):
    assert convexity_probe(K, f)["psd_fraction"] == frac


def test_minty_consistency_on_convex_instance():
    f = (x1 - 3) ** 2 + (x2 + 1) ** 2 + x1 * x2 * 0.5
    rep = solve(SHIFTED, f)
    x0 = rep.minimizers[0]
    X = sample_polyhedron(SHIFTED, x0, 10.0, 500, np.random.default_rng(0))
    grads = np.stack([g.evaluate_many(X) for g in f.gradient()], axis=1)
    assert np.all(np.sum(grads * (X - x0), axis=1) >= -1e-6)


def test_non_regular_unbounded_solution_ray():
    # f = x1 on the orthant: Sol = {x1 = 0}, so the search keeps finding new points
    rep = solve(ORTHANT, x1, SolveOptions(max_rounds=4))
    assert rep.status is SolveStatus.INCONCLUSIVE or np.allclose(rep.minimizers[:, 0], 0.0)
    x0 = np.zeros(2)
    for t in (1, 10, 100):
        assert x1.evaluate(x0 + t * np.array([0.0, 1.0])) == pytest.approx(rep.value, abs=1e-6)


def test_solution_points_are_box_stable_and_reported_json():
    rep = solve(SHIFTED, x1 * x2)
    js = rep.to_json()
    assert js["status"] == "FoundMinimum" and js["verdict"]["status"] == "NonRegular"
    assert not rep.trace[-1]["touches_boundary"]


def test_solve_is_deterministic():
    f = x1 ** 4 + x2 ** 4 - 3 * x1 * x2 + x1
    a = solve(ORTHANT, f, SolveOptions(seed=3))
    b = solve(ORTHANT, f, SolveOptions(seed=3))
    assert np.array_equal(a.minimizers, b.minimizers) and a.value == b.value


def test_cone_override():
    override = PolyhedralCone(np.array([[1.0, 0.0], [-1.0, 1.0]]))
    K = Polyhedron(np.array([[1.0, 0.0], [-1.0, 1.0], [1.0, -1.0]]), np.array([0.0, 0.0, -10.0]))
    ap = asymptotic_problem(K, x2 ** 3 - x1 * x2, 3, override)
    assert ap.cone is override
    assert classify(ap).status is Status.REGULAR_COERCIVE
