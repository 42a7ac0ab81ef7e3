"""Acceptance criteria, one test per criterion.

Each criterion prints a single ``PASS``/``FAIL`` line; the lines are also
collected and repeated in the pytest terminal summary.  Run standalone with
``python tests/test_acceptance.py``.
"""

import contextlib
import io
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from asymptopt.cli import run as cli_run
from asymptopt.geometry import Polyhedron, PolyhedralCone
from asymptopt.kkt import enumerate_kkt, finiteness_probe, genericity_mc, jacobian_rank_check
from asymptopt.poly import Polynomial, random_polynomial
from asymptopt.regularity import (Status, asymptotic_problem, asymptotic_solution_set, classify,
                                  classify_problem, min_on_cone_sphere)
from asymptopt.solver import SolveStatus, solve
from asymptopt.stability import gk_family, holder_experiment, make_plan, value_lipschitz_experiment

FIXTURES = Path(__file__).parent / "fixtures"
RESULTS = []


def report(number, ok, detail, seconds):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({seconds:.2f}s) {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


# 1. classification fixtures


def criterion_1():
    x1, x2 = Polynomial.variables(2)
    (x,) = Polynomial.variables(1)
    checks = []

    def a():
        v = classify(asymptotic_problem(PolyhedralCone.orthant(2), x1 * x2, 2))
        w = sorted(tuple(np.round(r, 9)) for r in v.witnesses)
        return v.status is Status.NON_REGULAR and w == [(0.0, 1.0), (1.0, 0.0)]

    def b():
        ap = asymptotic_problem(PolyhedralCone(np.array([[1.0, 0.0], [-1.0, 1.0]])), x2 ** 3, 3)
        v = classify(ap)
        return (v.status is Status.REGULAR_COERCIVE
                and asymptotic_solution_set(ap, verdict=v).kind == "origin")

    def c():
        line = Polyhedron.free(1)
        want = {1.0: Status.REGULAR_COERCIVE, -1.0: Status.REGULAR_UNBOUNDED_BELOW,
                0.0: Status.NON_REGULAR}
        return all(classify_problem(line, a2 * x ** 2 + 0.5 * x - 2.0, d=2).status is s
                   for a2, s in want.items())

    for name, fn in (("a", a), ("b", b), ("c", c)):
        ok, dt = _timed(fn)
        checks.append((name, ok and dt < 1.0, dt))
    detail = ", ".join(f"{n}={'ok' if ok else 'bad'}/{dt:.3f}s" for n, ok, dt in checks)
    return all(ok for _, ok, _ in checks), detail


# 2. the shifted product


def criterion_2():
    x1, x2 = Polynomial.variables(2)
    rep, dt = _timed(lambda: solve(Polyhedron(np.eye(2), np.ones(2)), x1 * x2))
    ok = (rep.status is SolveStatus.FOUND_MINIMUM and len(rep.minimizers) == 1
          and np.max(np.abs(rep.minimizers[0] - 1.0)) <= 1e-6
          and abs(rep.value - 1.0) <= 1e-6 and dt < 5.0)
    return ok, f"minimizers={rep.minimizers.tolist()} value={rep.value!r}"


# 3. Frank-Wolfe property suite


def coercive_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    d = int(rng.integers(2, 5))
    extra = int(rng.integers(0, 3))
    A = np.vstack([np.eye(n), rng.uniform(0, 1, (extra, n))])
    x0 = rng.uniform(-2, 2, n)
    b = A @ x0 - rng.uniform(0, 1, A.shape[0])
    xs = Polynomial.variables(n)
    fd = sum(v ** d for v in xs) + 0.2 * random_polynomial(n, d, rng, homogeneous_only=True)
    return Polyhedron(A, b), fd + random_polynomial(n, d - 1, rng), d


def _feasible_samples(K, center, radius, count, rng):
    out = np.zeros((0, K.n))
    while out.shape[0] < count:
        X = center + rng.uniform(-radius, radius, size=(4 * count, K.n))
        X = X[np.all(X @ K.A.T >= K.b - 1e-12, axis=1)]
        out = np.vstack([out, X])
    return out[:count]


def criterion_3(target=100):
    t = time.perf_counter()
    found, bad, seed = 0, [], 0
    rng = np.random.default_rng(12345)
    while found < target:
        K, f, d = coercive_instance(seed)
        seed += 1
        if classify_problem(K, f, d).status is not Status.REGULAR_COERCIVE:
            continue
        found += 1
        rep = solve(K, f)
        if rep.status is not SolveStatus.FOUND_MINIMUM:
            bad.append((seed - 1, str(rep.status)))
            continue
        X = _feasible_samples(K, rep.minimizers[0], 20.0, 10_000, rng)
        under = int(np.sum(f.evaluate_many(X) < rep.value - 1e-6))
        if under:
            bad.append((seed - 1, f"undercut x{under}"))
    dt = time.perf_counter() - t
    return not bad and dt < 120.0, f"{found} instances, failures={bad}"


# 4. invariance of the verdict


def criterion_4():
    x1, x2 = Polynomial.variables(2)
    y = Polynomial.variables(3)
    bases = [
        (Polyhedron(np.eye(2), np.ones(2)), x1 * x2, 2),
        (Polyhedron(np.eye(2), np.zeros(2)), x1 ** 2 - x1 * x2 + x2 ** 2, 2),
        (Polyhedron(np.array([[1.0, 0.0], [-1.0, 1.0]]), np.zeros(2)), x2 ** 3 - x1 ** 3, 3),
        (Polyhedron.free(2), x1 ** 4 + x2 ** 4 + x1 ** 2 * x2 ** 2, 4),
        (Polyhedron(np.eye(3), -np.ones(3)), y[0] * y[1] * y[2] - y[2] ** 3, 3),
    ]
    rng = np.random.default_rng(2024)
    problems = []
    for K, f, d in bases:
        v0 = classify_problem(K, f, d)
        for _ in range(100):
            g = random_polynomial(K.n, d - 1, rng) * float(rng.uniform(0.1, 10))
            v = classify_problem(K, f + g, d)
            if v.status is not v0.status or abs(v.mu - v0.mu) > 1e-6:
                problems.append(("lower-order", f.to_string(), v.status.value, v.mu))
                break
        for c in (0.01, 0.5, 3.0, 100.0):
            v = classify_problem(K, c * f, d)
            same = (v.status is v0.status and len(v.witnesses) == len(v0.witnesses)
                    and all(min(np.linalg.norm(w - u) for u in v0.witnesses) <= 1e-5
                            for w in v.witnesses))
            if not same:
                problems.append(("scaling", f.to_string(), c))
    return not problems, f"{len(bases)} bases x 100 perturbations, problems={problems}"


# 5. grid oracle


def _angle_grid(n, kind, step):
    """Unit vectors on a spherical-angle grid that includes the cone boundary."""
    if n == 1:
        return np.array([[1.0], [-1.0]]) if kind == "free" else np.array([[1.0]])
    if n == 2:
        hi = 2 * np.pi if kind == "free" else np.pi / 2
        t = np.linspace(0, hi, int(round(hi / step)) + 1)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    hi_t = np.pi if kind == "free" else np.pi / 2
    hi_p = 2 * np.pi if kind == "free" else np.pi / 2
    th = np.linspace(0, hi_t, int(round(hi_t / step)) + 1)
    ph = np.linspace(0, hi_p, int(round(hi_p / step)) + 1)
    T, P = np.meshgrid(th, ph, indexing="ij")
    return np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)],
                    axis=-1).reshape(-1, 3)


def criterion_5(count=100):
    rng = np.random.default_rng(777)
    worst = 0.0
    fails = []
    for k in range(count):
        n = 1 + k % 3
        d = 2 + (k // 3) % 3
        kind = "free" if k % 2 else "orthant"
        h = random_polynomial(n, d, rng, homogeneous_only=True)
        C = PolyhedralCone.free(n) if kind == "free" else PolyhedralCone.orthant(n)
        mu, _ = min_on_cone_sphere(C, h)
        step = 1e-3 if n < 3 else 4e-3
        oracle = float(h.evaluate_many(_angle_grid(n, kind, step)).min())
        gap = abs(mu - oracle)
        tol = 1e-3 * (1 + h.norm())
        worst = max(worst, gap / tol)
        if gap > tol:
            fails.append((k, n, d, kind, mu, oracle))
    return not fails, f"{count} forms, worst gap/tol={worst:.3g}, failures={fails}"


# 6. Hoelder closed forms


def criterion_6():
    t = time.perf_counter()
    (x,) = Polynomial.variables(1)
    scales = list(np.logspace(-1, -4, 7))
    r1 = holder_experiment(Polyhedron.free(1), x ** 2, make_plan(x ** 2, scales))
    r2 = holder_experiment(Polyhedron(np.eye(1), np.zeros(1)), x ** 4,
                           make_plan(x ** 4, scales, directions=[-x]))
    dt = time.perf_counter() - t
    ok = (r1.H_hat is not None and abs(r1.H_hat - 1.0) <= 0.02
          and abs(r1.ell_hat - 0.5) <= 0.025
          and r2.H_hat is not None and abs(r2.H_hat - 0.333) <= 0.02 and dt < 30.0)
    return ok, f"parabola H={r1.H_hat:.6f} ell={r1.ell_hat:.6f}; quartic H={r2.H_hat:.6f}"


# 7. Lipschitz converse mechanism


def criterion_7():
    x1, x2 = Polynomial.variables(2)
    K = Polyhedron(np.eye(2), np.ones(2))
    verdict = classify_problem(K, x1 * x2)
    gk = gk_family(K, x1 * x2, verdict.witnesses[0], ks=range(1, 11))
    all_unbounded = all(g["unbounded"] for g in gk)
    f = x1 ** 2 + x2 ** 2
    rep = value_lipschitz_experiment(K, f, make_plan(f, list(np.logspace(-1, -3, 5)),
                                                     random=4, seed=3))
    within = all(r.value_gap <= rep.L_hat * r.epsilon * (1 + 1e-12) for r in rep.records)
    ok = all_unbounded and within and rep.violations == 0
    return ok, (f"g^k unbounded for k=1..10: {all_unbounded}; L_hat={rep.L_hat:.4f}, "
                f"violations={rep.violations}")


# 8. KKT and genericity


def criterion_8():
    t = time.perf_counter()
    x1, x2 = Polynomial.variables(2)
    C = PolyhedralCone.orthant(2)
    pts = enumerate_kkt(C, x1 ** 2 + x2 ** 2).points
    only_origin = len(pts) == 1 and not np.any(pts[0].x)
    flagged = not finiteness_probe(C, (x1 - x2) ** 2)["finite"]
    ranks = all(jacobian_rank_check(n, d, probe_count=1000, seed=10 * n + d)["rank"] == n
                for n in (1, 2, 3) for d in (2, 3))
    g1 = genericity_mc(Polyhedron.free(1), 2, 1000, seed=0).regular_fraction
    g2 = genericity_mc(Polyhedron(np.eye(2), np.zeros(2)), 2, 1000, seed=0).regular_fraction
    dt = time.perf_counter() - t
    ok = only_origin and flagged and ranks and g1 == 1.0 and g2 >= 0.99 and dt < 120.0
    return ok, (f"origin-only={only_origin} non-isolation flagged={flagged} rank sweep={ranks} "
                f"regular fractions={g1}, {g2}")


# 9. determinism of the command line


CLI_RUNS = [
    ["analyze", FIXTURES / "x1x2_shifted.json"],
    ["solve", FIXTURES / "x1x2_shifted.json"],
    ["eaves", FIXTURES / "x1x2_shifted.json"],
    ["perturb", FIXTURES / "x1x2_shifted.json", "--scales", "0.1", "0.01", "0.001"],
    ["value-lipschitz", FIXTURES / "x1x2_shifted.json", "--scales", "0.1", "0.01"],
    ["kkt-enum", FIXTURES / "x1x2_orthant.json"],
    ["genericity", "--n", "2", "--d", "2", "--orthant", "--trials", "50"],
]


def _cli_bytes(argv):
    with tempfile.TemporaryDirectory() as tmp:
        sink = io.StringIO()
        with contextlib.redirect_stdout(sink):
            code = cli_run([str(a) for a in argv] + ["--seed", "7", "--out", tmp])
        files = {p.name: p.read_bytes() for p in sorted(Path(tmp).iterdir())}
    return code, files


def criterion_9():
    diffs = []
    for argv in CLI_RUNS:
        if _cli_bytes(argv) != _cli_bytes(argv):
            diffs.append(argv[0])
    return not diffs, f"{len(CLI_RUNS)} commands, differing={diffs}"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9]


@pytest.mark.slow
@pytest.mark.parametrize("number", range(1, 10))
def test_criterion(number):
    (ok, detail), dt = _timed(CRITERIA[number - 1])
    assert report(number, ok, detail, dt), detail


if __name__ == "__main__":
    results = []
    for i, fn in enumerate(CRITERIA, 1):
        (ok, detail), dt = _timed(fn)
        results.append(report(i, ok, detail, dt))
    sys.exit(0 if all(results) else 1)
