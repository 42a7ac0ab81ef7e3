"""Command line entry point: ``asymptopt COMMAND [PROBLEM] [flags]``.

Exit codes: 0 success, 1 usage or parse error, 2 unbounded below,
3 inconclusive, 4 internal cap exceeded.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .errors import (AsymptoptError, CapExceededError, DimensionMismatchError, EmptySetError,
                     SchemaError, VerdictError)
from .geometry import Polyhedron, recession_cone
from .kkt import KKTOptions, enumerate_kkt, finiteness_probe, genericity_mc
from .problem import ProblemFile, parse_problem
from .regularity import Status, asymptotic_problem, asymptotic_solution_set, classify
from .report import content_hash, dumps
from .solver import SolveOptions, SolveStatus, eaves_check, solve
from .stability import holder_experiment, make_plan, value_lipschitz_experiment

EXIT_OK, EXIT_USAGE, EXIT_UNBOUNDED, EXIT_INCONCLUSIVE, EXIT_CAP = 0, 1, 2, 3, 4

COMMANDS = ("analyze", "solve", "eaves", "perturb", "value-lipschitz", "kkt-enum",
            "genericity")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-mu", type=float, help="regularity threshold on mu")
    common.add_argument("--tol-feas", type=float, help="feasibility tolerance for reported points")
    common.add_argument("--starts", type=int, help="best-sample local starts per round")
    common.add_argument("--box-init", type=float, help="initial search box half-width")
    common.add_argument("--seed", type=int, help="random seed (default: problem seed or 0)")
    common.add_argument("--trials", type=int, help="Monte-Carlo trials")
    common.add_argument("--out", help="directory for report files (default: stdout)")

    parser = _Parser(prog="asymptopt",
                     description="Regularity analysis and global minimisation of "
                                 "polynomials over polyhedra.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("analyze", "solve", "eaves", "kkt-enum"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("problem")
    for name in ("perturb", "value-lipschitz"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("problem")
        p.add_argument("--scales", type=float, nargs="+",
                       help="decreasing perturbation sizes (default 1e-1 .. 1e-4)")
        p.add_argument("--directions", type=int, default=0,
                       help="random unit directions added to the coordinate ones")
    g = sub.add_parser("genericity", parents=[common])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    kind = g.add_mutually_exclusive_group(required=True)
    kind.add_argument("--free", action="store_true", help="K = R^n")
    kind.add_argument("--orthant", action="store_true", help="K = nonnegative orthant")
    kind.add_argument("--box", action="store_true", help="K = [-1, 1]^n")
    g.add_argument("--no-kkt", action="store_true", help="skip the KKT finiteness probe")
    return parser


def _settings(args, problem: ProblemFile | None):
    tol = dict(problem.tolerances) if problem else {"mu": 1e-6, "feas": 1e-9, "opt": 1e-6}
    if args.tol_mu is not None:
        tol["mu"] = args.tol_mu
    if args.tol_feas is not None:
        tol["feas"] = args.tol_feas
    seed = args.seed if args.seed is not None else (problem.seed if problem else 0)
    opts = SolveOptions(seed=seed, tol_mu=tol["mu"])
    if args.starts is not None:
        opts.starts = args.starts
    if args.box_init is not None:
        opts.box_init = args.box_init
    return seed, tol, opts


def _echo(seed, tol, opts):
    return {"seed": seed, "tolerances": tol,
            "solver": {"starts": opts.starts, "box_init": opts.box_init}}


def _verdict(problem, tol, seed):
    ap = asymptotic_problem(problem.constraints, problem.objective, problem.ambient_degree,
                            problem.cone_override)
    return ap, classify(ap, tol=tol["mu"], tol_opt=tol["opt"], seed=seed)


def _cmd_analyze(problem, seed, tol, opts, args):
    ap, verdict = _verdict(problem, tol, seed)
    body = {"verdict": verdict.to_json()}
    if verdict.status is Status.INDETERMINATE:
        body["asymptotic_solution_set"] = None
        return EXIT_INCONCLUSIVE, body, None
    sol = asymptotic_solution_set(ap, tol["mu"], verdict)
    body["asymptotic_solution_set"] = {"kind": sol.kind, "rays": sol.rays.tolist()}
    return EXIT_OK, body, None


def _cmd_solve(problem, seed, tol, opts, args):
    _, verdict = _verdict(problem, tol, seed)
    rep = solve(problem.constraints, problem.objective, opts, d=problem.ambient_degree,
                cone_override=problem.cone_override, verdict=verdict)
    body = rep.to_json()
    viol = max((problem.constraints.violation(x) for x in rep.minimizers), default=0.0)
    body["max_violation"] = viol
    status = rep.status
    if status is SolveStatus.FOUND_MINIMUM and viol > tol["feas"]:
        status = SolveStatus.INCONCLUSIVE
        body["status"] = status.value
    code = {SolveStatus.FOUND_MINIMUM: EXIT_OK, SolveStatus.UNBOUNDED_BELOW: EXIT_UNBOUNDED,
            SolveStatus.INCONCLUSIVE: EXIT_INCONCLUSIVE}[status]
    return code, body, None


def _cmd_eaves(problem, seed, tol, opts, args):
    _, verdict = _verdict(problem, tol, seed)
    rep = eaves_check(problem.constraints, problem.objective, verdict, opts,
                      pseudoconvex=problem.convexity_assertion)
    body = {"verdict": verdict.to_json(), "eaves": rep.to_json()}
    return (EXIT_OK if rep.condition_a_holds else EXIT_INCONCLUSIVE), body, None


def _plan(problem, args, seed):
    scales = args.scales or list(np.logspace(-1, -4, 7))
    return make_plan(problem.objective, scales, problem.ambient_degree,
                     random=args.directions, seed=seed)


def _cmd_perturb(problem, seed, tol, opts, args):
    rep = holder_experiment(problem.constraints, problem.objective,
                            _plan(problem, args, seed), opts)
    body = rep.to_json()
    body.pop("records")
    return EXIT_OK, body, rep.to_csv()


def _cmd_lipschitz(problem, seed, tol, opts, args):
    rep = value_lipschitz_experiment(problem.constraints, problem.objective,
                                     _plan(problem, args, seed), opts)
    body = rep.to_json()
    body.pop("records")
    return EXIT_OK, body, rep.to_csv()


def _cmd_kkt(problem, seed, tol, opts, args):
    C = problem.cone_override or recession_cone(problem.constraints)
    h = problem.objective.homogeneous_component(problem.ambient_degree)
    kopts = KKTOptions(seed=seed)
    enum_ = enumerate_kkt(C, h, kopts)
    body = enum_.to_json()
    body["finiteness"] = finiteness_probe(C, h, kopts, enumeration=enum_)
    return EXIT_OK, body, None


def _cmd_genericity(args, seed, tol):
    n = args.n
    if n < 1 or args.d < 1:
        raise SchemaError("", "--n and --d must be >= 1")
    if args.free:
        K, kind = Polyhedron.free(n), "free"
    elif args.orthant:
        K, kind = Polyhedron(np.eye(n), np.zeros(n), n=n), "orthant"
    else:
        K, kind = Polyhedron.box(-np.ones(n), np.ones(n)), "box"
    trials = args.trials if args.trials is not None else 100
    rep = genericity_mc(K, args.d, trials, seed=seed, kkt=not args.no_kkt)
    body = {"n": n, "d": args.d, "set": kind, **rep.to_json()}
    return EXIT_OK, body, rep.to_csv()


HANDLERS = {"analyze": _cmd_analyze, "solve": _cmd_solve, "eaves": _cmd_eaves,
            "perturb": _cmd_perturb, "value-lipschitz": _cmd_lipschitz, "kkt-enum": _cmd_kkt}


def _emit(args, source_text, body, csv_text, out=None):
    out = out or sys.stdout
    text = dumps(body) + "\n"
    if not args.out:
        out.write(text)
        if csv_text:
            out.write(csv_text)
        return
    os.makedirs(args.out, exist_ok=True)
    key = content_hash(args.command, source_text, dumps(body["settings"]))
    stem = os.path.join(args.out, f"{args.command}-{key}")
    with open(stem + ".json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    if csv_text:
        with open(stem + ".csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
    out.write(stem + ".json\n")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if args.command == "genericity":
            seed, tol, opts = _settings(args, None)
            code, body, csv_text = _cmd_genericity(args, seed, tol)
            source = dumps({"n": args.n, "d": args.d, "free": args.free,
                            "orthant": args.orthant, "box": args.box,
                            "trials": args.trials, "no_kkt": args.no_kkt})
        else:
            with open(args.problem, encoding="utf-8") as fh:
                source = fh.read()
            problem = parse_problem(source)
            seed, tol, opts = _settings(args, problem)
            code, body, csv_text = HANDLERS[args.command](problem, seed, tol, opts, args)
    except (SchemaError, DimensionMismatchError, EmptySetError, VerdictError, OSError) as exc:
        print(f"asymptopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapExceededError as exc:
        print(f"asymptopt: cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (AsymptoptError, ValueError) as exc:
        print(f"asymptopt: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    body = {"command": args.command, "settings": _echo(seed, tol, opts), **body}
    _emit(args, source, body, csv_text)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
