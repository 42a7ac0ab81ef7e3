"""Regularity-driven global minimisation of polynomials over polyhedra.

A polynomial problem ``min f(x) s.t. x in K`` is *regular* when the leading
form of ``f`` has no nonzero minimiser on the asymptotic cone of ``K``.
Regular problems are either coercive (and solvable) or unbounded below, and
their solution sets behave stably under small perturbations of ``f``.
"""

__version__ = "0.1.0"

from .errors import (AsymptoptError, CapExceededError, DimensionMismatchError,
                     EmptySetError, IterationLimitError, SchemaError, VerdictError)
from .geometry import (Polyhedron, PolyhedralCone, extreme_rays, project, pseudo_faces,
                       recession_cone)
from .kkt import (HomogeneousForm, KKTPoint, enumerate_kkt, finiteness_probe, genericity_mc,
                  jacobian_rank_check, kkt_residual)
from .poly import Polynomial, random_polynomial
from .problem import ProblemFile, parse_problem
from .regularity import (RegularityVerdict, Status, asymptotic_problem, asymptotic_solution_set,
                         classify, classify_problem, min_on_cone_sphere)
from .solver import (SolveOptions, SolveReport, SolveStatus, descent_ray_certificate,
                     eaves_check, optimal_value, solve)
from .stability import (PerturbationPlan, holder_experiment, local_boundedness_probe,
                        make_plan, usc_probe, value_lipschitz_experiment, error_bound_probe)

__all__ = [
    "__version__",
    "AsymptoptError",
    "CapExceededError",
    "DimensionMismatchError",
    "EmptySetError",
    "IterationLimitError",
    "SchemaError",
    "VerdictError",
    "Polyhedron",
    "PolyhedralCone",
    "extreme_rays",
    "project",
    "pseudo_faces",
    "recession_cone",
    "HomogeneousForm",
    "KKTPoint",
    "enumerate_kkt",
    "finiteness_probe",
    "genericity_mc",
    "jacobian_rank_check",
    "kkt_residual",
    "Polynomial",
    "random_polynomial",
    "ProblemFile",
    "parse_problem",
    "RegularityVerdict",
    "Status",
    "asymptotic_problem",
    "asymptotic_solution_set",
    "classify",
    "classify_problem",
    "min_on_cone_sphere",
    "SolveOptions",
    "SolveReport",
    "SolveStatus",
    "descent_ray_certificate",
    "eaves_check",
    "optimal_value",
    "solve",
    "PerturbationPlan",
    "holder_experiment",
    "local_boundedness_probe",
    "make_plan",
    "usc_probe",
    "value_lipschitz_experiment",
    "error_bound_probe",
]
