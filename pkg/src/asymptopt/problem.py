"""Problem files: strict JSON describing OP(K, f) plus run settings."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .errors import DimensionMismatchError, EmptySetError, SchemaError
from .geometry import FEAS_TOL, Polyhedron, PolyhedralCone
from .poly import Polynomial
from .regularity import TOL_MU, TOL_OPT

TOP_KEYS = {"n", "objective", "ambient_degree", "constraints", "asymptotic_cone_override",
            "convexity_assertion", "seed", "tolerances"}
REQUIRED = ("n", "objective", "constraints")
TOLERANCE_KEYS = {"mu", "feas", "opt"}


@dataclass(eq=False)
class ProblemFile:
    n: int
    objective: Polynomial
    constraints: Polyhedron
    ambient_degree: int
    cone_override: PolyhedralCone | None = None
    convexity_assertion: bool = False
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: {"mu": TOL_MU, "feas": FEAS_TOL,
                                                      "opt": TOL_OPT})

    def to_json(self):
        out = {"n": self.n, "objective": self.objective.to_json(),
               "ambient_degree": self.ambient_degree,
               "constraints": self.constraints.to_json()}
        if self.cone_override is not None:
            out["asymptotic_cone_override"] = self.cone_override.to_json()
        out["convexity_assertion"] = self.convexity_assertion
        out["seed"] = self.seed
        out["tolerances"] = dict(self.tolerances)
        return out


def _int(obj, key, minimum):
    v = obj[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise SchemaError(key, f"must be an integer >= {minimum}")
    return v


def parse_problem(source) -> ProblemFile:
    """Parse a problem from a path, a JSON string or an already-decoded dict."""
    if isinstance(source, dict):
        obj = source
    else:
        text = source
        if isinstance(source, os.PathLike) or (isinstance(source, str)
                                               and not source.lstrip().startswith("{")):
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError("", f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("", "problem must be a JSON object")
    for key in obj:
        if key not in TOP_KEYS:
            raise SchemaError(key, "unknown key")
    for key in REQUIRED:
        if key not in obj:
            raise SchemaError(key, "missing key")
    n = _int(obj, "n", 1)
    f = Polynomial.from_json(obj["objective"], "objective")
    if f.n != n:
        raise DimensionMismatchError(f"objective has n={f.n}, problem has n={n}")
    if f.degree is None or f.degree < 1:
        raise SchemaError("objective", "must have degree >= 1")
    K = Polyhedron.from_json(obj["constraints"], n, "constraints")
    d = _int(obj, "ambient_degree", 1) if "ambient_degree" in obj else f.degree
    if d < f.degree:
        raise SchemaError("ambient_degree", f"is below the objective degree {f.degree}")
    override = None
    if obj.get("asymptotic_cone_override") is not None:
        override = PolyhedralCone.from_json(obj["asymptotic_cone_override"], n,
                                            "asymptotic_cone_override")
    conv = obj.get("convexity_assertion", False)
    if not isinstance(conv, bool):
        raise SchemaError("convexity_assertion", "must be a boolean")
    seed = _int(obj, "seed", 0) if "seed" in obj else 0
    tol = {"mu": TOL_MU, "feas": FEAS_TOL, "opt": TOL_OPT}
    given = obj.get("tolerances", {})
    if not isinstance(given, dict):
        raise SchemaError("tolerances", "must be an object")
    for key, v in given.items():
        if key not in TOLERANCE_KEYS:
            raise SchemaError(f"tolerances.{key}", "unknown key")
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise SchemaError(f"tolerances.{key}", "must be a positive number")
        tol[key] = float(v)
    if K.is_empty():
        raise EmptySetError("constraint set is empty")
    return ProblemFile(n, f, K, d, override, conv, seed, tol)
