"""Candidate Lagrangians and the h(2)-variational classification of a spray.

The Euler-Lagrange check uses the coordinate form

    r_i = S(dE/dy^i) - dE/dx^i,   S = y^j d/dx^j - 2 G^j d/dy^j,

which vanishes exactly when S is the geodesic spray of a regular E, and
needs only second derivatives of E.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from . import expr as ex
from .ad import EvalContext
from .geometry import SprayModel

DEFAULT_TOLERANCES = {
    "rank": 1e-8,
    "el": 1e-8,
    "invariance": 1e-7,
    "homogeneity": 1e-9,
    "hessian": 1e-8,
    "membership": 1e-6,
    "curvature": 1e-9,
    "isotropy": 1e-8,
}


# ---------------------------------------------------------------- candidates


@dataclass
class LagrangianCandidate:
    name: str
    expr: ex.Node
    degree: float = 2
    params: Mapping[str, float] = field(default_factory=dict)
    _compiled: object = field(default=None, init=False, repr=False, compare=False)

    @classmethod
    def from_string(cls, name: str, source: str, n: int, params=None, degree: float = 2):
        params = dict(params or {})
        return cls(name, ex.parse(source, n, params), degree, params)

    @property
    def source(self) -> str:
        return ex.to_source(self.expr)

    @property
    def compiled(self):
        if self._compiled is None:
            self._compiled = ex.compile_expr(self.expr, self.params)
        return self._compiled

    def value(self, point) -> float:
        n = len(point) // 2
        return float(self.compiled(list(point[:n]), list(point[n:])))

    def jet(self, ctx: EvalContext):
        def compute():
            n = ctx.dim // 2
            return ctx.as_jet(self.compiled(ctx.z[:n], ctx.z[n:]))

        return ctx.cached(("E", id(self)), compute)


def _ctx(point, order):
    return EvalContext(np.asarray(point, dtype=float), order)


def el_residual(model: SprayModel, E: LagrangianCandidate, point) -> np.ndarray:
    n = model.n
    ctx = _ctx(point, 2)
    e = E.jet(ctx)
    y = ctx.point[n:]
    G = model.coefficients(ctx.point)
    H = np.array([[e.partial(_mi(2 * n, a, b)) for b in range(2 * n)] for a in range(2 * n)])
    grad = e.gradient()
    out = np.empty(n)
    for i in range(n):
        row = H[n + i]  # d/dz (dE/dy^i)
        out[i] = y @ row[:n] - 2.0 * (G @ row[n:]) - grad[i]
    return out


def _mi(m: int, a: int, b: int) -> tuple:
    mi = [0] * m
    mi[a] += 1
    mi[b] += 1
    return tuple(mi)


def invariance_residual(model: SprayModel, E: LagrangianCandidate, point, basis: np.ndarray) -> np.ndarray:
    """dE(B) for every column B of the distribution basis."""
    ctx = _ctx(point, 1)
    grad = E.jet(ctx).gradient()
    return grad @ basis


def horizontal_derivatives(model: SprayModel, E: LagrangianCandidate, point) -> np.ndarray:
    """delta E / delta x^i = dE/dx^i - N^j_i dE/dy^j."""
    n = model.n
    ctx = _ctx(point, 1)
    grad = E.jet(ctx).gradient()
    N = np.array([[c.value for c in row] for row in model.connection_jets(ctx)])
    return grad[:n] - N.T @ grad[n:]


@dataclass
class HessianReport:
    g: np.ndarray
    min_singular: float
    rel_min_singular: float
    definiteness: str  # "positive definite", "negative definite", "indefinite", "singular"


def hessian_report(E: LagrangianCandidate, point, tol: float = 1e-8) -> HessianReport:
    p = np.asarray(point, dtype=float)
    n = len(p) // 2
    ctx = _ctx(p, 2)
    e = E.jet(ctx)
    g = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            g[i, j] = g[j, i] = e.partial(_mi(2 * n, n + i, n + j))
    eig = np.linalg.eigvalsh(g)
    sv = np.abs(eig)
    smax = float(sv.max())
    smin = float(sv.min())
    rel = smin / smax if smax > 0 else 0.0
    if smax == 0.0 or rel < tol:
        kind = "singular"
    elif np.all(eig > 0):
        kind = "positive definite"
    elif np.all(eig < 0):
        kind = "negative definite"
    else:
        kind = "indefinite"
    return HessianReport(g, smin, rel, kind)


def homogeneity_of_candidate(E: LagrangianCandidate, k: float, point) -> float:
    """L_C E - k E = y^j dE/dy^j - k E."""
    p = np.asarray(point, dtype=float)
    n = len(p) // 2
    e = E.jet(_ctx(p, 1))
    return float(e.gradient()[n:] @ p[n:] - k * e.value)


# ---------------------------------------------------------------- combinations


@dataclass(frozen=True)
class Combiner:
    kind: str  # "linear", "geometric-mean", "power-mean"
    coefficients: tuple = ()
    p: float = 1.0


def linear(*coefficients: float) -> Combiner:
    return Combiner("linear", tuple(float(c) for c in coefficients))


def geometric_mean() -> Combiner:
    return Combiner("geometric-mean")


def power_mean(p: float) -> Combiner:
    if p == 0:
        raise ValueError("power mean needs p != 0; use the geometric mean")
    return Combiner("power-mean", p=float(p))


def _num(v: float) -> ex.Node:
    return ex.Neg(ex.Const(-v)) if v < 0 else ex.Const(v)


def _sum(nodes):
    acc = nodes[0]
    for nd in nodes[1:]:
        acc = ex.BinOp("+", acc, nd)
    return acc


def _product(nodes):
    acc = nodes[0]
    for nd in nodes[1:]:
        acc = ex.BinOp("*", acc, nd)
    return acc


class CombinationError(ValueError):
    pass


def combine(
    candidates: Sequence[LagrangianCandidate],
    combiner: Combiner,
    name: Optional[str] = None,
) -> LagrangianCandidate:
    """phi(E_1, ..., E_r) for a 1-homogeneous phi from the fixed whitelist."""
    if not candidates:
        raise CombinationError("nothing to combine")
    degrees = {float(c.degree) for c in candidates}
    if degrees != {2.0}:
        raise CombinationError("functional combinations need degree-2 inputs")
    params: dict = {}
    for c in candidates:
        for k, v in c.params.items():
            if k in params and params[k] != v:
                raise CombinationError(f"conflicting bindings for parameter {k!r}")
            params[k] = v
    r = len(candidates)
    exprs = [c.expr for c in candidates]
    if combiner.kind == "linear":
        if len(combiner.coefficients) != r:
            raise CombinationError("one coefficient per candidate required")
        terms = [
            e if c == 1.0 else ex.BinOp("*", _num(c), e)
            for c, e in zip(combiner.coefficients, exprs)
        ]
        node = _sum(terms)
        label = "lin"
    elif combiner.kind == "geometric-mean":
        node = exprs[0] if r == 1 else ex.BinOp("^", _product(exprs), ex.Const(1.0 / r))
        label = "geomean"
    elif combiner.kind == "power-mean":
        p = combiner.p
        powered = [ex.BinOp("^", e, _num(p)) for e in exprs]
        inner = ex.BinOp("/", _sum(powered), ex.Const(float(r)))
        node = ex.BinOp("^", inner, _num(1.0 / p))
        label = f"pmean{p:g}"
    else:
        raise CombinationError(f"unknown combiner {combiner.kind!r}")
    name = name or f"{label}({','.join(c.name for c in candidates)})"
    return LagrangianCandidate(name, node, 2, params)


def check_positivity(candidates: Sequence[LagrangianCandidate], points) -> None:
    """Mean-type combiners need every input positive at every sampled point."""
    for p in points:
        for c in candidates:
            v = c.value(p)
            if not v > 0.0:
                raise CombinationError(
                    f"candidate {c.name} is not positive at {np.asarray(p).tolist()} (value {v})"
                )


# ---------------------------------------------------------------- reports


@dataclass
class CandidatePoint:
    homogeneity: float
    el: np.ndarray
    invariance: np.ndarray
    horizontal: np.ndarray
    hessian: HessianReport


@dataclass
class CandidateReport:
    name: str
    source: str
    degree: float
    points: list  # list of sample points (arrays)
    records: list  # list of CandidatePoint
    max_homogeneity: float
    max_el: float
    max_invariance: float
    definiteness: str
    regular: bool
    passes: bool
    failures: list


def candidate_point(
    model: SprayModel,
    E: LagrangianCandidate,
    point,
    basis: np.ndarray,
    tolerances: Optional[Mapping[str, float]] = None,
) -> CandidatePoint:
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    return CandidatePoint(
        homogeneity=homogeneity_of_candidate(E, E.degree, point),
        el=el_residual(model, E, point),
        invariance=invariance_residual(model, E, point, basis),
        horizontal=horizontal_derivatives(model, E, point),
        hessian=hessian_report(E, point, tol["hessian"]),
    )


def candidate_report(
    model: SprayModel,
    E: LagrangianCandidate,
    points: Sequence,
    bases: Sequence[np.ndarray],
    tolerances: Optional[Mapping[str, float]] = None,
) -> CandidateReport:
    if len(points) != len(bases):
        raise ValueError("one distribution basis per sample point required")
    records = [candidate_point(model, E, p, B, tolerances) for p, B in zip(points, bases)]
    return aggregate_candidate(E, points, records, tolerances)


def aggregate_candidate(
    E: LagrangianCandidate,
    points: Sequence,
    records: Sequence[CandidatePoint],
    tolerances: Optional[Mapping[str, float]] = None,
) -> CandidateReport:
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    if not records or len(records) != len(points):
        raise ValueError("one record per sample point required")
    max_h = max(abs(r.homogeneity) for r in records)
    max_el = max(float(np.max(np.abs(r.el))) for r in records)
    max_inv = max(float(np.max(np.abs(r.invariance))) if r.invariance.size else 0.0 for r in records)
    kinds = {r.hessian.definiteness for r in records}
    if "singular" in kinds:
        definiteness = "singular"
    elif len(kinds) == 1:
        definiteness = kinds.pop()
    else:
        definiteness = "indefinite"
    regular = definiteness != "singular"
    failures = []
    if float(E.degree) != 2.0:
        failures.append("declared degree is not 2")
    if max_h >= tol["homogeneity"]:
        failures.append(f"homogeneity residual {max_h:.3e} >= {tol['homogeneity']:g}")
    if max_el >= tol["el"]:
        failures.append(f"Euler-Lagrange residual {max_el:.3e} >= {tol['el']:g}")
    if max_inv >= tol["invariance"]:
        failures.append(f"invariance residual {max_inv:.3e} >= {tol['invariance']:g}")
    if not regular:
        failures.append("Hessian singular at some sampled point")
    return CandidateReport(
        name=E.name,
        source=E.source,
        degree=E.degree,
        points=[np.asarray(p, dtype=float) for p in points],
        records=records,
        max_homogeneity=max_h,
        max_el=max_el,
        max_invariance=max_inv,
        definiteness=definiteness,
        regular=regular,
        passes=not failures,
        failures=failures,
    )


# ---------------------------------------------------------------- classification


@dataclass
class IsotropySummary:
    all_isotropic: bool
    max_residual: float
    max_consistency: float
    rho_range: tuple


def summarize_isotropy(results) -> IsotropySummary:
    results = list(results)
    return IsotropySummary(
        all_isotropic=all(r.decomposes for r in results),
        max_residual=max(r.residual for r in results),
        max_consistency=max(abs(r.consistency) for r in results),
        rho_range=(min(r.ricci_scalar for r in results), max(r.ricci_scalar for r in results)),
    )


ASSUME_REGULAR_TRANSPORT = "regular parallel translation assumed (not verifiable numerically)"
ASSUME_ORBITS = "orbits of parallel translation assumed to have at most one local component"
ASSUME_GENERIC = "generic rank of the distribution taken as the maximum over sampled points"
ASSUME_SAMPLED = "conclusions hold at all sampled points only"
ASSUME_FLAT = "vanishing curvature at sampled points taken as R = 0 on the domain"
ASSUME_LIOUVILLE = (
    "the Liouville transversality obstruction is proven for metrizable sprays; "
    "non-variationality is inferred from C lying in the holonomy distribution"
)


@dataclass
class ClassificationVerdict:
    vh2: Union[int, str]
    metrizability: Union[int, str]
    rule: str
    rule_label: str
    statement: str
    assumptions: list
    evidence: dict
    cross_check: Optional[dict] = None
    diagnostics: list = field(default_factory=list)


def classify(
    distribution,
    candidate_reports: Sequence[CandidateReport],
    isotropy: Optional[IsotropySummary],
    tolerances: Optional[Mapping[str, float]] = None,
) -> ClassificationVerdict:
    """Apply rules R0..R5 in priority order and report the first that fires."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    pts = distribution.points
    n = distribution.n
    sample_pts = [p.point for p in pts]
    for rep in candidate_reports:
        if len(rep.points) != len(sample_pts) or not all(
            np.array_equal(a, b) for a, b in zip(rep.points, sample_pts)
        ):
            raise ValueError(f"candidate report {rep.name} was computed on a different sample set")

    codim = distribution.generic_codim
    curv_max = max(p.curvature_max for p in pts)
    evidence = {
        "samples": len(pts),
        "generic_rank": distribution.generic_rank,
        "generic_codim": codim,
        "rank_histogram": {str(k): v for k, v in distribution.histogram.items()},
        "max_curvature": curv_max,
        "liouville_member_all": all(p.liouville_member for p in pts),
        "max_liouville_residual": max(p.liouville_residual for p in pts),
        "passing_candidates": [r.name for r in candidate_reports if r.passes],
    }
    if isotropy is not None:
        evidence["isotropic_all"] = isotropy.all_isotropic

    if curv_max < tol["curvature"]:
        return ClassificationVerdict(
            vh2=n,
            metrizability=n,
            rule="R0",
            rule_label="R0",
            statement="curvature vanishes at all sampled points: the holonomy is trivial and both freedoms are maximal",
            assumptions=[ASSUME_FLAT, ASSUME_SAMPLED],
            evidence=evidence,
        )

    if all(p.liouville_member for p in pts):
        return ClassificationVerdict(
            vh2=0,
            metrizability=0,
            rule="R1",
            rule_label="R1",
            statement="the Liouville field lies in the holonomy distribution at all sampled points: the spray is not variational",
            assumptions=[ASSUME_LIOUVILLE, ASSUME_GENERIC, ASSUME_SAMPLED],
            evidence=evidence,
        )

    for i in range(n):
        if all(p.vertical_flags[i] for p in pts):
            evidence["obstructed_coordinate"] = f"y{i + 1}"
            return ClassificationVerdict(
                vh2=0,
                metrizability=0,
                rule="R2",
                rule_label="R2",
                statement=(
                    f"d/dy{i + 1} lies in the holonomy distribution at all sampled points: every "
                    f"invariant 2-homogeneous E has dE/dy{i + 1} = 0, so no regular Euler-Lagrange function exists; "
                    "the spray cannot be variational"
                ),
                assumptions=[ASSUME_GENERIC, ASSUME_SAMPLED],
                evidence=evidence,
            )

    passing = [r for r in candidate_reports if r.passes]
    if passing:
        best = next((r for r in passing if r.definiteness == "positive definite"), passing[0])
        metr: Union[int, str] = codim if best.definiteness == "positive definite" else "unknown"
        verdict = ClassificationVerdict(
            vh2=codim,
            metrizability=metr,
            rule="R3",
            rule_label="R3",
            statement=(
                f"candidate {best.name} is a regular 2-homogeneous Euler-Lagrange function: "
                f"the h(2)-variational freedom equals the generic codimension {codim}"
            ),
            assumptions=[ASSUME_REGULAR_TRANSPORT, ASSUME_ORBITS, ASSUME_GENERIC, ASSUME_SAMPLED],
            evidence={**evidence, "witness": best.name, "witness_definiteness": best.definiteness},
        )
        if isotropy is not None and isotropy.all_isotropic:
            consistent = codim == 1
            verdict.cross_check = {
                "rule": "R4",
                "expected_vh2": 1,
                "consistent": consistent,
            }
            verdict.rule_label = "R3+R4"
            if not consistent:
                verdict.diagnostics.append(
                    f"isotropic non-flat variational spray must have freedom 1, generic codimension is {codim}"
                )
        return verdict

    return ClassificationVerdict(
        vh2="unknown",
        metrizability="unknown",
        rule="R5",
        rule_label="R5",
        statement="no rule applies; see the evidence table",
        assumptions=[ASSUME_SAMPLED],
        evidence=evidence,
    )
