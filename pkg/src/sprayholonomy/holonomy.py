"""Holonomy distribution: saturation of the horizontal frame under Lie brackets."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ad import DEFAULT_MAX_DEPTH, DepthExceeded, EvalContext, EvaluableField
from .expr import ExprError
from .geometry import (
    LiouvilleField,
    SprayModel,
    curvature_in,
    frame_fields,
    vertical_part,
)
from .words import BracketWord

log = logging.getLogger(__name__)


class BracketField(EvaluableField):
    """[X, Y] = DY.X - DX.Y, evaluated from the operands' jets one order up."""

    def __init__(self, X: EvaluableField, Y: EvaluableField):
        if X.dim != Y.dim:
            raise ValueError("bracket operands live on different spaces")
        self.X = X
        self.Y = Y
        self.dim = X.dim
        self.word = BracketWord.bracket(X.word, Y.word)
        self.required_depth = 1 + max(X.required_depth, Y.required_depth)

    def _compute(self, ctx):
        Xj = self.X.jets(ctx)
        Yj = self.Y.jets(ctx)
        m = self.dim
        dX = [[c.derivative(k) for k in range(m)] for c in Xj]
        dY = [[c.derivative(k) for k in range(m)] for c in Yj]
        out = []
        for i in range(m):
            acc = None
            for k in range(m):
                term = Xj[k] * dY[i][k] - Yj[k] * dX[i][k]
                acc = term if acc is None else acc + term
            out.append(acc)
        return out


def bracket(X: EvaluableField, Y: EvaluableField, max_depth: int = DEFAULT_MAX_DEPTH) -> BracketField:
    B = BracketField(X, Y)
    if B.required_depth > max_depth:
        raise DepthExceeded(
            f"bracket {B.word} needs AD depth {B.required_depth}, max is {max_depth}"
        )
    return B


# ---------------------------------------------------------------- linear algebra


def numerical_rank(M: np.ndarray, rel_tol: float, scale: Optional[float] = None) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    ref = s[0] if scale is None else scale
    if ref == 0.0:
        return 0
    return int(np.sum(s > rel_tol * ref))


def span_residual(basis: np.ndarray, v: np.ndarray) -> float:
    """Least-squares distance of v to the column span of basis, relative to |v|."""
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0
    if basis.size == 0:
        return 1.0
    coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
    return float(np.linalg.norm(basis @ coef - v) / nv)


# ---------------------------------------------------------------- saturation


@dataclass
class SaturationConfig:
    rank_tol: float = 1e-8
    max_bracket_depth: Optional[int] = None  # default 2n
    max_ad_depth: int = DEFAULT_MAX_DEPTH
    membership_tol: float = 1e-6

    def bracket_depth(self, n: int) -> int:
        return 2 * n if self.max_bracket_depth is None else self.max_bracket_depth


@dataclass
class SaturationResult:
    rank: int
    words: list
    basis: np.ndarray  # 2n x rank
    fields: list
    singular_values: np.ndarray
    stabilized: bool
    warnings: list = field(default_factory=list)


def saturate(
    model: SprayModel,
    point,
    cfg: Optional[SaturationConfig] = None,
    generators: Optional[Sequence[EvaluableField]] = None,
) -> SaturationResult:
    """Grow a basis of the bracket-generated distribution at ``point``.

    Brackets [g, B] are formed for every generator g and every newly admitted
    basis field B; a candidate is admitted iff it raises the numerical rank.
    """
    cfg = cfg or SaturationConfig()
    p = np.asarray(point, dtype=float)
    dim = 2 * model.n
    gens = list(generators) if generators is not None else frame_fields(model)
    max_depth = cfg.bracket_depth(model.n)
    warnings: list[str] = []

    order = max(g.required_depth for g in gens)
    ctx = EvalContext(p, order, cfg.max_ad_depth)

    cols: list[np.ndarray] = []
    fields_: list[EvaluableField] = []

    def try_admit(fld: EvaluableField, vec: np.ndarray) -> bool:
        if len(cols) >= dim:
            return False
        M = np.column_stack(cols + [vec])
        s = np.linalg.svd(M, compute_uv=False)
        if s[0] > 0.0 and s[-1] > cfg.rank_tol * s[0]:
            cols.append(vec)
            fields_.append(fld)
            return True
        return False

    frontier = []
    for g in gens:
        if try_admit(g, g.values(ctx)):
            frontier.append(g)

    stabilized = True
    depth = 0
    while frontier and len(cols) < dim:
        depth += 1
        if depth > max_depth:
            stabilized = False
            warnings.append(
                f"max bracket depth {max_depth} reached before stabilization; rank is a lower bound"
            )
            break
        new_frontier = []
        exhausted = False
        for B in frontier:
            for g in gens:
                cand = BracketField(g, B)
                if cand.required_depth > cfg.max_ad_depth:
                    exhausted = True
                    continue
                if cand.required_depth > ctx.order:
                    ctx = EvalContext(p, cand.required_depth, cfg.max_ad_depth)
                if try_admit(cand, cand.values(ctx)):
                    new_frontier.append(cand)
                if len(cols) >= dim:
                    break
            if len(cols) >= dim:
                break
        if exhausted and len(cols) < dim:
            stabilized = False
            warnings.append(
                f"AD depth {cfg.max_ad_depth} exhausted before stabilization; rank is a lower bound"
            )
            break
        frontier = new_frontier

    basis = np.column_stack(cols) if cols else np.zeros((dim, 0))
    s = np.linalg.svd(basis, compute_uv=False) if cols else np.zeros(0)
    verified = int(np.sum(s > cfg.rank_tol * s[0])) if cols else 0
    if verified != len(cols):
        warnings.append(f"final SVD rank {verified} differs from admitted count {len(cols)}")
    return SaturationResult(
        rank=verified,
        words=[f.word for f in fields_],
        basis=basis,
        fields=fields_,
        singular_values=s,
        stabilized=stabilized,
        warnings=warnings,
    )


def contains_liouville(basis: np.ndarray, point, tol: float = 1e-6) -> tuple[bool, float]:
    p = np.asarray(point, dtype=float)
    n = len(p) // 2
    C = np.concatenate([np.zeros(n), p[n:]])
    r = span_residual(basis, C)
    return r < tol, r


def vertical_diagnostics(
    model: SprayModel,
    basis: np.ndarray,
    point,
    tol: float = 1e-6,
    rank_tol: float = 1e-8,
) -> tuple[int, list[bool]]:
    """Rank of the vertical parts of the basis and per-coordinate vertical membership."""
    p = np.asarray(point, dtype=float)
    n = model.n
    ctx = EvalContext(p, 1)
    N = np.array([[c.value for c in row] for row in model.connection_jets(ctx)])
    if basis.shape[1] == 0:
        return 0, [False] * n
    V = np.column_stack([vertical_part(basis[:, c], N) for c in range(basis.shape[1])])
    smax = np.linalg.svd(basis, compute_uv=False)[0]
    vrank = numerical_rank(V, rank_tol, scale=smax)
    flags = []
    for i in range(n):
        e = np.zeros(2 * n)
        e[n + i] = 1.0
        flags.append(span_residual(basis, e) < tol)
    return vrank, flags


def curvature_image_residual(model: SprayModel, point, basis: np.ndarray) -> float:
    """Worst relative distance of the vertical vectors R^.(j,k) to the span of basis."""
    p = np.asarray(point, dtype=float)
    n = model.n
    R = curvature_in(model, EvalContext(p, 2)).R
    worst = 0.0
    for j in range(n):
        for k in range(j + 1, n):
            v = np.concatenate([np.zeros(n), R[:, j, k]])
            if np.linalg.norm(v) > 1e-14:
                worst = max(worst, span_residual(basis, v))
    return worst


def saturate_with_liouville(model: SprayModel, point, cfg: Optional[SaturationConfig] = None):
    """Saturation of the horizontal frame together with C."""
    gens = frame_fields(model) + [LiouvilleField(model.n)]
    return saturate(model, point, cfg, gens)


# ---------------------------------------------------------------- aggregation


@dataclass
class PointDistribution:
    point: np.ndarray
    rank: int
    words: list
    basis: np.ndarray
    liouville_member: bool
    liouville_residual: float
    vertical_rank: int
    vertical_flags: list
    curvature_max: float
    stabilized: bool
    warnings: list


@dataclass
class DistributionReport:
    n: int
    points: list
    generic_rank: int
    generic_codim: int
    histogram: dict
    non_regular: bool
    skipped: list

    @property
    def ranks(self) -> list[int]:
        return [p.rank for p in self.points]


def analyze_point(model: SprayModel, point, cfg: SaturationConfig) -> PointDistribution:
    p = np.asarray(point, dtype=float)
    sat = saturate(model, p, cfg)
    member, resid = contains_liouville(sat.basis, p, cfg.membership_tol)
    vrank, flags = vertical_diagnostics(model, sat.basis, p, cfg.membership_tol, cfg.rank_tol)
    R = curvature_in(model, EvalContext(p, 2)).R
    return PointDistribution(
        point=p,
        rank=sat.rank,
        words=[str(w) for w in sat.words],
        basis=sat.basis,
        liouville_member=member,
        liouville_residual=resid,
        vertical_rank=vrank,
        vertical_flags=flags,
        curvature_max=float(np.max(np.abs(R))) if R.size else 0.0,
        stabilized=sat.stabilized,
        warnings=sat.warnings,
    )


def analyze_distribution(model: SprayModel, samples, cfg: Optional[SaturationConfig] = None) -> DistributionReport:
    cfg = cfg or SaturationConfig()
    samples = [np.asarray(s, dtype=float) for s in samples]
    if not samples:
        raise ValueError("sample set is empty")
    points, skipped = [], []
    for s in samples:
        try:
            points.append(analyze_point(model, s, cfg))
        except (ExprError, DepthExceeded, np.linalg.LinAlgError) as exc:
            log.warning("skipping sample %s: %s", s.tolist(), exc)
            skipped.append({"point": s.tolist(), "error": str(exc)})
    if not points:
        raise RuntimeError("no sample point could be analyzed")
    ranks = [p.rank for p in points]
    generic = max(ranks)
    hist = dict(sorted(Counter(ranks).items()))
    return DistributionReport(
        n=model.n,
        points=points,
        generic_rank=generic,
        generic_codim=2 * model.n - generic,
        histogram=hist,
        non_regular=len(hist) > 1,
        skipped=skipped,
    )
