"""Objects induced by a spray: spray and Liouville fields, nonlinear connection,
horizontal frame, curvature, Jacobi endomorphism and isotropy.

Index conventions used throughout:

* ``N[i, j]`` is N^i_j = dG^i/dy^j, and h_j = d/dx^j - N^i_j d/dy^i.
* ``R[i, j, k]`` is R^i_jk = dN^i_j/dx^k - dN^i_k/dx^j with the horizontal
  derivatives d/dx = delta/delta x; with the bracket [X, Y] = DY.X - DX.Y this
  equals the vertical part of [h_j, h_k].
* ``Phi[i, j]`` is y^k R^i_kj; its trace is the Ricci curvature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import expr as ex
from .ad import DEFAULT_MAX_DEPTH, EvalContext, EvaluableField
from .words import BracketWord


# ---------------------------------------------------------------- domain


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    lo_strict: bool = False
    hi_strict: bool = False

    def contains(self, v: float) -> bool:
        if v < self.lo or (self.lo_strict and v == self.lo):
            return False
        if v > self.hi or (self.hi_strict and v == self.hi):
            return False
        return True

    def sample(self, rng: np.random.Generator) -> float:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("cannot sample an unbounded interval")
        return float(rng.uniform(self.lo, self.hi))


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float
    strict: bool = True

    def contains(self, x) -> bool:
        d = math.dist(x, self.center)
        return d < self.radius if self.strict else d <= self.radius


@dataclass(frozen=True)
class Domain:
    """Box constraints on (x, y), an optional ball for x, and the implicit y != 0."""

    x: tuple
    y: tuple
    x_ball: Optional[Ball] = None

    @classmethod
    def box(cls, n: int, x=(-10.0, 10.0), y=(-10.0, 10.0), x_ball: Optional[Ball] = None):
        return cls(
            tuple(Interval(*x) for _ in range(n)),
            tuple(Interval(*y) for _ in range(n)),
            x_ball,
        )

    def contains(self, point) -> bool:
        n = len(self.x)
        xs, ys = point[:n], point[n:]
        if not all(iv.contains(v) for iv, v in zip(self.x, xs)):
            return False
        if not all(iv.contains(v) for iv, v in zip(self.y, ys)):
            return False
        if self.x_ball is not None and not self.x_ball.contains(xs):
            return False
        return any(v != 0.0 for v in ys)

    def contains_base(self, xs) -> bool:
        if not all(iv.contains(v) for iv, v in zip(self.x, xs)):
            return False
        return self.x_ball is None or self.x_ball.contains(xs)

    def sample(self, rng: np.random.Generator, max_tries: int = 10_000) -> np.ndarray:
        for _ in range(max_tries):
            p = np.array([iv.sample(rng) for iv in self.x + self.y])
            if self.contains(p):
                return p
        raise RuntimeError("could not draw an admissible point; domain too thin")


# ---------------------------------------------------------------- model


@dataclass
class SprayModel:
    """A spray given by its coefficient expressions G^i(x, y)."""

    n: int
    G: tuple
    params: Mapping[str, float] = field(default_factory=dict)
    domain: Optional[Domain] = None
    name: str = ""
    _compiled: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.G) != self.n:
            raise ValueError(f"expected {self.n} coefficients, got {len(self.G)}")
        self.G = tuple(self.G)
        if self.domain is None:
            self.domain = Domain.box(self.n)

    @classmethod
    def from_strings(cls, coefficients: Sequence[str], params=None, domain=None, name=""):
        params = dict(params or {})
        n = len(coefficients)
        G = tuple(ex.parse(s, n, params) for s in coefficients)
        return cls(n, G, params, domain, name)

    @property
    def compiled(self):
        if self._compiled is None:
            self._compiled = [ex.compile_expr(g, self.params) for g in self.G]
        return self._compiled

    def coefficients(self, point) -> np.ndarray:
        n = self.n
        x, y = list(point[:n]), list(point[n:])
        return np.array([f(x, y) for f in self.compiled], dtype=float)

    def coefficient_jets(self, ctx: EvalContext):
        """Jets of G^i at the context order."""

        def compute():
            n = self.n
            x, y = ctx.z[:n], ctx.z[n:]
            return [ctx.as_jet(f(x, y)) for f in self.compiled]

        return ctx.cached(("G", id(self)), compute)

    def connection_jets(self, ctx: EvalContext):
        """Jets of N^i_j, one order below the context; returned as ``N[i][j]``."""

        def compute():
            n = self.n
            G = self.coefficient_jets(ctx)
            return [[G[i].derivative(n + j) for j in range(n)] for i in range(n)]

        return ctx.cached(("N", id(self)), compute)

    def context(self, point, order: int, max_depth: int = DEFAULT_MAX_DEPTH) -> EvalContext:
        return EvalContext(point, order, max_depth)


def flat_spray(n: int, domain: Optional[Domain] = None) -> SprayModel:
    return SprayModel.from_strings(["0"] * n, domain=domain or Domain.box(n), name="flat")


# ---------------------------------------------------------------- fields


class SprayField(EvaluableField):
    """S = y^i d/dx^i - 2 G^i d/dy^i."""

    def __init__(self, model: SprayModel):
        self.model = model
        self.dim = 2 * model.n
        self.word = BracketWord.leaf("S")
        self.required_depth = 0

    def _compute(self, ctx):
        n = self.model.n
        G = self.model.coefficient_jets(ctx)
        return list(ctx.z[n:]) + [-2.0 * g for g in G]


class LiouvilleField(EvaluableField):
    """C = y^i d/dy^i."""

    def __init__(self, n: int):
        self.dim = 2 * n
        self.n = n
        self.word = BracketWord.leaf("C")
        self.required_depth = 0

    def _compute(self, ctx):
        n = self.n
        return [ctx.const(0.0) for _ in range(n)] + list(ctx.z[n:])


class FrameField(EvaluableField):
    """h_i = d/dx^i - N^j_i d/dy^j (i is 1-based in the word, 0-based here)."""

    def __init__(self, model: SprayModel, i: int):
        self.model = model
        self.i = i
        self.dim = 2 * model.n
        self.word = BracketWord.generator(i + 1)
        self.required_depth = 1

    def _compute(self, ctx):
        n = self.model.n
        N = self.model.connection_jets(ctx)
        order = ctx.order - 1
        xs = [ctx.const(1.0 if k == self.i else 0.0, order) for k in range(n)]
        ys = [-N[j][self.i] for j in range(n)]
        return xs + ys


def frame_fields(model: SprayModel) -> list[FrameField]:
    return [FrameField(model, i) for i in range(model.n)]


# ---------------------------------------------------------------- operations


def _ctx(model, point, order, max_depth=DEFAULT_MAX_DEPTH):
    p = np.asarray(point, dtype=float)
    if p.shape != (2 * model.n,):
        raise ValueError(f"point must have {2 * model.n} coordinates")
    return EvalContext(p, order, max_depth)


def homogeneity_residual(model: SprayModel, point) -> np.ndarray:
    """r^i = y^j dG^i/dy^j - 2 G^i; vanishes for a spray."""
    ctx = _ctx(model, point, 1)
    n = model.n
    y = ctx.point[n:]
    G = model.coefficient_jets(ctx)
    return np.array([g.gradient()[n:] @ y - 2.0 * g.value for g in G])


@dataclass
class FramePack:
    S: np.ndarray
    C: np.ndarray
    N: np.ndarray  # N[i, j] = N^i_j
    h: np.ndarray  # rows are h_1 .. h_n


def frame_pack(model: SprayModel, point) -> FramePack:
    ctx = _ctx(model, point, 1)
    n = model.n
    y = ctx.point[n:]
    G = model.coefficient_jets(ctx)
    N = np.array([g.gradient()[n:] for g in G])
    Gv = np.array([g.value for g in G])
    h = np.zeros((n, 2 * n))
    for j in range(n):
        h[j, j] = 1.0
        h[j, n:] = -N[:, j]
    return FramePack(
        S=np.concatenate([y, -2.0 * Gv]),
        C=np.concatenate([np.zeros(n), y]),
        N=N,
        h=h,
    )


def almost_tangent(v: np.ndarray) -> np.ndarray:
    """J maps the x-block onto the y-block and kills vertical vectors."""
    n = len(v) // 2
    return np.concatenate([np.zeros(n), v[:n]])


def vertical_part(v: np.ndarray, N: np.ndarray) -> np.ndarray:
    """y-block of v minus its horizontal resolution: (v_y)^i + N^i_j (v_x)^j."""
    n = N.shape[0]
    return v[n:] + N @ v[:n]


@dataclass
class CurvatureData:
    R: np.ndarray  # R[i, j, k] = R^i_jk


def curvature_in(model: SprayModel, ctx: EvalContext) -> CurvatureData:
    n = model.n
    N = model.connection_jets(ctx)
    Nv = np.array([[N[i][j].value for j in range(n)] for i in range(n)])
    dN = np.array([[N[i][j].gradient() for j in range(n)] for i in range(n)])  # [i, j, coord]
    # delta N^i_j / delta x^k = dN^i_j/dx^k - N^m_k dN^i_j/dy^m
    delta = dN[:, :, :n] - np.einsum("mk,ijm->ijk", Nv, dN[:, :, n:])
    R = delta - delta.transpose(0, 2, 1)
    return CurvatureData(R)


def curvature(model: SprayModel, point, max_depth: int = DEFAULT_MAX_DEPTH) -> CurvatureData:
    return curvature_in(model, _ctx(model, point, 2, max_depth))


@dataclass
class JacobiData:
    Phi: np.ndarray
    ric: float
    rho: float


def jacobi_from_curvature(R: np.ndarray, y: np.ndarray) -> JacobiData:
    n = R.shape[0]
    Phi = np.einsum("k,ikj->ij", y, R)
    ric = float(np.trace(Phi))
    return JacobiData(Phi, ric, ric / (n - 1))


def jacobi(model: SprayModel, point, max_depth: int = DEFAULT_MAX_DEPTH) -> JacobiData:
    p = np.asarray(point, dtype=float)
    return jacobi_from_curvature(curvature(model, p, max_depth).R, p[model.n :])


@dataclass
class IsotropyResult:
    decomposes: bool
    rho: float
    alpha: np.ndarray
    residual: float  # |Phi - (rho Id - y (x) alpha)| / max(|Phi|, 1)
    consistency: float  # alpha(y) - rho
    ricci_scalar: float


def isotropy_from_jacobi(jd: JacobiData, y: np.ndarray, tol: float = 1e-8) -> IsotropyResult:
    """Fit Phi^i_j = rho delta^i_j - y^i alpha_j by least squares."""
    n = len(y)
    A = np.zeros((n * n, n + 1))
    b = jd.Phi.reshape(-1)
    for i in range(n):
        for j in range(n):
            r = i * n + j
            A[r, 0] = 1.0 if i == j else 0.0
            A[r, 1 + j] = -y[i]
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    rho, alpha = float(sol[0]), sol[1:]
    fit = rho * np.eye(n) - np.outer(y, alpha)
    scale = max(np.linalg.norm(jd.Phi), 1.0)
    resid = float(np.linalg.norm(jd.Phi - fit) / scale)
    return IsotropyResult(
        decomposes=resid < tol,
        rho=rho,
        alpha=alpha,
        residual=resid,
        consistency=float(alpha @ y - rho),
        ricci_scalar=jd.rho,
    )


def isotropy_check(model: SprayModel, point, tol: float = 1e-8) -> IsotropyResult:
    p = np.asarray(point, dtype=float)
    return isotropy_from_jacobi(jacobi(model, p), p[model.n :], tol)
