"""Geodesics and parallel translation by fixed-step RK4."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import expr as ex
from .ad import Jet, get_layout
from .geometry import SprayModel


class TransportError(RuntimeError):
    pass


# ---------------------------------------------------------------- curves


@dataclass
class BaseCurve:
    """A base curve on [0, 1]: a polyline, or coordinate expressions in ``t``."""

    n: int
    polyline: Optional[np.ndarray] = None
    exprs: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_points(cls, points) -> "BaseCurve":
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or len(pts) < 2:
            raise ValueError("a polyline needs at least two points")
        return cls(pts.shape[1], polyline=pts)

    @classmethod
    def from_expressions(cls, sources: Sequence[str], params=None) -> "BaseCurve":
        params = dict(params or {})
        names = set(params) | {"t"}
        n = len(sources)
        nodes = tuple(ex.parse(s, n, names) for s in sources)
        for s, node in zip(sources, nodes):
            if ex.free_vars(node):
                raise ex.UnknownIdentifier(f"curve expression {s!r} may only depend on t")
        return cls(n, exprs=nodes, params=params)

    @property
    def closed(self) -> bool:
        a, _ = self.position(0.0)
        b, _ = self.position(1.0)
        return bool(np.max(np.abs(a - b)) <= 1e-12)

    def reversed(self) -> "BaseCurve":
        if self.polyline is not None:
            return BaseCurve.from_points(self.polyline[::-1])
        rev = tuple(_substitute_t(e) for e in self.exprs)
        return BaseCurve(self.n, exprs=rev, params=self.params)

    def segments(self):
        """Pieces on which the curve is smooth, as (t0, t1) intervals of [0, 1]."""
        if self.polyline is None:
            return [(0.0, 1.0)]
        k = len(self.polyline) - 1
        return [(i / k, (i + 1) / k) for i in range(k)]

    def position(self, t: float):
        """(x(t), dx/dt)."""
        if self.polyline is not None:
            k = len(self.polyline) - 1
            i = min(int(t * k), k - 1)
            s = t * k - i
            a, b = self.polyline[i], self.polyline[i + 1]
            return a + s * (b - a), (b - a) * k
        lay = get_layout(1, 1)
        tj = Jet.variable(lay, 0, t, 1)
        vals = [ex.evaluate(e, [], [], {**self.params, "t": tj}) for e in self.exprs]
        x = np.array([v.value if isinstance(v, Jet) else float(v) for v in vals])
        dx = np.array([v.coeffs[1] if isinstance(v, Jet) else 0.0 for v in vals])
        return x, dx

    def segment_position(self, seg: int, t: float):
        """Position on a polyline segment, never crossing into the neighbour."""
        if self.polyline is None:
            return self.position(t)
        k = len(self.polyline) - 1
        s = t * k - seg
        a, b = self.polyline[seg], self.polyline[seg + 1]
        return a + s * (b - a), (b - a) * k


def _substitute_t(node):
    """Replace t by 1 - t."""
    if isinstance(node, ex.Param) and node.name == "t":
        return ex.BinOp("-", ex.Const(1.0), node)
    if isinstance(node, ex.Neg):
        return ex.Neg(_substitute_t(node.arg))
    if isinstance(node, ex.Call):
        return ex.Call(node.func, _substitute_t(node.arg))
    if isinstance(node, ex.BinOp):
        return ex.BinOp(node.op, _substitute_t(node.left), _substitute_t(node.right))
    return node


def square_loop(corner, side: float, axes=(0, 1), n: Optional[int] = None) -> BaseCurve:
    """Axis-aligned counter-clockwise square through ``corner``."""
    c = np.asarray(corner, dtype=float)
    n = n or len(c)
    e1 = np.zeros(n)
    e2 = np.zeros(n)
    e1[axes[0]] = side
    e2[axes[1]] = side
    return BaseCurve.from_points([c, c + e1, c + e1 + e2, c + e2, c])


# ---------------------------------------------------------------- vector fields


def connection_matrix(model: SprayModel, x, y) -> np.ndarray:
    """N[i, j] = dG^i/dy^j at (x, y), differentiating in y only."""
    n = model.n
    lay = get_layout(n, 1)
    yj = [Jet.variable(lay, k, float(v), 1) for k, v in enumerate(y)]
    xs = [float(v) for v in x]
    rows = []
    for f in model.compiled:
        g = f(xs, yj)
        rows.append(g.coeffs[1 : 1 + n] if isinstance(g, Jet) else np.zeros(n))
    return np.array(rows)


def _rk4_step(f, t, s, h):
    k1 = f(t, s)
    k2 = f(t + 0.5 * h, s + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, s + 0.5 * h * k2)
    k4 = f(t + h, s + h * k3)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ---------------------------------------------------------------- geodesics


@dataclass
class Trajectory:
    t: np.ndarray
    states: np.ndarray  # rows (x, y)
    truncated: bool = False
    reason: str = ""


def geodesic(model: SprayModel, v0, T: float, steps: int) -> Trajectory:
    """Solve x'' = -2 G(x, x') as a first-order system in (x, y = x')."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    n = model.n
    s = np.asarray(v0, dtype=float)
    if not model.domain.contains(s):
        raise TransportError("initial state is not admissible")
    h = T / steps

    def rhs(t, st):
        return np.concatenate([st[n:], -2.0 * model.coefficients(st)])

    ts = [0.0]
    states = [s]
    for k in range(steps):
        try:
            s = _rk4_step(rhs, k * h, s, h)
        except ex.ExprError as exc:
            return Trajectory(np.array(ts), np.array(states), True, f"evaluation error: {exc}")
        if not model.domain.contains(s):
            return Trajectory(np.array(ts), np.array(states), True, "trajectory left the domain")
        ts.append((k + 1) * h)
        states.append(s)
    return Trajectory(np.array(ts), np.array(states))


# ---------------------------------------------------------------- parallel translation


@dataclass
class TransportResult:
    initial: np.ndarray
    final: np.ndarray
    steps: int
    error_estimate: float
    trace: Optional[list] = None


def _lift(model: SprayModel, curve: BaseCurve, v0: np.ndarray, steps: int, trace: bool, slit_tol: float):
    n = model.n
    segs = curve.segments()
    per = max(1, steps // len(segs))
    y = v0.copy()
    scale = np.linalg.norm(v0)
    rows = [] if trace else None
    for si, (t0, t1) in enumerate(segs):

        def rhs(t, yy, si=si):
            x, dx = curve.segment_position(si, t)
            return -connection_matrix(model, x, yy) @ dx

        h = (t1 - t0) / per
        for k in range(per):
            t = t0 + k * h
            if rows is not None:
                x, _ = curve.segment_position(si, t)
                rows.append([t] + list(x) + list(y))
            try:
                y = _rk4_step(rhs, t, y, h)
            except ex.ExprError as exc:
                raise TransportError(f"evaluation error along the lift: {exc}") from None
            if np.linalg.norm(y) < slit_tol * scale:
                raise TransportError("horizontal lift approached the zero section")
    if rows is not None:
        x, _ = curve.segment_position(len(segs) - 1, 1.0)
        rows.append([1.0] + list(x) + list(y))
    return y, per * len(segs), rows


def horizontal_lift(
    model: SprayModel,
    curve: BaseCurve,
    v0,
    steps: int,
    trace: bool = False,
    estimate_error: bool = True,
    slit_tol: float = 1e-10,
) -> TransportResult:
    """Integrate dy/dt = -N(x(t), y) dx/dt along the curve; the endpoint is tau(v0)."""
    v0 = np.asarray(v0, dtype=float)
    if not np.any(v0):
        raise TransportError("initial vector must be nonzero")
    for t in np.linspace(0.0, 1.0, 9):
        if not model.domain.contains_base(curve.position(float(t))[0]):
            raise TransportError("curve leaves the base domain")
    final, used, rows = _lift(model, curve, v0, steps, trace, slit_tol)
    err = float("nan")
    if estimate_error:
        coarse, _, _ = _lift(model, curve, v0, max(len(curve.segments()), steps // 2), False, slit_tol)
        err = float(np.linalg.norm(final - coarse) / 15.0)
    return TransportResult(v0, final, used, err, rows)


def invariance_by_transport(model: SprayModel, E, loop: BaseCurve, v0, steps: int) -> float:
    """|E(tau(v0)) - E(v0)| around a closed loop."""
    if not loop.closed:
        raise ValueError("loop is not closed")
    v0 = np.asarray(v0, dtype=float)
    res = horizontal_lift(model, loop, v0, steps, estimate_error=False)
    x0, _ = loop.position(0.0)
    return abs(E.value(np.concatenate([x0, res.final])) - E.value(np.concatenate([x0, v0])))


@dataclass
class ConvergenceResult:
    steps: int
    error_coarse: float
    error_fine: float
    order: float


def measured_order(model: SprayModel, v0, T: float, steps: int, refine: int = 16) -> ConvergenceResult:
    """Observed order of the geodesic integrator from defects at h and h/2.

    The reference is the same integrator at ``refine`` times the coarse
    resolution, which is accurate enough while refine**4 dwarfs 2**4.
    """
    ref = geodesic(model, v0, T, steps * refine)
    a = geodesic(model, v0, T, steps)
    b = geodesic(model, v0, T, 2 * steps)
    if ref.truncated or a.truncated or b.truncated:
        raise TransportError("geodesic left the domain during the convergence study")
    end = ref.states[-1]
    e1 = float(np.linalg.norm(a.states[-1] - end))
    e2 = float(np.linalg.norm(b.states[-1] - end))
    order = float(np.log2(e1 / e2)) if e2 > 0.0 else float("inf")
    return ConvergenceResult(steps, e1, e2, order)
