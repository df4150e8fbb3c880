"""Vector fields on the chart of the slit tangent bundle, evaluated through jets."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .jet import DepthExceeded, Jet, variables
from .layout import get_layout

DEFAULT_MAX_DEPTH = 8


class EvalContext:
    """Jets of the 2n chart coordinates at one point, plus a memo of derived jets.

    All jets derived from one context share a layout, so truncating a field
    evaluated at a higher order reproduces the lower-order evaluation exactly.
    """

    def __init__(self, point: Sequence[float], order: int, max_depth: int = DEFAULT_MAX_DEPTH):
        if order > max_depth:
            raise DepthExceeded(f"order {order} exceeds max AD depth {max_depth}")
        self.point = np.asarray(point, dtype=float)
        self.order = order
        self.max_depth = max_depth
        self.layout = get_layout(len(self.point), order)
        self.z = variables(self.point, order, self.layout)
        self.memo: dict = {}

    @property
    def dim(self) -> int:
        return len(self.point)

    def const(self, value: float, order: int | None = None) -> Jet:
        return Jet.constant(self.layout, value, self.order if order is None else order)

    def as_jet(self, v, order: int | None = None) -> Jet:
        if isinstance(v, Jet):
            return v
        return self.const(float(v), order)

    def cached(self, key, compute: Callable):
        try:
            return self.memo[key]
        except KeyError:
            val = self.memo[key] = compute()
            return val


class EvaluableField:
    """Base class: a map from chart points to 2n-vectors in the (d/dx, d/dy) frame.

    Subclasses implement :meth:`_compute`, returning 2n jets of order
    ``ctx.order - required_depth``.
    """

    word: object = None
    required_depth: int = 0
    dim: int = 0

    def jets(self, ctx: EvalContext) -> list[Jet]:
        if ctx.order < self.required_depth:
            raise DepthExceeded(
                f"field {self.word} needs order {self.required_depth}, context has {ctx.order}"
            )
        key = ("field", id(self))
        entry = ctx.memo.get(key)
        if entry is None:
            # keep the field alive so its id cannot be reused within this context
            entry = ctx.memo[key] = (self, self._compute(ctx))
        return entry[1]

    def _compute(self, ctx: EvalContext) -> list[Jet]:
        raise NotImplementedError

    def __call__(self, point, max_depth: int = DEFAULT_MAX_DEPTH) -> np.ndarray:
        ctx = EvalContext(point, self.required_depth, max_depth)
        return self.values(ctx)

    def values(self, ctx: EvalContext) -> np.ndarray:
        return np.array([j.value for j in self.jets(ctx)])

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.word}>"


class ComponentField(EvaluableField):
    """Field given by a callable mapping the 2n coordinate scalars to 2n component scalars."""

    def __init__(self, components: Callable, dim: int, word="X", required_depth: int = 0):
        self._components = components
        self.dim = dim
        self.word = word
        self.required_depth = required_depth

    def _compute(self, ctx):
        order = ctx.order - self.required_depth
        return [ctx.as_jet(c, order) for c in self._components(ctx.z)]


def jacobian(field: EvaluableField, point, max_depth: int = DEFAULT_MAX_DEPTH) -> np.ndarray:
    """Matrix J[i, j] = dX^i/dz^j at the point."""
    ctx = EvalContext(point, field.required_depth + 1, max_depth)
    return jacobian_in(field, ctx)


def jacobian_in(field: EvaluableField, ctx: EvalContext) -> np.ndarray:
    comps = field.jets(ctx)
    if comps and comps[0].order < 1:
        raise DepthExceeded(f"context order {ctx.order} too low for the Jacobian of {field.word}")
    m = ctx.dim
    return np.array([c.coeffs[1 : 1 + m] for c in comps])


def partial(f: Callable, point, multi_index, max_depth: int = DEFAULT_MAX_DEPTH) -> float:
    """Mixed partial derivative of the scalar function ``f(z)`` at ``point``.

    ``multi_index`` gives the derivative count per coordinate, e.g. (0, 0, 2, 0).
    """
    multi_index = tuple(int(k) for k in multi_index)
    if len(multi_index) != len(point):
        raise ValueError("multi-index length must match the number of coordinates")
    order = sum(multi_index)
    ctx = EvalContext(point, order, max_depth)
    out = ctx.as_jet(f(ctx.z))
    return out.partial(multi_index)
