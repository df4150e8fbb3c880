"""Truncated multivariate Taylor polynomials ("jets").

A :class:`Jet` carries the Taylor coefficients ``c[alpha] = d^alpha f / alpha!``
of a scalar function in ``m`` variables up to a total order. An order-0 jet
is just a value and behaves exactly like a float: every value component is
computed by the same floating-point operation the plain-real path uses.
"""

from __future__ import annotations

import math

import numpy as np

from . import backend
from .layout import JetLayout, get_layout

_kernels = backend.kernels


def set_kernels(module) -> None:
    """Swap the kernel implementation (used by the benchmark and tests)."""
    global _kernels
    _kernels = module


def active_kernels():
    return _kernels


class DepthExceeded(ValueError):
    """Requested derivative order exceeds the available jet order."""


class Jet:
    __slots__ = ("layout", "coeffs", "order")

    def __init__(self, layout: JetLayout, coeffs: np.ndarray, order: int):
        self.layout = layout
        self.coeffs = coeffs
        self.order = order

    # construction -----------------------------------------------------

    @classmethod
    def constant(cls, layout: JetLayout, value: float, order: int) -> "Jet":
        c = np.zeros(layout.size)
        c[0] = value
        return cls(layout, c, order)

    @classmethod
    def variable(cls, layout: JetLayout, k: int, value: float, order: int) -> "Jet":
        c = np.zeros(layout.size)
        c[0] = value
        if order >= 1:
            c[1 + k] = 1.0
        return cls(layout, c, order)

    # inspection -------------------------------------------------------

    @property
    def value(self) -> float:
        return float(self.coeffs[0])

    def coefficient(self, multi_index) -> float:
        if sum(multi_index) > self.order:
            raise DepthExceeded(
                f"multi-index of order {sum(multi_index)} exceeds jet order {self.order}"
            )
        return float(self.coeffs[self.layout.monomial_index(multi_index)])

    def partial(self, multi_index) -> float:
        """Mixed partial derivative ``d^alpha f`` at the expansion point."""
        if sum(multi_index) > self.order:
            raise DepthExceeded(
                f"multi-index of order {sum(multi_index)} exceeds jet order {self.order}"
            )
        i = self.layout.monomial_index(tuple(multi_index))
        return float(self.coeffs[i] * self.layout.factorials[i])

    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise DepthExceeded("gradient needs a jet of order >= 1")
        m = self.layout.nvars
        return self.coeffs[1 : 1 + m].copy()

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise DepthExceeded(f"cannot raise jet order {self.order} to {order}")
        c = self.coeffs.copy()
        c[self.layout.count(order) :] = 0.0
        return Jet(self.layout, c, order)

    def derivative(self, var: int) -> "Jet":
        """d/dz_var, one order lower."""
        if self.order < 1:
            raise DepthExceeded("cannot differentiate an order-0 jet")
        lay = self.layout
        c = np.zeros(lay.size)
        c[lay.deriv_dst[var]] = lay.deriv_fac[var] * self.coeffs[lay.deriv_src[var]]
        c[lay.count(self.order - 1) :] = 0.0
        return Jet(lay, c, self.order - 1)

    def __repr__(self) -> str:
        return f"Jet(value={self.value!r}, order={self.order}, nvars={self.layout.nvars})"

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.layout is not self.layout:
                raise ValueError("jets from different layouts cannot be combined")
            return other
        return None

    def _binary_order(self, other: "Jet") -> int:
        return min(self.order, other.order)

    def _clip(self, c: np.ndarray, order: int) -> np.ndarray:
        n = self.layout.count(order)
        if n < c.shape[0]:
            c[n:] = 0.0
        return c

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            c = self.coeffs.copy()
            c[0] = self.coeffs[0] + other
            return Jet(self.layout, c, self.order)
        k = self._binary_order(o)
        return Jet(self.layout, self._clip(self.coeffs + o.coeffs, k), k)

    def __radd__(self, other):
        c = self.coeffs.copy()
        c[0] = other + self.coeffs[0]
        return Jet(self.layout, c, self.order)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            c = self.coeffs.copy()
            c[0] = self.coeffs[0] - other
            return Jet(self.layout, c, self.order)
        k = self._binary_order(o)
        return Jet(self.layout, self._clip(self.coeffs - o.coeffs, k), k)

    def __rsub__(self, other):
        c = -self.coeffs
        c[0] = other - self.coeffs[0]
        return Jet(self.layout, c, self.order)

    def __neg__(self):
        return Jet(self.layout, -self.coeffs, self.order)

    def __pos__(self):
        return self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return Jet(self.layout, self.coeffs * other, self.order)
        k = self._binary_order(o)
        lay = self.layout
        c = _kernels.mul(
            self.coeffs, o.coeffs, lay.pair_a, lay.pair_b, lay.pair_c,
            int(lay.pair_offsets[k]), lay.size,
        )
        return Jet(lay, c, k)

    def __rmul__(self, other):
        return Jet(self.layout, other * self.coeffs, self.order)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            if other == 0:
                raise ZeroDivisionError("division by zero")
            return Jet(self.layout, self.coeffs / other, self.order)
        return _divide(self, o)

    def __rtruediv__(self, other):
        return _divide(Jet.constant(self.layout, other, self.order), self)

    def __pow__(self, other):
        o = self._coerce(other)
        if o is None:
            return jet_pow_const(self, float(other))
        u0, p0 = self.value, o.value
        if u0 <= 0.0:
            raise ValueError("power with variable exponent needs a positive base")
        out = jet_exp(o * jet_log(self))
        out.coeffs[0] = math.pow(u0, p0)
        return out

    def __rpow__(self, other):
        base = float(other)
        if base <= 0.0:
            raise ValueError("power with variable exponent needs a positive base")
        out = jet_exp(self * math.log(base))
        out.coeffs[0] = math.pow(base, self.value)
        return out


def _divide(a: Jet, b: Jet) -> Jet:
    b0 = b.coeffs[0]
    if b0 == 0.0:
        raise ZeroDivisionError("division by zero")
    k = min(a.order, b.order)
    lay = a.layout
    c = _kernels.div(
        a.coeffs, b.coeffs, lay.div_a, lay.div_b, lay.div_c,
        lay.div_offsets, lay.mono_offsets, k, lay.size,
    )
    return Jet(lay, c, k)


def _compose(u: Jet, taylor: list) -> Jet:
    """f(u) from the Taylor coefficients ``f^(j)(u0)/j!`` of f at u0."""
    lay = u.layout
    k = u.order
    h = u.coeffs.copy()
    h[0] = 0.0
    c = _kernels.horner(
        h, np.asarray(taylor, dtype=float), lay.pair_a, lay.pair_b, lay.pair_c,
        lay.pair_offsets, k, lay.size,
    )
    c[0] = taylor[0]
    return Jet(lay, c, k)


def _binom_series(p: float, k: int) -> list:
    out = [1.0]
    for j in range(k):
        out.append(out[-1] * (p - j) / (j + 1))
    return out


def jet_sqrt(u: Jet) -> Jet:
    u0 = u.value
    if u0 < 0.0 or (u0 == 0.0 and u.order > 0):
        raise ValueError("sqrt of non-positive value")
    r = math.sqrt(u0)
    if u.order == 0:
        return Jet.constant(u.layout, r, 0)
    b = _binom_series(0.5, u.order)
    return _compose(u, [r] + [r * b[j] / u0**j for j in range(1, u.order + 1)])


def jet_exp(u: Jet) -> Jet:
    e = math.exp(u.value)
    return _compose(u, [e] + [e / math.factorial(j) for j in range(1, u.order + 1)])


def jet_log(u: Jet) -> Jet:
    u0 = u.value
    if u0 <= 0.0:
        raise ValueError("log of non-positive value")
    t = [math.log(u0)]
    for j in range(1, u.order + 1):
        t.append((-1.0) ** (j - 1) / (j * u0**j))
    return _compose(u, t)


def jet_sin(u: Jet) -> Jet:
    s, c = math.sin(u.value), math.cos(u.value)
    cyc = (s, c, -s, -c)
    return _compose(u, [cyc[j % 4] / math.factorial(j) for j in range(u.order + 1)])


def jet_cos(u: Jet) -> Jet:
    s, c = math.sin(u.value), math.cos(u.value)
    cyc = (c, -s, -c, s)
    return _compose(u, [cyc[j % 4] / math.factorial(j) for j in range(u.order + 1)])


def jet_abs(u: Jet) -> Jet:
    u0 = u.value
    if u0 == 0.0 and u.order > 0:
        raise ValueError("abs is not differentiable at 0")
    if u0 < 0.0:
        return -u
    return Jet(u.layout, u.coeffs.copy(), u.order)


def jet_pow_const(u: Jet, p: float) -> Jet:
    u0 = u.value
    value = math.pow(u0, p)  # raises ValueError where the real path does
    if u.order == 0:
        return Jet.constant(u.layout, value, 0)
    is_int = float(p).is_integer()
    if u0 == 0.0 and not (is_int and p >= 0):
        raise ValueError("power is not differentiable at 0")
    b = _binom_series(p, u.order)
    taylor = [value]
    for j in range(1, u.order + 1):
        if is_int and p >= 0 and j > p:
            taylor.append(0.0)
        else:
            taylor.append(b[j] * math.pow(u0, p - j))
    return _compose(u, taylor)


def variables(point, order: int, layout: JetLayout | None = None) -> list[Jet]:
    """Seed one jet per coordinate of ``point`` at the given truncation order."""
    m = len(point)
    lay = layout if layout is not None else get_layout(m, order)
    if lay.degree < order:
        raise DepthExceeded(f"layout degree {lay.degree} below requested order {order}")
    return [Jet.variable(lay, k, float(v), order) for k, v in enumerate(point)]
