"""Monomial layouts for truncated multivariate Taylor polynomials.

A layout fixes the number of variables ``m`` and the maximal total degree
``D``. Monomials are stored graded by total degree, so the coefficients of
a jet truncated at order ``k <= D`` form a prefix of the coefficient vector.
Multiplication pairs are sorted by the degree of their product, which lets
every kernel stop at a prefix as well.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import factorial

import numpy as np


class JetLayout:
    __slots__ = (
        "nvars",
        "degree",
        "monomials",
        "index",
        "size",
        "mono_offsets",
        "pair_a",
        "pair_b",
        "pair_c",
        "pair_offsets",
        "div_a",
        "div_b",
        "div_c",
        "div_offsets",
        "deriv_src",
        "deriv_dst",
        "deriv_fac",
        "factorials",
    )

    def __init__(self, nvars: int, degree: int):
        if nvars < 1 or degree < 0:
            raise ValueError("layout needs nvars >= 1 and degree >= 0")
        self.nvars = nvars
        self.degree = degree
        monos: list[tuple[int, ...]] = []
        offsets = [0]
        for d in range(degree + 1):
            level = sorted(
                (m for m in _compositions(d, nvars)), reverse=True
            )
            monos.extend(level)
            offsets.append(len(monos))
        self.monomials = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        # mono_offsets[k] = first index of degree k; mono_offsets[k+1] = count up to degree k
        self.mono_offsets = np.asarray(offsets, dtype=np.intp)

        degs = [sum(m) for m in monos]
        pairs = []
        for i, a in enumerate(monos):
            da = degs[i]
            for j, b in enumerate(monos):
                if da + degs[j] > degree:
                    continue
                c = self.index[tuple(p + q for p, q in zip(a, b))]
                pairs.append((da + degs[j], i, j, c))
        pairs.sort(key=lambda t: t[0])
        self.pair_a = np.asarray([p[1] for p in pairs], dtype=np.intp)
        self.pair_b = np.asarray([p[2] for p in pairs], dtype=np.intp)
        self.pair_c = np.asarray([p[3] for p in pairs], dtype=np.intp)
        # pair_offsets[k] = number of pairs whose product has degree <= k
        self.pair_offsets = np.asarray(
            [sum(1 for p in pairs if p[0] <= k) for k in range(degree + 1)],
            dtype=np.intp,
        )

        # division: pairs with a non-constant divisor factor, grouped by product degree
        dpairs = [p for p in pairs if p[1] != 0]
        self.div_a = np.asarray([p[1] for p in dpairs], dtype=np.intp)
        self.div_b = np.asarray([p[2] for p in dpairs], dtype=np.intp)
        self.div_c = np.asarray([p[3] for p in dpairs], dtype=np.intp)
        self.div_offsets = np.asarray(
            [sum(1 for p in dpairs if p[0] < k) for k in range(degree + 2)],
            dtype=np.intp,
        )

        self.deriv_src = []
        self.deriv_dst = []
        self.deriv_fac = []
        for v in range(nvars):
            src, dst, fac = [], [], []
            for i, m in enumerate(monos):
                if m[v] == 0:
                    continue
                lowered = list(m)
                lowered[v] -= 1
                src.append(i)
                dst.append(self.index[tuple(lowered)])
                fac.append(float(m[v]))
            self.deriv_src.append(np.asarray(src, dtype=np.intp))
            self.deriv_dst.append(np.asarray(dst, dtype=np.intp))
            self.deriv_fac.append(np.asarray(fac, dtype=float))

        self.factorials = np.asarray(
            [float(np.prod([factorial(e) for e in m])) for m in monos]
        )

    def count(self, order: int) -> int:
        """Number of coefficients of a jet truncated at ``order``."""
        return int(self.mono_offsets[order + 1])

    def monomial_index(self, multi_index) -> int:
        return self.index[tuple(multi_index)]

    def __repr__(self) -> str:
        return f"JetLayout(nvars={self.nvars}, degree={self.degree})"


def _compositions(total: int, parts: int):
    """All tuples of ``parts`` non-negative ints summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield tuple(out)


@lru_cache(maxsize=64)
def get_layout(nvars: int, degree: int) -> JetLayout:
    return JetLayout(nvars, degree)
