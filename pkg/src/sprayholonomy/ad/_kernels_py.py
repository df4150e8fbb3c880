"""Pure numpy implementation of the jet kernels.

Summation order matches the compiled kernels pair for pair, so both
backends return bit-identical coefficients.
"""

import numpy as np


def mul(a, b, pa, pb, pc, npairs, size):
    pa = pa[:npairs]
    return np.bincount(pc[:npairs], weights=a[pa] * b[pb[:npairs]], minlength=size)


def div(a, b, da, db, dc, doffs, moffs, order, size):
    out = np.zeros(size)
    b0 = b[0]
    out[0] = a[0] / b0
    for k in range(1, order + 1):
        lo, hi = doffs[k], doffs[k + 1]
        s = np.bincount(dc[lo:hi], weights=b[da[lo:hi]] * out[db[lo:hi]], minlength=size)
        m0, m1 = moffs[k], moffs[k + 1]
        out[m0:m1] = (a[m0:m1] - s[m0:m1]) / b0
    return out


def horner(h, coeffs, pa, pb, pc, poffs, order, size):
    out = np.zeros(size)
    out[0] = coeffs[order]
    npairs = poffs[order]
    pa = pa[:npairs]
    pb = pb[:npairs]
    pc = pc[:npairs]
    for k in range(order - 1, -1, -1):
        out = np.bincount(pc, weights=out[pa] * h[pb], minlength=size)
        out[0] += coeffs[k]
    return out
