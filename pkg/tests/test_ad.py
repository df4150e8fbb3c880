import math

import numpy as np
import pytest

from conftest import P0, sample_points
from fd_oracle import fd_partial, multi_indices
from sprayholonomy import expr as ex
from sprayholonomy.ad import (
    ComponentField,
    DepthExceeded,
    EvalContext,
    Jet,
    get_layout,
    jacobian,
    partial,
)
from sprayholonomy.ad.jet import jet_cos, jet_exp, jet_log, jet_pow_const, jet_sin, jet_sqrt
from sprayholonomy.geometry import LiouvilleField, SprayField, flat_spray, frame_fields


def scalar(model, i):
    f = model.compiled[i]
    n = model.n
    return lambda z: f(z[:n], z[n:])


def test_partial_example2_connection(examples):
    m = examples[2].model
    assert partial(scalar(m, 0), P0, (0, 0, 1, 0)) == 1.0


def test_second_partial_of_square():
    f = lambda z: z[2] * z[2]
    for p in ([0.3, 0.1, -2.0, 5.0], P0):
        assert partial(f, p, (0, 0, 2, 0)) == 2.0


def test_partial_example1_against_fd(examples):
    m = examples[1].model
    got = partial(scalar(m, 0), P0, (0, 0, 0, 1))
    want = fd_partial(m.G[0], m.params, P0, (0, 0, 0, 1))
    assert abs(got - want) <= 1e-6 * max(1.0, abs(want))


def test_depth_exceeded():
    with pytest.raises(DepthExceeded):
        partial(lambda z: z[0] ** 3, P0, (3, 0, 0, 0), max_depth=2)
    ctx = EvalContext(P0, 1)
    with pytest.raises(DepthExceeded):
        ctx.z[0].partial((2, 0, 0, 0))


def test_jacobian_liouville():
    J = jacobian(LiouvilleField(2), [0.3, -0.2, 0.7, 0.4])
    want = np.zeros((4, 4))
    want[2:, 2:] = np.eye(2)
    assert np.array_equal(J, want)


def test_jacobian_flat_spray():
    J = jacobian(SprayField(flat_spray(2)), [0.3, -0.2, 0.7, 0.4])
    want = np.zeros((4, 4))
    want[:2, 2:] = np.eye(2)
    assert np.array_equal(J, want)


def test_jacobian_h1_example2_against_fd(examples):
    m = examples[2].model
    h1 = frame_fields(m)[0]
    J = jacobian(h1, P0)
    # h1 = (1, 0, -N^1_1, -N^2_1) = (1, 0, -y1/x2, 0)
    comp = ex.parse("-y1/x2", 2)
    for j in range(4):
        alpha = tuple(1 if k == j else 0 for k in range(4))
        assert abs(J[2, j] - fd_partial(comp, {}, P0, alpha)) < 1e-6
    assert np.all(J[[0, 1, 3]] == 0.0)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_partials_up_to_third_order_match_fd(examples, k):
    m = examples[k].model
    alphas = multi_indices(4, 3)
    worst = 0.0
    for p in sample_points(m, 5, seed=100 + k):
        for i in range(m.n):
            ctx = EvalContext(p, 3)
            g = ctx.as_jet(m.compiled[i](ctx.z[:2], ctx.z[2:]))
            for a in alphas:
                want = fd_partial(m.G[i], m.params, p, a)
                worst = max(worst, abs(g.partial(a) - want) / max(1.0, abs(want)))
    assert worst < 1e-6


def test_mixed_partial_symmetry(examples):
    m = examples[1].model
    for p in sample_points(m, 5, seed=7):
        ctx = EvalContext(p, 3)
        g = ctx.as_jet(m.compiled[0](ctx.z[:2], ctx.z[2:]))
        # one stored coefficient per monomial: d_i d_j and d_j d_i read the same slot
        d02 = g.derivative(0).derivative(2)
        d20 = g.derivative(2).derivative(0)
        assert d02.value == d20.value


def test_nesting_consistency(examples):
    """Differentiating the order-k result once gives the order-(k+1) payload."""
    m = examples[3].model
    p = sample_points(m, 1, seed=3)[0]
    hi = EvalContext(p, 4)
    g_hi = hi.as_jet(m.compiled[0](hi.z[:2], hi.z[2:]))
    for k in range(4):
        lo = EvalContext(p, k)
        g_lo = lo.as_jet(m.compiled[0](lo.z[:2], lo.z[2:]))
        # truncating the deeper jet reproduces the shallower one exactly
        assert np.array_equal(g_hi.truncate(k).coeffs[: g_lo.layout.count(k)], g_lo.coeffs[: g_lo.layout.count(k)])
        for var in range(4):
            d = g_hi.derivative(var)
            assert d.value == g_hi.partial(tuple(1 if v == var else 0 for v in range(4)))


def test_order_zero_jets_are_plain_floats():
    lay = get_layout(2, 0)
    a = Jet.constant(lay, 0.7, 0)
    b = Jet.constant(lay, 1.9, 0)
    for f, g in [
        (lambda u: jet_sqrt(u), math.sqrt),
        (lambda u: jet_exp(u), math.exp),
        (lambda u: jet_log(u), math.log),
        (lambda u: jet_sin(u), math.sin),
        (lambda u: jet_cos(u), math.cos),
        (lambda u: jet_pow_const(u, 2.5), lambda v: math.pow(v, 2.5)),
    ]:
        assert f(a).value == g(0.7)
    assert (a / b).value == 0.7 / 1.9
    assert (a * b - a + 3.0).value == 0.7 * 1.9 - 0.7 + 3.0


def test_elementary_functions_against_fd():
    srcs = ["sqrt(1 + x1^2)*exp(y1)", "log(2 + sin(x2))*cos(y2)", "abs(y1)^1.5/(1 + x1^2)"]
    p = [0.3, -0.4, 0.8, 0.6]
    for s in srcs:
        node = ex.parse(s, 2)
        f = ex.compile_expr(node)
        for a in multi_indices(4, 3):
            got = partial(lambda z: f(z[:2], z[2:]), p, a)
            want = fd_partial(node, {}, p, a)
            assert abs(got - want) <= 1e-6 * max(1.0, abs(want)), (s, a)


def test_component_field_and_call():
    X = ComponentField(lambda z: [z[2], z[3], -z[0], -z[1]], 4, "rot")
    assert np.array_equal(X([1.0, 2.0, 3.0, 4.0]), [3.0, 4.0, -1.0, -2.0])
