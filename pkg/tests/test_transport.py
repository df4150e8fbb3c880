import numpy as np
import pytest

from sprayholonomy.geometry import SprayModel, curvature, flat_spray
from sprayholonomy.holonomy import span_residual
from sprayholonomy.transport import (
    BaseCurve,
    TransportError,
    geodesic,
    horizontal_lift,
    invariance_by_transport,
    measured_order,
    square_loop,
)


def by_name(example):
    return {c.name: c for c in example.candidates}


def test_flat_geodesic_is_a_line():
    tr = geodesic(flat_spray(2), [0, 0, 1, 2], 1.0, 10)
    assert np.allclose(tr.states[-1], [1, 2, 1, 2], atol=1e-15) and not tr.truncated


def test_example2_second_coordinate_is_affine(examples):
    v0 = np.array([0.2, 1.0, 0.5, 0.3])
    tr = geodesic(examples[2].model, v0, 1.0, 200)
    assert np.allclose(tr.states[:, 1], v0[1] + v0[3] * tr.t, atol=1e-12)
    assert np.all(tr.states[:, 3] == v0[3])


def test_example3_energy_conserved(examples):
    E = by_name(examples[3])["E_mu"]
    tr = geodesic(examples[3].model, [0.1, 0.2, 0.5, -0.3], 1.0, 1000)
    vals = [E.value(s) for s in tr.states]
    assert max(vals) - min(vals) < 1e-8


def test_example3_geodesic_matches_taylor_oracle(examples, oracles):
    ref = oracles["geodesics"]["example3"]
    tr = geodesic(examples[3].model, ref["v0"], ref["T"], 1000)
    assert np.allclose(tr.states[-1], ref["endpoint"], atol=1e-11)


def test_geodesic_truncates_on_domain_exit(examples):
    tr = geodesic(examples[3].model, [0.8, 0.0, 1.0, 0.0], 1.0, 100)
    assert tr.truncated and "domain" in tr.reason
    assert len(tr.t) < 101


def test_geodesic_preconditions(examples):
    with pytest.raises(ValueError):
        geodesic(flat_spray(2), [0, 0, 1, 0], 1.0, 1)
    with pytest.raises(TransportError):
        geodesic(flat_spray(2), [0, 0, 0, 0], 1.0, 10)


def test_flat_lift_is_identity():
    curve = BaseCurve.from_points([[0, 0], [0.3, 0.1], [0.2, -0.4], [0, 0]])
    res = horizontal_lift(flat_spray(2), curve, [0.7, -0.2], 300)
    assert np.array_equal(res.final, [0.7, -0.2])


def test_example4_flat_holonomy(examples):
    res = horizontal_lift(examples[4].model, square_loop([0, 0], 0.2), [1.0, 0.0], 2000)
    assert np.linalg.norm(res.final - [1.0, 0.0]) < 1e-7


def test_example3_nontrivial_holonomy(examples, oracles):
    ref = oracles["transport"]["example3_loop"]
    loop = square_loop(ref["corner"], ref["side"])
    res = horizontal_lift(examples[3].model, loop, ref["v0"], 2000)
    assert np.linalg.norm(res.final - ref["v0"]) > 1e-3
    assert np.allclose(res.final, ref["final"], atol=1e-10)
    assert res.error_estimate < 1e-9


def test_invariance_by_transport(examples, oracles):
    loop = square_loop([0.1, -0.3], 0.5)
    E = by_name(examples[2])["E_euclid"]
    assert invariance_by_transport(flat_spray(2), E, loop, [0.3, 0.9], 200) < 1e-12

    ref = oracles["transport"]["example3_loop"]
    c = by_name(examples[3])
    loop = square_loop(ref["corner"], ref["side"])
    m = examples[3].model
    assert invariance_by_transport(m, c["E_mu"], loop, ref["v0"], 2000) < 1e-6
    drift = invariance_by_transport(m, c["E_euclid"], loop, ref["v0"], 2000)
    assert drift > 1e-3
    assert drift == pytest.approx(ref["drifts"]["E_euclid"], rel=1e-8)
    # the drift is integrator-independent: doubling the resolution does not change it
    assert invariance_by_transport(m, c["E_euclid"], loop, ref["v0"], 4000) == pytest.approx(drift, rel=1e-9)


def test_open_curve_rejected_for_invariance(examples):
    E = by_name(examples[3])["E_mu"]
    with pytest.raises(ValueError):
        invariance_by_transport(examples[3].model, E, BaseCurve.from_points([[0, 0], [0.1, 0]]), [1, 0], 10)


def test_rk4_order(examples):
    conv = measured_order(examples[3].model, [0.1, 0.2, 0.5, -0.3], 1.0, 20)
    assert 3.5 <= conv.order <= 4.5


def test_reversibility(examples):
    for k, corner in ((1, [0.1, 0.7]), (3, [0.3, 0.2])):
        m = examples[k].model
        loop = square_loop(corner, 0.2)
        v0 = np.array([0.6, -0.8])
        there = horizontal_lift(m, loop, v0, 2000, estimate_error=False).final
        back = horizontal_lift(m, loop.reversed(), there, 2000, estimate_error=False).final
        assert np.linalg.norm(back - v0) < 1e-9


def _richardson_limit(m, x0, v, eps=(0.2, 0.1, 0.05), steps=200):
    D = [(horizontal_lift(m, square_loop(x0, e), v, steps, estimate_error=False).final - v) / e**2 for e in eps]
    # cancel the O(eps) and O(eps^2) terms
    return (8 * D[2] - 6 * D[1] + D[0]) / 3


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_small_loop_defect_is_curvature(examples, k):
    m = examples[k].model
    rng = np.random.default_rng(900 + k)
    for _ in range(4):
        if k in (1, 2):
            # keep the loop small relative to the distance to the singular line x2 = 0
            x0 = np.array([rng.uniform(-0.8, 0.6), rng.uniform(0.5, 1.5)])
        else:
            x0 = rng.uniform(-0.45, 0.25, size=2)
        v = rng.uniform(-1, 1, size=2)
        v /= np.linalg.norm(v)
        L = _richardson_limit(m, x0, v)
        R = curvature(m, np.concatenate([x0, v])).R
        span = np.column_stack([R[:, j, kk] for j in range(2) for kk in range(2)])
        if np.abs(span).max() < 1e-12:
            assert np.linalg.norm(L) < 1e-6
        else:
            assert span_residual(span, L) < 1e-3


def test_lift_errors(examples):
    loop = square_loop([0, 0], 0.2)
    with pytest.raises(TransportError):
        horizontal_lift(flat_spray(2), loop, [0, 0], 10)
    with pytest.raises(TransportError):
        horizontal_lift(examples[3].model, square_loop([0.9, 0.0], 0.5), [1, 0], 10)
    # y1 decays like exp(-40 x1) along the x1 axis and leaves the slit bundle numerically
    m = SprayModel.from_strings(["20*y1^2", "0"])
    with pytest.raises(TransportError, match="zero section"):
        horizontal_lift(m, BaseCurve.from_points([[-0.5, 0], [0.5, 0]]), [1.0, 0.0], 2000)


def test_expression_curve(examples):
    circle = BaseCurve.from_expressions(["0.2*cos(6.283185307179586*t)", "0.2*sin(6.283185307179586*t)"])
    assert circle.closed
    res = horizontal_lift(examples[4].model, circle, [1.0, 0.0], 2000)
    assert np.linalg.norm(res.final - [1.0, 0.0]) < 1e-7
    res3 = horizontal_lift(examples[3].model, circle, [1.0, 0.0], 2000)
    back = horizontal_lift(examples[3].model, circle.reversed(), res3.final, 2000).final
    assert np.linalg.norm(back - [1.0, 0.0]) < 1e-9


def test_trace(examples):
    res = horizontal_lift(examples[3].model, square_loop([0, 0], 0.2), [1, 0], 40, trace=True)
    assert len(res.trace) == 41
    assert res.trace[0][:3] == [0.0, 0.0, 0.0]
    assert np.allclose(res.trace[-1][3:], res.final)
