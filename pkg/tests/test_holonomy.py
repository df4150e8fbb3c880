import numpy as np
import pytest

from conftest import P0, sample_points
from sprayholonomy.ad import DepthExceeded
from sprayholonomy.geometry import LiouvilleField, flat_spray, frame_fields
from sprayholonomy.holonomy import (
    SaturationConfig,
    analyze_distribution,
    bracket,
    contains_liouville,
    curvature_image_residual,
    saturate,
    saturate_with_liouville,
    vertical_diagnostics,
)
from sprayholonomy.words import BracketWord


def test_bracket_example2(examples):
    h1, h2 = frame_fields(examples[2].model)
    B = bracket(h1, h2)
    assert np.max(np.abs(B(P0) - [0, 0, -1, 0])) < 1e-10
    assert str(B.word) == "[h1,h2]" and B.word.depth == 1
    assert B.required_depth == 2


def test_bracket_example1(examples):
    h1, h2 = frame_fields(examples[1].model)
    assert np.allclose(bracket(h1, h2)(P0), [0, 0, -1.25, 1.25], atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_bracket_matches_symbolic_oracle(examples, oracles, k):
    h1, h2 = frame_fields(examples[k].model)
    B = bracket(h1, h2)
    for rec in oracles["examples"][str(k)]["points"]:
        assert np.allclose(B(np.array(rec["point"])), rec["bracket_h1_h2"], rtol=1e-10, atol=1e-10)


def test_self_bracket_vanishes(examples):
    h1, _ = frame_fields(examples[1].model)
    for p in sample_points(examples[1].model, 5, 1):
        assert not np.any(bracket(h1, h1)(p))


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_antisymmetry(examples, k):
    m = examples[k].model
    h = frame_fields(m)
    C = LiouvilleField(m.n)
    pairs = [(h[0], h[1]), (h[0], C), (bracket(h[0], h[1]), h[1])]
    for p in sample_points(m, 10, 200 + k):
        for X, Y in pairs:
            assert np.max(np.abs(bracket(X, Y)(p) + bracket(Y, X)(p))) <= 1e-12


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_jacobi_identity(examples, k):
    m = examples[k].model
    h1, h2 = frame_fields(m)
    X, Y, Z = h1, h2, bracket(h1, h2)
    for p in sample_points(m, 5, 300 + k):
        s = bracket(bracket(X, Y), Z)(p) + bracket(bracket(Y, Z), X)(p) + bracket(bracket(Z, X), Y)(p)
        assert np.max(np.abs(s)) < 1e-6


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_liouville_commutes_with_frame(examples, k):
    m = examples[k].model
    C = LiouvilleField(m.n)
    for p in sample_points(m, 10, 400 + k):
        for h in frame_fields(m):
            assert np.max(np.abs(bracket(C, h)(p))) < 1e-9


def test_bracket_depth_limit(examples):
    h1, h2 = frame_fields(examples[1].model)
    B = h1
    for _ in range(3):
        B = bracket(h2, B)
    with pytest.raises(DepthExceeded):
        bracket(h1, B, max_depth=4)


def test_saturate_examples(examples):
    assert saturate(examples[2].model, P0).rank == 3
    assert saturate(examples[1].model, P0).rank == 4
    res = saturate(flat_spray(3), [0.1, 0.2, 0.3, 1.0, 2.0, 3.0])
    assert res.rank == 3 and res.stabilized


def test_saturate_words(examples):
    res = saturate(examples[2].model, P0)
    # brackets are formed as [generator, admitted field]
    assert [str(w) for w in res.words] == ["h1", "h2", "[h2,h1]"]
    assert res.basis.shape == (4, 3)


def test_liouville_membership(examples):
    m1 = examples[1].model
    for p in sample_points(m1, 20, 5):
        ok, r = contains_liouville(saturate(m1, p).basis, p)
        assert ok and r < 1e-6
    p = np.array([0.1, 0.2, 1.0, 0.5])
    ok, r = contains_liouville(saturate(flat_spray(2), p).basis, p)
    assert not ok and r == pytest.approx(1.0)
    m3 = examples[3].model
    for p in sample_points(m3, 20, 6):
        assert not contains_liouville(saturate(m3, p).basis, p)[0]


def test_vertical_diagnostics(examples):
    m2 = examples[2].model
    assert vertical_diagnostics(m2, saturate(m2, P0).basis, P0) == (1, [True, False])
    m1 = examples[1].model
    assert vertical_diagnostics(m1, saturate(m1, P0).basis, P0) == (2, [True, True])
    flat = flat_spray(2)
    p = np.array([0.1, 0.2, 1.0, 0.5])
    assert vertical_diagnostics(flat, saturate(flat, p).basis, p) == (0, [False, False])


def test_analyze_distribution(examples):
    rep = analyze_distribution(examples[2].model, sample_points(examples[2].model, 50, 8))
    assert rep.generic_rank == 3 and rep.generic_codim == 1 and not rep.non_regular
    rep = analyze_distribution(examples[4].model, sample_points(examples[4].model, 50, 9))
    assert rep.generic_rank == 2 and rep.generic_codim == 2
    rep = analyze_distribution(flat_spray(2), [[0, 0, 1, 0], [0.5, 0.5, 0, 1]])
    assert rep.histogram == {2: 2}


def test_analyze_distribution_skips_bad_points(examples):
    m = examples[2].model
    rep = analyze_distribution(m, [P0, [0.0, 0.0, 1.0, 1.0]])  # x2 = 0 divides by zero
    assert len(rep.points) == 1 and len(rep.skipped) == 1


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_structural_invariants(examples, k):
    m = examples[k].model
    for p in sample_points(m, 10, 500 + k):
        sat = saturate(m, p)
        assert m.n <= sat.rank <= 2 * m.n
        vrank, _ = vertical_diagnostics(m, sat.basis, p)
        assert vrank == sat.rank - m.n
        assert curvature_image_residual(m, p, sat.basis) < 1e-6
        assert saturate_with_liouville(m, p).rank <= sat.rank + 1


def test_rank_monotone_in_depth(examples):
    m = examples[1].model
    for p in sample_points(m, 5, 12):
        ranks = [saturate(m, p, SaturationConfig(max_bracket_depth=d)).rank for d in range(0, 5)]
        assert ranks == sorted(ranks)
        assert ranks[0] == 2


def test_depth_limit_reports_lower_bound(examples):
    res = saturate(examples[1].model, P0, SaturationConfig(max_bracket_depth=0))
    assert res.rank == 2 and not res.stabilized and res.warnings


def test_bracket_word():
    w = BracketWord.bracket(BracketWord.generator(1), BracketWord.bracket(BracketWord.generator(1), BracketWord.generator(2)))
    assert str(w) == "[h1,[h1,h2]]" and w.depth == 2
    w.validate(2)
    with pytest.raises(ValueError):
        w.validate(1)
