import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cics import DomainError, expected_clamp, expected_shortfall, make_dist, mixture, point, quantile, solve_index
from cics.dist import Dist, condition_split, moments

UNIF100 = make_dist([(0.05 + 0.1 * i, 0.01) for i in range(100)])


@st.composite
def dists(draw, max_atoms=6):
    n = draw(st.integers(1, max_atoms))
    vals = draw(st.lists(st.integers(0, 40), min_size=n, max_size=n, unique=True))
    ws = draw(st.lists(st.integers(1, 10), min_size=n, max_size=n))
    tot = sum(ws)
    return make_dist([(v / 4, w / tot) for v, w in zip(vals, ws)])


def test_make_dist_canonical():
    D = make_dist([(4, 0.25), (2 / 3, 0.75)])
    assert D.values == (2 / 3, 4.0)
    assert D.probs == (0.75, 0.25)
    assert D.mean == pytest.approx(1.5, abs=1e-12)


def test_make_dist_merges_duplicates():
    D = make_dist([(1, 0.5), (1, 0.25), (2, 0.25)])
    assert D.atoms == [(1.0, 0.75), (2.0, 0.25)]


@pytest.mark.parametrize(
    "pairs",
    [[(-1, 1.0)], [(1, 0.5), (2, 0.4)], [(1, 0.0), (2, 1.0)], [(1, -0.5), (2, 1.5)], []],
)
def test_make_dist_rejects(pairs):
    with pytest.raises(DomainError):
        make_dist(pairs)


def test_b2_mean():
    assert make_dist([(1, 0.75), (8, 0.25)]).mean == 2.75


def test_expected_shortfall_two_box():
    D = make_dist([(2 / 3, 0.75), (4, 0.25)])
    assert expected_shortfall(D, 2, "below") == pytest.approx(1.0, abs=1e-12)


def test_expected_clamp():
    W = make_dist([(2, 0.75), (4, 0.25)])
    assert expected_clamp(W, 2.5, "min") == pytest.approx(2.125)
    assert expected_clamp(W, 2.5, "max") == pytest.approx(2.5 * 0.75 + 1)


def test_solve_index_examples():
    assert solve_index(make_dist([(2 / 3, 0.75), (4, 0.25)]), 1, "below") == pytest.approx(2.0, abs=1e-12)
    assert solve_index(make_dist([(0.5, 0.25), (3, 0.75)]), 1 / 8, "below") == pytest.approx(1.0, abs=1e-12)
    assert solve_index(make_dist([(1, 0.75), (8, 0.25)]), 1, "above") == pytest.approx(4.0, abs=1e-12)


def test_solve_index_above_out_of_range():
    with pytest.raises(DomainError):
        solve_index(make_dist([(1, 1.0)]), 2, "above")


def test_solve_index_zero_cost():
    D = make_dist([(1, 0.5), (3, 0.5)])
    assert solve_index(D, 0, "below") == 1
    assert solve_index(D, 0, "above") == 3


def test_condition_split_uniform():
    sp = condition_split(UNIF100, 2)
    assert sp["p_le"] == pytest.approx(0.2)
    assert sp["le"].mean == pytest.approx(1.0)
    assert sp["gt"].mean == pytest.approx(6.0)


def test_condition_split_outside_support():
    with pytest.raises(DomainError):
        condition_split(UNIF100, 10)


def test_quantile_and_median():
    D = make_dist([(1, 0.5), (3, 0.5)])
    assert quantile(D, 0.5) == 1
    assert quantile(D, 0.51) == 3
    assert UNIF100.median == pytest.approx(4.95)


def test_mixture_and_point():
    M = mixture([(0.5, point(1)), (0.5, make_dist([(1, 0.5), (2, 0.5)]))])
    assert M.atoms == [(1.0, 0.75), (2.0, 0.25)]


def test_moments():
    m = moments(make_dist([(0, 0.25), (2, 0.75)]))
    assert m == {"mean": 1.5, "median": 2.0}


@settings(max_examples=200, deadline=None)
@given(dists(), st.integers(0, 80))
def test_solve_index_inverts_shortfall(D, c4):
    c = c4 / 8
    g = solve_index(D, c, "below")
    assert expected_shortfall(D, g, "below") == pytest.approx(c, abs=1e-9)
    if c <= D.mean:
        h = solve_index(D, c, "above")
        assert expected_shortfall(D, h, "above") == pytest.approx(c, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(dists(), st.floats(0, 12))
def test_clamp_identities(D, y):
    lo = expected_clamp(D, y, "min")
    hi = expected_clamp(D, y, "max")
    assert lo + hi == pytest.approx(D.mean + y, abs=1e-9)
    assert lo == pytest.approx(y - expected_shortfall(D, y, "below"), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(dists())
def test_split_preserves_mean(D):
    if len(D) < 2:
        return
    t = D.values[len(D) // 2 - 1]
    sp = condition_split(D, t)
    assert sp["p_le"] * sp["le"].mean + sp["p_gt"] * sp["gt"].mean == pytest.approx(D.mean, abs=1e-9)
    assert math.isclose(sp["p_le"] + sp["p_gt"], 1.0, abs_tol=1e-12)


def test_dist_is_hashable_and_immutable():
    D = make_dist([(1, 1.0)])
    assert isinstance(hash(D), int)
    with pytest.raises(Exception):
        D.values = (2.0,)  # type: ignore[misc]
    assert isinstance(D, Dist)
