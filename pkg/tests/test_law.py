import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from helpers import stable_laws
from pwlcf.errors import (
    AboveFreeSpeedError,
    BelowMinimumError,
    NegativeSpacingWarning,
    ParseError,
)
from pwlcf.law import (
    AffineSegment,
    BehaviorLaw,
    SegmentRef,
    active_segment,
    breakpoints,
    check_stability_condition,
    evaluate,
    fitted_four_segment_law,
    inverse_spacing,
    read_law,
    solve_spacing,
    supremum,
    write_law,
)


# --- reference values -----------------------------------------------------------

def test_table_law_values(table_law):
    assert evaluate(table_law, 0.0) == 0.0
    assert evaluate(table_law, 100.0) == 14.0
    # 0.54 * 20 - 8.1 on the first rising piece
    assert evaluate(table_law, 20.0) == pytest.approx(2.7, abs=1e-12)


def test_fitted_law_value():
    assert evaluate(fitted_four_segment_law(), 10.0) == pytest.approx(1.9, abs=1e-12)


def test_inverse_hand_solved(table_law):
    # (6 + 8.1) / 0.54 and (10 + 1.47) / 0.32
    assert inverse_spacing(table_law, 6.0) == pytest.approx(26.11111111111111, abs=1e-12)
    assert inverse_spacing(table_law, 10.0) == pytest.approx(35.84375, abs=1e-12)


def test_free_speed_is_not_reachable(table_law):
    assert supremum(table_law) == 14.0
    with pytest.raises(AboveFreeSpeedError):
        solve_spacing(table_law, 14.0)


def test_below_minimum(table_law):
    with pytest.raises(BelowMinimumError):
        solve_spacing(table_law, -1.0)


def test_flat_stretch_is_non_unique():
    # y on [0, 5], flat 5 on [5, 10], then y - 5
    law = BehaviorLaw.from_pairs([(1.0, -5.0)], [(1.0, 0.0), (0.0, 5.0)])
    y, flag = solve_spacing(law, 5.0)
    assert y == 5.0 and flag
    y, flag = solve_spacing(law, 3.0)
    assert y == 3.0 and not flag
    assert supremum(law) == math.inf


def test_zero_crossing_at_zero_speed(table_law):
    # V is 0 on [0, 15], the smallest solution is 0 and it is not unique
    y, flag = solve_spacing(table_law, 0.0)
    assert y == 0.0 and flag


# --- structure --------------------------------------------------------------------

def test_segment_validation():
    with pytest.raises(ValueError):
        AffineSegment(float("nan"), 0.0)
    with pytest.raises(ValueError):
        BehaviorLaw((), (AffineSegment(0.0, 1.0),))


def test_active_segment(table_law):
    assert active_segment(table_law, 5.0) == SegmentRef("lower", 0)
    assert active_segment(table_law, 20.0) == SegmentRef("upper", 0)
    assert active_segment(table_law, 100.0) == SegmentRef("upper", 4)


def test_breakpoints_cover_kinks(table_law):
    pts = breakpoints(table_law)
    assert pts[0] == 0.0
    assert any(abs(p - 15.0) < 1e-9 for p in pts)      # 0.54 y - 8.1 = 0
    assert any(abs(p - 6.63 / 0.22) < 1e-9 for p in pts)  # first and second rising lines meet


def test_stability_condition(table_law):
    ok, bad = check_stability_condition(table_law)
    assert ok and bad == []
    steep = BehaviorLaw.from_pairs([(0, 0)], [(1.5, 0.0), (0, 10)])
    ok, bad = check_stability_condition(steep)
    assert not ok
    assert bad[0][0] == SegmentRef("upper", 0)


def test_negative_spacing_warns(table_law):
    with pytest.warns(NegativeSpacingWarning):
        evaluate(table_law, -1.0)
    with pytest.warns(NegativeSpacingWarning):
        evaluate(table_law, np.array([1.0, -1.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        evaluate(table_law, -1.0, warn=False)


def test_arrays_are_read_only(table_law):
    la, lb, ua, ub = table_law.arrays
    assert ua.shape == (5,)
    with pytest.raises(ValueError):
        ua[0] = 1.0


# --- file round trip --------------------------------------------------------------

def test_law_round_trip(tmp_path, table_law):
    path = tmp_path / "law.csv"
    write_law(table_law, path)
    assert read_law(path) == table_law
    assert path.read_text().splitlines()[0] == "group,alpha,beta"


@pytest.mark.parametrize(
    "body, line",
    [
        ("group,alpha,beta\nlower,0,0\nside,1,1\n", 3),
        ("group,alpha,beta\nlower,0,abc\n", 2),
        ("group,alpha,beta\nlower,0\n", 2),
        ("g,a,b\n", 1),
    ],
)
def test_law_parse_errors(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ParseError) as info:
        read_law(path)
    assert info.value.line == line


def test_law_missing_group(tmp_path):
    path = tmp_path / "half.csv"
    path.write_text("group,alpha,beta\nupper,0.5,0\n")
    with pytest.raises(ParseError):
        read_law(path)


# --- properties -------------------------------------------------------------------

@given(stable_laws(), st.lists(st.floats(0, 200), min_size=1, max_size=30))
def test_vector_matches_scalar(law, ys):
    ys = np.array(ys)
    assert_array_equal(evaluate(law, ys), [evaluate(law, y) for y in ys])


@given(stable_laws(), st.floats(0, 200), st.floats(0, 200))
def test_nondecreasing_and_lipschitz(law, a, b):
    lo, hi = min(a, b), max(a, b)
    va, vb = evaluate(law, lo), evaluate(law, hi)
    assert vb >= va
    assert vb - va <= (hi - lo) + 1e-9


@given(stable_laws(), st.floats(0, 150))
def test_inverse_round_trip(law, y):
    v = evaluate(law, y)
    try:
        ys = inverse_spacing(law, v)
    except AboveFreeSpeedError:
        return
    assert_allclose(evaluate(law, ys), v, atol=1e-9)
    # the smallest solution never exceeds y, unless a near-flat piece makes it ill-conditioned
    slope = law.segment(active_segment(law, y)).alpha
    if slope > 1e-6:
        assert ys <= y + 1e-6
