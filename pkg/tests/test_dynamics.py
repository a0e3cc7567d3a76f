import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from helpers import random_ring_state, stable_laws
from pwlcf.dynamics import (
    AnticipationConfig,
    DiscountMode,
    LeaderProfile,
    Open,
    Ring,
    Scenario,
    Trajectory,
    anticipated_spacing,
    car_velocity,
    check_anticipation_stability,
    simulate,
    slope_factor,
    step,
    summary_stats,
)
from pwlcf.errors import NoLeaderError, OrderingViolationWarning, TooShortError, UnstableLawWarning
from pwlcf.law import BehaviorLaw, evaluate, inverse_spacing


# --- configuration ------------------------------------------------------------------

def test_discounts_are_repeated_products():
    d = AnticipationConfig(4, 0.5).discounts()
    assert_array_equal(d, [1.0, 1.5, 2.25, 3.375])
    assert_array_equal(AnticipationConfig(3, 0.0).discounts(), [1.0, 1.0, 1.0])


@pytest.mark.parametrize("m, lam", [(0, 0.0), (1.5, 0.0), (1, -0.1), (1, float("nan"))])
def test_bad_anticipation(m, lam):
    with pytest.raises(ValueError):
        AnticipationConfig(m, lam)


def test_leader_profile():
    p = LeaderProfile.parse("0:10,40:2,80:10")
    assert p.speed_at(0) == 10 and p.speed_at(39) == 10 and p.speed_at(40) == 2 and p.speed_at(500) == 10
    s = p.speeds(100)
    assert s.shape == (100,)
    assert_array_equal(s[38:42], [10, 10, 2, 2])
    with pytest.raises(ValueError):
        LeaderProfile(((5, 1.0),))


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario(Open(LeaderProfile.constant(1.0), 3), [0.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        Scenario(Ring(10.0, 3), [10.0, 5.0, 0.0])  # span equals the ring length
    with pytest.raises(ValueError):
        Scenario(Ring(10.0, 2), [1.0])


# --- single step --------------------------------------------------------------------

def test_one_car_update_by_hand(table_law):
    # one leader at 10 m/step, follower 26.111.. behind: follower advances V = 6
    x = np.array([100.0, 100.0 - 14.1 / 0.54])
    topo = Open(LeaderProfile.constant(10.0), 2)
    nxt = step(x, table_law, AnticipationConfig(), topo)
    assert nxt[0] == 110.0
    assert nxt[1] - x[1] == pytest.approx(6.0, abs=1e-12)


def test_anticipated_spacing_by_hand():
    x = np.array([30.0, 20.0, 12.0, 0.0])
    topo = Open(LeaderProfile.constant(0.0), 4)
    cfg = AnticipationConfig(3, 0.0, DiscountMode.ON_SPACING)
    # gaps from car 3: 12, 20/2, 30/3 -> min is 10
    assert anticipated_spacing(x, 3, cfg, topo) == 10.0
    # car 1 has one leader only
    assert anticipated_spacing(x, 1, cfg, topo) == 10.0
    cfg = AnticipationConfig(3, 1.0, DiscountMode.ON_SPACING)
    # 12, 2 * 10, 4 * 10
    assert anticipated_spacing(x, 3, cfg, topo) == 12.0
    with pytest.raises(NoLeaderError):
        anticipated_spacing(x, 0, cfg, topo)


def test_ring_wraps_around():
    x = np.array([20.0, 10.0, 0.0])
    ring = Ring(40.0, 3)
    cfg = AnticipationConfig(2, 0.0, DiscountMode.ON_SPACING)
    # car 0 follows car 2 across the seam (gap 0 - 20 + 40 = 20); car 1 is two ahead, (10 - 20 + 40) / 2 = 15
    assert anticipated_spacing(x, 0, cfg, ring) == 15.0


def test_single_car_ring_follows_itself(table_law):
    ring = Ring(20.0, 1)
    nxt = step(np.array([0.0]), table_law, AnticipationConfig(5, 0.3), ring)
    assert nxt[0] == evaluate(table_law, 20.0)


@pytest.mark.parametrize("mode", list(DiscountMode))
@pytest.mark.parametrize("ring", [True, False])
def test_step_matches_scalar_reference(mode, ring, table_law):
    rng = np.random.default_rng(3)
    cfg = AnticipationConfig(4, 0.7, mode)
    for _ in range(20):
        cars = int(rng.integers(1, 12))
        if ring:
            topo = Ring(30.0 * cars, cars)
            x = random_ring_state(rng, cars, topo.length)
        else:
            topo = Open(LeaderProfile.constant(5.0), cars)
            x = np.sort(rng.uniform(0, 30.0 * cars, cars))[::-1].copy()
        nxt = step(x, table_law, cfg, topo)
        first = 0 if ring else 1
        for n in range(first, cars):
            assert nxt[n] == x[n] + car_velocity(table_law, x, n, cfg, topo)
        if not ring:
            assert nxt[0] == x[0] + 5.0


def test_anticipation_stability_check(table_law):
    # factors (1+lam)^(j-1) / j: 1, 1, 1 for lam = 1 and m = 2
    assert slope_factor(AnticipationConfig(2, 1.0)) == 1.0
    assert check_anticipation_stability(table_law, AnticipationConfig(2, 1.0))
    # 1, 1.5, 3 for lam = 2 and m = 3; 0.54 * 3 > 1
    assert slope_factor(AnticipationConfig(3, 2.0)) == 3.0
    assert not check_anticipation_stability(table_law, AnticipationConfig(3, 2.0))


# --- simulation ---------------------------------------------------------------------

def test_simulate_shape_and_head_car(table_law):
    sc = Scenario.uniform_open(LeaderProfile.parse("0:10,3:4"), 4, inverse_spacing(table_law, 10.0))
    traj = simulate(sc, table_law, AnticipationConfig(), 6)
    assert traj.positions.shape == (4, 7)
    assert_array_equal(traj.velocities[0], [10, 10, 10, 4, 4, 4])
    assert traj.dt_seconds == 0.5


def test_stationary_start_stays_stationary(table_law):
    y = inverse_spacing(table_law, 6.0)
    sc = Scenario.uniform_open(LeaderProfile.constant(6.0), 10, y)
    traj = simulate(sc, table_law, AnticipationConfig(3, 0.0), 50)
    np.testing.assert_allclose(traj.velocities, 6.0, atol=1e-12)


def test_unstable_law_warns():
    law = BehaviorLaw.from_pairs([(0, 0)], [(1.6, -5.0), (0, 10)])
    sc = Scenario.uniform_ring(100.0, 5)
    with pytest.warns(UnstableLawWarning):
        simulate(sc, law, AnticipationConfig(), 3)


def test_ordering_violations_are_recorded():
    # a law that overshoots: cars jump past the car ahead
    law = BehaviorLaw.from_pairs([(3.0, 0.0)], [(3.0, 0.0)])
    sc = Scenario.uniform_open(LeaderProfile.constant(0.0), 3, 10.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        traj = simulate(sc, law, AnticipationConfig(), 2)
    assert traj.violations
    assert all(v.spacing < 0 for v in traj.violations)
    assert any(issubclass(w.category, OrderingViolationWarning) for w in caught)


def test_summary_stats_by_hand():
    # car 0 constant speed, car 1 alternating accelerations
    x = np.array([[30.0, 31.0, 32.0, 33.0], [0.0, 1.0, 3.0, 4.0]])
    st_ = summary_stats(Trajectory(x))
    assert_array_equal(st_.mean_speed, [1.0, 4.0 / 3.0])
    assert_array_equal(st_.accel_std, [0.0, 1.0])
    assert st_.fleet_accel_std == pytest.approx(np.std([0, 0, 1, -1]))
    assert_array_equal(st_.min_spacing[1], 29.0)
    assert np.isnan(st_.min_spacing[0])
    with pytest.raises(TooShortError):
        summary_stats(Trajectory(x[:, :2]))


# --- map properties -----------------------------------------------------------------

@st.composite
def ring_case(draw):
    lam = draw(st.floats(0.0, 3.0))
    m = draw(st.integers(1, 6))
    law = draw(stable_laws(slope_cap=1.0 / slope_factor(AnticipationConfig(m, lam))))
    mode = draw(st.sampled_from(list(DiscountMode)))
    cars = draw(st.integers(1, 12))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    length = 25.0 * cars
    x = random_ring_state(rng, cars, length)
    y = x + rng.uniform(-2.0, 2.0, cars)
    return law, AnticipationConfig(m, lam, mode), Ring(length, cars), x, y, rng


@given(ring_case())
def test_monotone(case):
    law, cfg, ring, x, _, rng = case
    y = x + rng.uniform(0.0, 3.0, x.shape)
    assert np.all(step(y, law, cfg, ring) >= step(x, law, cfg, ring) - 1e-9)


@given(ring_case(), st.floats(-50.0, 50.0))
def test_additively_homogeneous(case, c):
    law, cfg, ring, x, _, _ = case
    np.testing.assert_allclose(step(x + c, law, cfg, ring), step(x, law, cfg, ring) + c, rtol=0, atol=1e-9)


@given(ring_case())
def test_non_expansive(case):
    law, cfg, ring, x, y, _ = case
    lhs = np.max(np.abs(step(x, law, cfg, ring) - step(y, law, cfg, ring)))
    assert lhs <= np.max(np.abs(x - y)) + 1e-9
