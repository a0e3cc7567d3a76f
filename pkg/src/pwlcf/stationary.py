"""Stationary regimes: every car advances by the same ``v_bar`` each step.

On a ring the regime is fixed by the mean spacing ``L / cars``; on an open
road by the asymptotic speed of the head car.  In both cases the positions
are uniform and only the nearest leader binds, whatever the anticipation
depth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    AnticipationConfig,
    DiscountMode,
    LeaderProfile,
    Open,
    Ring,
    Scenario,
    check_anticipation_stability,
    step,
)
from .errors import UnstableLawWarning
from .law import BehaviorLaw, SegmentRef, active_segment, evaluate, solve_spacing


@dataclass(frozen=True)
class Strategy:
    """Leader index and law piece that attain the update at the regime."""

    j: int
    segment: SegmentRef


@dataclass
class StationaryRegime:
    v_bar: float
    spacing: float
    positions: np.ndarray
    strategy: Strategy
    topology: Ring | Open
    non_unique: bool = False
    hypothesis_ok: bool = True


def uniform_positions(cars: int, spacing: float) -> np.ndarray:
    return (cars - 1 - np.arange(cars)) * float(spacing)


def ring_stationary(law: BehaviorLaw, ring: Ring, config: AnticipationConfig | None = None) -> StationaryRegime:
    """Regime on a ring: ``v_bar = V(L / cars)`` with uniform spacing."""
    config = config or AnticipationConfig()
    ybar = ring.mean_spacing
    v_bar = evaluate(law, ybar, warn=False)
    ok = check_anticipation_stability(law, config)
    if not ok:
        warnings.warn("law slopes (after discounting) leave [0, 1]: the regime may not attract the dynamics", UnstableLawWarning, stacklevel=2)
    # discounting the velocity of a negative law value favors far leaders, so j=1 no longer binds
    if config.mode is DiscountMode.ON_VELOCITY and config.lam > 0 and v_bar < 0:
        ok = False
        warnings.warn("negative regime speed with velocity discounting: nearest leader does not bind",
                      UnstableLawWarning, stacklevel=2)
    return StationaryRegime(
        v_bar=v_bar,
        spacing=ybar,
        positions=uniform_positions(ring.cars, ybar),
        strategy=Strategy(1, active_segment(law, ybar)),
        topology=ring,
        hypothesis_ok=ok,
    )


def open_stationary(
    law: BehaviorLaw,
    v1: float,
    cars: int,
    config: AnticipationConfig | None = None,
) -> StationaryRegime:
    """Regime behind a head car cruising at ``v1``.

    The spacing solves ``V(y) = v1``; when a flat stretch of the law makes
    the solution an interval the smallest spacing is returned and
    ``non_unique`` is set.
    """
    config = config or AnticipationConfig()
    y, non_unique = solve_spacing(law, v1)
    ok = check_anticipation_stability(law, config)
    if not ok:
        warnings.warn("law slopes (after discounting) leave [0, 1]: the regime may not attract the dynamics", UnstableLawWarning, stacklevel=2)
    return StationaryRegime(
        v_bar=float(v1),
        spacing=y,
        positions=uniform_positions(cars, y),
        strategy=Strategy(1, active_segment(law, y)),
        topology=Open(LeaderProfile.constant(v1), cars),
        non_unique=non_unique,
        hypothesis_ok=ok,
    )


def verify_fixed_point(
    regime: StationaryRegime,
    law: BehaviorLaw,
    scenario=None,
    config: AnticipationConfig | None = None,
) -> float:
    """Largest violation of ``v_bar + x_n = update(x)_n`` over all cars.

    Also folds in how far the reported strategy's piece is from ``v_bar`` at
    the regime spacing, so a wrong strategy shows up as a residual.  On an
    open road the head car moves at the profile's final speed.
    """
    config = config or AnticipationConfig()
    topology = regime.topology if scenario is None else getattr(scenario, "topology", scenario)
    if type(topology) is not type(regime.topology):
        raise ValueError("regime and scenario topologies differ")
    x = np.asarray(regime.positions, dtype=np.float64)
    t = 0 if isinstance(topology, Ring) else topology.leader.breakpoints[-1][0]
    nxt = step(x, law, config, topology, t)
    res = float(np.max(np.abs(regime.v_bar + x - nxt))) if x.size else 0.0
    seg = law.segment(regime.strategy.segment)
    strat = abs(seg(regime.spacing) - regime.v_bar)
    return max(res, strat)


def regime_scenario(regime: StationaryRegime) -> Scenario:
    """A scenario that starts exactly on the regime."""
    return Scenario(regime.topology, regime.positions)
