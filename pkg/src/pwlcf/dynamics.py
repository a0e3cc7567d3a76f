"""Multi-anticipative car dynamics on ring and open roads.

Cars are indexed from 0; car 0 is the head of the platoon and car ``n``
follows car ``n - 1``.  Positions are cumulative traveled distances in
meters and are never wrapped, even on a ring.  One step is 0.5 s.

Each follower advances by

* ``min_j (1+lam)^(j-1) * V(dx_j / j)``    (discount on velocity, default), or
* ``V(min_j (1+lam)^(j-1) * dx_j / j)``    (discount on spacing),

where ``dx_j`` is the distance to the ``j``-th car ahead and ``j`` runs up to
the anticipation depth ``m`` (capped by the number of cars actually ahead).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from ._backend import kernels
from .errors import NoLeaderError, OrderingViolationWarning, TooShortError, UnstableLawWarning
from .law import BehaviorLaw, check_stability_condition, evaluate

DT_SECONDS = 0.5


class DiscountMode(str, Enum):
    ON_VELOCITY = "on-velocity"
    ON_SPACING = "on-spacing"


@dataclass(frozen=True)
class AnticipationConfig:
    m: int = 1
    lam: float = 0.0
    mode: DiscountMode = DiscountMode.ON_VELOCITY

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if not (math.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be a finite number >= 0, got {self.lam!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mode", DiscountMode(self.mode))

    def discounts(self, depth: int | None = None) -> np.ndarray:
        """Factors ``(1+lam)^(j-1)`` for ``j = 1..depth``, built by repeated products."""
        depth = self.m if depth is None else depth
        out = np.empty(depth)
        c = 1.0
        base = 1.0 + self.lam
        for j in range(depth):
            out[j] = c
            c = c * base
        return out


@dataclass(frozen=True)
class Ring:
    length: float
    cars: int

    def __post_init__(self):
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError(f"ring length must be positive, got {self.length!r}")
        if self.cars < 1:
            raise ValueError("a ring needs at least one car")

    @property
    def mean_spacing(self) -> float:
        return self.length / self.cars


@dataclass(frozen=True)
class LeaderProfile:
    """Piecewise-constant head-car speed given as ``(start_step, speed)`` breakpoints."""

    breakpoints: tuple[tuple[int, float], ...]

    def __post_init__(self):
        bps = tuple(sorted((int(s), float(v)) for s, v in self.breakpoints))
        if not bps or bps[0][0] != 0:
            raise ValueError("leader profile must define the speed from step 0")
        if len({s for s, _ in bps}) != len(bps):
            raise ValueError("duplicate breakpoint steps in leader profile")
        object.__setattr__(self, "breakpoints", bps)

    @classmethod
    def constant(cls, speed: float) -> "LeaderProfile":
        return cls(((0, speed),))

    @classmethod
    def parse(cls, text: str) -> "LeaderProfile":
        """Parse ``"0:10,40:2,80:10"`` (step:speed pairs, speed in m/step)."""
        pairs = []
        for item in text.split(","):
            s, _, v = item.partition(":")
            pairs.append((int(s), float(v)))
        return cls(tuple(pairs))

    def speed_at(self, t: int) -> float:
        speed = self.breakpoints[0][1]
        for start, v in self.breakpoints:
            if start > t:
                break
            speed = v
        return speed

    def speeds(self, horizon: int) -> np.ndarray:
        out = np.empty(horizon)
        for (start, v), nxt in zip(self.breakpoints, self.breakpoints[1:] + ((horizon, 0.0),)):
            out[min(start, horizon) : min(nxt[0], horizon)] = v
        return out


@dataclass(frozen=True)
class Open:
    leader: LeaderProfile
    cars: int

    def __post_init__(self):
        if self.cars < 1:
            raise ValueError("an open road needs at least one car")


Topology = Union[Ring, Open]


@dataclass
class Scenario:
    topology: Topology
    initial_positions: np.ndarray

    def __post_init__(self):
        x = np.array(self.initial_positions, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.topology.cars:
            raise ValueError(f"expected {self.topology.cars} initial positions, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("initial positions must be finite")
        if np.any(np.diff(x) >= 0):
            raise ValueError("initial positions must be strictly decreasing (car 0 in front)")
        if isinstance(self.topology, Ring) and x[0] - x[-1] >= self.topology.length:
            raise ValueError("ring positions must span less than the ring length")
        self.initial_positions = x

    @classmethod
    def uniform_ring(cls, length: float, cars: int) -> "Scenario":
        ring = Ring(length, cars)
        return cls(ring, (cars - 1 - np.arange(cars)) * ring.mean_spacing)

    @classmethod
    def uniform_open(cls, leader: LeaderProfile, cars: int, spacing: float) -> "Scenario":
        return cls(Open(leader, cars), (cars - 1 - np.arange(cars)) * float(spacing))


@dataclass(frozen=True)
class OrderingViolation:
    t: int
    car: int
    spacing: float


@dataclass
class Trajectory:
    positions: np.ndarray  # (cars, steps + 1)
    dt_seconds: float = DT_SECONDS
    ring_length: float | None = None
    violations: list[OrderingViolation] = field(default_factory=list)

    @property
    def cars(self) -> int:
        return self.positions.shape[0]

    @property
    def steps(self) -> int:
        return self.positions.shape[1] - 1

    @property
    def velocities(self) -> np.ndarray:
        """Per-step displacements, shape ``(cars, steps)``."""
        return np.diff(self.positions, axis=1)

    def spacings(self) -> np.ndarray:
        """Distance to the car ahead; ``nan`` for the head car on an open road."""
        x = self.positions
        out = np.full_like(x, np.nan)
        out[1:] = x[:-1] - x[1:]
        if self.ring_length is not None and self.cars > 0:
            out[0] = x[-1] - x[0] + self.ring_length
        return out


def _depth(n: int, config: AnticipationConfig, topology: Topology) -> int:
    if isinstance(topology, Ring):
        return min(config.m, topology.cars - 1) if topology.cars > 1 else 1
    return min(config.m, n)


def _gaps(positions, n: int, depth: int, topology: Topology) -> list[float]:
    x = positions
    nu = len(x)
    gaps = []
    for j in range(1, depth + 1):
        lead = n - j
        if lead < 0:
            dx = x[lead + nu] - x[n]
            dx = dx + topology.length
        else:
            dx = x[lead] - x[n]
        gaps.append(float(dx))
    return gaps


def anticipated_spacing(positions, n: int, config: AnticipationConfig, topology: Topology) -> float:
    """Discounted anticipated spacing ``min_j (1+lam)^(j-1) * dx_j / j`` of car ``n``."""
    if not isinstance(topology, Ring) and n == 0:
        raise NoLeaderError("the head car of an open road has no leader")
    depth = _depth(n, config, topology)
    disc = config.discounts(depth)
    gaps = _gaps(positions, n, depth, topology)
    return min(float(disc[j - 1]) * (g / j) for j, g in enumerate(gaps, start=1))


def car_velocity(law: BehaviorLaw, positions, n: int, config: AnticipationConfig, topology: Topology) -> float:
    """Displacement of follower ``n`` over the next step (scalar reference path)."""
    if config.mode is DiscountMode.ON_SPACING:
        return evaluate(law, anticipated_spacing(positions, n, config, topology), warn=False)
    if not isinstance(topology, Ring) and n == 0:
        raise NoLeaderError("the head car of an open road has no leader")
    depth = _depth(n, config, topology)
    disc = config.discounts(depth)
    gaps = _gaps(positions, n, depth, topology)
    return min(float(disc[j - 1]) * evaluate(law, g / j, warn=False) for j, g in enumerate(gaps, start=1))


def _kernel_args(law: BehaviorLaw, config: AnticipationConfig, topology: Topology):
    la, lb, ua, ub = law.arrays
    ring = isinstance(topology, Ring)
    return (
        la, lb, ua, ub,
        config.m,
        config.discounts(max(config.m, 1)),
        config.mode is DiscountMode.ON_SPACING,
        ring,
        topology.length if ring else 0.0,
    )


def step(positions, law: BehaviorLaw, config: AnticipationConfig, scenario, t: int = 0) -> np.ndarray:
    """Positions after one update from ``positions`` at step ``t``.

    ``scenario`` may be a :class:`Scenario` or a bare topology.
    """
    topology = scenario.topology if isinstance(scenario, Scenario) else scenario
    x = np.asarray(positions, dtype=np.float64)
    lead_speed = 0.0 if isinstance(topology, Ring) else topology.leader.speed_at(t)
    return kernels.advance(x, *_kernel_args(law, config, topology), lead_speed)


def slope_factor(config: AnticipationConfig) -> float:
    """Largest factor ``(1+lam)^(j-1) / j`` over ``j <= m``.

    A car's update depends on its own position through ``alpha`` times this
    factor at most, in both discount modes, so the map stays monotone while
    every slope times it is at most 1.
    """
    return float(np.max(config.discounts() / np.arange(1, config.m + 1)))


def check_anticipation_stability(law: BehaviorLaw, config: AnticipationConfig) -> bool:
    """True when slopes are in ``[0, 1]`` and ``alpha * slope_factor(config) <= 1``."""
    ok, _ = check_stability_condition(law)
    if not ok:
        return False
    top = slope_factor(config)
    return all(s.alpha * top <= 1.0 for _, s in law.segments)


def simulate(scenario: Scenario, law: BehaviorLaw, config: AnticipationConfig, horizon: int) -> Trajectory:
    """Run ``horizon`` updates from the scenario's initial positions."""
    if int(horizon) != horizon or horizon < 1:
        raise ValueError(f"horizon must be a positive integer, got {horizon!r}")
    horizon = int(horizon)
    if not check_anticipation_stability(law, config):
        warnings.warn(
            "law slopes (after discounting) leave [0, 1]; the dynamics may not be monotone",
            UnstableLawWarning,
            stacklevel=2,
        )
    topology = scenario.topology
    ring = isinstance(topology, Ring)
    speeds = np.zeros(horizon) if ring else topology.leader.speeds(horizon)
    pos = kernels.simulate(scenario.initial_positions, horizon, *_kernel_args(law, config, topology), speeds)
    traj = Trajectory(pos, DT_SECONDS, topology.length if ring else None)
    sp = traj.spacings()
    bad = np.argwhere(sp < 0)
    if bad.size:
        traj.violations = [OrderingViolation(int(t), int(n), float(sp[n, t])) for n, t in bad]
        traj.violations.sort(key=lambda v: (v.t, v.car))
        first = traj.violations[0]
        warnings.warn(
            f"{len(bad)} negative spacings; first at step {first.t}, car {first.car}",
            OrderingViolationWarning,
            stacklevel=2,
        )
    return traj


@dataclass
class TrafficStats:
    mean_speed: np.ndarray
    speed_var: np.ndarray
    accel_std: np.ndarray
    min_spacing: np.ndarray
    fleet_mean_speed: float
    fleet_speed_var: float
    fleet_accel_std: float
    fleet_min_spacing: float


def summary_stats(traj: Trajectory, cars=None) -> TrafficStats:
    """Speed and acceleration statistics, per car and pooled over ``cars`` (default all).

    Speeds are per-step displacements; accelerations are second differences of
    positions (m per step squared).  Variances and deviations use ``ddof=0``.
    """
    if traj.steps < 2:
        raise TooShortError("acceleration statistics need at least 2 steps")
    idx = np.arange(traj.cars) if cars is None else np.asarray(cars)
    x = traj.positions[idx]
    v = np.diff(x, axis=1)
    a = np.diff(x, n=2, axis=1)
    sp = traj.spacings()[idx]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        min_sp = np.nanmin(np.where(np.isnan(sp), np.inf, sp), axis=1)
    min_sp[np.isinf(min_sp)] = np.nan
    finite = min_sp[~np.isnan(min_sp)]
    return TrafficStats(
        mean_speed=v.mean(axis=1),
        speed_var=v.var(axis=1),
        accel_std=a.std(axis=1),
        min_spacing=min_sp,
        fleet_mean_speed=float(v.mean()),
        fleet_speed_var=float(v.var()),
        fleet_accel_std=float(a.std()),
        fleet_min_spacing=float(finite.min()) if finite.size else math.nan,
    )
