"""Shared generators for the test suite."""

import numpy as np
from hypothesis import strategies as st

from pwlcf.law import BehaviorLaw

piece = st.tuples(
    st.floats(0.0, 1.0, allow_nan=False),
    st.floats(-10.0, 15.0, allow_nan=False),
)


@st.composite
def stable_laws(draw, max_pieces=4, slope_cap=1.0):
    """Laws whose slopes all lie in ``[0, slope_cap]``."""
    lower = draw(st.lists(piece, min_size=1, max_size=max_pieces))
    upper = draw(st.lists(piece, min_size=1, max_size=max_pieces))
    scale = lambda ps: [(a * slope_cap, b) for a, b in ps]  # noqa: E731
    return BehaviorLaw.from_pairs(scale(lower), scale(upper))


def random_stable_law(rng: np.random.Generator, max_pieces: int = 4, slope_cap: float = 1.0) -> BehaviorLaw:
    nl = int(rng.integers(1, max_pieces + 1))
    nu = int(rng.integers(1, max_pieces + 1))
    lower = [(rng.uniform(0, slope_cap), rng.uniform(-10, 2)) for _ in range(nl)]
    upper = [(rng.uniform(0, slope_cap), rng.uniform(-2, 15)) for _ in range(nu)]
    return BehaviorLaw.from_pairs(lower, upper)


def random_ring_state(rng: np.random.Generator, cars: int, length: float, spread: float = 0.3) -> np.ndarray:
    """Strictly decreasing positions on a ring with jittered spacings summing to ``length``."""
    gaps = rng.uniform(1.0 - spread, 1.0 + spread, size=cars)
    gaps *= length / gaps.sum()
    x = np.concatenate([[0.0], -np.cumsum(gaps[:-1])])
    return x - x[-1]
