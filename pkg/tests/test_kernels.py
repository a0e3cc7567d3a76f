"""The compiled kernels and the numpy fallback must agree bit for bit."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from helpers import random_ring_state, random_stable_law
from pwlcf import _kernels_py
from pwlcf._backend import BACKEND, compiled_kernels
from pwlcf.dynamics import AnticipationConfig, DiscountMode, slope_factor

ck = compiled_kernels()
needs_ext = pytest.mark.skipif(ck is None, reason="compiled kernels not built")


def test_backend_name():
    assert BACKEND in ("cython", "python")


def _case(seed, ring, mode, m, lam):
    rng = np.random.default_rng(seed)
    law = random_stable_law(rng, slope_cap=1.0 / slope_factor(AnticipationConfig(m, lam)))
    cars = int(rng.integers(1, 30))
    length = 30.0 * cars
    if ring:
        x = random_ring_state(rng, cars, length)
    else:
        x = np.sort(rng.uniform(0, length, cars))[::-1].copy()
    disc = AnticipationConfig(m, lam).discounts()
    lead = rng.uniform(0, 14, 40)
    return x, law.arrays, disc, mode is DiscountMode.ON_SPACING, lead, length


@needs_ext
@pytest.mark.parametrize("ring", [True, False])
@pytest.mark.parametrize("mode", list(DiscountMode))
@pytest.mark.parametrize("m, lam", [(1, 0.0), (3, 0.4), (8, 1.5)])
def test_simulate_parity(ring, mode, m, lam):
    for seed in range(5):
        x, (la, lb, ua, ub), disc, on_sp, lead, length = _case(seed, ring, mode, m, lam)
        args = (la, lb, ua, ub, m, disc, on_sp, ring, length, lead)
        a = _kernels_py.simulate(x, 40, *args)
        b = np.asarray(ck.simulate(x, 40, *args))
        assert_array_equal(a, b)


@needs_ext
@given(st.integers(0, 2**32 - 1), st.integers(1, 25), st.floats(0.0, 50.0))
def test_partition_parity(seed, bins, phi):
    rng = np.random.default_rng(seed)
    cnt = rng.integers(1, 20, bins).astype(np.float64)
    my = np.arange(bins) + rng.uniform(0, 1, bins)
    mv = rng.normal(0, 3, bins)
    cyy = rng.uniform(0, 1, bins) * (cnt > 1)
    cyv = rng.normal(0, 0.3, bins) * (cnt > 1)
    cvv = cyv ** 2 / np.where(cyy > 0, cyy, 1.0) + rng.uniform(0, 2, bins) * (cnt > 1)
    c1 = _kernels_py.cost_matrix(cnt, my, mv, cyy, cyv, cvv)
    c2 = np.asarray(ck.cost_matrix(cnt, my, mv, cyy, cyv, cvv))
    assert_array_equal(c1, c2)
    e1, g1, n1 = _kernels_py.partition(c1, phi)
    e2, g2, n2 = ck.partition(c1, phi)
    assert_array_equal(e1, np.asarray(e2))
    assert g1 == g2 and n1 == n2


def test_fallback_runs_without_extension():
    # the numpy module works standalone whatever backend was picked
    la = lb = np.zeros(1)
    ua, ub = np.array([0.5]), np.array([0.0])
    out = _kernels_py.advance(np.array([10.0, 0.0]), la, lb, ua, ub, 1, np.ones(1), False, False, 0.0, 1.0)
    assert_array_equal(out, [11.0, 5.0])


def test_env_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, PWLCF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import pwlcf; print(pwlcf.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
