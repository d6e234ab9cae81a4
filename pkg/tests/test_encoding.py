import math

import numpy as np
import pytest

from spikeplan.encoding import (
    COUNT_THRESHOLD, RATE_CAP, encode_poisson, poisson_means, responsibilities,
)
from spikeplan.kernels import refractory_filter
from spikeplan.network import GridSpec, Trajectory


def test_responsibilities_rows_sum_to_one(grid):
    rng = np.random.default_rng(0)
    tr = Trajectory(rng.uniform(-1, 1, (50, 2)))
    om = responsibilities(tr, grid).omega
    assert om.shape == (50, 225)
    np.testing.assert_allclose(om.sum(axis=1), 1.0, atol=1e-9)
    assert np.all(om >= 0)


def test_responsibility_oracle(grid):
    x = np.array([[0.13, -0.41]])
    om = responsibilities(Trajectory(x), grid).omega[0]
    s2 = grid.spacing**2
    b = np.array([math.exp(-0.5 * ((x[0, 0] - p[0]) ** 2 + (x[0, 1] - p[1]) ** 2) / s2)
                  for p in grid.positions])
    np.testing.assert_allclose(om, b / b.sum(), rtol=1e-12, atol=1e-15)
    assert np.argmax(om) == grid.nearest(x[0])[0]


def test_responsibilities_full_covariance(grid):
    x = Trajectory(np.array([[0.0, 0.0]]))
    a = responsibilities(x, grid, Sigma=0.02).omega
    b = responsibilities(x, grid, Sigma=np.diag([0.02, 0.02])).omega
    np.testing.assert_allclose(a, b, atol=1e-15)
    with pytest.raises(ValueError):
        responsibilities(x, grid, Sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_poisson_means_clamped():
    np.testing.assert_allclose(poisson_means(np.array([0.0, 0.05, 0.2])), [0.0, 5.0, RATE_CAP])


def test_spike_probability_at_cap():
    # P(N >= 4) for N ~ Poisson(10), computed from the pmf
    p = 1 - sum(math.exp(-10) * 10**k / math.factorial(k) for k in range(COUNT_THRESHOLD))
    assert p == pytest.approx(0.98966394, abs=1e-8)
    rng = np.random.default_rng(1)
    hits = (rng.poisson(np.full(200000, RATE_CAP)) >= COUNT_THRESHOLD).mean()
    assert abs(hits - p) < 4 * math.sqrt(p * (1 - p) / 200000)


def test_encoding_deterministic_and_valid(grid):
    tr = Trajectory(np.linspace([-0.5, -0.5], [0.5, 0.2], 30))
    om = responsibilities(tr, grid)
    a = encode_poisson(om, 10, seed=4)
    b = encode_poisson(om, 10, seed=4)
    np.testing.assert_array_equal(a.activity, b.activity)
    assert a.is_valid()
    assert a.activity.sum() > 0
    c = encode_poisson(om, 10, seed=5)
    assert not np.array_equal(a.activity, c.activity)


def test_encoding_fires_near_the_trajectory(grid):
    tr = Trajectory(np.tile([0.2, 0.3], (30, 1)))
    spikes = encode_poisson(responsibilities(tr, grid), 10, seed=0).activity
    fired = np.flatnonzero(spikes.sum(axis=0))
    d = np.linalg.norm(grid.positions[fired] - [0.2, 0.3], axis=1)
    assert d.max() < 3 * grid.spacing


def test_refractory_filter_examples():
    c = np.zeros((25, 1), dtype=np.uint8)
    c[[0, 3, 10, 11, 22], 0] = 1
    out = refractory_filter(c, 10)[:, 0]
    # 3 and 10 fall inside the blocked window after the spike at 0
    assert list(np.flatnonzero(out)) == [0, 11, 22]
