import numpy as np
import pytest

from spikeplan.network import ContextShape, GridSpec, Logistic, StateNetwork, set_context_for_target
from spikeplan.planner import incorporate_feedback
from spikeplan.network import Trajectory


@pytest.fixture
def grid():
    return GridSpec()


@pytest.fixture
def net(grid):
    return StateNetwork.create(grid, activation=Logistic(0.5, 0.06), refractory_ramp=5)


def entry_at(net, point, radius=1.0):
    return incorporate_feedback(Trajectory(np.atleast_2d(point)), net.grid, net.tau, radius)


def context_at(net, target, gain=0.12, seed=1):
    shape = ContextShape(gain=gain, baseline=0.0)
    return set_context_for_target(net.grid, np.asarray(target, dtype=float), shape, seed=seed)
