"""Randomized invariants checked with hypothesis."""

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spikeplan import kernels
from spikeplan.adaptation import DissonanceSignal, apply_update, cd_delta, global_alpha
from spikeplan.encoding import encode_poisson, responsibilities
from spikeplan.environment import Circle, Polygon, World, execute
from spikeplan.network import (
    ContextShape, GridSpec, Logistic, SpikeTrain, StateNetwork, Trajectory,
    sample_spiketrains, set_context_for_target,
)
from spikeplan.persistence import model_from_bytes, model_to_bytes
from spikeplan.planner import incorporate_feedback

SMALL = GridSpec(2, 5)
settings.register_profile("ci", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

coords = st.floats(-1.0, 1.0, allow_nan=False)
points = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)), elements=coords)
weights = arrays(np.float64, (25, 25), elements=st.floats(-1.0, 1.0, allow_nan=False))
seeds = st.integers(0, 2**32 - 1)


def _train(rng, T, K, tau, p=0.2):
    cand = (rng.random((T, K)) < p).astype(np.uint8)
    act = kernels.get_backend("python").refractory_filter(cand, tau)
    return SpikeTrain(act, np.zeros(K, dtype=np.int64), tau)


def _spike_gaps_ok(activity, tau):
    for k in range(activity.shape[1]):
        t = np.flatnonzero(activity[:, k])
        if len(t) > 1 and np.diff(t).min() <= tau:
            return False
    return True


@given(W=weights, seed=seeds, rate=st.floats(0.0, 1.0), T=st.integers(1, 15))
def test_updates_keep_weights_clamped(W, seed, rate, T):
    rng = np.random.default_rng(seed)
    net = StateNetwork(SMALL, W, tau=3)
    deltas = [cd_delta(_train(rng, T, 25, 3), _train(rng, T, 25, 3)) for _ in range(3)]
    sig = DissonanceSignal("constant", np.ones(T), threshold=0.02, scale=rate, gated=False)
    new, _ = apply_update(net, deltas, sig)
    assert np.all(new.W >= -1.0) and np.all(new.W <= 1.0)


@given(seed=seeds, tau=st.integers(1, 8), ramp=st.integers(0, 4),
       gain=st.floats(0.0, 0.5), offset=st.floats(-0.2, 0.8))
def test_sampled_trains_respect_refractoriness(seed, tau, ramp, gain, offset):
    net = StateNetwork.create(SMALL, tau=tau, activation=Logistic(offset, 0.05),
                              refractory_ramp=ramp)
    ctx = set_context_for_target(SMALL, np.array([0.5, 0.5]),
                                 ContextShape(gain=gain, baseline=0.0), seed=seed)
    entry = incorporate_feedback(Trajectory(np.array([[-0.5, -0.5]])), SMALL, tau, 1.0)
    for tr in sample_spiketrains(net, ctx, entry, 25, 3, seed):
        assert _spike_gaps_ok(tr.activity, tau)
        # neurons still refractory from the entry state stay silent
        for k in np.flatnonzero(entry):
            assert not tr.activity[: entry[k], k].any()


@given(seed=seeds, tau=st.integers(1, 10))
def test_poisson_encoding_respects_refractoriness(seed, tau):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (20, 2))
    tr = encode_poisson(responsibilities(X, SMALL), tau, seed=seed)
    assert _spike_gaps_ok(tr.activity, tau)


@given(W=weights, seed=seeds, scale=st.floats(0.0, 0.0199))
def test_closed_gate_leaves_weights_untouched(W, seed, scale):
    rng = np.random.default_rng(seed)
    net = StateNetwork(SMALL, W, tau=3)
    X = rng.uniform(-0.5, 0.5, (10, 2))
    # executed path within sqrt(0.02) of the mental one: global gate stays closed
    E = X + scale * rng.uniform(-1, 1, X.shape) / np.sqrt(2)
    sig = global_alpha(Trajectory(X), Trajectory(E))
    assert not sig.fired
    d = cd_delta(_train(rng, 10, 25, 3), _train(rng, 10, 25, 3))
    new, n = apply_update(net, d, sig)
    assert n == 0 and new.W.tobytes() == net.W.tobytes()


@given(X=points, var=st.floats(1e-3, 1.0))
def test_responsibility_rows_sum_to_one(X, var):
    om = responsibilities(X, SMALL, Sigma=var).omega
    assert np.all(om >= 0)
    assert np.all(np.abs(om.sum(axis=1) - 1.0) <= 1e-9)


obstacles = st.one_of(
    st.builds(lambda x, y, r: Circle((x, y), r),
              st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 0.4)),
    st.builds(lambda x, y, r, n, a: Polygon(tuple(
                  (x + r * np.cos(a + 2 * np.pi * i / n), y + r * np.sin(a + 2 * np.pi * i / n))
                  for i in range(n))),
              st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.05, 0.4),
              st.integers(3, 7), st.floats(0, 2 * np.pi)),
)


@given(ob=obstacles, X=points, start=st.tuples(coords, coords),
       standoff=st.sampled_from([0.0, 0.02]))
def test_executed_path_never_enters_obstacles(ob, X, start, standoff):
    world = World(obstacles=[ob])
    start = np.array(start)
    if world.inside_obstacle(start):
        return
    ex, _, _ = execute(Trajectory(X), world, start=start, standoff=standoff)
    path = np.vstack([start, ex.states])
    s = np.linspace(0.0, 1.0, 41)[:, None]
    for a, b in zip(path[:-1], path[1:]):
        for p in a + s * (b - a):
            assert not ob.contains(p, strict=True)


@given(W=weights, tau=st.integers(1, 20), ramp=st.integers(0, 9),
       offset=st.floats(-5, 5, allow_nan=False), scale=st.floats(1e-4, 5))
def test_save_load_bit_exact(W, tau, ramp, offset, scale):
    net = StateNetwork(SMALL, W, tau=tau, activation=Logistic(offset, scale), refractory_ramp=ramp)
    back = model_from_bytes(model_to_bytes(net))
    assert back.W.tobytes() == net.W.tobytes()
    assert (back.tau, back.refractory_ramp) == (tau, ramp)
    assert (back.activation.offset, back.activation.scale) == (offset, scale)
