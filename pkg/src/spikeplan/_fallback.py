"""Pure-numpy reference kernels.

These are selected automatically when the compiled ``_kernels`` extension is
not available. Both implementations consume the same pre-drawn uniforms, so
for a given seed they produce identical spike trains.
"""

import numpy as np

NEVER = -(10**9)


def refractory_gain(since_last, tau, ramp):
    """Multiplicative spike-probability factor given steps since last spike."""
    since_last = np.asarray(since_last)
    gain = np.ones(since_last.shape)
    # blocked for the tau steps after a spike, i.e. while its own PSP is on
    gain[since_last <= tau] = 0.0
    if ramp > 0:
        in_ramp = (since_last > tau) & (since_last <= tau + ramp)
        gain[in_ramp] = (since_last[in_ramp] - tau) / (ramp + 1.0)
    return gain


def sample_batch(W, ctx_drive, last_spike, uniforms, u0, scale, tau, ramp):
    """Simulate ``n`` independent chains of the recurrent network.

    Parameters
    ----------
    W : (K, K) float64
        Recurrent weights, ``W[pre, post]``.
    ctx_drive : (n, T, K) float64
        Feedforward input from context neurons per chain and timestep.
    last_spike : (n, K) int64
        Time of each neuron's most recent spike (negative for prehistory).
    uniforms : (n, T, K) float64
        Pre-drawn U[0, 1) variates; neuron spikes iff uniform < probability.

    Returns
    -------
    (n, T, K) uint8 spike array.
    """
    n, T, K = uniforms.shape
    last = np.array(last_spike, dtype=np.int64, copy=True)
    out = np.zeros((n, T, K), dtype=np.uint8)
    for t in range(T):
        since = t - last
        psp = ((since >= 1) & (since <= tau)).astype(np.float64)
        u = psp @ W + ctx_drive[:, t, :]
        with np.errstate(over="ignore"):
            p = 1.0 / (1.0 + np.exp(-(u - u0) / scale))
        p *= refractory_gain(since, tau, ramp)
        spk = uniforms[:, t, :] < p
        out[:, t, :] = spk
        last[spk] = t
    return out


def refractory_filter(candidates, tau):
    """Drop candidate spikes within the ``tau`` steps following an earlier spike.

    Earlier spikes win; a dropped candidate does not reset the refractory
    clock.
    """
    T, K = candidates.shape
    last = np.full(K, NEVER, dtype=np.int64)
    out = np.zeros((T, K), dtype=np.uint8)
    for t in range(T):
        ok = (candidates[t] != 0) & (t - last > tau)
        out[t] = ok
        last[ok] = t
    return out
