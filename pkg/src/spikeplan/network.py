"""Stochastic spiking recurrent network over a place-cell lattice.

State neurons sit on a uniform lattice in the workspace and carry binary
stochastic activity. Context neurons inject the active waypoint as a
feedforward gradient. Trajectories are sampled by simulating the network and
decoded back to continuous positions with a population-vector readout.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.special import expit

from . import kernels


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice of preferred positions covering a box."""

    dims: int = 2
    neurons_per_dim: int = 15
    bounds: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.neurons_per_dim < 2:
            raise ValueError("neurons_per_dim must be >= 2")
        lo, hi = self.bounds
        if not lo < hi:
            raise ValueError(f"invalid bounds {self.bounds}")
        object.__setattr__(self, "bounds", (float(lo), float(hi)))

    @property
    def n_neurons(self):
        return self.neurons_per_dim**self.dims

    @property
    def spacing(self):
        lo, hi = self.bounds
        return (hi - lo) / (self.neurons_per_dim - 1)

    @cached_property
    def axis(self):
        return np.linspace(*self.bounds, self.neurons_per_dim)

    @cached_property
    def positions(self):
        """(K, dims) preferred positions; the last dimension varies fastest."""
        mesh = np.meshgrid(*([self.axis] * self.dims), indexing="ij")
        pos = np.stack([m.ravel() for m in mesh], axis=1)
        pos.flags.writeable = False
        return pos

    def nearest(self, points):
        """Index of the nearest preferred position; ties go to the lower index."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((points[:, None, :] - self.positions[None, :, :]) ** 2).sum(-1)
        return np.argmin(d2, axis=1)

    def clamp(self, points):
        return np.clip(points, *self.bounds)

    def contains(self, point):
        point = np.asarray(point, dtype=float)
        lo, hi = self.bounds
        return bool(np.all((point >= lo) & (point <= hi)))


@dataclass(frozen=True)
class Logistic:
    """Spike probability ``1 / (1 + exp(-(u - offset) / scale))``."""

    offset: float = 0.5
    scale: float = 0.1

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def __call__(self, u):
        return expit((np.asarray(u, dtype=float) - self.offset) / self.scale)


def init_transition_weights(grid, sigma_init=None, offset=-0.2):
    """Gaussian random-walk prior with an inhibitory offset.

    ``W[k, i] = exp(-|p_k - p_i|^2 / (2 sigma_init^2)) + offset`` clamped to
    ``[-1, 1]``. ``sigma_init`` defaults to one lattice spacing.
    """
    if sigma_init is None:
        sigma_init = grid.spacing
    if not sigma_init > 0:
        raise ValueError("sigma_init must be positive")
    if not offset < 0:
        raise ValueError("offset must be negative")
    p = grid.positions
    d2 = ((p[:, None, :] - p[None, :, :]) ** 2).sum(-1)
    W = np.exp(-0.5 * d2 / sigma_init**2) + offset
    return np.clip(W, -1.0, 1.0)


@dataclass
class StateNetwork:
    grid: GridSpec
    W: np.ndarray
    tau: int = 10
    activation: Logistic = field(default_factory=Logistic)
    # extra relative-refractory steps after the absolute period (linear recovery)
    refractory_ramp: int = 0

    def __post_init__(self):
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.refractory_ramp < 0:
            raise ValueError("refractory_ramp must be >= 0")
        K = self.grid.n_neurons
        W = np.asarray(self.W, dtype=np.float64)
        if W.shape != (K, K):
            raise ValueError(f"W has shape {W.shape}, expected {(K, K)}")
        self.W = np.ascontiguousarray(np.clip(W, -1.0, 1.0))

    @classmethod
    def create(cls, grid=None, sigma_init=None, offset=-0.2, **kwargs):
        grid = grid or GridSpec()
        return cls(grid, init_transition_weights(grid, sigma_init, offset), **kwargs)

    @property
    def n_neurons(self):
        return self.grid.n_neurons

    def with_weights(self, W):
        return replace(self, W=W)

    def copy(self):
        return replace(self, W=self.W.copy())


@dataclass(frozen=True)
class ContextShape:
    """Geometry of the context population installed for a waypoint.

    Feedforward weights follow ``gain * exp(-(d / scale)^beta) + baseline``
    of the distance between context neuron and state neuron.
    """

    n_neurons: int = 9
    spread: float = 0.05
    spike_prob: float = 0.5
    beta: float = 1.5
    scale: float = 0.8
    gain: float = 0.3
    baseline: float = -0.1

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ValueError("n_neurons must be >= 1")
        if self.spread < 0 or not 0 <= self.spike_prob <= 1:
            raise ValueError("invalid spread or spike_prob")
        if self.beta <= 0 or self.scale <= 0:
            raise ValueError("beta and scale must be positive")


def generalized_error_profile(d, scale, beta):
    """Unnormalized generalized-error-distribution shape, 1 at ``d = 0``."""
    return np.exp(-((np.abs(d) / scale) ** beta))


@dataclass
class ContextPopulation:
    positions: np.ndarray
    spike_prob: np.ndarray
    theta: np.ndarray
    active_target: np.ndarray = None

    @property
    def n_neurons(self):
        return len(self.positions)

    @classmethod
    def empty(cls, grid):
        return cls(
            np.zeros((0, grid.dims)), np.zeros(0), np.zeros((0, grid.n_neurons))
        )


def set_context_for_target(grid, target, shape=None, seed=None):
    """Place a local context cluster around ``target`` and wire it in."""
    shape = shape or ContextShape()
    target = np.asarray(target, dtype=float)
    if target.shape != (grid.dims,) or not grid.contains(target):
        raise ValueError(f"target {target} outside workspace {grid.bounds}")
    rng = np.random.default_rng(seed)
    pos = target + shape.spread * rng.standard_normal((shape.n_neurons, grid.dims))
    pos = grid.clamp(pos)
    d = np.linalg.norm(pos[:, None, :] - grid.positions[None, :, :], axis=-1)
    theta = shape.gain * generalized_error_profile(d, shape.scale, shape.beta)
    theta += shape.baseline
    return ContextPopulation(
        positions=pos,
        spike_prob=np.full(shape.n_neurons, shape.spike_prob),
        theta=theta,
        active_target=target.copy(),
    )


@dataclass
class SpikeTrain:
    """Binary activity plus the refractory state the train started from.

    ``entry_state[k] = r > 0`` means neuron ``k`` last spiked at time
    ``r - tau - 1`` (so it is PSP-active for the first ``r`` steps).
    """

    activity: np.ndarray
    entry_state: np.ndarray
    tau: int

    def __post_init__(self):
        self.activity = np.asarray(self.activity, dtype=np.uint8)
        if self.activity.ndim != 2:
            raise ValueError("activity must be T x K")
        if self.entry_state is None:
            self.entry_state = np.zeros(self.activity.shape[1], dtype=np.int64)
        self.entry_state = np.asarray(self.entry_state, dtype=np.int64)
        if self.entry_state.shape != (self.activity.shape[1],):
            raise ValueError("entry_state must have one entry per neuron")

    @property
    def T(self):
        return self.activity.shape[0]

    @property
    def K(self):
        return self.activity.shape[1]

    def history(self):
        """(tau + T, K) activity with prehistory rows; row ``tau + t`` is time t."""
        ext = np.zeros((self.tau + self.T, self.K), dtype=np.uint8)
        ext[self.tau :] = self.activity
        k = np.flatnonzero(self.entry_state > 0)
        times = self.entry_state[k] - self.tau - 1
        ok = times >= -self.tau
        ext[self.tau + times[ok], k[ok]] = 1
        return ext

    def is_valid(self):
        """True iff entries are binary and spikes are >= tau apart."""
        if np.any(self.activity > 1) or np.any(self.entry_state < 0):
            return False
        if np.any(self.entry_state > self.tau):
            return False
        ext = self.history()
        for k in range(self.K):
            times = np.flatnonzero(ext[:, k])
            if np.any(np.diff(times) < self.tau):
                return False
        return True


def entry_to_last_spike(entry_state, tau):
    entry_state = np.asarray(entry_state, dtype=np.int64)
    return np.where(entry_state > 0, entry_state - tau - 1, kernels._fallback.NEVER)


def psp_matrix(train):
    """(T + 1, K) rectangular PSP: row t is 1 where the neuron spiked in [t - tau, t - 1]."""
    tau = train.tau
    ext = train.history().astype(np.int64)
    cs = np.vstack([np.zeros((1, train.K), dtype=np.int64), np.cumsum(ext, axis=0)])
    # rows of ext covering times [t - tau, t - 1] are [t, t + tau - 1]
    t = np.arange(train.T + 1)
    return (cs[t + tau] - cs[t] > 0).astype(np.uint8)


def psp_rectangular(train, t):
    if not 0 <= t <= train.T:
        raise ValueError(f"t={t} outside [0, {train.T}]")
    return psp_matrix(train)[t]


def membrane_potential(net, ctx, psp_state, ctx_spikes):
    """Recurrent plus feedforward drive ``psp @ W + ctx_spikes @ theta``."""
    psp_state = np.asarray(psp_state, dtype=float)
    ctx_spikes = np.asarray(ctx_spikes, dtype=float)
    if psp_state.shape[-1] != net.n_neurons:
        raise ValueError("psp_state does not match network size")
    if ctx_spikes.shape[-1] != ctx.n_neurons:
        raise ValueError("ctx_spikes does not match context population size")
    if ctx.theta.shape != (ctx.n_neurons, net.n_neurons):
        raise ValueError("context weights do not match network size")
    return psp_state @ net.W + ctx_spikes @ ctx.theta


def sample_spiketrains(net, ctx, entry_state, T, n, seed=None, backend=None):
    """Draw ``n`` independent spike trains of length ``T``."""
    if T < 1 or n < 1:
        raise ValueError("T and n must be >= 1")
    K = net.n_neurons
    entry_state = np.asarray(entry_state, dtype=np.int64)
    if entry_state.shape != (K,):
        raise ValueError("entry_state must have one entry per neuron")
    rng = np.random.default_rng(seed)
    uniforms = rng.random((n, T, K))
    ctx_spikes = rng.random((n, T, ctx.n_neurons)) < ctx.spike_prob
    ctx_drive = np.ascontiguousarray(ctx_spikes.astype(np.float64) @ ctx.theta)
    last = np.ascontiguousarray(
        np.broadcast_to(entry_to_last_spike(entry_state, net.tau), (n, K))
    )
    impl = kernels if backend is None else kernels.get_backend(backend)
    act = net.activation
    spikes = impl.sample_batch(
        net.W, ctx_drive, last, uniforms,
        float(act.offset), float(act.scale), int(net.tau), int(net.refractory_ramp),
    )
    spikes = np.asarray(spikes)
    return [SpikeTrain(spikes[b], entry_state.copy(), net.tau) for b in range(n)]


def sample_spiketrain(net, ctx, entry_state, T, seed=None, backend=None):
    return sample_spiketrains(net, ctx, entry_state, T, 1, seed, backend)[0]


@dataclass
class Trajectory:
    states: np.ndarray
    dt: float = 0.05
    bounds: tuple = (-1.0, 1.0)

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim != 2 or len(states) == 0:
            raise ValueError("states must be a non-empty T x dims array")
        self.states = np.clip(states, *self.bounds)

    def __len__(self):
        return len(self.states)

    @property
    def start(self):
        return self.states[0]

    @property
    def end(self):
        return self.states[-1]

    def path_length(self):
        return float(np.linalg.norm(np.diff(self.states, axis=0), axis=1).sum())

    def padded(self, T):
        """Hold the last state until length ``T``."""
        if len(self) >= T:
            return self
        tail = np.repeat(self.states[-1:], T - len(self), axis=0)
        return replace(self, states=np.vstack([self.states, tail]))


def smooth_activity(train, smoothing_width, include_history=True):
    """Gaussian-window filtered activity, (T, K)."""
    if include_history:
        ext = train.history().astype(np.float64)
        offset = train.tau
    else:
        ext = train.activity.astype(np.float64)
        offset = 0
    if smoothing_width > 0:
        ext = gaussian_filter1d(ext, smoothing_width, axis=0, mode="constant")
    return ext[offset:]


def decode(train, grid, smoothing_width=5.0, include_history=True, dt=0.05):
    """Population-vector readout of a spike train.

    Silent timesteps are filled by linear interpolation between the nearest
    decodable ones; a train with no decodable timestep raises ``ValueError``.
    """
    act = smooth_activity(train, smoothing_width, include_history)
    total = act.sum(axis=1)
    ok = total > 0
    if not ok.any():
        raise ValueError("cannot decode a silent spike train")
    x = np.zeros((train.T, grid.dims))
    x[ok] = (act[ok] @ grid.positions) / total[ok, None]
    if not ok.all():
        t = np.arange(train.T)
        for d in range(grid.dims):
            x[~ok, d] = np.interp(t[~ok], t[ok], x[ok, d])
    return Trajectory(x, dt=dt, bounds=grid.bounds)
