"""Plan-execute-learn loop over short trajectory segments."""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import adaptation
from .adaptation import apply_update, mental_replay
from .encoding import responsibilities
from .environment import execute
from .network import ContextShape, Trajectory, decode, sample_spiketrains, set_context_for_target


@dataclass
class PlannerConfig:
    horizon: int = 30
    n_samples: int = 40
    smoothing_width: float = 5.0
    reach_radius: float = 0.1
    velocity: float = 0.1
    dt: float = 0.05
    context: ContextShape = field(default_factory=ContextShape)
    # "virtual" charges a fixed cost per sampled neuron-step; "wall" measures
    clock: str = "virtual"
    virtual_step_cost: float = 2e-4
    direction_metric: str = "net"
    tracking_noise: float = 0.0
    entry_radius: float = 0.0
    # shift the plan so it starts at the robot, fading out over the horizon
    anchor_start: bool = True
    # the safety stop halts this far before an obstacle
    standoff: float = 0.02


@dataclass
class AdaptationConfig:
    kind: str = "global"
    global_threshold: float = 0.02
    local_threshold: float = 0.05
    cap: float = 0.3
    c: float = 3.0
    constant_alpha: float = 0.001
    gated: bool = True
    replay: int = 20
    Sigma: float = None

    def __post_init__(self):
        if self.kind not in adaptation.KINDS:
            raise ValueError(f"unknown adaptation kind {self.kind!r}")
        if self.replay < 1:
            raise ValueError("replay must be >= 1")


class PlanTimeStats:
    """Running mean and variance (Welford) of planning durations."""

    def __init__(self):
        self.n = 0
        self.mean = 0.0
        self._m2 = 0.0

    def update(self, x):
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self._m2 += d * (x - self.mean)

    @property
    def std(self):
        return math.sqrt(self._m2 / self.n) if self.n > 1 else 0.0


@dataclass
class Segment:
    index: int
    target_index: int
    mental: Trajectory
    executed: Trajectory
    samples_drawn: int
    samples_accepted: int
    planning_time: float
    expected_exec_time: float
    collided: bool
    contact: np.ndarray = None
    triggered: int = 0
    alphas: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reached: bool = False
    plan_start: float = 0.0
    exec_start: float = 0.0
    start_position: np.ndarray = None

    @property
    def exec_end(self):
        return self.exec_start + self.expected_exec_time


@dataclass
class PlannerState:
    waypoints: np.ndarray
    position: np.ndarray
    entry_state: np.ndarray
    active_index: int = 1
    stats: PlanTimeStats = field(default_factory=PlanTimeStats)
    n_segments: int = 0
    clock: float = 0.0
    next_plan_start: float = 0.0
    contexts: dict = field(default_factory=dict)

    @property
    def target_index(self):
        return self.active_index % len(self.waypoints)

    @property
    def target(self):
        return self.waypoints[self.target_index]


def direction_angles(samples, metric="net"):
    """Pairwise angle between the movement directions of the samples.

    ``net`` uses end minus start; ``mean-step`` averages per-step headings.
    """
    X = np.stack([s.states for s in samples])
    if metric == "net":
        d = X[:, -1] - X[:, 0]
    elif metric == "mean-step":
        steps = np.diff(X, axis=1)
        norms = np.linalg.norm(steps, axis=2, keepdims=True)
        d = np.where(norms > 0, steps / np.where(norms > 0, norms, 1), 0).sum(axis=1)
    else:
        raise ValueError(f"unknown direction metric {metric!r}")
    norms = np.linalg.norm(d, axis=1)
    unit = np.where(norms[:, None] > 0, d / np.where(norms > 0, norms, 1)[:, None], 0.0)
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    ang = np.arccos(cos)
    # no direction information: treat as agreeing with everything
    still = norms == 0
    ang[still, :] = 0.0
    ang[:, still] = 0.0
    return ang


def reject_samples(samples, fraction=0.9, n_sigma=3.0, metric="net"):
    """Indices of samples moving in the same direction as the reference sample.

    The reference minimizes its mean angular distance to the closest
    ``fraction`` of the other samples; samples within mean + ``n_sigma`` std of
    that set are accepted.
    """
    n = len(samples)
    if n == 0:
        raise ValueError("need at least one sample")
    if n == 1:
        return np.array([0])
    ang = direction_angles(samples, metric)
    m = max(1, int(math.ceil(fraction * (n - 1))))
    others = np.sort(ang + np.diag(np.full(n, np.inf)), axis=1)[:, :m]
    ref = int(np.argmin(others.mean(axis=1)))
    closest = others[ref]
    bound = closest.mean() + n_sigma * closest.std() + 1e-9
    accepted = np.flatnonzero(ang[ref] <= bound)
    return np.union1d(accepted, [ref])


def average_samples(samples, accepted):
    """Timestep-wise mean of the accepted samples.

    Averaging offsets from the first sample keeps identical samples exact.
    """
    first = samples[accepted[0]]
    X = np.stack([samples[i].states for i in accepted])
    mean = first.states + (X - first.states).mean(axis=0)
    return Trajectory(mean, dt=first.dt, bounds=first.bounds)


def plan_segment(net, ctx, entry_state, n_samples, horizon, seed=None, config=None):
    """Sample, decode, reject and average into one mental trajectory.

    Returns ``(mental, samples, accepted, planning_time)``.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    config = config or PlannerConfig()
    t0 = time.perf_counter()
    trains = sample_spiketrains(net, ctx, entry_state, horizon, n_samples, seed)
    samples = [
        decode(tr, net.grid, config.smoothing_width, dt=config.dt) for tr in trains
    ]
    accepted = reject_samples(samples, metric=config.direction_metric)
    mental = average_samples(samples, accepted)
    if config.clock == "wall":
        planning_time = time.perf_counter() - t0
    else:
        planning_time = config.virtual_step_cost * n_samples * horizon
    return mental, samples, accepted, planning_time


def anchor_to_position(mental, position):
    """Translate ``mental`` to start at ``position``; the shift fades linearly to zero."""
    X = mental.states
    offset = np.asarray(position, dtype=float) - X[0]
    w = np.linspace(1.0, 0.0, len(X))[:, None] if len(X) > 1 else np.ones((1, 1))
    return Trajectory(X + w * offset, dt=mental.dt, bounds=mental.bounds)


def schedule_next_planning(stats, expected_exec_time):
    """Offset into the current execution at which to start the next plan."""
    budget = stats.mean + 3.0 * stats.std
    return max(0.0, expected_exec_time - budget)


def incorporate_feedback(executed, grid, tau, radius=0.0):
    """Entry refractory state anchoring the next plan at the robot's position.

    The neuron nearest the final executed position is marked as just spiked,
    together with every neuron within ``radius`` lattice spacings of it.
    """
    entry = np.zeros(grid.n_neurons, dtype=np.int64)
    k = grid.nearest(executed.end)[0]
    entry[k] = tau
    if radius > 0:
        d = np.linalg.norm(grid.positions - grid.positions[k], axis=1)
        entry[d <= radius * grid.spacing + 1e-9] = tau
    return entry


def initial_state(world, grid, tau, entry_radius=0.0):
    waypoints = np.asarray(world.waypoints, dtype=float)
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    start = Trajectory(waypoints[:1], bounds=grid.bounds)
    return PlannerState(
        waypoints=waypoints,
        position=waypoints[0].copy(),
        entry_state=incorporate_feedback(start, grid, tau, entry_radius),
    )


def compute_signal(acfg, mental, executed, grid):
    """Dissonance signal of the configured kind, or None when learning is off."""
    if acfg.kind == "none":
        return None
    if acfg.kind == "local":
        om = responsibilities(mental, grid, acfg.Sigma, "mental")
        oe = responsibilities(executed, grid, acfg.Sigma, "executed")
        sig = adaptation.local_alpha(om, oe, acfg.c, acfg.local_threshold, acfg.cap)
        sig.gated = acfg.gated
        return sig
    sig = adaptation.global_alpha(mental, executed, acfg.global_threshold, acfg.cap)
    if acfg.kind == "constant":
        return adaptation.constant_alpha(acfg.constant_alpha, sig, gated=acfg.gated)
    sig.gated = acfg.gated
    return sig


def step(state, net, world, config, acfg, seed=None):
    """One full plan -> execute -> learn -> feedback cycle.

    ``state`` is updated in place; returns ``(segment, state, net)``.
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    plan_seed, ctx_seed, replay_seed, noise_seed = ss.spawn(4)
    tix = state.target_index
    if tix not in state.contexts:
        state.contexts[tix] = set_context_for_target(
            net.grid, state.waypoints[tix], config.context, seed=ctx_seed
        )
    ctx = state.contexts[tix]

    mental, samples, accepted, planning_time = plan_segment(
        net, ctx, state.entry_state, config.n_samples, config.horizon, plan_seed, config
    )
    if config.anchor_start:
        mental = anchor_to_position(mental, state.position)
    executed, collided, contact = execute(
        mental, world, start=state.position,
        noise=config.tracking_noise, rng=np.random.default_rng(noise_seed),
        standoff=config.standoff,
    )

    triggered, alphas = 0, np.zeros(0)
    signal = compute_signal(acfg, mental, executed, net.grid)
    if signal is not None and signal.fired:
        batch = mental_replay(
            mental, executed, acfg.replay, replay_seed,
            grid=net.grid, tau=net.tau, Sigma=acfg.Sigma,
        )
        net, triggered = apply_update(net, batch, signal)
        alphas = signal.gated_values()

    # timing on the (virtual or wall) clock
    exec_time = mental.path_length() / config.velocity
    plan_start = state.next_plan_start
    exec_start = max(state.clock, plan_start + planning_time)
    state.stats.update(planning_time)
    state.next_plan_start = exec_start + schedule_next_planning(state.stats, exec_time)
    state.clock = exec_start + exec_time

    start_position = state.position.copy()
    dist = np.linalg.norm(executed.states - state.target, axis=1)
    reached = bool(np.any(dist <= config.reach_radius))
    seg = Segment(
        index=state.n_segments,
        target_index=tix,
        mental=mental,
        executed=executed,
        samples_drawn=len(samples),
        samples_accepted=len(accepted),
        planning_time=planning_time,
        expected_exec_time=exec_time,
        collided=collided,
        contact=contact,
        triggered=triggered,
        alphas=alphas,
        reached=reached,
        plan_start=plan_start,
        exec_start=exec_start,
        start_position=start_position,
    )
    state.entry_state = incorporate_feedback(executed, net.grid, net.tau, config.entry_radius)
    state.position = executed.end.copy()
    state.n_segments += 1
    if reached:
        state.active_index += 1
    return seg, state, net
