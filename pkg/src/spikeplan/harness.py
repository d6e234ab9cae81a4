"""Trial runner, metrics and exports for the adaptation experiments."""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .environment import get_world
from .network import ContextShape, GridSpec, Logistic, StateNetwork
from .planner import AdaptationConfig, PlannerConfig, initial_state, step

RECORDS_VERSION = 1
SUMMARY_VERSION = 1


@dataclass
class TrialConfig:
    world: str = "paper-sim"
    kind: str = "global"
    segments: int = 300
    trials: int = 10
    n_samples: int = 40
    replay: int = 20
    seed: int = 0
    constant_alpha: float = 0.001
    gated: bool = True
    # network
    neurons_per_dim: int = 15
    tau: int = 10
    refractory_ramp: int = 5
    act_offset: float = 0.5
    act_scale: float = 0.06
    sigma_init: float = 0.0  # 0 -> one lattice spacing
    weight_offset: float = -0.2
    # context
    ctx_neurons: int = 9
    ctx_spread: float = 0.05
    ctx_prob: float = 0.5
    ctx_beta: float = 1.5
    ctx_scale: float = 0.8
    ctx_gain: float = 0.12
    ctx_baseline: float = 0.0
    # planner
    horizon: int = 30
    smoothing_width: float = 5.0
    reach_radius: float = 0.1
    velocity: float = 0.1
    clock: str = "virtual"
    direction_metric: str = "net"
    tracking_noise: float = 0.0
    entry_radius: float = 1.0
    anchor_start: bool = True
    standoff: float = 0.02
    # adaptation
    global_threshold: float = 0.02
    local_threshold: float = 0.05
    alpha_cap: float = 0.3
    local_c: float = 3.0
    # transfer: start every trial from this model file
    init_model: str = ""
    keep_trajectories: bool = False

    def __post_init__(self):
        for name in ("segments", "trials", "n_samples", "replay", "horizon", "tau"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.kind not in ("global", "local", "constant", "none"):
            raise ValueError(f"unknown adaptation kind {self.kind!r}")
        if self.clock not in ("virtual", "wall"):
            raise ValueError("clock must be 'virtual' or 'wall'")
        if not 0 <= self.ctx_prob <= 1:
            raise ValueError("ctx_prob must lie in [0, 1]")
        if self.reach_radius <= 0 or self.velocity <= 0:
            raise ValueError("reach_radius and velocity must be positive")
        if self.entry_radius < 0 or self.standoff < 0:
            raise ValueError("entry_radius and standoff must be >= 0")
        if self.act_scale <= 0 or self.smoothing_width < 0:
            raise ValueError("act_scale must be positive, smoothing_width >= 0")
        if not 0 <= self.constant_alpha <= 1 or self.alpha_cap <= 0:
            raise ValueError("constant_alpha must lie in [0, 1], alpha_cap > 0")

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}

    def grid(self):
        return GridSpec(2, self.neurons_per_dim, (-1.0, 1.0))

    def network(self):
        if self.init_model:
            from .persistence import load_model

            net = load_model(self.init_model)
            if net.grid != self.grid():
                raise ValueError("model grid does not match configuration")
            return net
        return StateNetwork.create(
            self.grid(),
            sigma_init=self.sigma_init or None,
            offset=self.weight_offset,
            tau=self.tau,
            activation=Logistic(self.act_offset, self.act_scale),
            refractory_ramp=self.refractory_ramp,
        )

    def planner_config(self):
        return PlannerConfig(
            horizon=self.horizon,
            n_samples=self.n_samples,
            smoothing_width=self.smoothing_width,
            reach_radius=self.reach_radius,
            velocity=self.velocity,
            context=ContextShape(
                self.ctx_neurons, self.ctx_spread, self.ctx_prob,
                self.ctx_beta, self.ctx_scale, self.ctx_gain, self.ctx_baseline,
            ),
            clock=self.clock,
            direction_metric=self.direction_metric,
            tracking_noise=self.tracking_noise,
            entry_radius=self.entry_radius,
            anchor_start=self.anchor_start,
            standoff=self.standoff,
        )

    def adaptation_config(self):
        return AdaptationConfig(
            kind=self.kind,
            global_threshold=self.global_threshold,
            local_threshold=self.local_threshold,
            cap=self.alpha_cap,
            c=self.local_c,
            constant_alpha=self.constant_alpha,
            gated=self.gated,
            replay=self.replay,
        )


@dataclass
class SegmentRecord:
    trial: int
    segment: int
    target_index: int
    planning_time: float
    expected_exec_time: float
    path_length: float
    samples_accepted: int
    collided: bool
    triggered: int
    reached: bool
    start_x: float
    start_y: float
    end_x: float
    end_y: float
    alphas: tuple = ()

    @classmethod
    def from_segment(cls, trial, seg):
        return cls(
            trial=trial,
            segment=seg.index,
            target_index=seg.target_index,
            planning_time=float(seg.planning_time),
            expected_exec_time=float(seg.expected_exec_time),
            path_length=float(seg.mental.path_length()),
            samples_accepted=int(seg.samples_accepted),
            collided=bool(seg.collided),
            triggered=int(seg.triggered),
            reached=bool(seg.reached),
            start_x=float(seg.start_position[0]),
            start_y=float(seg.start_position[1]),
            end_x=float(seg.executed.end[0]),
            end_y=float(seg.executed.end[1]),
            alphas=tuple(float(a) for a in seg.alphas),
        )


@dataclass
class TrialMetrics:
    trial: int
    updates_triggered: int
    targets_reached: int
    records: list
    W_initial: np.ndarray = None
    W_final: np.ndarray = None
    trajectories: list = field(default_factory=list)
    network: StateNetwork = None


def blocked_target_index(world):
    if world.blocked_target is not None:
        return world.blocked_target
    return len(world.waypoints) - 1


def run_trial(config, trial, net=None, world=None, segments=None, learn=True, on_segment=None):
    """Run one independent trial; returns :class:`TrialMetrics`."""
    world = world or get_world(config.world)
    net = net if net is not None else config.network()
    pcfg = config.planner_config()
    acfg = config.adaptation_config()
    if not learn:
        acfg = replace(acfg, kind="none")
    state = initial_state(world, net.grid, net.tau, pcfg.entry_radius)
    blocked = blocked_target_index(world)
    W0 = net.W.copy()
    records, trajs = [], []
    updates = reached = 0
    for s in range(segments or config.segments):
        seed = np.random.SeedSequence(config.seed, spawn_key=(trial, s))
        seg, state, net = step(state, net, world, pcfg, acfg, seed)
        updates += seg.triggered
        reached += int(seg.reached and seg.target_index == blocked)
        records.append(SegmentRecord.from_segment(trial, seg))
        if config.keep_trajectories:
            trajs.append((seg.target_index, seg.start_position, seg.mental.states, seg.executed.states))
        if on_segment is not None:
            on_segment(seg, net)
    return TrialMetrics(trial, updates, reached, records, W0, net.W.copy(), trajs, net)


def _run_one(args):
    config, trial = args
    return run_trial(config, trial)


def run_trials(config, trials=None, jobs=1):
    """Independent trials with derived seeds, optionally across processes."""
    trials = list(trials if trials is not None else range(config.trials))
    world = get_world(config.world)
    if jobs <= 1 or len(trials) <= 1:
        return [run_trial(config, t, world=world) for t in trials]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_one, [(config, t) for t in trials]))


def mean_std(values):
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return math.nan, math.nan
    return float(values.mean()), float(values.std())


def summarize(config, metrics):
    upd = [m.updates_triggered for m in metrics]
    tgt = [m.targets_reached for m in metrics]
    plan = [r.planning_time for m in metrics for r in m.records]
    exec_ = [r.expected_exec_time for m in metrics for r in m.records]
    out = {
        "format": "spikeplan-summary",
        "version": SUMMARY_VERSION,
        "config": asdict(config),
        "trials": [
            {"trial": m.trial, "updates_triggered": m.updates_triggered,
             "targets_reached": m.targets_reached,
             "collisions": sum(r.collided for r in m.records)}
            for m in metrics
        ],
    }
    for name, vals in (("updates_triggered", upd), ("targets_reached", tgt),
                       ("planning_time", plan), ("expected_exec_time", exec_)):
        mu, sd = mean_std(vals)
        out[name] = {"mean": mu, "std": sd}
    return out


RECORD_FIELDS = [f.name for f in fields(SegmentRecord)]


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ";".join(repr(x) for x in v)
    return str(v)


def records_to_csv(records):
    buf = io.StringIO()
    buf.write(f"# spikeplan-segments v{RECORDS_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, f)) for f in RECORD_FIELDS])
    return buf.getvalue()


_PARSERS = {
    "trial": int, "segment": int, "target_index": int, "samples_accepted": int,
    "triggered": int, "collided": lambda s: s == "1", "reached": lambda s: s == "1",
    "alphas": lambda s: tuple(float(x) for x in s.split(";")) if s else (),
}


def records_from_csv(text):
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# spikeplan-segments"):
        raise ValueError("not a segment record file")
    version = lines[0].split("v")[-1].strip()
    if version != str(RECORDS_VERSION):
        raise ValueError(f"unsupported record version {version}")
    rows = csv.DictReader(lines[1:])
    out = []
    for row in rows:
        out.append(SegmentRecord(**{
            k: _PARSERS.get(k, float)(v) for k, v in row.items()
        }))
    return out


def metrics_from_records(records, blocked_target):
    """Rebuild per-trial counts from segment records."""
    by_trial = {}
    for r in records:
        by_trial.setdefault(r.trial, []).append(r)
    out = []
    for trial in sorted(by_trial):
        recs = sorted(by_trial[trial], key=lambda r: r.segment)
        out.append(TrialMetrics(
            trial,
            sum(r.triggered for r in recs),
            sum(r.reached and r.target_index == blocked_target for r in recs),
            recs,
        ))
    return out


def synaptic_change_report(W_before, W_after, grid):
    """Grid-aligned mean change of each neuron's synaptic input and output.

    Returns ``(input_change, output_change)`` shaped like the lattice.
    """
    W_before = np.asarray(W_before, dtype=float)
    W_after = np.asarray(W_after, dtype=float)
    if W_before.shape != W_after.shape:
        raise ValueError("weight matrices differ in shape")
    D = W_after - W_before
    shape = (grid.neurons_per_dim,) * grid.dims
    return D.mean(axis=0).reshape(shape), D.mean(axis=1).reshape(shape)


@dataclass
class SignalHistogram:
    edges: np.ndarray
    counts: np.ndarray
    mass: float
    top_share: float
    max_value: float


def signal_histogram(alphas, bins=20, top_fraction=0.15):
    """Histogram of gated learning-signal magnitudes and update-mass stats.

    ``mass`` is the sum of all signal magnitudes (each bin's magnitude weighted
    by its frequency); ``top_share`` is the fraction of that mass carried by
    the largest ``top_fraction`` of signals.
    """
    a = np.sort(np.asarray(list(alphas), dtype=float))[::-1]
    if len(a) == 0:
        raise ValueError("no learning signals recorded")
    lo, hi = a.min(), a.max()
    if lo == hi:
        edges = np.array([lo, hi])
        counts = np.array([len(a)])
    else:
        counts, edges = np.histogram(a, bins=bins, range=(lo, hi))
    mass = float(a.sum())
    n_top = top_fraction * len(a)
    whole = int(math.floor(n_top))
    top = a[:whole].sum() + (n_top - whole) * (a[whole] if whole < len(a) else 0.0)
    return SignalHistogram(edges, counts, mass, float(top / mass) if mass else 0.0, float(hi))


def grid_to_csv(values):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(values):
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def histogram_to_csv(h):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_low", "bin_high", "count"])
    for lo, hi, c in zip(h.edges[:-1], h.edges[1:], h.counts):
        w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    return buf.getvalue()
