"""Dissonance-gated contrastive-divergence updates with mental replay."""

from dataclasses import dataclass, field

import numpy as np

from .encoding import encode_poisson, responsibilities
from .network import psp_matrix

KINDS = ("global", "local", "constant", "none")
# a signal must clear its threshold by more than float round-off to open the gate
GATE_RTOL = 1e-9


@dataclass
class DissonanceSignal:
    """Learning-rate field gating and scaling a CD update.

    ``values`` is a T-vector (global/constant) or T x K matrix (local). For the
    constant kind the values only gate the update and ``scale`` sets the rate.
    With ``gated=False`` every entry counts as open.
    """

    kind: str
    values: np.ndarray
    threshold: float
    cap: float = 0.3
    scale: float = None
    gated: bool = True

    def __post_init__(self):
        if self.kind not in KINDS[:3]:
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if not self.threshold > 0 or self.cap < self.threshold:
            raise ValueError("need threshold > 0 and cap >= threshold")
        if self.kind == "constant" and self.scale is None:
            raise ValueError("constant signals need a scale")
        self.values = np.clip(np.asarray(self.values, dtype=float), 0.0, self.cap)

    def gates(self):
        if not self.gated:
            return np.ones(self.values.shape, dtype=bool)
        return self.values > self.threshold * (1.0 + GATE_RTOL)

    def rates(self):
        """Effective learning rate per entry, zero where the gate is closed."""
        open_ = self.gates()
        if self.kind == "constant":
            return np.where(open_, self.scale, 0.0)
        return np.where(open_, self.values, 0.0)

    @property
    def fired(self):
        return bool(self.gates().any())

    def gated_values(self):
        """Magnitudes of all open learning signals (flattened)."""
        return self.rates()[self.gates()].ravel()


def _match_length(mental, executed):
    T = len(mental)
    if len(executed) < T:
        executed = executed.padded(T)
    if len(executed) != T:
        raise ValueError(f"length mismatch: mental {T}, executed {len(executed)}")
    return executed


def global_alpha(mental, executed, threshold=0.02, cap=0.3):
    """Squared distance between mental and executed states per timestep."""
    executed = _match_length(mental, executed)
    d2 = ((mental.states - executed.states) ** 2).sum(axis=1)
    return DissonanceSignal("global", d2, threshold, cap)


def local_alpha(omega_m, omega_e, c=3.0, threshold=0.05, cap=0.3):
    """Scaled squared responsibility difference per timestep and neuron."""
    if omega_m.omega.shape != omega_e.omega.shape:
        raise ValueError("responsibility fields differ in shape")
    values = c * (omega_m.omega - omega_e.omega) ** 2
    return DissonanceSignal("local", values, threshold, cap)


def constant_alpha(alpha, gate, gated=True):
    """Constant learning rate triggered by a global signal's gate."""
    return DissonanceSignal(
        "constant", gate.values, gate.threshold, gate.cap, scale=alpha, gated=gated
    )


@dataclass
class CDDelta:
    """Factored one-step CD update field.

    ``dense()[t, k, i] = pre[t, k] * (post_data[t, i] - post_model[t, i])``.
    """

    pre: np.ndarray
    post_data: np.ndarray
    post_model: np.ndarray

    @property
    def T(self):
        return self.pre.shape[0]

    def dense(self):
        diff = self.post_data.astype(float) - self.post_model
        return self.pre[:, :, None] * diff[:, None, :]

    def weight_change(self, rates):
        """Sum over t of ``rates`` times the update field; returns K x K."""
        rates = np.asarray(rates, dtype=float)
        diff = self.post_data.astype(float) - self.post_model
        if rates.ndim == 1:
            rates = rates[:, None]
        return self.pre.T.astype(float) @ (rates * diff)


def cd_delta(data_train, model_train, tau=None):
    """CD update with data-driven rectangular PSP as the presynaptic term."""
    if data_train.activity.shape != model_train.activity.shape:
        raise ValueError("data and model trains differ in horizon or size")
    pre = psp_matrix(data_train)[: data_train.T]
    return CDDelta(pre, data_train.activity, model_train.activity)


@dataclass
class ReplayBatch:
    pairs: list = field(default_factory=list)

    @property
    def count(self):
        return len(self.pairs)

    def deltas(self):
        return [cd_delta(d, m) for d, m in self.pairs]


def mental_replay(mental, executed, R=20, seed=None, *, grid, tau, Sigma=None):
    """Encode the (executed, mental) pair ``R`` times with independent seeds.

    Executed encodings play the data role, mental encodings the model role.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    executed = _match_length(mental, executed)
    om = responsibilities(mental, grid, Sigma, "mental")
    oe = responsibilities(executed, grid, Sigma, "executed")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(R)
    pairs = []
    for child in children:
        rng = np.random.default_rng(child)
        data = encode_poisson(oe, tau, rng=rng)
        model = encode_poisson(om, tau, rng=rng)
        pairs.append((data, model))
    return ReplayBatch(pairs)


def apply_update(net, delta, signal):
    """Apply gated CD update(s); returns ``(network, updates_triggered)``.

    ``delta`` is a single :class:`CDDelta`, a list of them, or a
    :class:`ReplayBatch`; multiple deltas are applied in order with the weights
    clamped to [-1, 1] after each one.
    """
    if isinstance(delta, ReplayBatch):
        deltas = delta.deltas()
    elif isinstance(delta, CDDelta):
        deltas = [delta]
    else:
        deltas = list(delta)
    if not signal.fired or not deltas:
        return net, 0
    rates = signal.rates()
    W = net.W.copy()
    for d in deltas:
        if d.T != len(rates):
            raise ValueError("signal and update horizons differ")
        W += d.weight_change(rates)
        np.clip(W, -1.0, 1.0, out=W)
    return net.with_weights(W), 1
