"""Online motion planning with an adaptive stochastic spiking network."""

from .adaptation import (
    DissonanceSignal, ReplayBatch, apply_update, cd_delta, constant_alpha,
    global_alpha, local_alpha, mental_replay,
)
from .encoding import ResponsibilityField, encode_poisson, responsibilities
from .environment import Circle, Polygon, World, collides, execute, get_world, load_world, save_world
from .kernels import BACKEND
from .network import (
    ContextPopulation, ContextShape, GridSpec, Logistic, SpikeTrain, StateNetwork,
    Trajectory, decode, sample_spiketrain, sample_spiketrains, set_context_for_target,
)
from .persistence import load_model, save_model
from .planner import plan_segment, reject_samples, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Circle", "ContextPopulation", "ContextShape", "DissonanceSignal",
    "GridSpec", "Logistic", "Polygon", "ReplayBatch", "ResponsibilityField",
    "SpikeTrain", "StateNetwork", "Trajectory", "World", "apply_update",
    "cd_delta", "collides", "constant_alpha", "decode", "encode_poisson",
    "execute", "get_world", "global_alpha", "load_model", "load_world",
    "local_alpha", "mental_replay", "plan_segment", "reject_samples",
    "responsibilities", "sample_spiketrain", "sample_spiketrains", "save_model",
    "save_world", "set_context_for_target", "step",
]
