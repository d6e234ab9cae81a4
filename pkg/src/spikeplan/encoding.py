"""Trajectory -> spike train encoding via Gaussian responsibilities."""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .network import SpikeTrain

RATE_GAIN = 100.0
RATE_CAP = 10.0
COUNT_THRESHOLD = 4


@dataclass
class ResponsibilityField:
    omega: np.ndarray
    source: str = "mental"

    @property
    def T(self):
        return self.omega.shape[0]


def _precision(Sigma, dims):
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim == 0:
        Sigma = Sigma * np.eye(dims)
    if Sigma.shape != (dims, dims) or not np.allclose(Sigma, Sigma.T):
        raise ValueError("Sigma must be a symmetric dims x dims matrix or a scalar")
    try:
        L = np.linalg.cholesky(Sigma)
    except np.linalg.LinAlgError:
        raise ValueError("Sigma is not positive definite") from None
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def basis_log_activations(points, positions, Sigma):
    """``-0.5 (x - p)^T Sigma^-1 (x - p)`` for every point/neuron pair."""
    points = np.atleast_2d(points)
    P = _precision(Sigma, positions.shape[1])
    diff = points[:, None, :] - positions[None, :, :]
    return -0.5 * np.einsum("tki,ij,tkj->tk", diff, P, diff)


def responsibilities(traj, grid, Sigma=None, source="mental"):
    """Per-timestep normalized Gaussian basis activations.

    ``Sigma`` may be a scalar variance or a covariance matrix; it defaults to
    one lattice spacing squared (the width used for weight initialization).
    """
    if Sigma is None:
        Sigma = grid.spacing**2
    states = traj.states if hasattr(traj, "states") else np.asarray(traj, dtype=float)
    logb = basis_log_activations(states, grid.positions, Sigma)
    logb -= logb.max(axis=1, keepdims=True)
    b = np.exp(logb)
    return ResponsibilityField(b / b.sum(axis=1, keepdims=True), source)


def poisson_means(omega):
    return np.clip(RATE_GAIN * np.asarray(omega), 0.0, RATE_CAP)


def encode_poisson(field, tau, seed=None, rng=None):
    """Threshold Poisson draws into a refractory-respecting spike train."""
    if rng is None:
        rng = np.random.default_rng(seed)
    counts = rng.poisson(poisson_means(field.omega))
    candidates = np.ascontiguousarray(counts >= COUNT_THRESHOLD, dtype=np.uint8)
    spikes = np.asarray(kernels.refractory_filter(candidates, int(tau)))
    return SpikeTrain(spikes, None, tau)
