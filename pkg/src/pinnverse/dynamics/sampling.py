"""Random ground truths and the additive Gaussian measurement model."""

import logging
from typing import Optional

import numpy as np

from pinnverse.core.models import ParameterSet, TrainableMask, Trajectory

logger = logging.getLogger(__name__)


def make_rng(seed: int) -> np.random.Generator:
    """Platform-stable 64-bit generator for one explicit seed."""
    return np.random.Generator(np.random.PCG64(seed))


def omega0(final_time: float) -> float:
    """Frequency unit 2*pi/T of an evolution window."""
    if final_time <= 0:
        raise ValueError(f"Final time must be positive, got {final_time}")
    return 2.0 * np.pi / final_time


def add_gaussian_noise(traj: Trajectory, sigma: float, seed: int) -> Trajectory:
    """Add i.i.d. N(0, sigma^2) to every entry, t=0 included.

    The input trajectory is left untouched.
    """
    if sigma < 0:
        raise ValueError(f"Noise level must be nonnegative, got {sigma}")
    noisy = traj.copy()
    if sigma == 0:
        return noisy
    noisy.values = noisy.values + make_rng(seed).normal(0.0, sigma, traj.values.shape)
    logger.debug(f"Added sigma={sigma} noise to {traj.values.size} entries")
    return noisy


def sample_random_parameters(
    n_qubits: int,
    seed: int,
    mask: Optional[TrainableMask] = None,
    final_time: float = 1.0,
    n_channels: Optional[int] = None,
) -> ParameterSet:
    """J uniform on [-w0, w0], gamma uniform on [0, w0] with w0 = 2*pi/T.

    Every entry is drawn before the mask is applied, so a seed gives the
    same unmasked values whatever the mask.
    """
    if n_channels is None:
        n_channels = 4 if n_qubits == 2 else 3
    if mask is None:
        mask = TrainableMask.all(n_qubits, n_channels)
    if mask.n_qubits != n_qubits or mask.gamma.size != n_channels:
        raise ValueError("Mask does not match the qubit count or channel count")

    w0 = omega0(final_time)
    rng = make_rng(seed)
    j_values = rng.uniform(-w0, w0, 4**n_qubits - 1)
    gamma = rng.uniform(0.0, w0, n_channels)

    j_values = np.where(mask.j[1:], j_values, 0.0)
    gamma = np.where(mask.gamma, gamma, 0.0)
    return ParameterSet.from_nonidentity(n_qubits, j_values, gamma)
