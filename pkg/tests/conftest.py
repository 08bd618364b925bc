"""Pytest configuration and fixtures for pinnverse tests."""

from typing import Tuple

import numpy as np
import pytest

from pinnverse.core.models import (
    ChannelSet,
    FitReport,
    LossRecord,
    ParameterSet,
    RunSummary,
    TrainableMask,
    Trajectory,
    one_qubit_finite_t,
    two_qubit_standard,
)


@pytest.fixture
def two_qubit_channels() -> ChannelSet:
    """Amplitude damping and dephasing on both qubits."""
    return two_qubit_standard()


@pytest.fixture
def one_qubit_channels() -> ChannelSet:
    """Dephasing, sigma_minus and sigma_plus on one qubit."""
    return one_qubit_finite_t()


@pytest.fixture
def one_qubit_params() -> ParameterSet:
    """Moderate single-qubit parameters on a window T=1."""
    return ParameterSet.from_nonidentity(1, [0.4, -1.1, 0.7], [0.3, 0.5, 0.1])


@pytest.fixture
def two_qubit_params() -> ParameterSet:
    """Random two-qubit parameters on a window T=1."""
    from pinnverse.dynamics.sampling import sample_random_parameters

    return sample_random_parameters(2, seed=7)


@pytest.fixture
def one_qubit_data(one_qubit_params, one_qubit_channels) -> Trajectory:
    """Clean 21-sample trajectory from |+> on [0, 1]."""
    from pinnverse.dynamics.lindblad import evolve, plus_plus_state

    times = np.linspace(0.0, 1.0, 21)
    return evolve(plus_plus_state(1), one_qubit_params, one_qubit_channels, times)


@pytest.fixture
def quick_fit_config():
    """Tiny training configuration that finishes in well under a second."""
    from pinnverse.training.pinnverse import FitConfig

    return FitConfig(
        n_t=12,
        n_c=8,
        max_steps=30,
        restarts=2,
        hidden_layers=(8, 8),
        log_every=10,
        plateau_window=1000,
        final_time=1.0,
    )


@pytest.fixture
def small_objective(one_qubit_data, one_qubit_channels):
    """Single-qubit loss on a 6-wide two-layer network."""
    from pinnverse.training.pinnverse import FitConfig, build_objective

    config = FitConfig(n_t=5, n_c=6, hidden_layers=(6, 6), final_time=1.0)
    return build_objective(one_qubit_data, one_qubit_channels, config)


@pytest.fixture
def small_state(small_objective):
    """Network state matching ``small_objective`` with random raw parameters."""
    from pinnverse.network.mlp import NetConfig, init

    rng = np.random.default_rng(11)
    config = NetConfig(output_dim=3, hidden_layers=(6, 6), seed=3)
    raw = rng.normal(0.0, 0.8, small_objective.layout.size)
    state = init(config, raw_phys=raw)
    # nonzero biases so every parameter carries a gradient
    state.biases = [rng.normal(0.0, 0.3, b.shape) for b in state.biases]
    return state


@pytest.fixture
def sample_report() -> FitReport:
    """Hand-built single-qubit report with one ok and one failed restart."""
    from pinnverse.core.metrics import group_mape, parameter_errors

    truth = ParameterSet.from_nonidentity(1, [0.1, -0.5, 0.0], [0.05, 0.02, 0.01])
    recovered = ParameterSet.from_nonidentity(
        1, [0.11, -0.49, 0.001], [0.05, 0.021, 0.012]
    )
    mask = TrainableMask.all(1, 3)
    return FitReport(
        n_qubits=1,
        channels="one_qubit_finite_t",
        recovered=recovered,
        trainable=mask,
        initial_state=np.array([1.0, 0.0, 0.0]),
        final_time=1.0,
        seeds=[0, 1],
        best_seed=0,
        loss_history=[LossRecord(0, 1.0, 0.5, 0.5), LossRecord(10, 0.1, 0.05, 0.05)],
        runs=[
            RunSummary(0, "ok", 10, 0.1, recovered, wall_time=None),
            RunSummary(1, "failed", 3, None, None, "diverged"),
        ],
        truth=truth,
        errors=parameter_errors(truth, recovered, mask),
        mape=group_mape(truth, recovered, mask),
    )


def _finite_difference_gradients(objective, state, h: float = 1e-5) -> Tuple:
    params = state.parameters()
    grads = []
    for k, p in enumerate(params):
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            plus = [q.copy() for q in params]
            minus = [q.copy() for q in params]
            plus[k][idx] += h
            minus[k][idx] -= h
            up = objective.value(state.with_parameters(plus))[0]
            down = objective.value(state.with_parameters(minus))[0]
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return tuple(grads)


@pytest.fixture
def numeric_gradients():
    """Central differences of the total loss for every parameter entry."""
    return _finite_difference_gradients
