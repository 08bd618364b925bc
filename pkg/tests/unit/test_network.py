"""Tests for the trajectory network and the reverse-mode tape."""

import numpy as np
import pytest

from pinnverse.core.models import TrainableMask
from pinnverse.error_handling import DimensionMismatchError, UnsupportedPrimitiveError
from pinnverse.network.autodiff import Tape, backward
from pinnverse.network.mlp import NetConfig, forward, forward_with_dt, init


class TestNetwork:
    """Tests for initialization and the dual forward pass."""

    def test_init_shapes(self):
        """Test layer shapes follow the configuration and biases start at 0."""
        state = init(NetConfig(output_dim=15, hidden_layers=(8, 4), seed=1))
        assert [w.shape for w in state.weights] == [(8, 1), (4, 8), (15, 4)]
        assert all(np.all(b == 0) for b in state.biases)
        assert state.raw_phys.size == 0

    def test_init_is_seeded(self):
        """Test the same seed gives the same weights."""
        a = init(NetConfig(output_dim=3, hidden_layers=(5,), seed=4))
        b = init(NetConfig(output_dim=3, hidden_layers=(5,), seed=4))
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_invalid_config(self):
        """Test unknown activations and empty widths are rejected."""
        with pytest.raises(ValueError):
            NetConfig(output_dim=3, activation="relu")
        with pytest.raises(ValueError):
            NetConfig(output_dim=3, hidden_layers=(0,))

    @pytest.mark.parametrize("activation", ["tanh", "sin"])
    def test_dt_matches_finite_differences(self, activation):
        """Test the carried time derivative against central differences."""
        config = NetConfig(output_dim=4, hidden_layers=(7, 7), activation=activation)
        state = init(config)
        tau = np.linspace(0.0, 1.0, 9)
        h = 1e-4
        dual = forward_with_dt(state, tau)
        fd = (forward(state, tau + h) - forward(state, tau - h)) / (2 * h)
        np.testing.assert_allclose(dual.value, forward(state, tau), atol=1e-14)
        np.testing.assert_allclose(dual.dt, fd, rtol=1e-6, atol=1e-7)

    def test_dt_random_cases(self):
        """Test the time derivative at 100 random (network, time) pairs."""
        rng = np.random.default_rng(0)
        h = 1e-4
        for case in range(100):
            activation = "sin" if case % 2 else "tanh"
            config = NetConfig(
                output_dim=3, hidden_layers=(6, 6), activation=activation, seed=case
            )
            state = init(config)
            tau = rng.uniform(0.0, 1.0, 1)
            dual = forward_with_dt(state, tau)
            fd = (forward(state, tau + h) - forward(state, tau - h)) / (2 * h)
            np.testing.assert_allclose(dual.dt, fd, rtol=1e-6, atol=1e-7)

    def test_with_parameters_checks_count(self):
        """Test a parameter list of the wrong length is rejected."""
        state = init(NetConfig(output_dim=3, hidden_layers=(4,)))
        with pytest.raises(DimensionMismatchError):
            state.with_parameters(state.parameters()[:-1])


class TestBackward:
    """Tests for exact gradients of the composite loss."""

    def test_output_bias_gradient(self):
        """Test d/db ||NN(1)||^2 = 2b when the output weights vanish."""
        state = init(NetConfig(output_dim=3, hidden_layers=(4,), seed=2))
        state.weights[-1] = np.zeros_like(state.weights[-1])
        state.biases[-1] = np.array([0.5, -1.0, 2.0])
        tape = Tape()
        net = tape.network(state, np.array([1.0]))
        loss = tape.sum_squares(tape.trial_value(net, np.zeros(3), np.array([1.0])))
        grads = backward(state, tape, loss)
        np.testing.assert_allclose(grads.biases[-1], 2 * state.biases[-1])
        np.testing.assert_allclose(grads.weights[0], 0.0)

    def test_full_loss_matches_finite_differences(
        self, small_objective, small_state, numeric_gradients
    ):
        """Test every gradient entry of the total loss against central differences."""
        _, grads = small_objective.value_and_grad(small_state)
        expected = numeric_gradients(small_objective, small_state)
        for analytic, numeric in zip(grads.parameters(), expected):
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_two_qubit_sin_loss_matches_finite_differences(
        self, two_qubit_params, two_qubit_channels, numeric_gradients
    ):
        """Test gradients for a two-qubit objective with sin activations."""
        from pinnverse.dynamics.lindblad import evolve, plus_plus_state
        from pinnverse.training.pinnverse import FitConfig, build_objective

        data = evolve(
            plus_plus_state(2),
            two_qubit_params,
            two_qubit_channels,
            np.linspace(0.0, 1.0, 6),
        )
        config = FitConfig(
            n_t=4, n_c=6, hidden_layers=(4, 4), activation="sin", final_time=1.0
        )
        objective = build_objective(data, two_qubit_channels, config)
        rng = np.random.default_rng(5)
        state = init(
            NetConfig(output_dim=15, hidden_layers=(4, 4), activation="sin", seed=8),
            raw_phys=rng.normal(0.0, 0.5, objective.layout.size),
        )
        state.biases = [rng.normal(0.0, 0.3, b.shape) for b in state.biases]
        _, grads = objective.value_and_grad(state)
        expected = numeric_gradients(objective, state)
        for analytic, numeric in zip(grads.parameters(), expected):
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_masked_loss_matches_finite_differences(
        self, one_qubit_data, one_qubit_channels, numeric_gradients
    ):
        """Test gradients when only some couplings and rates are trainable."""
        from pinnverse.training.pinnverse import FitConfig, build_objective

        mask = TrainableMask(
            j=np.array([False, False, True, False]),
            gamma=np.array([True, False, True]),
        )
        config = FitConfig(n_t=6, n_c=5, hidden_layers=(5,), mask=mask, final_time=1.0)
        objective = build_objective(one_qubit_data, one_qubit_channels, config)
        assert objective.layout.size == 3
        state = init(
            NetConfig(output_dim=3, hidden_layers=(5,), seed=6),
            raw_phys=np.array([0.8, 0.4, -0.6]),
        )
        _, grads = objective.value_and_grad(state)
        expected = numeric_gradients(objective, state)
        for analytic, numeric in zip(grads.parameters(), expected):
            np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-6)

    def test_rate_reparametrization(self, small_objective, small_state):
        """Test dL/dr = 2 r dL/dgamma for every decay rate."""
        layout = small_objective.layout
        state = small_state.copy()
        state.raw_phys[layout.gamma_source] = [0.5, 0.7, 0.9]
        _, grads = small_objective.value_and_grad(state)
        h = 1e-6
        for src in layout.gamma_source:
            r = state.raw_phys[src]
            values = []
            for step in (h, -h):
                shifted = state.copy()
                shifted.raw_phys[src] = np.sqrt(r * r + step)
                values.append(small_objective.value(shifted)[0])
            dl_dgamma = (values[0] - values[1]) / (2 * h)
            assert grads.raw_phys[src] == pytest.approx(
                2 * r * dl_dgamma, rel=1e-5, abs=1e-7
            )

    def test_masked_couplings_have_no_entry(self, one_qubit_data, one_qubit_channels):
        """Test fixed couplings are absent from the trainable vector."""
        from pinnverse.training.pinnverse import FitConfig, build_objective

        mask = TrainableMask([False, True, False, True], [True, True, True])
        config = FitConfig(n_t=5, n_c=6, hidden_layers=(4,), mask=mask, final_time=1.0)
        objective = build_objective(one_qubit_data, one_qubit_channels, config)
        assert objective.layout.size == 5
        state = init(
            NetConfig(output_dim=3, hidden_layers=(4,)),
            raw_phys=np.full(5, 0.3),
        )
        _, grads = objective.value_and_grad(state)
        assert grads.raw_phys.shape == (5,)
        params = objective.parameters(state)
        assert params.J[2] == 0.0
        assert params.J[1] == pytest.approx(0.3)
        np.testing.assert_allclose(params.gamma, 0.09)

    def test_unsupported_primitive(self):
        """Test a node without a reverse rule stops differentiation."""
        state = init(NetConfig(output_dim=3, hidden_layers=(2,)), raw_phys=np.ones(2))
        tape = Tape()
        leaf = tape.raw_phys(state)
        tape.record("mystery", (leaf,), 1.0)
        with pytest.raises(UnsupportedPrimitiveError):
            backward(state, tape)

    def test_empty_tape(self):
        """Test an empty tape cannot be differentiated."""
        state = init(NetConfig(output_dim=3, hidden_layers=(2,)))
        with pytest.raises(ValueError):
            backward(state, Tape())
