"""Tests for the affine Pauli-basis generator."""

import numpy as np
import pandas as pd
import pytest

from pinnverse.core.models import ChannelSet, ParameterSet
from pinnverse.core.pauli import ObservableBasis, lowering_raising, pauli_matrix
from pinnverse.dynamics.lindblad import evolve, plus_plus_state
from pinnverse.dynamics.liouvillian import (
    GeneratorFactory,
    build_generator,
    build_hamiltonian,
    evolve_pauli,
    generator_factory,
    rhs,
    write_generator_csv,
)
from pinnverse.dynamics.sampling import sample_random_parameters
from pinnverse.error_handling import DimensionMismatchError


def _single_channel(op):
    return ChannelSet(name="single", operators=(op,), labels=("L",))


class TestGeneratorStructure:
    """Tests for the shape of A and b."""

    def test_unitary_part_is_antisymmetric(self, two_qubit_channels):
        """Test A is antisymmetric and b vanishes without decay."""
        params = sample_random_parameters(2, seed=3)
        params.gamma[:] = 0.0
        gen = build_generator(params, two_qubit_channels)
        np.testing.assert_allclose(gen.A, -gen.A.T, atol=1e-12)
        np.testing.assert_allclose(gen.b, 0.0)

    def test_dephasing_block(self):
        """Test dephasing at rate g gives A = diag(-2g, -2g, 0) and b = 0."""
        gamma = 0.4
        params = ParameterSet.from_nonidentity(1, [0, 0, 0], [gamma])
        gen = build_generator(params, _single_channel(pauli_matrix(3)))
        np.testing.assert_allclose(gen.A, np.diag([-2 * gamma, -2 * gamma, 0.0]))
        np.testing.assert_allclose(gen.b, 0.0)

    def test_amplitude_damping_block(self):
        """Test sigma_minus damping gives the affine drift towards <sz> = -1."""
        gamma = 0.6
        params = ParameterSet.from_nonidentity(1, [0, 0, 0], [gamma])
        gen = build_generator(params, _single_channel(lowering_raising("minus")))
        np.testing.assert_allclose(
            gen.A, np.diag([-gamma / 2, -gamma / 2, -gamma]), atol=1e-12
        )
        np.testing.assert_allclose(gen.b, [0.0, 0.0, -gamma], atol=1e-12)

    def test_linear_in_parameters(self, two_qubit_channels):
        """Test A(p + q) = A(p) + A(q) and the same for b."""
        p = sample_random_parameters(2, seed=1)
        q = sample_random_parameters(2, seed=2)
        both = ParameterSet(2, p.J + q.J, p.gamma + q.gamma)
        gp = build_generator(p, two_qubit_channels)
        gq = build_generator(q, two_qubit_channels)
        g = build_generator(both, two_qubit_channels)
        np.testing.assert_allclose(g.A, gp.A + gq.A, atol=1e-12)
        np.testing.assert_allclose(g.b, gp.b + gq.b, atol=1e-12)

    def test_dephasing_only_is_contractive(self, two_qubit_channels):
        """Test a decay-only generator has no eigenvalue with positive real part."""
        params = ParameterSet(2, np.zeros(16), [0.3, 0.2, 0.5, 0.1])
        gen = build_generator(params, two_qubit_channels)
        assert np.max(np.linalg.eigvals(gen.A).real) <= 1e-12

    def test_hamiltonian_matches_coefficients(self):
        """Test build_hamiltonian is sum_a J_a S_a."""
        params = ParameterSet.from_nonidentity(1, [0.5, -0.25, 2.0], [0, 0, 0])
        H = build_hamiltonian(params)
        expected = (
            0.5 * pauli_matrix(1) - 0.25 * pauli_matrix(2) + 2.0 * pauli_matrix(3)
        )
        np.testing.assert_allclose(H, expected)


class TestGeneratorFactory:
    """Tests for generator caching and validation."""

    def test_factory_is_shared(self, two_qubit_channels):
        """Test the same channel set reuses one factory."""
        assert generator_factory(two_qubit_channels) is generator_factory(
            two_qubit_channels
        )

    def test_factory_follows_contents(self):
        """Test equal channel sets share a factory and different ones do not."""

        def dephasing(name="z"):
            return ChannelSet(name=name, operators=(pauli_matrix(3),), labels=("z",))

        first, second = dephasing(), dephasing()
        assert first is not second
        assert generator_factory(first) is generator_factory(second)
        assert generator_factory(dephasing("other")) is not generator_factory(first)

    def test_factory_cache_is_bounded(self):
        """Test building many distinct channel sets keeps the cache bounded."""
        from pinnverse.dynamics import liouvillian

        for i in range(liouvillian.FACTORY_CACHE_SIZE + 5):
            channels = ChannelSet(
                name=f"bounded_{i}", operators=(pauli_matrix(3),), labels=("z",)
            )
            assert generator_factory(channels).channels is channels
        info = liouvillian._factory_for.cache_info()
        assert info.currsize <= liouvillian.FACTORY_CACHE_SIZE

    def test_cached_gradients_are_read_only(self, one_qubit_channels):
        """Test cached unit generators cannot be modified in place."""
        factory = GeneratorFactory(one_qubit_channels)
        with pytest.raises(ValueError):
            factory.gradients.dA_dJ[0, 0, 0] = 1.0

    def test_wrong_rate_count(self, two_qubit_channels):
        """Test parameters with the wrong number of rates are rejected."""
        params = ParameterSet(2, np.zeros(16), [0.1, 0.1])
        with pytest.raises(DimensionMismatchError):
            build_generator(params, two_qubit_channels)

    def test_basis_mismatch(self, one_qubit_params, one_qubit_channels):
        """Test a two-qubit basis cannot serve one-qubit parameters."""
        with pytest.raises(DimensionMismatchError):
            build_generator(
                one_qubit_params, one_qubit_channels, ObservableBasis.for_qubits(2)
            )

    def test_rhs_shape_check(self, one_qubit_params, one_qubit_channels):
        """Test rhs rejects a state of the wrong length."""
        gen = build_generator(one_qubit_params, one_qubit_channels)
        with pytest.raises(DimensionMismatchError):
            rhs(gen, np.zeros(15))
        np.testing.assert_allclose(rhs(gen, np.zeros(3)), gen.b)


class TestOracleEquivalence:
    """Tests that both integration paths produce the same trajectories."""

    def test_two_qubit_random_parameters(self, two_qubit_channels):
        """Test density-matrix and Pauli-basis evolution agree to 1e-8."""
        times = np.linspace(0.0, 1.0, 200)
        s0 = plus_plus_state(2).expectations(ObservableBasis.for_qubits(2))
        for seed in range(20):
            params = sample_random_parameters(2, seed=seed)
            oracle = evolve(plus_plus_state(2), params, two_qubit_channels, times)
            fast = evolve_pauli(build_generator(params, two_qubit_channels), s0, times)
            assert np.max(np.abs(oracle.values - fast.values)) < 1e-8

    def test_one_qubit(self, one_qubit_params, one_qubit_channels, one_qubit_data):
        """Test agreement for the finite-temperature single-qubit channels."""
        gen = build_generator(one_qubit_params, one_qubit_channels)
        fast = evolve_pauli(gen, one_qubit_data.initial_values, one_qubit_data.times)
        np.testing.assert_allclose(fast.values, one_qubit_data.values, atol=1e-8)

    def test_unitary_norm_conservation(self, two_qubit_channels):
        """Test a pure state keeps |s|^2 = 3 under unitary dynamics."""
        params = sample_random_parameters(2, seed=5)
        params.gamma[:] = 0.0
        s0 = plus_plus_state(2).expectations(ObservableBasis.for_qubits(2))
        traj = evolve_pauli(
            build_generator(params, two_qubit_channels), s0, np.linspace(0, 1, 50)
        )
        np.testing.assert_allclose(np.sum(traj.values**2, axis=0), 3.0, atol=1e-9)


class TestGeneratorDump:
    """Tests for write_generator_csv."""

    def test_csv_layout(self, tmp_path, one_qubit_params, one_qubit_channels):
        """Test the dump has one row per observable and a b column."""
        gen = build_generator(one_qubit_params, one_qubit_channels)
        path = write_generator_csv(gen, tmp_path / "gen.csv")
        frame = pd.read_csv(path, index_col="row")
        assert list(frame.index) == ["sx", "sy", "sz"]
        assert list(frame.columns) == ["sx", "sy", "sz", "b"]
        np.testing.assert_allclose(frame[["sx", "sy", "sz"]].to_numpy(), gen.A)
        np.testing.assert_allclose(frame["b"].to_numpy(), gen.b)
