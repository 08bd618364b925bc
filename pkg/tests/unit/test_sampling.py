"""Tests for random ground truths and the noise model."""

import numpy as np
import pytest

from pinnverse.core.models import TrainableMask, Trajectory
from pinnverse.dynamics.sampling import (
    add_gaussian_noise,
    make_rng,
    omega0,
    sample_random_parameters,
)


class TestRandomParameters:
    """Tests for sample_random_parameters."""

    def test_ranges(self):
        """Test J lies in [-w0, w0] and rates in [0, w0]."""
        w0 = omega0(1.0)
        for seed in range(10):
            params = sample_random_parameters(2, seed=seed)
            assert params.J[0] == 0.0
            assert np.all(np.abs(params.J) <= w0)
            assert np.all((params.gamma >= 0) & (params.gamma <= w0))

    def test_deterministic(self):
        """Test the same seed gives the same parameters."""
        a = sample_random_parameters(2, seed=42)
        b = sample_random_parameters(2, seed=42)
        np.testing.assert_array_equal(a.vector(), b.vector())

    def test_mask_zeroes_entries(self):
        """Test masked entries are zero and unmasked ones match the full draw."""
        mask = TrainableMask.j_off(2, 4)
        masked = sample_random_parameters(2, seed=9, mask=mask)
        full = sample_random_parameters(2, seed=9)
        np.testing.assert_array_equal(masked.J, 0.0)
        np.testing.assert_array_equal(masked.gamma, full.gamma)

    def test_window_scales_range(self):
        """Test a longer window shrinks the frequency unit."""
        params = sample_random_parameters(1, seed=0, final_time=10.0)
        assert np.all(np.abs(params.J) <= omega0(10.0))
        assert params.n_channels == 3

    def test_mask_mismatch(self):
        """Test a mask for the wrong qubit count is rejected."""
        with pytest.raises(ValueError):
            sample_random_parameters(2, seed=0, mask=TrainableMask.all(1, 3))

    def test_draws_are_uniform(self):
        """Test 10^4 seeds fill [-w0, w0] and [0, w0] evenly."""
        w0 = omega0(1.0)
        draws = [sample_random_parameters(2, seed=seed) for seed in range(10_000)]
        couplings = (np.array([p.J[1] for p in draws]) + w0) / (2 * w0)
        rates = np.array([p.gamma[0] for p in draws]) / w0
        for u in (couplings, rates):
            assert u.min() >= 0.0 and u.max() <= 1.0
            assert u.mean() == pytest.approx(0.5, abs=0.012)
            assert u.var() == pytest.approx(1 / 12, abs=0.004)
            counts, _ = np.histogram(u, bins=10, range=(0.0, 1.0))
            # chi-square with 9 degrees of freedom stays below 27.9 in 99.9% of runs
            chi2 = float(np.sum((counts - 1000) ** 2) / 1000)
            assert chi2 < 27.9

    def test_omega0_requires_positive_window(self):
        """Test nonpositive windows are rejected."""
        assert omega0(1.0) == pytest.approx(2 * np.pi)
        with pytest.raises(ValueError):
            omega0(-1.0)


class TestNoise:
    """Tests for add_gaussian_noise."""

    @pytest.fixture
    def flat_trajectory(self):
        """Zero trajectory with many samples."""
        return Trajectory(np.linspace(0, 1, 2000), np.zeros((15, 2000)), 2)

    def test_zero_sigma_copies(self, flat_trajectory):
        """Test sigma=0 returns an equal copy."""
        noisy = add_gaussian_noise(flat_trajectory, 0.0, seed=1)
        assert noisy is not flat_trajectory
        np.testing.assert_array_equal(noisy.values, flat_trajectory.values)

    def test_statistics(self, flat_trajectory):
        """Test the added noise has zero mean and the requested spread."""
        noisy = add_gaussian_noise(flat_trajectory, 0.02, seed=1)
        assert abs(noisy.values.mean()) < 1e-3
        assert noisy.values.std() == pytest.approx(0.02, rel=0.02)
        np.testing.assert_array_equal(flat_trajectory.values, 0.0)

    def test_initial_sample_is_noisy(self, flat_trajectory):
        """Test t=0 receives noise as well."""
        noisy = add_gaussian_noise(flat_trajectory, 0.01, seed=2)
        assert np.any(noisy.values[:, 0] != 0.0)

    def test_reproducible(self, flat_trajectory):
        """Test the same seed gives the same noise."""
        a = add_gaussian_noise(flat_trajectory, 0.01, seed=3)
        b = add_gaussian_noise(flat_trajectory, 0.01, seed=3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_negative_sigma(self, flat_trajectory):
        """Test negative noise levels are rejected."""
        with pytest.raises(ValueError):
            add_gaussian_noise(flat_trajectory, -0.1, seed=0)

    def test_make_rng(self):
        """Test generators from one seed produce identical streams."""
        assert make_rng(5).random() == make_rng(5).random()
