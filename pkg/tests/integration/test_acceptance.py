"""Full-scale identification runs; select with ``pytest -m slow``.

These take minutes to an hour on a laptop CPU. Worker processes follow
``os.cpu_count()``.
"""

import os

import numpy as np
import pytest

from pinnverse.core.models import TrainableMask, Trajectory, one_qubit_finite_t
from pinnverse.core.settings import ExperimentConfig
from pinnverse.dynamics.sampling import omega0
from pinnverse.experiments.scenarios import (
    run_crosstalk,
    run_single_qubit,
    run_sweep_collocation,
    run_sweep_noise,
)
from pinnverse.training.pinnverse import FitConfig, fit

pytestmark = [pytest.mark.slow, pytest.mark.integration]

JOBS = os.cpu_count() or 1


def _j_mean(summary, value, stat):
    frame = summary[(summary["value"] == value) & (summary["group"] == "J_mean")]
    return float(frame[stat].iloc[0])


class TestTwoQubitRecovery:
    """Tests for random two-qubit ground truths."""

    def test_noise_free_recovery(self, tmp_path):
        """Test five truths at N_c=50 give small coupling and rate errors."""
        config = ExperimentConfig(
            mode="sweep-collocation",
            out=tmp_path,
            n_c_grid=[50],
            realizations=5,
            restarts=8,
            sigma=0.0,
            jobs=JOBS,
            record_timing=False,
        )
        outcome = run_sweep_collocation(config)
        ok = outcome.results[outcome.results["status"] == "ok"]
        assert ok["mape"][ok["group"] == "J_mean"].mean() <= 0.05
        rates = ok[ok["group"].str.startswith("gamma_")]
        assert rates["mape"].mean() <= 0.02

    def test_collocation_trend(self, tmp_path):
        """Test coupling errors shrink as data collocation points are added."""
        grid = [5, 10, 20, 40]
        config = ExperimentConfig(
            mode="sweep-collocation",
            out=tmp_path,
            n_c_grid=grid,
            realizations=5,
            sigma=0.0,
            jobs=JOBS,
            record_timing=False,
        )
        summary = run_sweep_collocation(config).summary
        medians = [_j_mean(summary, n_c, "median") for n_c in grid]
        assert all(b <= a for a, b in zip(medians, medians[1:]))
        assert _j_mean(summary, 40, "mean") <= 5e-2

    def test_noise_trend(self, tmp_path):
        """Test noise at 0.02 raises coupling errors into the expected band."""
        config = ExperimentConfig(
            mode="sweep-noise",
            out=tmp_path,
            sigma_grid=[0.0, 0.02],
            realizations=5,
            jobs=JOBS,
            record_timing=False,
        )
        summary = run_sweep_noise(config).summary
        clean = _j_mean(summary, 0.0, "median")
        noisy = _j_mean(summary, 0.02, "median")
        assert noisy > clean
        assert 0.05 <= noisy <= 0.5
        rates = summary[(summary["value"] == 0.02) & (summary["group"] == "gamma_mean")]
        assert float(rates["mean"].iloc[0]) <= 0.08

    def test_crosstalk_reconstruction(self, tmp_path):
        """Test noisy crosstalk data are rebuilt to within one percent."""
        config = ExperimentConfig(
            mode="crosstalk", out=tmp_path, sigma=0.02, n_c=50, record_timing=False
        )
        outcome = run_crosstalk(config)
        assert outcome.metrics.mape["reconstruction"] <= 0.01
        report = outcome.report
        for k in range(report.truth.n_channels):
            exact = report.truth.gamma[k]
            assert abs(report.recovered.gamma[k] - exact) / exact <= 0.02


class TestSingleQubit:
    """Tests for the single-qubit device model."""

    def test_round_trip(self, tmp_path):
        """Test synthetic device data give back the sigma_y coupling and dephasing."""
        config = ExperimentConfig(
            mode="single-qubit", out=tmp_path, sigma=0.0, record_timing=False
        )
        outcome = run_single_qubit(config)
        truth, recovered = outcome.report.truth, outcome.report.recovered
        assert recovered.J[2] == pytest.approx(truth.J[2], rel=0.1)
        assert recovered.gamma[0] == pytest.approx(truth.gamma[0], rel=0.1)
        # third rate is below what 10 us of data can resolve
        assert np.isfinite(recovered.gamma[2])

    def test_frozen_dynamics(self):
        """Test a constant trajectory without decay gives vanishing couplings."""
        times = np.linspace(0.0, 1.0, 50)
        values = np.tile([[1.0], [0.0], [0.0]], (1, times.size))
        data = Trajectory(times, values, n_qubits=1)
        mask = TrainableMask([False, True, True, True], [False, False, False])
        config = FitConfig(
            n_t=100,
            n_c=50,
            max_steps=5000,
            restarts=2,
            hidden_layers=(32, 32),
            mask=mask,
            final_time=1.0,
            record_timing=False,
        )
        report = fit(data, one_qubit_finite_t(), config)
        assert np.all(np.abs(report.recovered.j_nonidentity) < 1e-2 * omega0(1.0))
