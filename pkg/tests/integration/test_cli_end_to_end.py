"""End-to-end runs of every subcommand at toy scale."""

import json
import logging

import pandas as pd
import pytest

from pinnverse.cli.main import EXIT_OK, main

pytestmark = pytest.mark.integration

TINY = [
    "--max-steps",
    "20",
    "--hidden-layers",
    "8,8",
    "--n-t",
    "10",
    "--n-c",
    "10",
    "--restarts",
    "1",
    "--log-every",
    "10",
    "--log-level",
    "WARNING",
]


@pytest.fixture(autouse=True)
def restore_logging():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


class TestCommands:
    """Tests for gen-data, fit, crosstalk, single-qubit and sweeps."""

    def test_gen_data_then_fit(self, tmp_path):
        """Test generated data and truth feed straight into fit."""
        data = tmp_path / "curves.csv"
        truth = tmp_path / "truth.json"
        code = main(
            [
                "gen-data",
                "--n-qubits",
                "1",
                "--n-samples",
                "21",
                "--final-time",
                "1",
                "--data",
                str(data),
                "--truth",
                str(truth),
                "--out",
                str(tmp_path),
            ]
        )
        assert code == EXIT_OK
        assert pd.read_csv(data).columns.tolist() == ["t", "sx", "sy", "sz"]

        code = main(
            [
                "fit",
                "--n-qubits",
                "1",
                "--data",
                str(data),
                "--truth",
                str(truth),
                "--out",
                str(tmp_path),
                "--no-timing",
                *TINY,
            ]
        )
        assert code == EXIT_OK
        directory = tmp_path / "fit"
        report = json.loads((directory / "report.json").read_text())
        assert report["n_qubits"] == 1
        assert "J_mean" in report["mape"]
        metrics = json.loads((directory / "metrics.json").read_text())
        assert set(metrics["mae"]) == {"sx", "sy", "sz"}
        assert (directory / "reconstruction.csv").exists()

    def test_crosstalk(self, tmp_path):
        """Test the crosstalk run marks two-body couplings in its table."""
        code = main(
            ["crosstalk", "--n-samples", "21", "--out", str(tmp_path), *TINY]
        )
        assert code == EXIT_OK
        directory = tmp_path / "crosstalk"
        parameters = pd.read_csv(directory / "parameters.csv")
        assert "two_body" in parameters.columns
        assert parameters["two_body"].sum() == 9
        assert len(parameters) == 19
        for name in ("data.csv", "clean.csv", "truth.json", "restarts.csv"):
            assert (directory / name).exists()

    def test_single_qubit_synthetic(self, tmp_path):
        """Test the synthetic device run writes reference curves and errors."""
        code = main(
            [
                "single-qubit",
                "--n-samples",
                "21",
                "--sigma",
                "0.01",
                "--out",
                str(tmp_path),
                *TINY,
            ]
        )
        assert code == EXIT_OK
        directory = tmp_path / "single-qubit"
        ae = pd.read_csv(directory / "ae.csv")
        assert "pinnverse_sx" in ae.columns
        assert "reference_sz" in ae.columns
        assert len(ae) == 21
        assert (directory / "reference.csv").exists()
        metrics = json.loads((directory / "metrics.json").read_text())
        assert metrics["reference"] is not None

    def test_single_qubit_device_csv(self, tmp_path):
        """Test a device CSV given positionally is fitted without a reference."""
        csv = tmp_path / "device.csv"
        rows = ["t,sx,sy,sz"] + [
            f"{0.5 * i},{1.0 - 0.01 * i},{0.02 * i},{-0.01 * i}" for i in range(21)
        ]
        csv.write_text("\n".join(rows) + "\n")
        code = main(
            ["single-qubit", str(csv), "--no-reference", "--out", str(tmp_path), *TINY]
        )
        assert code == EXIT_OK
        directory = tmp_path / "single-qubit"
        assert not (directory / "reference.csv").exists()
        report = json.loads((directory / "report.json").read_text())
        assert report["final_time"] == pytest.approx(10.0)

    def test_sweep_noise_in_worker_processes(self, tmp_path):
        """Test a two-process noise sweep writes one row per (job, group)."""
        code = main(
            [
                "sweep-noise",
                "--n-qubits",
                "1",
                "--final-time",
                "1",
                "--sigma-grid",
                "0,0.02",
                "--realizations",
                "1",
                "--jobs",
                "2",
                "--out",
                str(tmp_path),
                *TINY,
            ]
        )
        assert code == EXIT_OK
        directory = tmp_path / "sweep-noise"
        results = pd.read_csv(directory / "results.csv")
        assert len(results) == 4
        assert set(results["group"]) == {"J_mean", "gamma_mean"}
        summary = pd.read_csv(directory / "summary.csv")
        assert summary["n_ok"].sum() + summary["n_failed"].sum() == 4

    def test_dump_generator(self, tmp_path):
        """Test the recovered generator is written when asked."""
        code = main(
            [
                "crosstalk",
                "--n-samples",
                "11",
                "--dump-generator",
                "--out",
                str(tmp_path),
                *TINY,
            ]
        )
        assert code == EXIT_OK
        generator = pd.read_csv(tmp_path / "crosstalk" / "generator.csv")
        assert len(generator) == 15


class TestDeterminism:
    """Tests for bit-identical reruns."""

    def test_crosstalk_reports_identical(self, tmp_path):
        """Test two untimed runs with one seed give the same report.json."""
        reports = []
        for name in ("first", "second"):
            out = tmp_path / name
            code = main(
                [
                    "crosstalk",
                    "--n-samples",
                    "11",
                    "--seed",
                    "3",
                    "--no-timing",
                    "--out",
                    str(out),
                    *TINY,
                ]
            )
            assert code == EXIT_OK
            reports.append((out / "crosstalk" / "report.json").read_bytes())
        assert reports[0] == reports[1]
