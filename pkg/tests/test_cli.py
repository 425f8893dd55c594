"""End-to-end runs of the command line demos into temporary directories."""

import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from aghq.cli import main

SCHEMA_KEYS = {"mode", "lognormconst", "lognormconst_truth", "mean", "sd", "quantiles"}


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestConjugate:
    def test_artifacts_and_schema(self, tmp_path, capsys):
        assert run_cli("conjugate", "--out", tmp_path) == 0
        for name in (
            "conjugate_summary.json",
            "conjugate_pdf_cdf.csv",
            "conjugate_density.png",
        ):
            assert (tmp_path / name).exists()
        out = capsys.readouterr().out
        assert out.count("wrote ") == 3

        payload = json.loads((tmp_path / "conjugate_summary.json").read_text())
        assert SCHEMA_KEYS <= set(payload)
        assert payload["k"] == 3
        assert payload["n"] == 10
        # the summary must stand on its own: truth values ride along
        assert payload["lognormconst_abs_error"] <= 5e-3
        assert payload["mean"] == pytest.approx(payload["mean_truth"], rel=1e-3)
        assert set(payload["quantiles"]) == {"0.01", "0.025", "0.5", "0.975", "0.99"}

    def test_repeated_runs_are_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert run_cli("conjugate", "--rate-sweep", "--out", first) == 0
        assert run_cli("conjugate", "--rate-sweep", "--out", second) == 0
        names = [p.name for p in sorted(first.iterdir())]
        assert len(names) == 5
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_rate_sweep_error_is_monotone(self, tmp_path):
        assert run_cli("conjugate", "--rate-sweep", "--out", tmp_path) == 0
        sweep = pd.read_csv(tmp_path / "conjugate_rate_sweep.csv")
        assert list(sweep["k"]) == [1, 3, 5, 7]
        errors = sweep["abs_error"].to_numpy()
        assert np.all(np.diff(errors) <= 1e-12)

    def test_csv_summary_is_flat(self, tmp_path):
        assert run_cli("conjugate", "--format", "csv", "--out", tmp_path) == 0
        frame = pd.read_csv(tmp_path / "conjugate_summary.csv")
        assert len(frame) == 1
        assert "quantiles_0.5" in frame.columns
        assert "lognormconst" in frame.columns

    def test_pdf_cdf_table_has_transformed_columns(self, tmp_path):
        assert run_cli("conjugate", "--out", tmp_path) == 0
        table = pd.read_csv(tmp_path / "conjugate_pdf_cdf.csv")
        assert list(table.columns) == [
            "theta", "pdf", "cdf", "transparam", "pdf_transparam"
        ]
        assert np.all(np.diff(table["cdf"]) >= 0.0)


class TestGlmm:
    def test_artifacts_and_mixture(self, tmp_path):
        assert run_cli("glmm", "--out", tmp_path) == 0
        payload = json.loads((tmp_path / "glmm_summary.json").read_text())
        assert payload["groups"] == 5
        assert payload["lognormconst_truth"] is None
        assert sum(payload["lambda"]) == pytest.approx(1.0, abs=1e-10)
        assert "sigma_u_quantiles" in payload

        samples = pd.read_csv(tmp_path / "glmm_samples.csv")
        assert len(samples) == 10_000
        assert list(samples.columns) == ["theta1", "w1", "w2", "w3", "w4", "w5"]
        assert (tmp_path / "glmm_u1_hist.png").exists()

    def test_oracle_agrees_with_dense_grid(self, tmp_path):
        assert run_cli("glmm", "--oracle", "--out", tmp_path) == 0
        payload = json.loads((tmp_path / "glmm_summary.json").read_text())
        assert payload["k"] == 7
        assert payload["groups"] == 2
        assert payload["oracle_rel_error"] <= 1e-3
        assert payload["lognormconst"] == pytest.approx(
            payload["lognormconst_oracle"], rel=1e-3
        )


class TestGaussianCheck:
    def test_all_cases_at_machine_precision(self, tmp_path, capsys):
        assert run_cli("gaussian-check", "--out", tmp_path) == 0
        table = pd.read_csv(tmp_path / "gaussian_check.csv")
        assert len(table) == 12
        assert set(table["d"]) == {1, 2, 3, 4}
        assert set(table["k"]) == {1, 3, 5}
        assert table["abs_error"].max() <= 1e-10
        assert "passed" in capsys.readouterr().out


class TestArgumentHandling:
    def test_invalid_node_count_is_a_usage_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli("conjugate", "--k", 0, "--out", tmp_path)
        assert excinfo.value.code == 2
        capsys.readouterr()

    def test_missing_subcommand_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run_cli()
        assert excinfo.value.code == 2
        capsys.readouterr()

    def test_unwritable_output_directory(self, tmp_path, capsys):
        blocked = tmp_path / "blocked"
        blocked.write_text("a file, not a directory\n")
        assert run_cli("conjugate", "--out", blocked) == 1
        assert "cannot write outputs" in capsys.readouterr().err

    def test_explicit_k_survives_oracle_default(self, tmp_path):
        assert run_cli("glmm", "--oracle", "--k", 5, "--out", tmp_path) == 0
        payload = json.loads((tmp_path / "glmm_summary.json").read_text())
        assert payload["k"] == 5


class TestModuleEntryPoint:
    def test_python_dash_m_invocation(self, tmp_path):
        result = subprocess.run(
            [sys.executable, "-m", "aghq", "conjugate", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
            timeout=120,
        )
        assert result.returncode == 0
        assert result.stdout.count("wrote ") == 3
        assert (tmp_path / "conjugate_summary.json").exists()
