"""End-to-end CLI tests through click's test runner.

A tiny synthetic dataset is written to tmp_path and every subcommand is run
over it; a second `report` run must reproduce byte-identical CSVs.
"""

import json

import numpy as np
import pytest
from click.testing import CliRunner

from quantens.cli import main

from conftest import make_expert, make_prices


CONFIG_YAML = """
data:
  experts:
    alpha: alpha.csv
    beta: beta.csv
    gamma: gamma.csv
  prices: prices.csv
ensembles:
  - name: Pool_qEns
    experts: [alpha, beta, gamma]
    averaging: qEns
  - name: Pool_CRPS
    experts: [alpha, beta, gamma]
    averaging: CRPS
alphas: [0.5, 0.7]
learner:
  lambda_grid: [0.5, 1, 2]
  n_basis: 12
evaluation:
  reference: Pool_qEns
output_dir: out
"""


@pytest.fixture()
def workspace(tmp_path):
    rng = np.random.default_rng(21)
    prices = make_prices(rng, 16)
    prices.to_csv(tmp_path / "prices.csv")
    for name, bias in (("alpha", 0.0), ("beta", 3.0), ("gamma", -2.0)):
        make_expert(rng, prices, name, bias=bias).to_csv(
            tmp_path / f"{name}.csv"
        )
    cfg = tmp_path / "run.yaml"
    cfg.write_text(CONFIG_YAML)
    return tmp_path, cfg


def invoke(*args):
    return CliRunner().invoke(main, list(args))


class TestCombine:
    def test_writes_panels(self, workspace):
        root, cfg = workspace
        result = invoke("combine", "--config", str(cfg))
        assert result.exit_code == 0, result.output + str(result.exception)
        panels = root / "out" / "panels"
        assert (panels / "Pool_qEns.csv").is_file()
        assert (panels / "Pool_CRPS.csv").is_file()
        assert (panels / "Pool_CRPS_lambda.csv").is_file()
        assert (panels / "Pool_CRPS_weights.npz").is_file()
        assert "Pool_qEns.csv" in result.output

    def test_out_override(self, workspace, tmp_path):
        root, cfg = workspace
        dest = tmp_path / "elsewhere"
        result = invoke("combine", "--config", str(cfg), "--out", str(dest))
        assert result.exit_code == 0
        assert (dest / "panels" / "Pool_qEns.csv").is_file()


class TestEvaluateAndTrade:
    def test_evaluate_after_combine(self, workspace):
        root, cfg = workspace
        assert invoke("combine", "--config", str(cfg)).exit_code == 0
        result = invoke("evaluate", "--config", str(cfg))
        assert result.exit_code == 0, result.output + str(result.exception)
        eval_dir = root / "out" / "evaluation"
        for name in ("metrics.csv", "pinball_curves.csv", "dm_matrix.csv"):
            assert (eval_dir / name).is_file()
        assert "crps" in result.output

    def test_evaluate_before_combine_fails(self, workspace):
        root, cfg = workspace
        result = invoke("evaluate", "--config", str(cfg))
        assert result.exit_code == 1
        payload = json.loads(result.stderr.strip().splitlines()[-1])
        assert "combine" in payload["message"]

    def test_trade(self, workspace):
        root, cfg = workspace
        assert invoke("combine", "--config", str(cfg)).exit_code == 0
        result = invoke("trade", "--config", str(cfg))
        assert result.exit_code == 0, result.output + str(result.exception)
        trade_dir = root / "out" / "trading"
        for name in ("total_profit.csv", "profit_per_trade.csv",
                     "cumulative_profit.csv"):
            assert (trade_dir / name).is_file()
        ledgers = sorted(p.name for p in (trade_dir / "ledgers").iterdir())
        assert "Pool_qEns_alpha50.csv" in ledgers
        assert "Pool_CRPS_alpha70.csv" in ledgers
        # benchmark rows present in the totals table
        totals = (trade_dir / "total_profit.csv").read_text()
        for row in ("crystal_ball", "worst_case", "naive_3_19"):
            assert row in totals

    def test_dm_matrix(self, workspace):
        root, cfg = workspace
        assert invoke("combine", "--config", str(cfg)).exit_code == 0
        result = invoke("dm-matrix", "--config", str(cfg))
        assert result.exit_code == 0
        assert (root / "out" / "evaluation" / "dm_matrix.csv").is_file()
        assert "Pool_qEns" in result.output


class TestReport:
    def test_full_report_and_determinism(self, workspace):
        root, cfg = workspace
        result = invoke("report", "--config", str(cfg))
        assert result.exit_code == 0, result.output + str(result.exception)
        out = root / "out"
        assert (out / "report" / "pinball_curves.svg").is_file()
        assert (out / "report" / "cumulative_profit.svg").is_file()

        tracked = sorted(p for p in out.rglob("*.csv"))
        assert tracked, "report produced no CSVs"
        before = {p: p.read_bytes() for p in tracked}
        result2 = invoke("report", "--config", str(cfg))
        assert result2.exit_code == 0
        after = {p: p.read_bytes() for p in sorted(out.rglob("*.csv"))}
        assert before == after, "re-running report changed CSV bytes"

    def test_no_ensembles_fails(self, workspace):
        root, cfg = workspace
        cfg.write_text(CONFIG_YAML.split("ensembles:")[0])
        result = invoke("report", "--config", str(cfg))
        assert result.exit_code == 1
        payload = json.loads(result.stderr.strip().splitlines()[-1])
        assert payload["error"] == "ValueError"


class TestErrorReporting:
    def test_missing_config_json_line(self, workspace, tmp_path):
        result = invoke("combine", "--config", str(tmp_path / "absent.yaml"))
        assert result.exit_code == 1
        lines = result.stderr.strip().splitlines()
        assert len(lines) == 1
        payload = json.loads(lines[0])
        assert payload["error"] == "ConfigError"
        assert "not found" in payload["message"]

    def test_malformed_csv_reported(self, workspace):
        root, cfg = workspace
        (root / "alpha.csv").write_text("date,hour,q01\n2020-01-01,0,1\n")
        result = invoke("combine", "--config", str(cfg))
        assert result.exit_code == 1
        payload = json.loads(result.stderr.strip().splitlines()[-1])
        assert payload["error"] == "SchemaError"

    def test_message_is_single_line(self, workspace):
        root, cfg = workspace
        (root / "prices.csv").write_text("date,hour,price\n")
        result = invoke("combine", "--config", str(cfg))
        assert result.exit_code == 1
        payload = json.loads(result.stderr.strip().splitlines()[-1])
        assert "\n" not in payload["message"]


class TestFetchData:
    def test_docs_only(self):
        result = invoke("fetch-data", "--docs-only")
        assert result.exit_code == 0
        assert "distributionalnn" in result.output
        assert "QUANTENS_DATA" in result.output

    def test_help_lists_commands(self):
        result = invoke("--help")
        assert result.exit_code == 0
        for cmd in ("fetch-data", "combine", "evaluate", "trade",
                    "dm-matrix", "report"):
            assert cmd in result.output
