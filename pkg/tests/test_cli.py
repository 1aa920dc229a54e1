"""Tests for the command-line interface."""

import json
from pathlib import Path
from unittest.mock import patch

import pytest

from eureka.cli import build_parser, main
from eureka.exceptions import TransportError

from .common import OCCUPANCY_HEADER, write_table


def _write_config(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _run_dir(capsys):
    return Path(capsys.readouterr().out.strip().splitlines()[-1])


class TestParser:
    """Test argument parsing."""

    def test_rank_options(self):
        """Test the rank subcommand flags."""
        args = build_parser().parse_args(
            ["--config", "c.toml", "--seed", "4", "rank", "--method", "active"]
        )

        assert args.command == "rank"
        assert args.method == "active"
        assert args.seed == 4
        assert args.symmetrize is None

    def test_sweep_requires_ranking(self):
        """Test that sweep needs a ranking file."""
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["--config", "c.toml", "sweep"])

        assert excinfo.value.code == 2

    def test_stability_default_method(self):
        """Test the stability default."""
        args = build_parser().parse_args(["--config", "c.toml", "stability"])

        assert args.rank_method == "pairwise"

    def test_version(self, capsys):
        """Test --version."""
        with pytest.raises(SystemExit) as excinfo:
            build_parser().parse_args(["--version"])

        assert excinfo.value.code == 0
        assert "1.0.0" in capsys.readouterr().out


class TestMain:
    """Test end-to-end command runs and exit codes."""

    def test_rank(self, config_file, capsys):
        """Test a successful rank run."""
        code = main(["--config", str(config_file), "rank"])

        assert code == 0
        ranking = json.loads((_run_dir(capsys) / "ranking.json").read_text())
        assert ranking["ranking"] == ["Weekday", "Noise", "Light"]

    def test_rank_direct(self, config_file, capsys):
        """Test the one-prompt ranking flag."""
        assert main(["--config", str(config_file), "rank", "--method", "direct"]) == 0

        ranking = json.loads((_run_dir(capsys) / "ranking.json").read_text())
        assert ranking["method"] == "direct"

    def test_overrides(self, config_file, tmp_path, capsys):
        """Test --seed and --out."""
        out = tmp_path / "elsewhere"

        code = main(
            ["--config", str(config_file), "--seed", "9", "--out", str(out), "rank"]
        )

        assert code == 0
        run_dir = _run_dir(capsys)
        assert run_dir.parent == out
        resolved = json.loads((run_dir / "config.resolved.json").read_text())
        assert resolved["seed"] == 9

    def test_rank_then_sweep(self, config_file, capsys):
        """Test chaining rank and sweep."""
        main(["--config", str(config_file), "rank"])
        ranking_path = _run_dir(capsys) / "ranking.json"

        code = main(
            ["--config", str(config_file), "sweep", "--ranking", str(ranking_path)]
        )

        assert code == 0
        output = capsys.readouterr().out
        assert "K' = 3" in output

    def test_baselines_and_benchmarks(self, config_file, capsys):
        """Test the remaining commands."""
        assert main(["--config", str(config_file), "baselines"]) == 0
        assert (_run_dir(capsys) / "baselines.csv").exists()
        assert main(["--config", str(config_file), "rankbench"]) == 0
        assert (_run_dir(capsys) / "rankbench.csv").exists()
        assert main(["--config", str(config_file), "stability"]) == 0
        assert (_run_dir(capsys) / "stability_summary.json").exists()

    def test_missing_credential_exit_code(self, config_doc, tmp_path, monkeypatch):
        """Test that a missing API key exits with the config error code."""
        monkeypatch.delenv("EUREKA_TEST_KEY", raising=False)
        config_doc["judge"] = {
            "mode": "live",
            "endpoint": "https://api.example.com/v1/chat/completions",
            "api_key_env": "EUREKA_TEST_KEY",
        }
        path = _write_config(tmp_path / "live.json", config_doc)

        assert main(["--config", path, "rank"]) == 2

    def test_invalid_config_exit_code(self, tmp_path):
        """Test that a bad config document exits with code 2."""
        path = _write_config(tmp_path / "bad.json", {"data": {}})

        assert main(["--config", path, "rank"]) == 2

    def test_data_error_exit_code(self, config_doc, tmp_path):
        """Test that a malformed CSV exits with the data error code."""
        bad = tmp_path / "bad.csv"
        write_table(bad, OCCUPANCY_HEADER, [["2015", "1.0", "0.1", "Mon"]])
        config_doc["data"]["path"] = str(bad)
        path = _write_config(tmp_path / "bad-data.json", config_doc)

        assert main(["--config", path, "rank"]) == 3

    def test_judge_error_exit_code(
        self, config_doc, tmp_path, monkeypatch, mock_client
    ):
        """Test that an unreachable judge exits with the judge error code."""
        monkeypatch.setenv("EUREKA_TEST_KEY", "sk-test-secret")
        config_doc["judge"] = {
            "mode": "live",
            "endpoint": "https://api.example.com/v1/chat/completions",
            "api_key_env": "EUREKA_TEST_KEY",
            "max_attempts": 1,
        }
        mock_client.complete.side_effect = TransportError("connection refused")
        path = _write_config(tmp_path / "live.json", config_doc)

        with patch("eureka.runner.ChatClient", return_value=mock_client):
            code = main(["--config", path, "rank"])

        assert code == 4
        mock_client.close.assert_called_once()

    def test_single_feature_dataset_exit_code(self, config_doc, tmp_path):
        """Test that ranking a one-feature dataset is a data error."""
        single = tmp_path / "single.csv"
        write_table(
            single,
            ["Light", "Occupancy"],
            [[float(i), i % 2] for i in range(10)],
        )
        config_doc["data"] = {"path": str(single)}
        path = _write_config(tmp_path / "single.json", config_doc)

        assert main(["--config", path, "rank"]) == 3
        assert main(["--config", path, "stability"]) == 3

    def test_degenerate_dominance_exit_code(self, config_doc, tmp_path):
        """Test that a dominance order without two distinct names is rejected."""
        config_doc["judge"]["dominance"] = ["Light", "Light"]
        path = _write_config(tmp_path / "dup.json", config_doc)

        assert main(["--config", path, "rank"]) == 2

    def test_precondition_errors_map_to_data_code(self, config_file):
        """Test that a ValueError from the numeric core never escapes main."""
        with patch(
            "eureka.runner.borda_count",
            side_effect=ValueError("Borda counting needs at least one comparison"),
        ):
            assert main(["--config", str(config_file), "rank"]) == 3
