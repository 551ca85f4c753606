"""Tests for the command-line interface."""

import csv
import json

import numpy as np
import pytest

import cli
from src.utils.file_io import FileIO


def run(argv):
    """Run the CLI and return its exit code (0 when it returns normally)."""
    try:
        cli.main(argv)
    except SystemExit as e:
        return e.code
    return 0


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def data_dir(tmp_path):
    out = tmp_path / "data"
    assert run(["-q", "gen", "--task", "bandlimited", "--grid", "8", "--count", "4", "--out", str(out)]) == 0
    return out


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps({
        "width": 4, "blocks": 1, "modes": [4, 3], "epochs": 2, "batch_size": 2, "lr": 0.01,
    }))
    return path


@pytest.fixture
def run_dir(tmp_path, data_dir, small_config):
    out = tmp_path / "run"
    code = run(["-q", "train", "--config", str(small_config), "--data", str(data_dir / "dataset.bin"),
                "--out", str(out)])
    assert code == 0
    return out


class TestGen:
    """Tests for the gen command."""

    def test_writes_dataset_and_config(self, data_dir, capsys):
        dataset = FileIO.load_dataset(str(data_dir / "dataset.bin"))
        assert len(dataset) == 4
        assert dataset.grid.shape == (8, 8)
        config = json.loads((data_dir / "config.json").read_text())
        assert config["command"] == "gen"
        assert config["merged"]["task"] == "bandlimited"

    def test_parabola(self, tmp_path, capsys):
        out = tmp_path / "parabola"
        assert run(["gen", "--task", "parabola", "--grid", "9", "--channels", "2", "--out", str(out)]) == 0
        assert "1 parabola sample(s)" in capsys.readouterr().out
        assert FileIO.load_dataset(str(out / "dataset.bin")).inputs.shape == (1, 2, 81)

    def test_missing_out_is_a_usage_error(self):
        assert run(["gen", "--task", "darcy"]) == 2

    def test_unknown_task_is_a_usage_error(self, tmp_path):
        assert run(["gen", "--task", "heat", "--out", str(tmp_path)]) == 2


class TestTrain:
    """Tests for the train command."""

    def test_writes_metrics_and_checkpoint(self, run_dir):
        rows = read_csv(run_dir / "metrics.csv")
        assert rows[0] == ["epoch", "lr", "train_loss", "val_rel_l2"]
        assert [r[0] for r in rows[1:]] == ["0", "1"]
        config, params, header = FileIO.load_checkpoint(str(run_dir / "checkpoint.bin"))
        assert config.width == 4
        assert header["epoch"] == 1
        merged = json.loads((run_dir / "config.json").read_text())["merged"]
        assert merged["epochs"] == 2

    def test_flags_override_config(self, tmp_path, data_dir, small_config):
        out = tmp_path / "override"
        assert run(["-q", "train", "--config", str(small_config), "--data", str(data_dir / "dataset.bin"),
                    "--out", str(out), "--epochs", "1"]) == 0
        assert len(read_csv(out / "metrics.csv")) == 2

    def test_threshold_failure(self, tmp_path, data_dir, small_config):
        out = tmp_path / "strict"
        code = run(["-q", "train", "--config", str(small_config), "--data", str(data_dir / "dataset.bin"),
                    "--out", str(out), "--epochs", "1", "--max-rel-l2", "0"])
        assert code == 1

    def test_missing_data(self, tmp_path, small_config):
        code = run(["train", "--config", str(small_config), "--data", str(tmp_path / "none.bin"),
                    "--out", str(tmp_path / "run")])
        assert code == 2

    def test_channel_mismatch(self, tmp_path, data_dir):
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"in_channels": 3, "modes": [4, 3], "epochs": 1}))
        code = run(["train", "--config", str(config), "--data", str(data_dir / "dataset.bin"),
                    "--out", str(tmp_path / "run")])
        assert code == 2

    def test_modes_too_large_for_grid(self, tmp_path, data_dir):
        config = tmp_path / "big.json"
        config.write_text(json.dumps({"width": 2, "blocks": 1, "modes": [12, 6], "epochs": 1}))
        code = run(["train", "--config", str(config), "--data", str(data_dir / "dataset.bin"),
                    "--out", str(tmp_path / "run")])
        assert code == 2

    def test_records_data_and_threshold(self, tmp_path, data_dir, small_config):
        out = tmp_path / "recorded"
        assert run(["-q", "train", "--config", str(small_config), "--data", str(data_dir / "dataset.bin"),
                    "--out", str(out), "--epochs", "1", "--max-rel-l2", "1000"]) == 0
        merged = json.loads((out / "config.json").read_text())["merged"]
        assert merged["data"] == str(data_dir / "dataset.bin")
        assert merged["max_rel_l2"] == 1000
        assert merged["in_channels"] == 1

    def test_rerun_from_written_config(self, tmp_path, run_dir):
        out = tmp_path / "rerun"
        assert run(["-q", "train", "--config", str(run_dir / "config.json"), "--out", str(out)]) == 0
        config, params, _ = FileIO.load_checkpoint(str(run_dir / "checkpoint.bin"))
        again, params_again, _ = FileIO.load_checkpoint(str(out / "checkpoint.bin"))
        assert again == config
        assert params.keys() == params_again.keys()
        for name in params:
            assert np.array_equal(params[name], params_again[name])
        assert read_csv(out / "metrics.csv") == read_csv(run_dir / "metrics.csv")

    def test_rerun_from_other_command_is_a_usage_error(self, tmp_path, data_dir):
        code = run(["train", "--config", str(data_dir / "config.json"), "--out", str(tmp_path / "run")])
        assert code == 2

    def test_unknown_config_key(self, tmp_path, data_dir):
        config = tmp_path / "typo.json"
        config.write_text(json.dumps({"widht": 4, "modes": [4, 3], "epochs": 1}))
        code = run(["train", "--config", str(config), "--data", str(data_dir / "dataset.bin"),
                    "--out", str(tmp_path / "run")])
        assert code == 2

    def test_missing_data_everywhere(self, tmp_path, small_config):
        assert run(["train", "--config", str(small_config), "--out", str(tmp_path / "run")]) == 2


class TestEval:
    """Tests for the eval command."""

    def test_reports_relative_error(self, run_dir, data_dir, capsys):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin")])
        assert code == 0
        assert "Relative L2 at (8, 8):" in capsys.readouterr().out

    def test_resolution_transfer(self, tmp_path, run_dir, data_dir):
        out = tmp_path / "eval"
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--resolution", "2x", "--out", str(out)])
        assert code == 0
        rows = read_csv(out / "eval.csv")
        assert rows[0] == ["model", "resolution", "rel_l2"]
        assert [r[:2] for r in rows[1:]] == [["checkpoint", "(8, 8)"], ["checkpoint", "(16, 16)"]]

    def test_bad_resolution(self, run_dir, data_dir):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--resolution", "fine"])
        assert code == 2

    def test_threshold_failure(self, run_dir, data_dir):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--max-rel-l2", "0"])
        assert code == 1

    def test_dataset_is_not_a_checkpoint(self, data_dir):
        code = run(["eval", "--checkpoint", str(data_dir / "dataset.bin"), "--data", str(data_dir / "dataset.bin")])
        assert code == 2

    def test_transfer_ratio(self, run_dir, data_dir, capsys):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--resolution", "2x", "--max-transfer-ratio", "1000"])
        assert code == 0
        assert "Transfer ratio (16, 16) / (8, 8):" in capsys.readouterr().out

    def test_transfer_ratio_failure(self, run_dir, data_dir, capsys):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--resolution", "2x", "--max-transfer-ratio", "0"])
        assert code == 1
        assert "FAIL transfer ratio" in capsys.readouterr().out

    def test_transfer_ratio_needs_resolution(self, run_dir, data_dir):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--max-transfer-ratio", "3"])
        assert code == 2

    def test_baseline_ratio(self, tmp_path, run_dir, data_dir, capsys):
        out = tmp_path / "eval"
        checkpoint = str(run_dir / "checkpoint.bin")
        code = run(["eval", "--checkpoint", checkpoint, "--data", str(data_dir / "dataset.bin"),
                    "--baseline", checkpoint, "--max-baseline-ratio", "1", "--out", str(out)])
        assert code == 0
        assert "Baseline ratio at (8, 8): 1.0000" in capsys.readouterr().out
        rows = read_csv(out / "eval.csv")
        assert [r[0] for r in rows[1:]] == ["checkpoint", "baseline"]
        assert rows[1][2] == rows[2][2]

    def test_baseline_ratio_failure(self, run_dir, data_dir):
        checkpoint = str(run_dir / "checkpoint.bin")
        code = run(["eval", "--checkpoint", checkpoint, "--data", str(data_dir / "dataset.bin"),
                    "--baseline", checkpoint, "--max-baseline-ratio", "0.5"])
        assert code == 1

    def test_baseline_ratio_needs_baseline(self, run_dir, data_dir):
        code = run(["eval", "--checkpoint", str(run_dir / "checkpoint.bin"), "--data", str(data_dir / "dataset.bin"),
                    "--max-baseline-ratio", "0.5"])
        assert code == 2


class TestVerify:
    """Tests for the verify command."""

    def test_disco_equivalence(self, tmp_path, capsys):
        code = run(["-q", "verify", "--suite", "disco-equivalence", "--out", str(tmp_path)])
        output = capsys.readouterr().out
        assert code == 0
        assert "PASS circulant-shifts" in output
        assert "FAIL" not in output
        rows = read_csv(tmp_path / "verify_disco-equivalence.csv")
        assert rows[0] == ["m", "quantity", "value"]

    def test_unknown_suite(self, tmp_path):
        assert run(["verify", "--suite", "everything", "--out", str(tmp_path)]) == 2

    def test_max_entries_only_for_gradcheck(self, tmp_path):
        code = run(["verify", "--suite", "collapse", "--max-entries", "3", "--out", str(tmp_path)])
        assert code == 2

    def test_negative_max_entries(self, tmp_path):
        code = run(["verify", "--suite", "gradcheck", "--max-entries", "-1", "--out", str(tmp_path)])
        assert code == 2
