import json
import re

import pytest

from ycd import __version__
from ycd.cli import main

REPRO = re.compile(r"^reproducibility: seed=(-|-?\d+) config-digest=sha256:[0-9a-f]{16}$")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out.splitlines(), captured.err.splitlines()


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    monkeypatch.delenv("YCD_MODEL", raising=False)
    monkeypatch.delenv("YCD_ADDR", raising=False)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset and trained bundle produced through the CLI itself."""
    root = tmp_path_factory.mktemp("cli_ws")
    data = root / "data"
    bundle = root / "model.ycdm"
    assert main([
        "synth", "--out", str(data), "--classes", "3", "--per-class", "6",
        "--resolution", "24", "--seed", "4",
    ]) == 0
    assert main([
        "train", "--data", str(data), "--out", str(bundle),
        "--alpha", "0.25", "--resolution", "24",
        "--epochs", "2", "--batch-size", "4", "--seed", "4",
    ]) == 0
    return {"root": root, "data": data, "bundle": bundle,
            "metrics": bundle.with_suffix(".metrics.csv")}


class TestReproducibilityLine:
    def test_printed_first_on_every_command(self, capsys, workspace):
        _, out, _ = run(capsys, "dataset-scan", "--root", str(workspace["data"]))
        assert REPRO.match(out[0]), out[0]

    def test_same_invocation_same_digest(self, capsys, workspace):
        _, a, _ = run(capsys, "dataset-scan", "--root", str(workspace["data"]))
        _, b, _ = run(capsys, "dataset-scan", "--root", str(workspace["data"]))
        assert a[0] == b[0]

    def test_seed_flag_changes_digest_and_is_echoed(self, capsys, workspace, tmp_path):
        _, a, _ = run(capsys, "dataset-split", "--root", str(workspace["data"]),
                      "--out", str(tmp_path / "m1.json"), "--seed", "1")
        _, b, _ = run(capsys, "dataset-split", "--root", str(workspace["data"]),
                      "--out", str(tmp_path / "m2.json"), "--seed", "2")
        assert a[0].startswith("reproducibility: seed=1 ")
        assert b[0].startswith("reproducibility: seed=2 ")
        assert a[0].split("config-digest=")[1] != b[0].split("config-digest=")[1]


class TestExitCodes:
    def test_usage_error_is_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["dataset-scan", "--no-such-flag"])
        assert exc.value.code == 2
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_runtime_error_is_1(self, capsys, tmp_path):
        code, _, err = run(capsys, "dataset-scan", "--root", str(tmp_path / "missing"))
        assert code == 1
        assert err[-1].startswith("error: ")

    def test_version_exits_0(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestDatasetCommands:
    def test_scan_reports_counts(self, capsys, workspace):
        code, out, _ = run(capsys, "dataset-scan", "--root", str(workspace["data"]))
        assert code == 0
        assert "classes: 3" in out
        assert "  100: 6 images" in out
        assert "total: 18 images" in out

    def test_split_writes_manifest(self, capsys, workspace, tmp_path):
        out_path = tmp_path / "manifest.json"
        code, out, _ = run(capsys, "dataset-split", "--root", str(workspace["data"]),
                           "--out", str(out_path), "--test-count", "2")
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert set(doc) == {"classes", "seed", "policy", "entries"}
        splits = [e["split"] for e in doc["entries"] if e["label"] == "100"]
        assert splits.count("test") == 2 and splits.count("train") == 4
        assert any("train=4 test=2" in line for line in out)

    def test_overwrite_guard_and_force(self, capsys, workspace, tmp_path):
        out_path = tmp_path / "manifest.json"
        args = ("dataset-split", "--root", str(workspace["data"]), "--out", str(out_path))
        assert run(capsys, *args)[0] == 0
        code, _, err = run(capsys, *args)
        assert code == 1
        assert "refusing to overwrite" in err[-1]
        assert run(capsys, *args, "--force")[0] == 0

    def test_synth_refuses_nonempty_directory(self, capsys, workspace):
        code, _, err = run(capsys, "synth", "--out", str(workspace["data"]),
                           "--classes", "2", "--per-class", "1", "--resolution", "16")
        assert code == 1
        assert "refusing to overwrite" in err[-1]


class TestTrain:
    def test_artifacts_written(self, workspace):
        assert workspace["bundle"].is_file()
        lines = workspace["metrics"].read_text().splitlines()
        assert lines[0] == "epoch,loss,train_acc,test_acc"
        assert len(lines) == 3  # 2 epochs

    def test_final_epoch_summary_printed(self, capsys, workspace, tmp_path):
        code, out, _ = run(
            capsys, "train", "--data", str(workspace["data"]),
            "--out", str(tmp_path / "b.ycdm"), "--alpha", "0.25",
            "--resolution", "24", "--epochs", "1", "--batch-size", "4",
        )
        assert code == 0
        assert any(line.startswith("epoch 1: loss=") for line in out)
        assert any("bundle written to" in line for line in out)
        assert any("metrics written to" in line for line in out)

    def test_existing_bundle_needs_force(self, capsys, workspace):
        code, _, err = run(
            capsys, "train", "--data", str(workspace["data"]),
            "--out", str(workspace["bundle"]), "--alpha", "0.25",
            "--resolution", "24", "--epochs", "1",
        )
        assert code == 1
        assert "refusing to overwrite" in err[-1]


class TestEval:
    def test_table_layout(self, capsys, workspace):
        code, out, _ = run(capsys, "eval", "--model", str(workspace["bundle"]),
                           "--data", str(workspace["data"]), "--seed", "4")
        assert code == 0
        assert "label        accuracy  samples" in out
        overall = [l for l in out if l.startswith("overall")]
        assert len(overall) == 1
        assert re.search(r"\d\.\d\d", overall[0])

    def test_json_report_out(self, capsys, workspace, tmp_path):
        report = tmp_path / "report.json"
        code, _, _ = run(capsys, "eval", "--model", str(workspace["bundle"]),
                         "--data", str(workspace["data"]), "--seed", "4",
                         "--out", str(report))
        assert code == 0
        doc = json.loads(report.read_text())
        assert len(doc["per_class"]) == 3

    def test_requires_data_or_manifest(self, capsys, workspace):
        code, _, err = run(capsys, "eval", "--model", str(workspace["bundle"]))
        assert code == 1
        assert "pass --data or --manifest" in err[-1]

    def test_missing_model_is_actionable(self, capsys, workspace):
        code, _, err = run(capsys, "eval", "--data", str(workspace["data"]))
        assert code == 1
        assert "YCD_MODEL" in err[-1]


class TestClassify:
    def test_ranked_output_with_latency(self, capsys, workspace):
        image = next((workspace["data"] / "100").glob("*.png"))
        code, out, _ = run(capsys, "classify", "--model", str(workspace["bundle"]),
                           "--image", str(image))
        assert code == 0
        body = out[1:]  # after the reproducibility line
        assert len(body) == 4  # 3 classes + latency
        probs = [float(line.split()[1]) for line in body[:3]]
        assert probs == sorted(probs, reverse=True)
        assert body[3].startswith("latency_ms:")

    def test_top_k(self, capsys, workspace):
        image = next((workspace["data"] / "100").glob("*.png"))
        code, out, _ = run(capsys, "classify", "--model", str(workspace["bundle"]),
                           "--image", str(image), "--top-k", "1")
        assert code == 0
        assert len(out[1:]) == 2


class TestInfo:
    @staticmethod
    def parse_table(out):
        rows = []
        for line in out:
            m = re.match(r"\s*(\d+)\s+(\w+)\s+.*?(\d+)\s+(\d+)$", line)
            if m:
                rows.append((int(m.group(1)), m.group(2), int(m.group(3)), int(m.group(4))))
        return rows

    def test_architecture_table(self, capsys):
        code, out, _ = run(capsys, "info", "--alpha", "1.0", "--resolution", "32")
        assert code == 0
        rows = self.parse_table(out)
        assert rows[0][1] == "standard_conv"
        assert "3x3/2 3->32" in out[4]
        total_macs = int(next(l for l in out if l.startswith("total macs:")).split()[-1])
        total_params = int(next(l for l in out if l.startswith("total params:")).split()[-1])
        assert total_macs == sum(r[2] for r in rows)
        assert total_params == sum(r[3] for r in rows)

    def test_width_multiplier_quarters_pointwise_macs(self, capsys):
        def pointwise_macs(alpha):
            _, out, _ = run(capsys, "info", "--alpha", alpha, "--resolution", "32")
            return [r[2] for r in self.parse_table(out) if r[1] == "pointwise_conv"]

        full = pointwise_macs("1.0")
        half = pointwise_macs("0.5")
        assert all(h * 4 == f for h, f in zip(half, full))

    def test_num_classes_appends_head_row(self, capsys):
        _, out, _ = run(capsys, "info", "--alpha", "0.25", "--resolution", "32",
                        "--num-classes", "3")
        rows = self.parse_table(out)
        assert rows[-1][1] == "dense"
        assert rows[-1][3] == 256 * 3 + 3

    def test_model_flag_reads_bundle(self, capsys, workspace):
        code, out, _ = run(capsys, "info", "--model", str(workspace["bundle"]))
        assert code == 0
        assert any(line.startswith("labels: 100, 250, 500") for line in out)
        assert "input resolution: 24" in out


class TestBench:
    def test_statistics_reported(self, capsys, workspace):
        code, out, _ = run(capsys, "bench", "--model", str(workspace["bundle"]),
                           "--iterations", "4")
        assert code == 0
        assert "iterations: 4 (after 5 warmup)" in out
        stats = {l.split(":")[0]: float(l.split(":")[1]) for l in out
                 if l.split(":")[0] in ("p50_ms", "p95_ms", "mean_ms")}
        assert stats["p50_ms"] <= stats["p95_ms"]
        assert stats["mean_ms"] > 0


class TestEnvFallback:
    def test_model_env_used_when_flag_absent(self, capsys, workspace, monkeypatch):
        monkeypatch.setenv("YCD_MODEL", str(workspace["bundle"]))
        code, out, _ = run(capsys, "eval", "--data", str(workspace["data"]),
                           "--seed", "4")
        assert code == 0

    def test_flag_beats_env(self, capsys, workspace, monkeypatch):
        monkeypatch.setenv("YCD_MODEL", "/nonexistent/bundle.ycdm")
        code, _, _ = run(capsys, "info", "--model", str(workspace["bundle"]))
        assert code == 0

    def test_bad_addr_rejected(self, capsys, workspace, monkeypatch):
        monkeypatch.setenv("YCD_ADDR", "no-port-here")
        code, _, err = run(capsys, "serve", "--model", str(workspace["bundle"]))
        assert code == 1
        assert "expected host:port" in err[-1]
