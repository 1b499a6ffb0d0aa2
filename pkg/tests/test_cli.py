import json

import pytest
from click.testing import CliRunner

from xlinker.cli import main
from xlinker.manifest import file_sha256


@pytest.fixture
def runner():
    return CliRunner()


def run_ok(runner, args):
    result = runner.invoke(main, args, catch_exceptions=False)
    assert result.exit_code == 0, result.output
    return result


def run_pipeline(runner, d, seed=5, epochs=6):
    run_ok(runner, ["synth", "--out", f"{d}/data", "--seed", str(seed),
                    "--n-entities", "25", "--n-mentions", "120",
                    "--languages", "aa", "--nil-rate", "0.1",
                    "--name-noise", "0.05", "--context-informativeness", "0.8",
                    "--partial-rate", "0"])
    run_ok(runner, ["build-prior", "--anchors", f"{d}/data/anchors.tsv",
                    "--out", f"{d}/data/prior.json"])
    run_ok(runner, ["triage", "--mentions", f"{d}/data/mentions-aa.jsonl",
                    "--kb", f"{d}/data/kb.jsonl", "--prior", f"{d}/data/prior.json",
                    "--out", f"{d}/data/cands.jsonl"])
    run_ok(runner, ["encode-test", "--mentions", f"{d}/data/mentions-aa.jsonl",
                    "--kb", f"{d}/data/kb.jsonl", "--out", f"{d}/data/store.bin",
                    "--dim", "32", "--seed", "7"])
    run_ok(runner, ["train", "--mentions", f"{d}/data/mentions-aa.jsonl",
                    "--kb", f"{d}/data/kb.jsonl",
                    "--candidates", f"{d}/data/cands.jsonl",
                    "--store", f"{d}/data/store.bin",
                    "--out", f"{d}/data/model.ckpt",
                    "--trace", f"{d}/data/trace.csv",
                    "--epochs", str(epochs), "--lr", "1e-3", "--dropout", "0.1",
                    "--vocab-min-count", "0", "--seed", "0"])
    run_ok(runner, ["predict", "--mentions", f"{d}/data/mentions-aa.jsonl",
                    "--kb", f"{d}/data/kb.jsonl",
                    "--candidates", f"{d}/data/cands.jsonl",
                    "--store", f"{d}/data/store.bin",
                    "--checkpoint", f"{d}/data/model.ckpt",
                    "--out", f"{d}/data/preds.jsonl", "--threshold", "-1"])
    return run_ok(runner, ["evaluate", "--predictions", f"{d}/data/preds.jsonl",
                           "--mentions", f"{d}/data/mentions-aa.jsonl",
                           "--kb", f"{d}/data/kb.jsonl"])


class TestPipeline:
    def test_smoke_path_completes(self, runner, tmp_path):
        result = run_pipeline(runner, str(tmp_path))
        payload = json.loads(result.output.splitlines()[0])
        assert 0.0 <= payload["f1"] <= 1.0
        assert "avg." in result.output

    def test_exit_codes(self, runner, tmp_path):
        r = runner.invoke(main, ["evaluate", "--predictions", "/missing.jsonl",
                                 "--mentions", "/missing.jsonl", "--kb", "/m.jsonl"])
        assert r.exit_code == 3
        assert "code=data" in r.output or "code=data" in (r.stderr or "")

        r = runner.invoke(main, ["synth", "--out", str(tmp_path / "x"),
                                 "--nil-rate", "1.5"])
        assert r.exit_code == 2

    def test_config_file_defaults(self, runner, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({
            "synth": {"n_entities": 21, "n_mentions": 60, "languages": ["aa"],
                      "doc_size": 6, "seed": 3}}))
        run_ok(runner, ["--config", str(cfg_path), "synth",
                        "--out", str(tmp_path / "d")])
        kb_lines = open(tmp_path / "d" / "kb.jsonl").read().splitlines()
        assert len(kb_lines) == 21

    def test_malformed_config_is_config_error(self, runner, tmp_path):
        cfg_path = tmp_path / "bad.json"
        cfg_path.write_text("{nope")
        r = runner.invoke(main, ["--config", str(cfg_path), "synth", "--out", "x"])
        assert r.exit_code == 2


class TestDeterminism:
    def test_rerun_bit_identical_artifacts(self, runner, tmp_path):
        d1, d2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        run_pipeline(runner, d1)
        run_pipeline(runner, d2)
        for name in ("data/kb.jsonl", "data/mentions-aa.jsonl", "data/anchors.tsv",
                     "data/prior.json", "data/cands.jsonl", "data/store.bin",
                     "data/model.ckpt", "data/trace.csv", "data/preds.jsonl"):
            assert file_sha256(f"{d1}/{name}") == file_sha256(f"{d2}/{name}"), name


class TestExperimentCommand:
    def test_grid_from_config(self, runner, tmp_path):
        cfg = {
            "experiment": {
                "synth": {"n_entities": 25, "n_mentions": 100,
                          "languages": ["aa", "bb"], "doc_size": 8, "seed": 9},
                "registry": {"dim": 32, "n_name_pairs": 0},
                "train": {"lr": 1e-3, "epochs": 3, "dropout": 0.0,
                          "layers": {"name": [16], "context": [12], "type": [6],
                                     "final": [12]}},
                "specs": [{"name": "mono", "train_languages": ["aa"],
                           "eval_languages": ["aa"], "seeds": [0]}],
            }
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        result = run_ok(runner, ["--config", str(cfg_path), "experiment",
                                 "--out", str(tmp_path / "exp")])
        payload = json.loads(result.output)
        assert "mono" in payload["means"]
        assert (tmp_path / "exp" / "experiments.csv").exists()
        assert (tmp_path / "exp" / "experiments.md").exists()

    def test_missing_specs_is_config_error(self, runner, tmp_path):
        r = runner.invoke(main, ["experiment", "--out", str(tmp_path)])
        assert r.exit_code == 2
