import json

import pytest

from advspan.cli import main
from advspan.corpus import parse_dataset
from advspan.model_client import MockModelConfig, MockServer

from conftest import synthetic_corpus
from advspan.corpus import serialize_dataset


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.json"
    path.write_bytes(serialize_dataset(synthetic_corpus(4)))
    return path


@pytest.fixture
def live_mock():
    config = MockModelConfig(
        rules=tuple((a, a) for a in
                    ("Zephyrus", "Oakhollow", "Brightwater", "Stormvale",
                     "Irongate")),
        sharpness=1.0)
    with MockServer(config) as server:
        yield server


class TestPerturbCommand:
    def test_char_variant_written(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "out.json"
        code = main(["perturb", "--type", "char", "--amount", "full",
                     "--seed", "3", "--in", str(corpus_file),
                     "--out", str(out)])
        assert code == 0
        variant = parse_dataset(out.read_bytes())
        assert all(qa.is_perturbed for _, p in variant.paragraphs()
                   for qa in p.qas)

    def test_missing_embeddings_is_config_error(self, corpus_file, tmp_path):
        code = main(["perturb", "--type", "word", "--in", str(corpus_file),
                     "--out", str(tmp_path / "x.json")])
        assert code == 2

    def test_missing_input_is_config_error(self, tmp_path):
        code = main(["perturb", "--type", "char", "--in",
                     str(tmp_path / "absent.json"),
                     "--out", str(tmp_path / "x.json")])
        assert code == 2


class TestEvaluateCommand:
    def test_records_written(self, corpus_file, tmp_path, live_mock):
        out = tmp_path / "eval.jsonl"
        code = main(["evaluate", "--in", str(corpus_file),
                     "--endpoint", live_mock.endpoint,
                     "--amount", "none", "--out", str(out)])
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert len(lines) == 4
        assert all(line["em"] == 1 for line in lines)

    def test_endpoint_env_var(self, corpus_file, tmp_path, live_mock,
                              monkeypatch):
        monkeypatch.setenv("ADVSPAN_ENDPOINT", live_mock.endpoint)
        out = tmp_path / "eval.jsonl"
        assert main(["evaluate", "--in", str(corpus_file),
                     "--out", str(out)]) == 0

    def test_no_endpoint_is_config_error(self, corpus_file, tmp_path,
                                         monkeypatch):
        monkeypatch.delenv("ADVSPAN_ENDPOINT", raising=False)
        assert main(["evaluate", "--in", str(corpus_file),
                     "--out", str(tmp_path / "x")]) == 2


class TestEnsembleCommand:
    def test_three_identical_runs(self, corpus_file, tmp_path, live_mock):
        run = tmp_path / "run.jsonl"
        main(["evaluate", "--in", str(corpus_file), "--endpoint",
              live_mock.endpoint, "--out", str(run)])
        out = tmp_path / "ens.jsonl"
        code = main(["ensemble", "--none", str(run), "--half", str(run),
                     "--full", str(run), "--out", str(out)])
        assert code == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        assert all(line["training_amount"] == "ens" for line in lines)
        assert all(line["em"] == 1 for line in lines)

    def test_disjoint_ids_fail_validation(self, corpus_file, tmp_path,
                                          live_mock):
        run = tmp_path / "run.jsonl"
        main(["evaluate", "--in", str(corpus_file), "--endpoint",
              live_mock.endpoint, "--out", str(run)])
        other = tmp_path / "other.jsonl"
        records = [json.loads(l) for l in run.read_text().splitlines()]
        for r in records:
            r["qa_id"] = "zzz-" + r["qa_id"]
        other.write_text("".join(json.dumps(r) + "\n" for r in records))
        code = main(["ensemble", "--none", str(run), "--half", str(run),
                     "--full", str(other), "--out", str(tmp_path / "e")])
        assert code == 2


class TestFeatureAndReportCommands:
    def test_features_then_report(self, corpus_file, tmp_path, live_mock):
        run = tmp_path / "run.jsonl"
        main(["evaluate", "--in", str(corpus_file), "--endpoint",
              live_mock.endpoint, "--out", str(run)])
        feats = tmp_path / "features.jsonl"
        assert main(["features", "--records", str(run), "--dataset",
                     str(corpus_file), "--out", str(feats)]) == 0
        report_dir = tmp_path / "reports"
        assert main(["report", "--records", str(run), "--features",
                     str(feats), "--out-dir", str(report_dir)]) == 0
        names = {p.name for p in report_dir.iterdir()}
        assert "error_heatmap.csv" in names
        assert "error_heatmap.svg" in names
        assert "readability_medians.json" in names

    def test_predict_errors_roundtrip(self, tmp_path):
        from test_errmodel import synthetic_rows
        rows = synthetic_rows(120, seed=3, noise=0.1)
        feats = tmp_path / "f.jsonl"
        feats.write_text("".join(json.dumps(r.to_dict()) + "\n" for r in rows))
        out = tmp_path / "cv.json"
        assert main(["predict-errors", "--features", str(feats),
                     "--folds", "10", "--seed", "5", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["meta"]["seed"] == 5
        assert len(doc["fold_scores"]) == 10


class TestPipeline:
    def _config(self, tmp_path, corpus_file, endpoint, out_name):
        config = {
            "dataset": str(corpus_file),
            "perturbation": {"type": "char", "rate": 0.25},
            "seed": 11,
            "endpoint": endpoint,
            "out_dir": str(tmp_path / out_name),
            "amounts": ["none", "half", "full", "both"],
        }
        path = tmp_path / f"{out_name}.config.json"
        path.write_text(json.dumps(config))
        return path

    def test_full_pipeline_artifact_tree(self, corpus_file, tmp_path,
                                         live_mock):
        cfg = self._config(tmp_path, corpus_file, live_mock.endpoint, "run1")
        assert main(["pipeline", "--config", str(cfg)]) == 0
        out = tmp_path / "run1"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 11
        assert manifest["config_hash"]
        for name in ("variants/char_full.json", "eval/none.jsonl",
                     "eval/ens.jsonl", "reports/error_heatmap.csv"):
            assert name in manifest["files"]
            assert (out / name).is_file()

    def test_rerun_reproduces_identical_hashes(self, corpus_file, tmp_path,
                                               live_mock):
        cfg_a = self._config(tmp_path, corpus_file, live_mock.endpoint, "a")
        cfg_b = self._config(tmp_path, corpus_file, live_mock.endpoint, "b")
        assert main(["pipeline", "--config", str(cfg_a)]) == 0
        assert main(["pipeline", "--config", str(cfg_b)]) == 0
        files_a = json.loads((tmp_path / "a" / "manifest.json").read_text())["files"]
        files_b = json.loads((tmp_path / "b" / "manifest.json").read_text())["files"]
        assert files_a == files_b

    def test_stage_failure_leaves_partial_manifest(self, corpus_file,
                                                   tmp_path):
        # A paraphrase set that targets every sentence must hit the
        # protected answer sentence and abort the variants stage.
        d = parse_dataset(corpus_file.read_bytes())
        from advspan.perturb import dump_paraphrase_sets
        bad_sets = {i: {s: "Replaced."
                        for s in range(4)}
                    for i, _ in d.paragraphs()}
        sets_path = tmp_path / "bad_sets.jsonl"
        sets_path.write_text(dump_paraphrase_sets(bad_sets))
        config = {
            "dataset": str(corpus_file),
            "perturbation": {"type": "para"},
            "paraphrases": str(sets_path),
            "endpoint": "http://127.0.0.1:1",
            "out_dir": str(tmp_path / "partial"),
        }
        cfg = tmp_path / "fail.json"
        cfg.write_text(json.dumps(config))
        assert main(["pipeline", "--config", str(cfg)]) == 4
        manifest = json.loads(
            (tmp_path / "partial" / "manifest.json").read_text())
        assert "failure" in manifest
        assert "SpanProtectionError" in manifest["failure"]

    def test_missing_resource_before_any_work(self, corpus_file, tmp_path):
        config = {
            "dataset": str(corpus_file),
            "perturbation": {"type": "word"},
            "endpoint": "http://127.0.0.1:1",
            "out_dir": str(tmp_path / "never"),
        }
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(config))
        assert main(["pipeline", "--config", str(path)]) == 2
        assert not (tmp_path / "never").exists()


class TestMockServeConfig:
    def test_config_parsing(self, tmp_path):
        doc = {"rules": [{"keyword": "a", "answer": "b"}], "sharpness": 0.7}
        cfg = MockModelConfig.from_dict(doc)
        assert cfg.rules == (("a", "b"),)
        assert cfg.sharpness == 0.7
