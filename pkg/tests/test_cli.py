"""
Experiment config, results store, comparison report, runner and CLI tests
"""

import json
import logging
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from sltstack.cli.bundle import ModelBundle
from sltstack.cli.config import ExperimentConfig, ModelSpec
from sltstack.cli.main import build_parser, cascade_configs, main
from sltstack.cli.report import MISSING, compare_report
from sltstack.cli.runner import ExperimentRunner, run_experiment
from sltstack.decoding.beam import DecodeConfig
from sltstack.errors import ConfigError, StageError
from sltstack.tasks.corpus import CorpusConfig, ParallelExample, write_dataset
from sltstack.tasks.features import FeatureConfig, FeatureSequence
from sltstack.tasks.vocabulary import Vocabulary
from sltstack.training.config import TrainConfig
from sltstack.transformer.model import SeqModel
from sltstack.utils.logging_setup import setup_logging
from sltstack.utils.results_store import ResultsStore, dump_row
from sltstack.utils.settings import load_settings

CONFIGS_DIR = Path(__file__).resolve().parents[1] / "configs"


def tiny_experiment(kind="mt", **overrides) -> ExperimentConfig:
    spec = ModelSpec(n_enc_layers=1, n_dec_layers=1, d_model=8, d_ff=16, h=2, conv_channels=2, dropout=0.0)
    values = dict(
        kind=kind,
        task=CorpusConfig(
            alphabet_size=4, min_len=1, max_len=3, n_train=8, n_dev=4, n_test=4,
            features=FeatureConfig(feature_dim=6, frames_per_token=4, noise_sd=0.1),
        ),
        models={"asr": spec, "mt": spec, "e2e": spec},
        train=TrainConfig(epochs=1, batch_target_units=40, warmup=10, dropout=0.0, average_last=1),
        decode_asr=DecodeConfig(beam=2, max_len=12),
        decode_mt=DecodeConfig(beam=2, max_len=8),
        n_best=2,
        eval_splits=["dev"],
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def result_row(system, split, bleu, wer=50.0, experiment_id="exp", status="ok", dataset_id="toy-1"):
    return {
        "experiment_id": experiment_id, "system": system, "split": split, "bleu": bleu, "wer": wer,
        "status": status, "dataset_id": dataset_id, "config_hash": "h",
    }


class TestExperimentConfig:
    def test_hash_survives_a_file_round_trip(self, tmp_path):
        cfg = tiny_experiment()
        cfg.to_file(tmp_path / "exp.json")
        assert ExperimentConfig.from_file(tmp_path / "exp.json").content_hash() == cfg.content_hash()

    def test_hash_tracks_content(self):
        assert tiny_experiment(seed=1).content_hash() != tiny_experiment(seed=2).content_hash()

    def test_dataset_id_ignores_model_settings(self):
        a = tiny_experiment(n_best=1)
        b = tiny_experiment(kind="asr")
        assert a.dataset_id == b.dataset_id
        assert a.dataset_id.startswith("toy-")

    def test_n_best_bounded_by_asr_beam(self):
        with pytest.raises(ValidationError):
            tiny_experiment(n_best=3)

    def test_missing_checkpoint_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            tiny_experiment(checkpoints={"asr": str(tmp_path / "nowhere")})

    def test_emb_avg_needs_a_rate(self):
        with pytest.raises(ValidationError):
            tiny_experiment(kind="emb_avg")

    def test_overrides_from_file(self, tmp_path):
        tiny_experiment().to_file(tmp_path / "exp.json")
        cfg = ExperimentConfig.from_file(tmp_path / "exp.json", experiment_id="renamed")
        assert cfg.name == "renamed"

    def test_shipped_configs_load(self):
        for name in ("desk", "full"):
            cfg = ExperimentConfig.from_file(CONFIGS_DIR / f"{name}.json")
            assert cfg.models["asr"].n_enc_layers >= 1

    def test_full_config_matches_the_large_corpus_presets(self):
        shipped = ExperimentConfig.from_file(CONFIGS_DIR / "full.json")
        built = ExperimentConfig.full_scale("cascade_ranked", experiment_id="full-cascade-ranked")
        assert shipped.model_dump() == built.model_dump()
        assert built.train == TrainConfig.full_scale()

    def test_defaults_follow_the_desk_presets(self):
        models = ExperimentConfig(kind="asr").models
        assert (models["asr"].n_enc_layers, models["asr"].d_model, models["asr"].conv_channels) == (4, 64, 16)
        assert (models["mt"].n_enc_layers, models["mt"].n_dec_layers) == (2, 2)
        assert models["e2e"] == models["asr"]


class TestResultsStore:
    def test_append_and_filter(self, tmp_path):
        store = ResultsStore(tmp_path / "results")
        store.append([result_row("mt", "dev", 10.0), result_row("mt", "dev", 5.0, experiment_id="other", status="failed:train:mt")])
        assert len(store.read()) == 2
        assert [r["experiment_id"] for r in store.read("other")] == ["other"]
        assert [r["status"] for r in store.failures()] == ["failed:train:mt"]

    def test_rows_need_status_and_hash(self, tmp_path):
        with pytest.raises(ValueError):
            ResultsStore(tmp_path).append([{"experiment_id": "x"}])

    def test_unreadable_lines_are_skipped(self, tmp_path):
        store = ResultsStore(tmp_path)
        store.append([result_row("mt", "dev", 10.0)])
        with open(store.path, "a", encoding="utf-8") as f:
            f.write("{not json\n")
        assert len(store.read()) == 1

    def test_dump_row_is_canonical(self):
        assert dump_row({"b": 1, "a": [1.5, 2]}) == '{"a":[1.5,2],"b":1}'


class TestComparisonReport:
    def test_ensemble_layout_with_missing_cells(self):
        variants = ["stand-alone", "ens-asr", "ens-mt", "ens-asr+ens-mt"]
        rows = [result_row(f"joint:{v}", "test", 20.0 + i) for i, v in enumerate(variants)]
        rows.append(result_row("joint:stand-alone", "dev", 18.0))
        report = compare_report(rows)
        assert report.header == ["split"] + variants
        assert report.rows == [
            ["dev", "18.00", MISSING, MISSING, MISSING],
            ["test", "20.00", "21.00", "22.00", "23.00"],
        ]
        assert "ens-asr+ens-mt" in report.render()

    def test_cascade_layout(self):
        rows = [result_row("cascade:one_best", "test", 10.0), result_row("cascade:ranked_n_best", "test", 12.5)]
        report = compare_report(rows)
        assert report.header == ["split", "one_best", "ranked_n_best"]
        assert report.to_csv().splitlines() == ["split,one_best,ranked_n_best", "test,10.00,12.50"]

    def test_generic_layout_with_failures(self):
        rows = [
            result_row("mt", "dev", 30.0, wer=12.0),
            {"experiment_id": "broken", "status": "failed:train:asr", "dataset_id": "toy-1", "config_hash": "h"},
        ]
        report = compare_report(rows)
        assert report.header == ["experiment", "system", "dev WER", "dev BLEU", "status"]
        assert report.rows[0] == ["exp", "mt", "12.00", "30.00", "ok"]
        assert report.rows[1] == ["broken", MISSING, MISSING, MISSING, "failed:train:asr"]

    def test_inversion_note(self):
        rows = [result_row("e2e", "test", 30.0, experiment_id="e2e"), result_row("joint", "test", 20.0, experiment_id="joint")]
        notes = compare_report(rows).notes
        assert len(notes) == 1 and notes[0].startswith("inversion: joint/joint")

    def test_mixed_datasets_rejected(self):
        rows = [result_row("mt", "dev", 1.0), result_row("mt", "dev", 2.0, dataset_id="toy-2")]
        with pytest.raises(ConfigError):
            compare_report(rows)

    def test_empty_rows_rejected(self):
        with pytest.raises(ValueError):
            compare_report([])

    def test_write(self, tmp_path):
        paths = compare_report([result_row("mt", "dev", 1.0)]).write(tmp_path)
        assert paths["csv"].read_text().startswith("experiment,system")
        assert "exp" in paths["txt"].read_text()


class TestModelBundle:
    def test_save_and_load(self, tmp_path, tiny_text_config):
        vocab = Vocabulary(["a", "b"])
        bundle = ModelBundle("mt", SeqModel(tiny_text_config, seed=4), vocab, vocab)
        bundle.save(tmp_path / "mt")
        loaded = ModelBundle.load(tmp_path / "mt")
        assert loaded.role == "mt" and loaded.input_vocab == vocab
        for name, tensor in bundle.model.params.items():
            np.testing.assert_array_equal(loaded.model.params[name].data, tensor.data)

    def test_load_rejects_other_directories(self, tmp_path):
        with pytest.raises(ConfigError):
            ModelBundle.load(tmp_path)


class TestRunner:
    def test_rows_are_deterministic(self):
        first = run_experiment(tiny_experiment())
        second = run_experiment(tiny_experiment())
        assert [dump_row(r) for r in first] == [dump_row(r) for r in second]
        assert [(r["system"], r["split"], r["status"]) for r in first] == [("mt", "dev", "ok")]

    def test_failure_writes_a_failed_row(self, tmp_path):
        models = tiny_experiment().models
        models["mt"] = models["mt"].model_copy(update={"d_model": 16})
        cfg = tiny_experiment(kind="joint", connector="identity", models=models)
        with pytest.raises(StageError) as info:
            ExperimentRunner(cfg, results_dir=tmp_path).run()
        assert info.value.stage == "train:joint"
        assert [r["status"] for r in ResultsStore(tmp_path).read()] == ["failed:train:joint"]

    def test_artifacts_land_in_the_work_dir(self, tmp_path):
        rows = run_experiment(tiny_experiment(kind="asr"), results_dir=tmp_path)
        assert rows[0]["system"] == "asr"
        assert (tmp_path / "runs" / "asr" / "asr" / "model.json").exists()
        assert (tmp_path / "runs" / "asr" / "asr" / "loss.csv").exists()
        assert len(ResultsStore(tmp_path).read()) == 1


class TestMain:
    def test_evaluate(self, tmp_path, capsys):
        (tmp_path / "ref.txt").write_text("a b c d e\nf g\n")
        (tmp_path / "hyp.txt").write_text("a b c d x\nf g\n")
        assert main(["evaluate", "--ref", str(tmp_path / "ref.txt"), "--hyp", str(tmp_path / "hyp.txt")]) == 0
        assert "BLEU" in capsys.readouterr().out

    def test_unequal_files_fail(self, tmp_path):
        (tmp_path / "ref.txt").write_text("a\nb\n")
        (tmp_path / "hyp.txt").write_text("a\n")
        assert main(["evaluate", "--ref", str(tmp_path / "ref.txt"), "--hyp", str(tmp_path / "hyp.txt")]) == 1

    def test_report_without_rows_fails(self, tmp_path):
        assert main(["report", "--results-dir", str(tmp_path)]) == 1

    def test_decode_writes_one_ranked_list_per_utterance(self, tmp_path, tiny_text_config):
        vocab = Vocabulary(["a", "b"])
        ModelBundle("mt", SeqModel(tiny_text_config, seed=4), vocab, vocab).save(tmp_path / "mt")
        write_dataset(tmp_path / "data" / "test.jsonl", [ParallelExample("u1", "ab", "ba"), ParallelExample("u2", "ba", "ab")])
        argv = [
            "decode", "--model-dir", str(tmp_path / "mt"), "--data", str(tmp_path / "data"),
            "--out", str(tmp_path / "out"), "--beam", "3", "--n-best", "2", "--max-len", "4",
        ]
        assert main(argv) == 0

        records = [json.loads(line) for line in (tmp_path / "out" / "nbest.jsonl").read_text().splitlines()]
        assert [r["utt_id"] for r in records] == ["u1", "u2"]
        for record in records:
            assert len(record["hypotheses"]) == 2
            assert set(record["hypotheses"][0]) == {"hypothesis_text", "logprob", "normalized_score"}
            scores = [h["normalized_score"] for h in record["hypotheses"]]
            assert scores == sorted(scores, reverse=True)


class TestCascadeCommand:
    def _args(self, *extra):
        return build_parser().parse_args(["cascade", "--asr", "a", "--mt", "m", "--data", "d", "--out", "o", *extra])

    def test_default_mode_keeps_several_transcripts(self):
        args = self._args()
        cfg_asr, cfg_mt = cascade_configs(args)
        assert args.mode == "ranked_n_best"
        assert (cfg_asr.beam, cfg_asr.n_best) == (10, ExperimentConfig.model_fields["n_best"].default)
        assert (cfg_mt.beam, cfg_mt.length_penalty_alpha) == (5, 0.8)

    def test_n_best_follows_a_small_beam(self):
        assert cascade_configs(self._args("--beam", "2"))[0].n_best == 2

    def test_explicit_n_best_wins(self):
        assert cascade_configs(self._args("--n-best", "1"))[0].n_best == 1

    def test_default_cascade_translates_several_transcripts(self, tmp_path, tiny_speech_config, tiny_text_config, rng):
        vocab = Vocabulary(["a", "b", "c"])
        ModelBundle("asr", SeqModel(tiny_speech_config, seed=1), vocab).save(tmp_path / "asr")
        mt_config = tiny_text_config.model_copy(update={"vocab_src": len(vocab)})
        ModelBundle("mt", SeqModel(mt_config, seed=2), Vocabulary(["a", "b"]), vocab).save(tmp_path / "mt")
        examples = [
            ParallelExample(f"u{i}", "ab", "ba", FeatureSequence(rng.standard_normal((8, 6)).astype(np.float32)))
            for i in range(2)
        ]
        write_dataset(tmp_path / "data" / "test.jsonl", examples)
        argv = [
            "cascade", "--asr", str(tmp_path / "asr"), "--mt", str(tmp_path / "mt"),
            "--data", str(tmp_path / "data"), "--out", str(tmp_path / "out"), "--max-len", "4",
        ]
        assert main(argv) == 0

        records = [json.loads(line) for line in (tmp_path / "out" / "hyps.jsonl").read_text().splitlines()]
        assert len(records) == 2
        assert all(r["transcripts_translated"] > 1 for r in records)


class TestSettings:
    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("SLT_RESULTS_DIR", str(tmp_path))
        monkeypatch.setenv("SLT_WORKERS", "3")
        monkeypatch.setenv("SLT_LOG_LEVEL", "DEBUG")
        settings = load_settings()
        assert (settings.results_dir, settings.workers, settings.log_level) == (tmp_path, 3, "DEBUG")

    @pytest.mark.parametrize("value", ["0", "many"])
    def test_bad_worker_count(self, monkeypatch, value):
        monkeypatch.setenv("SLT_WORKERS", value)
        with pytest.raises(ConfigError):
            load_settings()

    def test_logging_setup_is_idempotent(self):
        logger = setup_logging("WARNING")
        setup_logging("DEBUG")
        assert len(logger.handlers) == 1
        assert logger.level == logging.DEBUG
        with pytest.raises(ValueError):
            setup_logging("LOUD")


@pytest.mark.slow
def test_desk_asr_reaches_low_error_rate():
    cfg = ExperimentConfig(kind="asr", eval_splits=["dev"])
    rows = run_experiment(cfg)
    assert rows[0]["wer"] < 5.0
