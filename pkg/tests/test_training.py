"""
Batching, checkpoint averaging, augmentation and trainer tests
"""

import numpy as np
import pytest

from sltstack.decoding.beam import DecodeConfig
from sltstack.errors import ConfigError
from sltstack.numcore.params import load_checkpoint, save_checkpoint
from sltstack.numcore.tensor import Tensor
from sltstack.tasks.corpus import CorpusConfig, make_splits
from sltstack.tasks.features import FeatureConfig
from sltstack.tasks.tokenize import build_vocabulary
from sltstack.training.augment import augment_with_hypotheses, embedding_average_augment
from sltstack.training.batching import collate, encode_examples, make_batches
from sltstack.training.checkpoints import average_checkpoints, average_last
from sltstack.training.config import TrainConfig
from sltstack.training.joint import Connector, JointModel, init_joint_from_pretrained
from sltstack.training.trainer import JointTrainer, Seq2SeqTrainer, train, train_joint, write_loss_curve
from sltstack.transformer.config import ModelConfig
from sltstack.transformer.model import SeqModel


def _vocabularies(splits):
    train_split = splits["train"]
    asr_vocab = build_vocabulary("char", [ex.source_text for ex in train_split])
    src_vocab = build_vocabulary("subword", [ex.source_text for ex in train_split])
    tgt_vocab = build_vocabulary("subword", [ex.target_text for ex in train_split])
    return asr_vocab, src_vocab, tgt_vocab


def _tiny(**overrides) -> ModelConfig:
    values = dict(n_enc_layers=1, n_dec_layers=1, d_model=8, d_ff=16, h=2, dropout=0.0)
    values.update(overrides)
    return ModelConfig(**values)


class TestBatching:
    def test_greedy_length_sorted_groups(self):
        assert make_batches([3, 3, 5], 7) == [[0, 1], [2]]

    def test_every_index_once(self):
        lengths = [4, 1, 7, 2, 2, 9, 3]
        batches = make_batches(lengths, 10)
        flat = sorted(i for batch in batches for i in batch)
        assert flat == list(range(len(lengths)))
        for batch in batches:
            assert len(batch) * max(lengths[i] for i in batch) <= 10

    def test_oversized_example_rejected(self):
        with pytest.raises(ValueError):
            make_batches([2, 11], 10)

    def test_collate_teacher_forcing(self, tiny_splits):
        asr_vocab, _, tgt_vocab = _vocabularies(tiny_splits)
        encoded = encode_examples(tiny_splits["train"], tgt_vocab, None, "target", aux_vocab=asr_vocab)
        batch = collate(encoded, [0, 1])
        assert batch.inputs.dtype == np.float32
        assert batch.decoder_in[0, 0] == 2
        np.testing.assert_array_equal(batch.decoder_in[0, 1:len(encoded[0].target)], encoded[0].target[:-1])
        assert batch.aux_targets is not None
        assert list(batch.input_lengths) == [len(encoded[0].inputs), len(encoded[1].inputs)]


class TestCheckpointAveraging:
    def _checkpoints(self, rng, count=5):
        return [{"w": rng.standard_normal((3, 4)).astype(np.float32), "b": rng.standard_normal(4).astype(np.float32)} for _ in range(count)]

    def test_mean_of_checkpoints(self, rng):
        ckpts = self._checkpoints(rng)
        averaged = average_checkpoints(ckpts)
        expected = np.mean(np.stack([c["w"].astype(np.float64) for c in ckpts]), axis=0).astype(np.float32)
        np.testing.assert_array_equal(averaged["w"].data, expected)

    def test_order_does_not_matter(self, rng):
        ckpts = self._checkpoints(rng)
        forward = average_checkpoints(ckpts)
        backward = average_checkpoints(ckpts[::-1])
        np.testing.assert_allclose(forward["b"].data, backward["b"].data, rtol=0, atol=1e-7)

    def test_identical_checkpoints_are_a_fixed_point(self, rng):
        ckpt = self._checkpoints(rng, 1)[0]
        averaged = average_checkpoints([ckpt, ckpt, ckpt])
        np.testing.assert_array_equal(averaged["w"].data, ckpt["w"])

    def test_shape_mismatch_names_the_layer(self, rng):
        a, b = self._checkpoints(rng, 2)
        b["w"] = np.zeros((4, 3), dtype=np.float32)
        with pytest.raises(ConfigError, match="layer w"):
            average_checkpoints([a, b])

    def test_average_last_uses_the_tail(self, rng):
        ckpts = self._checkpoints(rng, 4)
        tail = average_last(ckpts, 2)
        np.testing.assert_array_equal(tail["b"].data, average_checkpoints(ckpts[2:])["b"].data)


class TestEmbeddingAverage:
    def test_selection_rate(self):
        rng = np.random.default_rng(0)
        embedded = Tensor(np.zeros((10000, 1), dtype=np.float32))
        table = Tensor(np.ones((9, 1), dtype=np.float32))
        out = embedding_average_augment(embedded, table, 0.1, rng)
        selected = int(np.sum(out.data[:, 0] == 0.5))
        assert 850 <= selected <= 1150
        assert np.all((out.data[:, 0] == 0.0) | (out.data[:, 0] == 0.5))

    def test_zero_rate_is_identity(self, rng):
        embedded = Tensor(np.ones((2, 3), dtype=np.float32))
        assert embedding_average_augment(embedded, embedded, 0.0, rng) is embedded

    def test_rate_out_of_range(self, rng):
        embedded = Tensor(np.ones((2, 3), dtype=np.float32))
        with pytest.raises(ValueError):
            embedding_average_augment(embedded, embedded, 1.5, rng)


class TestConnector:
    def test_linear_parameter_count(self):
        assert Connector("linear", 8, 8).params.num_parameters() == 72

    def test_identity_needs_equal_widths(self):
        with pytest.raises(ConfigError):
            Connector("identity", 8, 16)

    def test_connector_only_needs_parameters(self):
        asr = SeqModel(_tiny(input_mode="speech", vocab_tgt=9, feature_dim=6, conv_channels=2))
        mt = SeqModel(_tiny(vocab_src=9, vocab_tgt=9))
        with pytest.raises(ConfigError):
            JointModel(asr, mt, "identity", freeze_mode="connector-only")


class TestPretrainedInit:
    def _configs(self):
        return _tiny(input_mode="speech", vocab_tgt=9, feature_dim=6, conv_channels=2), _tiny(vocab_src=9, vocab_tgt=9)

    def test_halves_start_from_checkpoints(self, tmp_path):
        asr_cfg, mt_cfg = self._configs()
        asr_ckpt = SeqModel(asr_cfg, seed=11).params.snapshot()
        mt_path = tmp_path / "mt.sqbr"
        mt_ckpt = SeqModel(mt_cfg, seed=12).params.snapshot()
        save_checkpoint(mt_path, mt_ckpt)

        joint = init_joint_from_pretrained(asr_ckpt, mt_path, asr_cfg, mt_cfg, "linear", "connector-only")

        for name, value in asr_ckpt.items():
            np.testing.assert_array_equal(joint.asr.params[name].data, value)
        for name, value in mt_ckpt.items():
            np.testing.assert_array_equal(joint.mt.params[name].data, value)
        assert joint.connector.params.num_parameters() == 72

    def test_width_mismatch_names_the_layer(self):
        asr_cfg, mt_cfg = self._configs()
        wide = SeqModel(_tiny(vocab_src=9, vocab_tgt=9, d_model=16, d_ff=32), seed=0).params.snapshot()
        with pytest.raises(ConfigError, match="layer"):
            init_joint_from_pretrained(SeqModel(asr_cfg).params.snapshot(), wide, asr_cfg, mt_cfg)


class TestTrainers:
    def _joint_setup(self, splits, mt_loss_weight, freeze_mode="full"):
        asr_vocab, src_vocab, tgt_vocab = _vocabularies(splits)
        asr_cfg = _tiny(input_mode="speech", vocab_tgt=len(asr_vocab), feature_dim=6, conv_channels=2)
        mt_cfg = _tiny(vocab_src=len(src_vocab), vocab_tgt=len(tgt_vocab))
        joint = JointModel(SeqModel(asr_cfg, seed=0), SeqModel(mt_cfg, seed=1), "linear", freeze_mode)
        cfg = TrainConfig(epochs=1, dropout=0.0, mt_loss_weight=mt_loss_weight, seed=5, freeze_mode=freeze_mode)
        joint_batch = collate(encode_examples(splits["train"], tgt_vocab, None, "target", aux_vocab=asr_vocab), [0, 1, 2])
        asr_batch = collate(encode_examples(splits["train"], asr_vocab, None, "source"), [0, 1, 2])
        return joint, cfg, joint_batch, asr_batch, asr_cfg

    def test_zero_mt_weight_matches_asr_training(self, tiny_splits):
        joint, cfg, joint_batch, asr_batch, asr_cfg = self._joint_setup(tiny_splits, mt_loss_weight=0.0)
        alone = SeqModel(asr_cfg, seed=0)

        Seq2SeqTrainer(alone, cfg).train_step(asr_batch)
        JointTrainer(joint, cfg).train_step(joint_batch)

        for name, tensor in alone.params.items():
            np.testing.assert_array_equal(joint.asr.params[name].data, tensor.data, err_msg=name)

    def test_connector_only_freezes_the_halves(self, tiny_splits):
        joint, cfg, joint_batch, _, _ = self._joint_setup(tiny_splits, 1.0, freeze_mode="connector-only")
        before = joint.snapshot()
        report = JointTrainer(joint, cfg).train_step(joint_batch)
        after = joint.snapshot()
        assert set(report.parts) == {"asr_loss", "mt_loss"}
        for name in before:
            if name.startswith("connector."):
                assert not np.array_equal(before[name], after[name]), name
            else:
                np.testing.assert_array_equal(before[name], after[name], err_msg=name)

    def test_zero_epochs_returns_empty_result(self, tiny_text_config):
        result = train(SeqModel(tiny_text_config), [], TrainConfig(epochs=0))
        assert result.checkpoints == [] and result.loss_curve == []

    def test_epoch_checkpoints_are_written(self, tiny_splits, tmp_path):
        _, src_vocab, tgt_vocab = _vocabularies(tiny_splits)
        model = SeqModel(_tiny(vocab_src=len(src_vocab), vocab_tgt=len(tgt_vocab)))
        encoded = encode_examples(tiny_splits["train"], tgt_vocab, src_vocab)
        result = train(model, encoded, TrainConfig(epochs=2, batch_target_units=40, dropout=0.0), checkpoint_dir=tmp_path)
        assert len(result.checkpoints) == 2
        assert sorted(p.name for p in tmp_path.iterdir()) == ["epoch001.sqbr", "epoch002.sqbr"]
        reloaded = load_checkpoint(tmp_path / "epoch002.sqbr")
        np.testing.assert_array_equal(reloaded["out.b"], result.checkpoints[-1]["out.b"])
        assert [step for step, _, _ in result.loss_curve] == list(range(1, len(result.loss_curve) + 1))

    @pytest.mark.slow
    def test_loss_decreases(self, tiny_splits):
        _, src_vocab, tgt_vocab = _vocabularies(tiny_splits)
        model = SeqModel(_tiny(d_model=16, d_ff=32, vocab_src=len(src_vocab), vocab_tgt=len(tgt_vocab)))
        encoded = encode_examples(tiny_splits["train"], tgt_vocab, src_vocab)
        result = train(model, encoded, TrainConfig(epochs=15, warmup=20, batch_target_units=40, dropout=0.0))
        assert result.epoch_losses[-1] < result.epoch_losses[0]

    def test_write_loss_curve(self, tmp_path):
        path = tmp_path / "curves" / "asr.csv"
        write_loss_curve(path, [(1, 2.5, 0.001), (2, 2.25, 0.002)])
        lines = path.read_text().splitlines()
        assert lines == ["step,loss,lrate", "1,2.5,0.001", "2,2.25,0.002"]


class TestHypothesisAugmentation:
    def test_oracle_pairs_always_kept(self, tiny_splits):
        asr_vocab, _, _ = _vocabularies(tiny_splits)
        asr = SeqModel(_tiny(input_mode="speech", vocab_tgt=len(asr_vocab), feature_dim=6, conv_channels=2))
        corpus = tiny_splits["dev"]
        result = augment_with_hypotheses(corpus, asr, asr_vocab, decode_cfg=DecodeConfig(beam=2, max_len=6))
        assert all(a is b for a, b in zip(result.examples, corpus))
        assert len(result.examples) == 2 * len(corpus) - result.skipped
        for ex in result.examples[len(corpus):]:
            assert ex.uid.endswith("-hyp")


@pytest.mark.slow
def test_joint_loss_falls_over_the_first_epochs():
    cfg = CorpusConfig(
        alphabet_size=6, min_len=2, max_len=4, n_train=60, n_dev=10, n_test=10,
        features=FeatureConfig(feature_dim=8, frames_per_token=4, noise_sd=0.1),
    )
    splits = make_splits(cfg, seed=0)
    asr_vocab, src_vocab, tgt_vocab = _vocabularies(splits)
    encoded = encode_examples(splits["train"], tgt_vocab, None, "target", aux_vocab=asr_vocab)
    curves = []
    for seed in range(3):
        joint = JointModel(
            SeqModel(_tiny(d_model=16, d_ff=32, input_mode="speech", vocab_tgt=len(asr_vocab), feature_dim=8, conv_channels=4), seed=seed),
            SeqModel(_tiny(d_model=16, d_ff=32, vocab_src=len(src_vocab), vocab_tgt=len(tgt_vocab)), seed=seed + 1),
            "linear",
            seed=seed + 2,
        )
        result = train_joint(joint, encoded, TrainConfig(epochs=5, warmup=50, batch_target_units=100, dropout=0.0, seed=seed))
        curves.append(result.epoch_losses)
    median = np.median(np.array(curves), axis=0)
    assert np.all(np.diff(median) < 0)
