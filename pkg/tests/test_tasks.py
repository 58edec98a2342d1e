"""
Vocabulary, tokenization, feature synthesis and toy corpus tests
"""

import numpy as np
import pytest

from sltstack.tasks.corpus import (
    CorpusConfig,
    gen_toy_corpus,
    make_splits,
    read_dataset,
    translate_oracle,
    word_vocabulary,
    write_dataset,
)
from sltstack.tasks.features import FeatureSequence, cmvn, synth_features
from sltstack.tasks.tokenize import (
    apply_merges,
    build_vocabulary,
    default_merges,
    detokenize,
    ids_to_text,
    normalize_text,
    tokenize,
)
from sltstack.tasks.vocabulary import EOS_ID, UNK_ID, TokenSequence, Vocabulary


class TestVocabulary:
    def test_reserved_ids_come_first(self):
        vocab = Vocabulary(["a", "b"])
        assert vocab.tokens[:4] == ["<pad>", "<unk>", "<sos>", "<eos>"]
        assert vocab.id_of("a") == 4
        assert vocab.id_of("zz") == UNK_ID

    def test_interior_eos_rejected(self):
        vocab = Vocabulary(["a"])
        with pytest.raises(ValueError):
            TokenSequence((4, EOS_ID, 4), vocab)

    def test_out_of_range_id_rejected(self):
        with pytest.raises(ValueError):
            TokenSequence((9,), Vocabulary(["a"]))

    def test_dict_round_trip(self):
        vocab = Vocabulary(["ka", "mi"], mode="subword")
        assert Vocabulary.from_dict(vocab.to_dict()) == vocab


class TestTokenize:
    def test_char_mode_appends_eos(self):
        vocab = build_vocabulary("char", ["ab a"])
        seq = tokenize("ab a", vocab)
        assert seq.tokens == ["a", "b", " ", "a", "<eos>"]

    def test_merges_apply_in_table_order(self):
        assert apply_merges(list("kaki"), [("k", "a"), ("k", "i")]) == ["ka", "ki"]
        assert apply_merges(list("aaa"), [("a", "a")]) == ["aa", "a"]

    def test_committed_merges_cover_the_lexicons(self):
        cfg = CorpusConfig(alphabet_size=26)
        products = {left + right for left, right in default_merges()}
        assert set(cfg.source_words) <= products
        assert set(cfg.target_words) <= products

    def test_round_trip_in_every_mode(self):
        cfg = CorpusConfig()
        texts = [src for src, _ in gen_toy_corpus(3, 100, cfg)] + [tgt for _, tgt in gen_toy_corpus(3, 100, cfg)]
        for mode in ("char", "subword", "word"):
            vocab = build_vocabulary(mode, texts)
            for text in texts:
                seq = tokenize(text, vocab)
                assert UNK_ID not in seq.ids
                assert detokenize(seq) == text

    def test_subword_units_are_syllables(self):
        vocab = build_vocabulary("subword", ["ka mi"])
        assert tokenize("ka mi", vocab).tokens == ["ka", " ", "mi", "<eos>"]

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            tokenize("", Vocabulary(["a"]))

    def test_ids_to_text_stops_at_eos(self):
        vocab = Vocabulary(["a", "b"])
        assert ids_to_text([4, 5, EOS_ID], vocab) == "ab"

    def test_normalize_text(self):
        assert normalize_text("  Hello,   World! ") == "hello world"


class TestFeatures:
    def test_frames_follow_tokens(self):
        vocab = Vocabulary(["ka", "mi"], mode="word")
        feats = synth_features(tokenize("ka mi ka", vocab), seed=0, frames_per_token=4, noise_sd=0.0, feature_dim=5)
        assert feats.frames.shape == (12, 5)
        np.testing.assert_array_equal(feats.frames[0], feats.frames[8])
        assert not np.allclose(feats.frames[0], feats.frames[4])

    def test_same_seed_same_noise(self):
        vocab = Vocabulary(["ka"], mode="word")
        a = synth_features(tokenize("ka ka", vocab), seed=5)
        b = synth_features(tokenize("ka ka", vocab), seed=5)
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_cmvn_normalises_each_dimension(self, rng):
        out = cmvn(FeatureSequence(rng.standard_normal((20, 3)) * 4.0 + 2.0))
        np.testing.assert_allclose(out.frames.mean(axis=0), 0.0, atol=1e-5)
        np.testing.assert_allclose(out.frames.std(axis=0), 1.0, atol=1e-5)

    def test_cmvn_constant_column_is_zero(self, rng):
        frames = rng.standard_normal((5, 2))
        frames[:, 1] = 3.0
        out = cmvn(FeatureSequence(frames))
        np.testing.assert_array_equal(out.frames[:, 1], 0.0)

    def test_cmvn_needs_two_frames(self):
        with pytest.raises(ValueError):
            cmvn(FeatureSequence(np.ones((1, 3))))

    def test_non_finite_frames_rejected(self):
        with pytest.raises(ValueError):
            FeatureSequence(np.array([[1.0, np.nan]]))


class TestCorpus:
    def test_reverse_and_map(self):
        cfg = CorpusConfig(alphabet_size=4, source_lexicon=["a", "b", "c", "d"], target_lexicon=["x", "y", "z", "w"])
        assert translate_oracle("a b c", cfg) == "z y x"

    def test_generated_pairs_obey_the_oracle(self):
        cfg = CorpusConfig()
        for source, target in gen_toy_corpus(1, 50, cfg):
            assert translate_oracle(source, cfg) == target
            assert cfg.min_len <= len(source.split()) <= cfg.max_len

    def test_generation_is_deterministic(self):
        cfg = CorpusConfig()
        assert gen_toy_corpus(9, 20, cfg) == gen_toy_corpus(9, 20, cfg)

    def test_lexicon_too_small(self):
        with pytest.raises(ValueError):
            CorpusConfig(alphabet_size=5, source_lexicon=["a", "b"], target_lexicon=["x", "y"])

    def test_splits_have_features(self, tiny_corpus_config, tiny_splits):
        assert [len(tiny_splits[s]) for s in ("train", "dev", "test")] == [8, 4, 4]
        ex = tiny_splits["train"][0]
        words = len(ex.source_text.split())
        assert ex.features.frames.shape == (4 * words, 6)
        assert word_vocabulary(tiny_corpus_config).mode == "word"

    def test_dataset_round_trip(self, tmp_path, tiny_splits):
        write_dataset(tmp_path / "train.jsonl", tiny_splits["train"])
        loaded = read_dataset(tmp_path / "train.jsonl")
        assert [ex.uid for ex in loaded] == [ex.uid for ex in tiny_splits["train"]]
        np.testing.assert_allclose(loaded[0].features.frames, tiny_splits["train"][0].features.frames)

    def test_hand_written_corpus_is_normalized(self, tmp_path):
        path = tmp_path / "test.jsonl"
        path.write_text('{"id": "u1", "source": "Ka,  MI!", "target": "Be  do."}\n', encoding="utf-8")
        [ex] = read_dataset(path)
        assert (ex.source_text, ex.target_text) == ("ka mi", "be do")
        assert read_dataset(path, normalize=False)[0].source_text == "Ka,  MI!"

    def test_punctuation_only_record_rejected(self, tmp_path):
        path = tmp_path / "test.jsonl"
        path.write_text('{"source": "?!", "target": "be"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="test.jsonl:1"):
            read_dataset(path)

    def test_make_splits_is_deterministic(self, tiny_corpus_config):
        a = make_splits(tiny_corpus_config, seed=3)
        b = make_splits(tiny_corpus_config, seed=3)
        np.testing.assert_array_equal(a["dev"][1].features.frames, b["dev"][1].features.frames)
