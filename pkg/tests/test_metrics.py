"""
WER, CER and BLEU tests
"""

import numpy as np
import pytest

from sltstack.metrics.bleu import BleuStats, bleu_stats, corpus_bleu
from sltstack.metrics.report import CorpusScorer, EvalReport, evaluate
from sltstack.metrics.wer import ErrorCounts, cer, edit_distance_alignment, error_counts, wer


class TestErrorRates:
    def test_one_substitution_in_three_words(self):
        assert wer(["a b c"], ["a x c"]) == pytest.approx(100.0 / 3.0)

    def test_empty_hypothesis_is_all_deletions(self):
        assert edit_distance_alignment(["a", "b"], []) == (0, 0, 2)
        assert wer(["a b"], [""]) == pytest.approx(100.0)

    def test_insertions_can_exceed_one_hundred_percent(self):
        counts = error_counts(["a"], ["b c d"])
        assert counts.errors == 3
        assert counts.rate == pytest.approx(300.0)

    def test_alignment_counts(self):
        assert edit_distance_alignment(list("abcd"), list("abxcd")) == (0, 1, 0)
        assert edit_distance_alignment(list("abcd"), list("acd")) == (0, 0, 1)
        assert edit_distance_alignment(list("abcd"), list("abzd")) == (1, 0, 0)

    def test_character_rate_counts_spaces(self):
        assert cer(["ab cd"], ["abcd"]) == pytest.approx(20.0)

    def test_corpus_counts_are_summed(self):
        counts = error_counts(["a b", "c d e"], ["a b", "c e"])
        assert counts == ErrorCounts(0, 0, 1, 5)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            a, b, c = (list(rng.choice(list("xyz"), size=rng.integers(0, 6))) for _ in range(3))
            dist = lambda u, v: sum(edit_distance_alignment(u, v))
            assert dist(a, c) <= dist(a, b) + dist(b, c)
            assert dist(a, b) == dist(b, a)

    def test_rejects_unequal_corpora(self):
        with pytest.raises(ValueError):
            wer(["a"], ["a", "b"])

    def test_rejects_empty_reference(self):
        with pytest.raises(ValueError):
            wer([""], ["a"])


class TestBleu:
    def test_identical_corpus_scores_one_hundred(self):
        assert corpus_bleu(["a b c d e"], ["a b c d e"]) == pytest.approx(100.0)

    def test_one_wrong_final_word(self):
        stats = bleu_stats(["a b c d e"], ["a b c d x"])
        assert stats.matches == [4, 3, 2, 1]
        assert stats.totals == [5, 4, 3, 2]
        assert stats.score() == pytest.approx(100.0 * 0.2 ** 0.25)

    def test_no_matching_four_gram_scores_zero(self):
        assert corpus_bleu(["a b c d"], ["x y z w"]) == 0.0
        assert corpus_bleu(["a b c d"], ["a b c"]) == 0.0

    def test_clipping(self):
        stats = bleu_stats(["the cat"], ["the the the"])
        assert stats.matches[0] == 1

    def test_brevity_penalty(self):
        stats = BleuStats([1, 1, 1, 1], [1, 1, 1, 1], hyp_len=5, ref_len=10)
        assert stats.brevity_penalty == pytest.approx(np.exp(-1.0))
        assert BleuStats(hyp_len=0, ref_len=3).brevity_penalty == 0.0

    def test_sentence_order_does_not_matter(self):
        refs = ["a b c d e", "f g h i", "a a b b c c"]
        hyps = ["a b c d x", "f g h i", "a b b c c"]
        order = [2, 0, 1]
        assert corpus_bleu(refs, hyps) == corpus_bleu([refs[i] for i in order], [hyps[i] for i in order])

    def test_stats_dict_round_trip(self):
        stats = bleu_stats(["a b c d e"], ["a b c d x"])
        assert BleuStats.from_dict(stats.to_dict()) == stats

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            corpus_bleu([], [])


class TestReport:
    def test_evaluate_combines_metrics(self):
        report = evaluate(["a b c d e", "f g"], ["a b c d x", ""])
        assert report.n_sentences == 2
        assert report.ref_words == 7
        assert (report.substitutions, report.insertions, report.deletions) == (1, 0, 2)
        assert report.wer == pytest.approx(300.0 / 7.0)
        assert "WER 42.86" in report.summary()

    def test_whitespace_and_case_normalisation(self):
        report = CorpusScorer(lowercase=True).score(["A  b c d"], [" a b   C d "])
        assert report.wer == 0.0
        assert report.bleu == pytest.approx(100.0)

    def test_dict_round_trip(self):
        report = evaluate(["a b c d e"], ["a b c d x"])
        assert EvalReport.from_dict(report.to_dict()) == report
