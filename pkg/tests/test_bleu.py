import json
import math
from unittest.mock import Mock

import numpy as np
import pytest

from domain.exceptions import EmptyEvaluation, LengthMismatch
from domain.repositories.corpus_repository import CorpusRepository
from usecases.bleu_service import (
    BleuService,
    corpus_bleu,
    corpus_statistics,
    ngram_counts,
    tokenize_for_bleu,
)


def oracle_bleu(hypotheses, references, max_n):
    """n-gram を 1 つずつ参照から取り除いて数える素朴な BLEU"""
    hyp_length = sum(len(h.split()) for h in hypotheses)
    ref_length = sum(len(r.split()) for r in references)
    log_precisions = []
    for n in range(1, max_n + 1):
        match = total = ref_total = 0
        for hypothesis, reference in zip(hypotheses, references):
            hyp_tokens, ref_tokens = hypothesis.split(), reference.split()
            remaining = [tuple(ref_tokens[i:i + n]) for i in range(len(ref_tokens) - n + 1)]
            ref_total += len(remaining)
            for i in range(len(hyp_tokens) - n + 1):
                gram = tuple(hyp_tokens[i:i + n])
                total += 1
                if gram in remaining:
                    remaining.remove(gram)
                    match += 1
        if total == 0 and ref_total == 0:
            log_precisions.append(0.0)
            continue
        if match == 0:
            return 0.0
        log_precisions.append(math.log(match / total))
    if hyp_length >= ref_length:
        brevity_penalty = 1.0
    else:
        brevity_penalty = math.exp(1 - ref_length / hyp_length)
    return 100 * brevity_penalty * math.exp(sum(log_precisions) / max_n)


def random_evaluation_set(rng, min_len=1, max_len=12):
    """語彙 30 語以下・20 文以下・文長 min_len..max_len のランダムな (仮説, 参照)"""
    vocab = [f"w{i}" for i in range(rng.integers(2, 31))]
    size = int(rng.integers(1, 21))

    def sentence():
        return " ".join(rng.choice(vocab, size=rng.integers(min_len, max_len + 1)))

    return [sentence() for _ in range(size)], [sentence() for _ in range(size)]


class TestTokenizeForBleu:
    """tokenize_for_bleu のテスト"""

    def test_whitespace(self):
        assert tokenize_for_bleu("  the  cat ") == ["the", "cat"]

    def test_punctuation_is_split(self):
        assert tokenize_for_bleu("hello, world!") == ["hello", ",", "world", "!"]

    def test_danda_is_split(self):
        """ダンダも句読点として独立させる"""
        assert tokenize_for_bleu("नमस्ते दुनिया।") == ["नमस्ते", "दुनिया", "।"]

    def test_combining_marks_stay_in_word(self):
        assert tokenize_for_bleu("किताबें") == ["किताबें"]


class TestNgramCounts:
    """ngram_counts のテスト"""

    def test_counts(self):
        counts = ngram_counts(["a", "b", "a", "b"], 2)
        assert counts[("a", "b")] == 2
        assert counts[("b", "a")] == 1

    def test_too_short(self):
        assert not ngram_counts(["a"], 2)

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            ngram_counts(["a"], 0)


class TestCorpusBleu:
    """corpus_bleu のテスト"""

    def test_brevity_penalty_example(self):
        """unigram 2/2, bigram 1/1, BP = exp(1 - 3/2)"""
        report = corpus_bleu(["the cat"], ["the cat sat"], max_n=2)
        assert report.score == pytest.approx(100 * math.exp(-0.5))
        assert report.precisions == (1.0, 1.0)
        assert report.format().startswith("BLEU = 60.65")

    def test_identity(self):
        sentences = ["the cat sat on the mat", "नमस्ते दुनिया कैसे हो ।"]
        report = corpus_bleu(sentences, sentences)
        assert report.score == pytest.approx(100.0)
        assert report.brevity_penalty == 1.0

    @pytest.mark.parametrize("sentences", [
        ["a b"],
        ["a"],
        ["a b c", "d"],
        ["नमस्ते", "कैसे हो", "ठीक हूँ ।"],
    ])
    def test_identity_short_sentences(self, sentences):
        """max_n より短い文だけでも同一なら 100"""
        report = corpus_bleu(sentences, sentences)
        assert report.score == pytest.approx(100.0)
        assert report.precisions[-1] == 1.0

    def test_hypothesis_shorter_than_order(self):
        """参照に n-gram がある次数で仮説に無ければ 0"""
        report = corpus_bleu(["a b"], ["a b c"], max_n=3)
        assert report.precisions == (1.0, 1.0, 0.0)
        assert report.score == 0.0

    def test_clipping(self):
        """参照の出現回数を超える一致は数えない"""
        report = corpus_bleu(["the the the the"], ["the cat"], max_n=1)
        assert report.precisions == (0.25,)
        assert report.score == pytest.approx(25.0)

    def test_zero_precision_gives_zero(self):
        report = corpus_bleu(["a b c d"], ["a c b d"])
        assert report.precisions[1] == 0.0
        assert report.score == 0.0

    def test_smoothing(self):
        """平滑化すると一致 0 の次数に 0.1 を使う"""
        assert corpus_bleu(["a b"], ["a c"], max_n=2).score == 0.0
        smoothed = corpus_bleu(["a b"], ["a c"], max_n=2, smooth=True)
        assert smoothed.score == pytest.approx(100 * math.sqrt(0.5 * 0.1))

    def test_empty_hypothesis(self):
        report = corpus_bleu([""], ["the cat"])
        assert report.score == 0.0
        assert report.brevity_penalty == 0.0

    def test_longer_hypothesis_has_no_penalty(self):
        report = corpus_bleu(["the cat sat"], ["the cat"], max_n=1)
        assert report.brevity_penalty == 1.0
        assert report.score == pytest.approx(100 * 2 / 3)

    def test_permutation_invariant(self):
        """文の順序を入れ替えてもスコアは変わらない"""
        hypotheses, references = random_evaluation_set(np.random.default_rng(5))
        order = np.random.default_rng(6).permutation(len(hypotheses))
        shuffled = corpus_bleu([hypotheses[i] for i in order], [references[i] for i in order], max_n=2)
        assert shuffled.score == pytest.approx(corpus_bleu(hypotheses, references, max_n=2).score, abs=1e-12)

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_naive_oracle(self, seed):
        """素朴な数え上げと 1e-9 以内で一致する (奇数シードは 3 語以下の短文)"""
        max_len = 3 if seed % 2 else 12
        hypotheses, references = random_evaluation_set(np.random.default_rng(seed), max_len=max_len)
        max_n = 1 + seed % 4
        report = corpus_bleu(hypotheses, references, max_n=max_n)
        assert report.score == pytest.approx(oracle_bleu(hypotheses, references, max_n), abs=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_sacrebleu(self, seed):
        """同じ統計量から sacrebleu が計算するスコアと一致する"""
        bleu = pytest.importorskip("sacrebleu.metrics.bleu")
        hypotheses, references = random_evaluation_set(np.random.default_rng(100 + seed), min_len=4)
        max_n = 1 + seed % 4
        matches, totals, hyp_length, ref_length = corpus_statistics(hypotheses, references, max_n)

        expected = bleu.BLEU.compute_bleu(
            matches, totals, hyp_length, ref_length,
            smooth_method="none", effective_order=False, max_ngram_order=max_n,
        ).score

        assert corpus_bleu(hypotheses, references, max_n=max_n).score == pytest.approx(expected, abs=1e-6)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch) as exc_info:
            corpus_bleu(["a", "b"], ["a"])
        assert exc_info.value.details == {"hypotheses": 2, "references": 1}

    def test_empty_evaluation(self):
        with pytest.raises(EmptyEvaluation):
            corpus_bleu([], [])


class TestBleuService:
    """BleuService のテスト"""

    @pytest.fixture
    def mock_repository(self):
        """モックリポジトリ"""
        return Mock(spec=CorpusRepository)

    def test_score_files(self, mock_repository, tmp_path):
        # モックの設定
        mock_repository.load_lines.side_effect = [("the cat",), ("the cat sat",)]
        service = BleuService(mock_repository)
        report_path = tmp_path / "reports" / "bleu.json"

        # 実行
        report = service.score_files("hyp.txt", "ref.txt", max_n=2, report_path=report_path)

        # 検証
        assert report.score == pytest.approx(60.653, abs=1e-3)
        saved = json.loads(report_path.read_text(encoding="utf-8"))
        assert saved["hyp_length"] == 2
        assert saved["ref_length"] == 3
        mock_repository.load_lines.assert_any_call("hyp.txt")
        mock_repository.load_mono.assert_not_called()

    def test_empty_lines_are_kept_aligned(self, mock_repository):
        """空行も 1 文として扱い行対応を保つ"""
        mock_repository.load_lines.side_effect = [("", "a"), ("a",)]
        with pytest.raises(LengthMismatch):
            BleuService(mock_repository).score_files("hyp.txt", "ref.txt")
