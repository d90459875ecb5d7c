from unittest.mock import Mock

import pytest

from domain.entities.corpus import MonoCorpus, ParallelCorpus, SentencePair
from domain.entities.filtering import FilterConfig, RejectRule
from domain.entities.language import GroupName, LangCode
from domain.exceptions import LineCountMismatch, MalformedLine, Utf8Error
from domain.repositories.corpus_repository import CorpusRepository
from infra.files.corpus_repository_impl import FileCorpusRepository, read_lines
from tests.conftest import PLANTED_COUNTS
from usecases.corpus_service import (
    CorpusService,
    classify_script,
    filter_corpus,
    filter_pair,
    select_group,
    subsample_mono,
)


def _pair(source: str, target: str, source_lang=LangCode.EN, target_lang=LangCode.HI) -> SentencePair:
    return SentencePair(source, target, source_lang, target_lang, 1)


class TestClassifyScript:
    """classify_script のテスト"""

    def test_pure_devanagari(self):
        """結合記号 (母音記号) もデーヴァナーガリーに数える"""
        assert classify_script("नमस्ते") == {"Devanagari": 1.0}

    def test_mixed_scripts(self):
        fractions = classify_script("ab कख")
        assert fractions == {"Latin": 0.5, "Devanagari": 0.5}

    def test_digits_and_punctuation_ignored(self):
        """数字・句読点・空白は分母に入らない"""
        assert classify_script("abc 123 !!! ।") == {"Latin": 1.0}

    def test_no_letters(self):
        assert classify_script("123 456") == {}
        assert classify_script("") == {}

    def test_unknown_block_is_other(self):
        fractions = classify_script("日本")
        assert fractions == {"other": 1.0}


class TestFilterPair:
    """filter_pair のテスト"""

    def test_keep_clean_pair(self):
        assert filter_pair(_pair("hello world", "नमस्ते दुनिया"), FilterConfig()).kept

    @pytest.mark.parametrize("source,target,rule", [
        ("hello", "   ", RejectRule.EMPTY_SIDE),
        ("", "नमस्ते", RejectRule.EMPTY_SIDE),
        (" ".join(["w"] * 251), " ".join(["क"] * 251), RejectRule.LENGTH_BOUNDS),
        ("a b c d", "क", RejectRule.LENGTH_RATIO),
        ("hello world", "namaste duniya", RejectRule.SCRIPT_MISMATCH),
    ])
    def test_reject_rules(self, source, target, rule):
        """各ルールでの棄却"""
        verdict = filter_pair(_pair(source, target), FilterConfig())
        assert verdict.rule == rule

    def test_rules_evaluated_in_order(self):
        """長さ比と文字体系の両方に違反したら先に評価する LengthRatio"""
        verdict = filter_pair(_pair("a b c d", "abc"), FilterConfig())
        assert verdict.rule == RejectRule.LENGTH_RATIO

    def test_ratio_boundary_is_inclusive(self):
        """比がちょうど max_len_ratio なら通す"""
        assert filter_pair(_pair("a b c", "क"), FilterConfig()).kept

    def test_side_without_letters_passes_script_rule(self):
        assert filter_pair(_pair("2024", "२०२४"), FilterConfig()).kept

    def test_punjabi_accepts_shahmukhi(self):
        pair = _pair("hello", "سلام", target_lang=LangCode.PA)
        assert filter_pair(pair, FilterConfig()).kept


class TestFilterCorpus:
    """filter_corpus のテスト"""

    def test_planted_noise(self, planted_corpus):
        """混入させたノイズはルールごとに正確に取り除かれる"""
        # 実行
        cleaned, report = filter_corpus(planted_corpus, FilterConfig())

        # 検証
        assert report.input_pairs == 1000
        assert report.retained_pairs == 900
        assert report.rejected_by_rule == PLANTED_COUNTS
        assert len(cleaned) == 900
        assert report.retained_fraction == pytest.approx(0.9)

    def test_order_and_line_numbers_preserved(self, planted_corpus):
        cleaned, _ = filter_corpus(planted_corpus, FilterConfig())
        line_numbers = [pair.line_no for pair in cleaned]
        assert line_numbers == sorted(line_numbers)
        assert cleaned.pairs[0] == planted_corpus.pairs[0]

    def test_idempotent(self, planted_corpus):
        """2 回目のフィルタリングでは何も落ちない"""
        once, _ = filter_corpus(planted_corpus, FilterConfig())
        twice, report = filter_corpus(once, FilterConfig())
        assert twice == once
        assert report.rejected_by_rule == {}

    def test_workers_do_not_change_result(self, planted_corpus):
        """並列数によらず出力と集計は同じ"""
        sequential = filter_corpus(planted_corpus, FilterConfig(), workers=1)
        parallel = filter_corpus(planted_corpus, FilterConfig(), workers=2)
        assert parallel[0] == sequential[0]
        assert parallel[1].to_dict() == sequential[1].to_dict()

    def test_keep_duplicates(self, planted_corpus):
        _, report = filter_corpus(planted_corpus, FilterConfig(drop_duplicates=False))
        assert report.retained_pairs == 920
        assert "Duplicate" not in report.rejected_by_rule

    def test_first_occurrence_of_duplicate_survives(self):
        corpus = ParallelCorpus.from_texts(
            ["hello", "world", "hello"], ["नमस्ते", "दुनिया", "नमस्ते"], LangCode.EN, LangCode.HI
        )
        cleaned, report = filter_corpus(corpus, FilterConfig())
        assert [p.line_no for p in cleaned] == [1, 2]
        assert report.rejected_by_rule == {"Duplicate": 1}

    def test_empty_corpus(self):
        cleaned, report = filter_corpus(ParallelCorpus(LangCode.EN, LangCode.HI), FilterConfig())
        assert len(cleaned) == 0
        assert report.retained_fraction == 1.0


class TestSelectGroup:
    """select_group のテスト"""

    def _corpus(self, source_lang, target_lang):
        return ParallelCorpus.from_texts(["x"], ["y"], source_lang, target_lang)

    def test_select_group_a(self):
        hi = self._corpus(LangCode.EN, LangCode.HI)
        ta = self._corpus(LangCode.EN, LangCode.TA)
        bn_en = self._corpus(LangCode.BN, LangCode.EN)

        selected = select_group([hi, ta, bn_en], GroupName.A)

        assert selected == [hi, bn_en]

    def test_assamese_is_not_in_a_group(self):
        assert select_group([self._corpus(LangCode.EN, LangCode.AS)], GroupName.A) == []

    def test_no_group_keeps_everything(self):
        corpora = [self._corpus(LangCode.EN, LangCode.SI)]
        assert select_group(corpora, None) == corpora


class TestSubsampleMono:
    """subsample_mono のテスト"""

    def test_keeps_order_and_size(self):
        corpus = MonoCorpus(LangCode.HI, tuple(f"line {i}" for i in range(100)))
        sample = subsample_mono(corpus, 10, seed=3)
        assert len(sample) == 10
        indices = [int(line.split()[1]) for line in sample]
        assert indices == sorted(indices)

    def test_deterministic(self):
        corpus = MonoCorpus(LangCode.HI, tuple(f"line {i}" for i in range(100)))
        assert subsample_mono(corpus, 10, seed=3) == subsample_mono(corpus, 10, seed=3)

    def test_larger_size_returns_corpus(self):
        corpus = MonoCorpus(LangCode.HI, ("a", "b"))
        assert subsample_mono(corpus, 5, seed=0) is corpus


class TestFileCorpusRepository:
    """FileCorpusRepository のテスト"""

    def test_load_parallel(self, write_parallel):
        source_path, target_path = write_parallel(["hello  world", "bye"], ["नमस्ते दुनिया", "अलविदा"])
        repository = FileCorpusRepository("nfc")

        corpus = repository.load_parallel(source_path, target_path, "en", "hi")

        assert corpus.sources == ["hello world", "bye"]
        assert [p.line_no for p in corpus] == [1, 2]
        assert corpus.target_lang is LangCode.HI

    def test_line_count_mismatch(self, write_parallel):
        source_path, target_path = write_parallel(["a", "b"], ["क"])
        with pytest.raises(LineCountMismatch) as exc_info:
            FileCorpusRepository().load_parallel(source_path, target_path, LangCode.EN, LangCode.HI)
        assert exc_info.value.details == {"source_lines": 2, "target_lines": 1}

    def test_invalid_utf8_reports_offset(self, tmp_path):
        """不正なバイト列の位置を報告する"""
        path = tmp_path / "bad.en"
        path.write_bytes(b"good line\nbad \xff byte\n")
        with pytest.raises(Utf8Error) as exc_info:
            read_lines(path)
        assert exc_info.value.byte_offset == 14
        assert exc_info.value.error_code == "CORPUS.UTF8_ERROR"

    def test_crlf_is_stripped(self, tmp_path):
        path = tmp_path / "crlf.en"
        path.write_bytes(b"a\r\nb\r\n")
        assert read_lines(path) == ["a", "b"]

    def test_load_tsv(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("hello\tनमस्ते\nbye\tअलविदा\n", encoding="utf-8")
        corpus = FileCorpusRepository().load_parallel_tsv(path, LangCode.EN, LangCode.HI)
        assert corpus.targets == ["नमस्ते", "अलविदा"]

    def test_malformed_tsv(self, tmp_path):
        path = tmp_path / "corpus.tsv"
        path.write_text("hello\tनमस्ते\nno tab here\n", encoding="utf-8")
        with pytest.raises(MalformedLine) as exc_info:
            FileCorpusRepository().load_parallel_tsv(path, LangCode.EN, LangCode.HI)
        assert exc_info.value.details["line_no"] == 2

    def test_nfc_normalization(self, write_parallel):
        """分解形は合成形にそろえる"""
        source_path, target_path = write_parallel(["cafe\u0301"], ["नमस्ते"])
        corpus = FileCorpusRepository("nfc").load_parallel(source_path, target_path, "en", "hi")
        assert corpus.sources == ["caf\u00e9"]

    def test_no_normalization(self, write_parallel):
        source_path, target_path = write_parallel(["cafe\u0301  x"], ["क"])
        corpus = FileCorpusRepository("none").load_parallel(source_path, target_path, "en", "hi")
        assert corpus.sources == ["cafe\u0301  x"]

    def test_save_and_load_mono(self, tmp_path):
        repository = FileCorpusRepository()
        path = tmp_path / "mono.hi"
        repository.save_mono(MonoCorpus(LangCode.HI, ("क", "", "ख")), path)
        assert repository.load_mono(path, LangCode.HI).lines == ("क", "ख")
        assert repository.load_mono(path, LangCode.HI, drop_empty=False).lines == ("क", "", "ख")

    def test_save_and_load_lines(self, tmp_path):
        """言語を指定しない行単位の入出力は空行も保つ"""
        repository = FileCorpusRepository("nfc")
        path = tmp_path / "out" / "hyp.txt"
        repository.save_lines(["a  b", "", "কম"], path)
        assert repository.load_lines(path) == ("a b", "", "কম")
        assert repository.load_lines(path, drop_empty=True) == ("a b", "কম")


class TestCorpusService:
    """CorpusService のテスト"""

    @pytest.fixture
    def mock_repository(self):
        """モックリポジトリ"""
        return Mock(spec=CorpusRepository)

    def test_load_parallel_delegates(self, mock_repository, planted_corpus):
        # モックの設定
        mock_repository.load_parallel.return_value = planted_corpus
        service = CorpusService(mock_repository)

        # 実行
        result = service.load_parallel("a.en", "a.hi", LangCode.EN, LangCode.HI)

        # 検証
        assert result is planted_corpus
        mock_repository.load_parallel.assert_called_once_with("a.en", "a.hi", LangCode.EN, LangCode.HI)

    def test_load_mono_drops_empty_lines(self, mock_repository):
        mock_repository.load_mono.return_value = MonoCorpus(LangCode.HI, ("क",))
        service = CorpusService(mock_repository)

        service.load_mono("m.hi", LangCode.HI)

        mock_repository.load_mono.assert_called_once_with("m.hi", LangCode.HI, drop_empty=True)

    def test_clean(self, mock_repository, planted_corpus):
        service = CorpusService(mock_repository, workers=1)
        cleaned, report = service.clean(planted_corpus, FilterConfig())
        assert report.retained_pairs == len(cleaned) == 900
