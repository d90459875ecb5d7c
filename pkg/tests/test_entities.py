import math

import pytest

from domain.entities.bpe import SPECIAL_TOKENS, BpeModel
from domain.entities.corpus import MonoCorpus, ParallelCorpus, SentencePair
from domain.entities.dataset import PairDataset
from domain.entities.evaluation import BleuReport
from domain.entities.filtering import FilterConfig, FilterReport
from domain.entities.language import GROUP_A, GROUP_B, LangCode
from domain.entities.training import (
    Convergence,
    DecodeConfig,
    FixedUpdates,
    TrainHyper,
    TrainState,
    TransformerConfig,
)
from domain.exceptions import LanguageMismatch, UnknownLang


class TestLangCode:
    """LangCode のテスト"""

    def test_parse_known_code(self):
        """既知のコードの解析"""
        assert LangCode.parse("hi") is LangCode.HI
        assert LangCode.parse(" BN ") is LangCode.BN
        assert LangCode.parse(LangCode.TA) is LangCode.TA

    def test_parse_unknown_code(self):
        """未知のコードは UnknownLang"""
        with pytest.raises(UnknownLang) as exc_info:
            LangCode.parse("xx")
        assert exc_info.value.error_code == "CORPUS.UNKNOWN_LANG"

    def test_closed_set(self):
        """16 言語の閉集合"""
        assert len(LangCode) == 16
        assert {lang.value for lang in LangCode} >= {"en", "sd", "si", "as"}

    def test_target_token(self):
        assert LangCode.HI.target_token == "<2hi>"
        assert str(LangCode.OR) == "or"

    def test_groups_are_disjoint(self):
        """グループ A と B は交わらない"""
        assert not GROUP_A.members & GROUP_B.members
        assert LangCode.EN not in GROUP_A and LangCode.EN not in GROUP_B


class TestSentencePair:
    """SentencePair のテスト"""

    def test_embedded_newline_rejected(self):
        with pytest.raises(ValueError):
            SentencePair("a\nb", "c", LangCode.EN, LangCode.HI, 1)

    def test_line_no_must_be_positive(self):
        with pytest.raises(ValueError):
            SentencePair("a", "b", LangCode.EN, LangCode.HI, 0)

    def test_reversed(self):
        """方向の反転"""
        pair = SentencePair("hello", "नमस्ते", LangCode.EN, LangCode.HI, 3)
        flipped = pair.reversed()
        assert (flipped.source, flipped.target) == ("नमस्ते", "hello")
        assert (flipped.source_lang, flipped.target_lang) == (LangCode.HI, LangCode.EN)
        assert flipped.line_no == 3


class TestParallelCorpus:
    """ParallelCorpus のテスト"""

    def test_language_mismatch(self):
        """コーパスと異なる言語のペアは拒否"""
        pair = SentencePair("a", "b", LangCode.EN, LangCode.BN, 1)
        with pytest.raises(LanguageMismatch):
            ParallelCorpus(LangCode.EN, LangCode.HI, (pair,))

    def test_duplicate_line_numbers(self):
        pairs = (
            SentencePair("a", "b", LangCode.EN, LangCode.HI, 1),
            SentencePair("c", "d", LangCode.EN, LangCode.HI, 1),
        )
        with pytest.raises(ValueError):
            ParallelCorpus(LangCode.EN, LangCode.HI, pairs)

    def test_union_keeps_duplicates_and_renumbers(self):
        """連結は重複を保持し、行番号を振り直す"""
        left = ParallelCorpus.from_texts(["a", "b"], ["x", "y"], LangCode.EN, LangCode.HI)
        right = ParallelCorpus.from_texts(["a"], ["x"], LangCode.EN, LangCode.HI)

        joined = left.union(right)

        assert len(joined) == 3
        assert joined.sources == ["a", "b", "a"]
        assert [p.line_no for p in joined] == [1, 2, 3]
        assert len(left) == 2

    def test_union_rejects_other_pair(self):
        left = ParallelCorpus.from_texts(["a"], ["x"], LangCode.EN, LangCode.HI)
        with pytest.raises(LanguageMismatch):
            left.union(left.reversed())

    def test_mono_corpus_rejects_newline(self):
        with pytest.raises(ValueError):
            MonoCorpus(LangCode.HI, ("a\nb",))


class TestFilterEntities:
    """FilterConfig / FilterReport のテスト"""

    def test_defaults(self):
        config = FilterConfig()
        assert (config.max_len, config.min_len, config.max_len_ratio) == (250, 1, 3.0)
        assert config.expected_script_fraction == 0.5
        assert config.drop_duplicates is True

    @pytest.mark.parametrize("kwargs", [
        {"min_len": 0},
        {"max_len_ratio": 0.5},
        {"expected_script_fraction": 1.5},
        {"min_len": 10, "max_len": 5},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            FilterConfig(**kwargs)

    def test_report_accounting(self):
        """retained + rejected = input でなければ拒否"""
        report = FilterReport(10, 7, {"EmptySide": 2, "Duplicate": 1})
        assert report.retained_fraction == pytest.approx(0.7)
        assert report.total_rejected == 3
        with pytest.raises(ValueError):
            FilterReport(10, 8, {"EmptySide": 1})

    def test_empty_report_fraction(self):
        assert FilterReport(0, 0, {}).retained_fraction == 1.0


class TestTrainingEntities:
    """学習関連エンティティのテスト"""

    def test_transformer_config_defaults(self):
        config = TransformerConfig(vocab_size_src=100, vocab_size_tgt=120)
        assert (config.num_layers, config.num_heads, config.d_model, config.d_ffn) == (6, 8, 512, 2048)
        assert config.dropout == 0.1

    def test_transformer_config_head_divisibility(self):
        with pytest.raises(ValueError, match="divisible"):
            TransformerConfig(vocab_size_src=10, vocab_size_tgt=10, d_model=10, num_heads=3)

    def test_shared_embeddings_need_equal_vocab(self):
        with pytest.raises(ValueError):
            TransformerConfig(vocab_size_src=10, vocab_size_tgt=11, shared_embeddings=True)

    def test_config_round_trip(self):
        config = TransformerConfig(vocab_size_src=10, vocab_size_tgt=11, num_layers=2, d_model=16, num_heads=2)
        assert TransformerConfig.from_dict(config.to_dict()) == config

    def test_train_hyper_defaults(self):
        """既定の学習設定"""
        hyper = TrainHyper()
        assert (hyper.beta1, hyper.beta2) == (0.9, 0.98)
        assert hyper.adam_eps == 1e-9
        assert hyper.peak_lr == 5e-4
        assert hyper.warmup_updates == 8000
        assert hyper.label_smoothing == 0.1
        assert hyper.update_frequency == 15

    def test_train_hyper_validation(self):
        with pytest.raises(ValueError):
            TrainHyper(beta1=1.0)
        with pytest.raises(ValueError):
            TrainHyper(label_smoothing=1.0)

    def test_stopping_policies(self):
        assert Convergence() == Convergence(min_delta=1e-3, patience=3)
        with pytest.raises(ValueError):
            FixedUpdates(0)
        with pytest.raises(ValueError):
            Convergence(patience=0)

    def test_record_validation_resets_counter(self):
        """best の更新で epochs_since_best が 0 に戻る"""
        state = TrainState()
        assert state.record_validation(3.0) is True
        assert state.record_validation(3.1) is False
        assert state.epochs_since_best == 1
        assert state.record_validation(2.0) is True
        assert state.epochs_since_best == 0
        assert state.best_valid_loss == 2.0

    def test_record_validation_min_delta(self):
        state = TrainState()
        state.record_validation(1.0)
        assert state.record_validation(0.9995, min_delta=1e-3) is False
        assert state.best_valid_loss == 1.0

    def test_train_state_serialization(self):
        """inf の best は None として保存される"""
        state = TrainState(step=5, epoch=2)
        data = state.to_dict()
        assert data["best_valid_loss"] is None
        restored = TrainState.from_dict(data)
        assert math.isinf(restored.best_valid_loss)
        assert restored.step == 5

    def test_decode_config(self):
        config = DecodeConfig()
        assert config.beam_size == 20
        assert config.max_len_for(10) == 22


class TestBleuReport:
    """BleuReport のテスト"""

    def test_format(self):
        report = BleuReport(60.653, (1.0, 1.0), math.exp(-0.5), 2, 3)
        assert report.format() == (
            "BLEU = 60.65 100.0/100.0 (BP = 0.607 ratio = 0.667 hyp_len = 2 ref_len = 3)"
        )
        assert report.max_n == 2

    def test_range_validation(self):
        with pytest.raises(ValueError):
            BleuReport(101.0, (1.0,), 1.0, 1, 1)
        with pytest.raises(ValueError):
            BleuReport(10.0, (1.5,), 1.0, 1, 1)


class TestBpeModelEntity:
    """BpeModel の不変条件のテスト"""

    def _base_vocab(self):
        return {token: i for i, token in enumerate(SPECIAL_TOKENS)}

    def test_specials_occupy_lowest_ids(self):
        vocab = self._base_vocab()
        vocab["a"] = len(vocab)
        model = BpeModel(merges=[], vocab=vocab)
        assert model.specials["<pad>"] == 0
        assert model.target_token_id(LangCode.HI) < model.num_specials

    def test_merge_result_must_be_in_vocab(self):
        vocab = self._base_vocab()
        vocab["a"] = len(vocab)
        with pytest.raises(ValueError):
            BpeModel(merges=[("a", "a")], vocab=vocab)

    def test_ids_must_be_contiguous(self):
        vocab = self._base_vocab()
        vocab["a"] = len(vocab) + 1
        with pytest.raises(ValueError):
            BpeModel(merges=[], vocab=vocab)


class TestPairDataset:
    """PairDataset のテスト"""

    def test_ids_outside_vocab_rejected(self):
        with pytest.raises(ValueError):
            PairDataset(0, LangCode.EN, LangCode.HI, (((5,), (50,)),), 10, 10)

    def test_fingerprint_depends_on_content(self):
        a = PairDataset(0, LangCode.EN, LangCode.HI, (((5,), (6,)),), 10, 10)
        b = PairDataset(0, LangCode.EN, LangCode.HI, (((5,), (7,)),), 10, 10)
        assert a.fingerprint != b.fingerprint
        assert a.name == "en-hi"
