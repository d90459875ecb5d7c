from dataclasses import replace
from unittest.mock import Mock

import pytest

from domain.entities.corpus import ParallelCorpus
from domain.entities.experiment import CorpusSource, ExperimentPlan, TokenizerPlan
from domain.entities.language import GroupName, LangCode
from domain.entities.training import DecodeConfig, TrainState
from domain.exceptions import MissingRequired
from domain.repositories.bpe_repository import BpeRepository
from domain.repositories.checkpoint_repository import CheckpointRepository
from domain.repositories.corpus_repository import CorpusRepository
from infra.files.run_directory import RunDirectory
from infra.nn.snapshot import snapshot
from infra.nn.transformer import build_model
from usecases.experiment_service import ExperimentService
from usecases.tokenizer_service import bpe_train
from usecases.translation_service import TranslationService


@pytest.fixture
def mock_corpus_repository():
    """モックコーパスリポジトリ"""
    return Mock(spec=CorpusRepository)


@pytest.fixture
def mock_bpe_repository():
    """モック BPE リポジトリ"""
    return Mock(spec=BpeRepository)


@pytest.fixture
def mock_checkpoint_repository():
    """モックチェックポイントリポジトリ"""
    return Mock(spec=CheckpointRepository)


class TestTranslationService:
    """TranslationService のテスト"""

    def test_translate_file(self, mock_checkpoint_repository, mock_bpe_repository, mock_corpus_repository, tiny_config):
        # モックの設定
        src_bpe = bpe_train([["hello world"]], num_merges=3)
        tgt_bpe = bpe_train([["नमस्ते दुनिया"]], num_merges=3)
        config = replace(tiny_config, vocab_size_src=len(src_bpe), vocab_size_tgt=len(tgt_bpe))
        mock_checkpoint_repository.load.return_value = snapshot(build_model(config, seed=0), TrainState())
        mock_bpe_repository.load.side_effect = [src_bpe, tgt_bpe]
        mock_corpus_repository.load_lines.return_value = ("hello", "", "world")
        service = TranslationService(mock_checkpoint_repository, mock_bpe_repository, mock_corpus_repository)

        # 実行
        count = service.translate_file(
            "run/checkpoints/best.ckpt", "in.en", "out.hi", "run/bpe/source", "run/bpe/target",
            DecodeConfig(beam_size=2, max_len_b=3), LangCode.HI,
        )

        # 検証
        assert count == 3
        mock_checkpoint_repository.load.assert_called_once_with("run/checkpoints/best.ckpt")
        assert [c.args[0] for c in mock_bpe_repository.load.call_args_list] == ["run/bpe/source", "run/bpe/target"]
        mock_corpus_repository.load_lines.assert_called_once_with("in.en")
        saved, path = mock_corpus_repository.save_lines.call_args.args
        assert len(saved) == 3
        assert all(isinstance(line, str) for line in saved)
        assert path == "out.hi"


class TestExperimentService:
    """ExperimentService のテスト (リポジトリはモック)"""

    @pytest.fixture
    def service(self, mock_corpus_repository, mock_bpe_repository, mock_checkpoint_repository):
        """ExperimentService インスタンス"""
        return ExperimentService(mock_corpus_repository, mock_bpe_repository, mock_checkpoint_repository)

    def _plan(self, tmp_path, *sources: CorpusSource, **kwargs) -> ExperimentPlan:
        return ExperimentPlan(output_dir=str(tmp_path / "run"), train=tuple(sources), **kwargs)

    def test_prepare_training_corpora(self, service, mock_corpus_repository, planted_corpus, tmp_path):
        """学習コーパスはフィルタリングされ、レポートとデータが書き出される"""
        # モックの設定
        mock_corpus_repository.load_parallel.return_value = planted_corpus
        plan = self._plan(tmp_path, CorpusSource("a.en", "a.hi", LangCode.EN, LangCode.HI))

        # 実行
        with RunDirectory(plan.output_dir) as run:
            prepared = service.prepare_training_corpora(plan, run)
            report = run.read_json("reports/filter.en-hi.json")

        # 検証
        ((source, cleaned),) = prepared
        assert source.name == "en-hi"
        assert len(cleaned) == 900
        assert report["retained_pairs"] == 900
        mock_corpus_repository.save_parallel.assert_called_once()

    def test_group_selection(self, service, mock_corpus_repository, tmp_path):
        """グループ外の言語ペアは学習から外す"""
        # モックの設定
        hi = ParallelCorpus.from_texts(["hello"], ["नमस्ते"], LangCode.EN, LangCode.HI)
        ta = ParallelCorpus.from_texts(["hello"], ["வணக்கம்"], LangCode.EN, LangCode.TA)
        mock_corpus_repository.load_parallel.side_effect = [hi, ta]
        plan = self._plan(
            tmp_path,
            CorpusSource("a.en", "a.hi", LangCode.EN, LangCode.HI),
            CorpusSource("b.en", "b.ta", LangCode.EN, LangCode.TA),
            group=GroupName.A,
        )

        # 実行
        with RunDirectory(plan.output_dir) as run:
            prepared = service.prepare_training_corpora(plan, run)

        # 検証
        assert [source.target_lang for source, _ in prepared] == [LangCode.HI]

    def test_learn_joint_bpe(self, service, mock_bpe_repository, tmp_path):
        plan = self._plan(
            tmp_path, CorpusSource("a.en", "a.hi", LangCode.EN, LangCode.HI),
            tokenizer=TokenizerPlan(num_merges=5, joint=True),
        )
        with RunDirectory(plan.output_dir) as run:
            src_bpe, tgt_bpe = service.learn_bpe(plan, [["hello"]], [["नमस्ते"]], run)

        assert src_bpe is tgt_bpe
        assert mock_bpe_repository.save.call_count == 2

    def test_backtranslate_needs_section(self, service, tmp_path):
        plan = self._plan(tmp_path, CorpusSource("a.en", "a.hi", LangCode.EN, LangCode.HI))
        with pytest.raises(MissingRequired) as exc_info:
            service.backtranslate(plan, "")
        assert exc_info.value.details["field"] == "backtranslation"
        assert not (tmp_path / "run").exists()
