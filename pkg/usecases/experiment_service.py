import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from domain.entities.bpe import BpeModel
from domain.entities.corpus import MonoCorpus, ParallelCorpus
from domain.entities.dataset import PairDataset
from domain.entities.experiment import CorpusSource, ExperimentPlan
from domain.exceptions import MissingRequired
from domain.repositories.bpe_repository import BpeRepository
from domain.repositories.checkpoint_repository import CheckpointRepository
from domain.repositories.corpus_repository import CorpusRepository, PathLike
from infra.files.metrics_log import JsonlMetricsLog
from infra.files.run_directory import RunDirectory
from infra.nn.snapshot import restore_model
from infra.nn.transformer import TransformerModel, build_model
from usecases.adaptation_service import domain_adapt
from usecases.backtranslation_service import BacktranslationSetup, backtranslate_iterate
from usecases.bleu_service import corpus_bleu
from usecases.corpus_service import filter_corpus, select_group, subsample_mono
from usecases.tokenizer_service import bpe_train
from usecases.training_service import build_pair_dataset, evaluate_loss, train_multiway
from usecases.translation_service import translate_texts
from usecases.translit_service import augment_related

logger = logging.getLogger(__name__)

SOURCE_SIDE = "source"
TARGET_SIDE = "target"


@dataclass
class ExperimentSummary:
    """実行結果の要約 (CLI が標準出力に表示する)"""
    output_dir: str
    checkpoints: Dict[str, str] = field(default_factory=dict)
    bleu: Dict[str, float] = field(default_factory=dict)
    best_valid_loss: Optional[float] = None
    epochs: int = 0


class ExperimentService:
    """マニフェスト 1 つ分の実行をまとめるサービス

    filter → augment → group 選択 → BPE → 学習 → 保存 → テスト翻訳・採点 の順に進め、
    成果物はすべて RunDirectory に書く。
    """

    def __init__(
        self,
        corpus_repository: CorpusRepository,
        bpe_repository: BpeRepository,
        checkpoint_repository: CheckpointRepository,
    ):
        self.corpus_repository = corpus_repository
        self.bpe_repository = bpe_repository
        self.checkpoint_repository = checkpoint_repository

    def _load(self, source: CorpusSource) -> ParallelCorpus:
        return self.corpus_repository.load_parallel(
            source.source_path, source.target_path, source.source_lang, source.target_lang
        )

    def _load_with_augmentation(self, source: CorpusSource) -> ParallelCorpus:
        corpus = self._load(source)
        if source.augment is None:
            return corpus
        high = self.corpus_repository.load_parallel(
            source.augment.source_path, source.augment.target_path,
            source.source_lang, source.augment.target_lang,
        )
        return augment_related(corpus, high)

    def prepare_training_corpora(self, plan: ExperimentPlan, run: RunDirectory) -> List[Tuple[CorpusSource, ParallelCorpus]]:
        """学習コーパスを読み込み、拡張・フィルタリングして書き出す"""
        prepared = []
        for source in plan.train:
            corpus = self._load_with_augmentation(source)
            cleaned, report = filter_corpus(corpus, plan.filter, workers=plan.workers)
            run.write_json(f"reports/filter.{source.name}.json", report.to_dict())
            self.corpus_repository.save_parallel(
                cleaned,
                run.path("data", f"train.{source.name}.{source.source_lang}"),
                run.path("data", f"train.{source.name}.{source.target_lang}"),
            )
            prepared.append((source, cleaned))
        corpora = select_group([corpus for _, corpus in prepared], plan.group)
        kept = [(source, corpus) for source, corpus in prepared if any(corpus is c for c in corpora)]
        if len(kept) < len(prepared):
            logger.info(f"Group {plan.group.value} keeps {len(kept)} of {len(prepared)} training corpora")
        return kept

    def _held_out(self, sources: Sequence[CorpusSource], plan: ExperimentPlan) -> List[Tuple[CorpusSource, ParallelCorpus]]:
        loaded = [(source, self._load(source)) for source in sources]
        corpora = select_group([corpus for _, corpus in loaded], plan.group)
        return [(source, corpus) for source, corpus in loaded if any(corpus is c for c in corpora)]

    def learn_bpe(
        self,
        plan: ExperimentPlan,
        source_texts: Sequence[Sequence[str]],
        target_texts: Sequence[Sequence[str]],
        run: RunDirectory,
    ) -> Tuple[BpeModel, BpeModel]:
        """原文側・訳文側の BPE を学習して bpe/source, bpe/target に保存する"""
        tokenizer = plan.tokenizer
        if tokenizer.joint:
            joint = bpe_train(list(source_texts) + list(target_texts), tokenizer.num_merges, tokenizer.vocab_size)
            src_bpe = tgt_bpe = joint
        else:
            src_bpe = bpe_train(source_texts, tokenizer.num_merges, tokenizer.vocab_size)
            tgt_bpe = bpe_train(target_texts, tokenizer.num_merges, tokenizer.vocab_size)
        self.bpe_repository.save(src_bpe, run.bpe_prefix(SOURCE_SIDE))
        self.bpe_repository.save(tgt_bpe, run.bpe_prefix(TARGET_SIDE))
        logger.info(f"Vocabulary sizes: source {len(src_bpe)}, target {len(tgt_bpe)}")
        return src_bpe, tgt_bpe

    def _datasets(
        self,
        corpora: Sequence[Tuple[CorpusSource, ParallelCorpus]],
        src_bpe: BpeModel,
        tgt_bpe: BpeModel,
        plan: ExperimentPlan,
    ) -> List[PairDataset]:
        return [
            build_pair_dataset(
                corpus, pair_id, src_bpe, tgt_bpe,
                weight=source.weight, tag=plan.tag, max_positions=plan.model.max_positions,
            )
            for pair_id, (source, corpus) in enumerate(corpora)
        ]

    def _score_tests(
        self,
        model: TransformerModel,
        tests: Sequence[Tuple[CorpusSource, ParallelCorpus]],
        src_bpe: BpeModel,
        tgt_bpe: BpeModel,
        plan: ExperimentPlan,
        run: RunDirectory,
    ) -> Dict[str, float]:
        scores = {}
        for source, corpus in tests:
            target_lang = corpus.target_lang if plan.tag else None
            hypotheses = translate_texts(model, corpus.sources, src_bpe, tgt_bpe, plan.decode, target_lang)
            out = run.path("translations", f"test.{source.name}.{source.target_lang}")
            self.corpus_repository.save_mono(MonoCorpus(source.target_lang, tuple(hypotheses)), out)
            report = corpus_bleu(hypotheses, corpus.targets, smooth=plan.bleu_smooth)
            run.write_json(f"reports/bleu.{source.name}.json", report.to_dict())
            logger.info(f"Test {source.name}: {report.format()}")
            scores[source.name] = report.score
        return scores

    def _metrics(self, run: RunDirectory) -> JsonlMetricsLog:
        metrics = JsonlMetricsLog(run.metrics_path)
        metrics.reset()
        return metrics

    def train(self, plan: ExperimentPlan, resolved_manifest: str) -> ExperimentSummary:
        """多言語共同学習の実行

        成果物: manifest.resolved.yaml, FORMAT, reports/filter.*.json, data/*,
        bpe/source.*, bpe/target.*, metrics.jsonl, checkpoints/best.ckpt, checkpoints/last.ckpt,
        テストコーパスがあれば translations/* と reports/bleu.*.json。
        """
        with RunDirectory(plan.output_dir) as run:
            run.write_manifest(resolved_manifest)
            corpora = self.prepare_training_corpora(plan, run)
            src_bpe, tgt_bpe = self.learn_bpe(
                plan, [c.sources for _, c in corpora], [c.targets for _, c in corpora], run
            )
            datasets = self._datasets(corpora, src_bpe, tgt_bpe, plan)
            valid = self._datasets(self._held_out(plan.valid, plan), src_bpe, tgt_bpe, plan)

            config = plan.model.config(len(src_bpe), len(tgt_bpe), shared=plan.tokenizer.joint)
            model = build_model(config, plan.seed)
            result = train_multiway(
                model, datasets, plan.hyper, plan.epochs, valid,
                stopping=plan.stopping, seed=plan.seed, metrics=self._metrics(run),
            )
            summary = ExperimentSummary(
                output_dir=str(run.root),
                best_valid_loss=result.state.best_valid_loss,
                epochs=len(result.history),
            )
            for name, checkpoint in (("best", result.best), ("last", result.last)):
                path = run.checkpoint(name)
                self.checkpoint_repository.save(checkpoint, path)
                summary.checkpoints[name] = str(path)

            tests = self._held_out(plan.test, plan)
            if tests:
                summary.bleu = self._score_tests(restore_model(result.best), tests, src_bpe, tgt_bpe, plan, run)
        return summary

    def finetune(
        self,
        plan: ExperimentPlan,
        resolved_manifest: str,
        base_path: PathLike,
        bpe_prefixes: Tuple[str, str],
        epochs: int,
    ) -> ExperimentSummary:
        """汎用モデルを領域内コーパスで追加学習する

        BPE はベースの実行のものをそのまま使い、この実行のディレクトリにも複製する。
        領域内検証損失の適応前後の値を reports/adaptation.json に残す。
        """
        base = self.checkpoint_repository.load(base_path)
        src_bpe = self.bpe_repository.load(bpe_prefixes[0])
        tgt_bpe = self.bpe_repository.load(bpe_prefixes[1])
        with RunDirectory(plan.output_dir) as run:
            run.write_manifest(resolved_manifest)
            self.bpe_repository.save(src_bpe, run.bpe_prefix(SOURCE_SIDE))
            self.bpe_repository.save(tgt_bpe, run.bpe_prefix(TARGET_SIDE))
            corpora = self.prepare_training_corpora(plan, run)
            datasets = self._datasets(corpora, src_bpe, tgt_bpe, plan)
            valid = self._datasets(self._held_out(plan.valid, plan), src_bpe, tgt_bpe, plan)
            held_out = valid or datasets

            before = evaluate_loss(restore_model(base), held_out, plan.hyper)
            result = domain_adapt(
                base, datasets, epochs, plan.hyper, valid,
                stopping=plan.stopping, seed=plan.seed,
                reuse_optimizer=plan.reuse_optimizer, metrics=self._metrics(run),
            )
            adapted = restore_model(result.best)
            after = evaluate_loss(adapted, held_out, plan.hyper)
            run.write_json("reports/adaptation.json", {
                "base": str(base_path),
                "epochs": epochs,
                "valid_loss_before": before,
                "valid_loss_after": after,
            })
            logger.info(f"In-domain validation loss {before:.4f} -> {after:.4f}")

            summary = ExperimentSummary(output_dir=str(run.root), best_valid_loss=after, epochs=len(result.history))
            for name, checkpoint in (("best", result.best), ("last", result.last)):
                path = run.checkpoint(name)
                self.checkpoint_repository.save(checkpoint, path)
                summary.checkpoints[name] = str(path)

            tests = self._held_out(plan.test, plan)
            if tests:
                summary.bleu = self._score_tests(adapted, tests, src_bpe, tgt_bpe, plan, run)
        return summary

    def backtranslate(self, plan: ExperimentPlan, resolved_manifest: str) -> ExperimentSummary:
        """反復逆翻訳の実行

        学習コーパスの 1 つ目を C_p、検証コーパスの 1 つ目を評価用の対訳とする。
        成果物: 各ラウンドの synthetic/round{r}.n1.* / n2.*, reports/bleu_trace.json,
        checkpoints/forward.ckpt, backward.ckpt, baseline.ckpt。
        """
        bt = plan.backtranslation
        if bt is None:
            raise MissingRequired("backtranslation section is required", {"field": "backtranslation"})
        if not plan.valid:
            raise MissingRequired("back-translation needs a validation corpus", {"field": "corpora.valid"})

        with RunDirectory(plan.output_dir) as run:
            run.write_manifest(resolved_manifest)
            (_, c_p), = self.prepare_training_corpora(
                replace(plan, train=plan.train[:1], group=None), run
            )
            c_m = self.corpus_repository.load_mono(bt.mono.path, bt.mono.lang)
            if bt.mono_ratio is not None:
                c_m = subsample_mono(c_m, int(round(len(c_p) * bt.mono_ratio)), plan.seed)
            c_t = self._load(bt.c_t)
            valid = self._load(plan.valid[0])

            src_bpe, tgt_bpe = self.learn_bpe(
                plan, [c_p.sources, c_t.sources], [c_p.targets, list(c_m.lines)], run
            )
            setup = BacktranslationSetup(
                source_bpe=src_bpe,
                target_bpe=tgt_bpe,
                model_config=plan.model.config(len(src_bpe), len(tgt_bpe), shared=plan.tokenizer.joint),
                hyper=plan.hyper,
                epochs=plan.epochs,
                decode=plan.decode,
                seed=plan.seed,
                tag=plan.tag,
                bleu_smooth=plan.bleu_smooth,
            )
            result = backtranslate_iterate(
                c_p, c_m, c_t, bt.rounds, plan.stopping, setup, valid,
                round_min_delta=bt.round_min_delta, metrics=self._metrics(run),
            )

            for rc in result.rounds:
                for name, corpus in (("n1", rc.n1), ("n2", rc.n2)):
                    self.corpus_repository.save_parallel(
                        corpus,
                        run.path("synthetic", f"round{rc.round}.{name}.{corpus.source_lang}"),
                        run.path("synthetic", f"round{rc.round}.{name}.{corpus.target_lang}"),
                    )
            run.write_json("reports/bleu_trace.json", {
                "trace": [vars(entry) for entry in result.bleu_trace],
                "rounds": [
                    {
                        "round": rc.round,
                        "n1": len(rc.n1),
                        "n2": len(rc.n2),
                        "backward_train_size": rc.backward_train_size,
                        "forward_train_size": rc.forward_train_size,
                    }
                    for rc in result.rounds
                ],
            })

            summary = ExperimentSummary(output_dir=str(run.root), epochs=plan.epochs)
            for name, trained in (("forward", result.forward), ("backward", result.backward), ("baseline", result.baseline)):
                if trained is None:
                    continue
                path = run.checkpoint(name)
                self.checkpoint_repository.save(trained.best, path)
                summary.checkpoints[name] = str(path)
                trace = result.bleu_of(name)
                summary.bleu[name] = trace[-1]
        return summary
