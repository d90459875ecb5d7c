import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional

from domain.entities.bpe import BpeModel
from domain.entities.corpus import MonoCorpus, ParallelCorpus
from domain.entities.language import LangCode
from domain.entities.training import DecodeConfig, StoppingPolicy, TrainHyper, TransformerConfig
from domain.exceptions import LanguageMismatch
from infra.nn.snapshot import restore_model
from infra.nn.transformer import build_model
from usecases.bleu_service import corpus_bleu
from usecases.training_service import MetricsSink, TrainingResult, build_pair_dataset, train_bilingual
from usecases.translation_service import translate_texts

logger = logging.getLogger(__name__)

FORWARD = "forward"
BACKWARD = "backward"
BASELINE = "baseline"


@dataclass
class BacktranslationSetup:
    """逆翻訳ループで毎回新しく学習するモデルの共通設定

    source_bpe / target_bpe と model_config は C_p の向き (Lang2 → Lang1) のもの。
    逆向きのモデルは語彙を入れ替えて作る。
    """
    source_bpe: BpeModel
    target_bpe: BpeModel
    model_config: TransformerConfig
    hyper: TrainHyper
    epochs: int
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    seed: int = 0
    tag: bool = True
    bleu_smooth: bool = False


@dataclass
class RoundCorpora:
    """1 ラウンドで作られた合成コーパス

    n1 = (合成 Lang2, 本物の単言語 Lang1)、n2 = (合成 Lang1, 本物の Lang2)。
    """
    round: int
    n1: ParallelCorpus
    n2: ParallelCorpus
    backward_train_size: int
    forward_train_size: int


@dataclass
class BleuTraceEntry:
    round: int
    model: str
    bleu: float


@dataclass
class BacktranslationResult:
    forward: TrainingResult
    backward: Optional[TrainingResult]
    baseline: Optional[TrainingResult]
    rounds: List[RoundCorpora] = field(default_factory=list)
    bleu_trace: List[BleuTraceEntry] = field(default_factory=list)

    def bleu_of(self, model: str) -> List[float]:
        return [entry.bleu for entry in self.bleu_trace if entry.model == model]


class _DirectionTrainer:
    """片方向のモデルを新規に学習・評価する"""

    def __init__(
        self,
        setup: BacktranslationSetup,
        stopping: StoppingPolicy,
        valid: ParallelCorpus,
        metrics: Optional[MetricsSink],
    ):
        self.setup = setup
        self.stopping = stopping
        self.valid = valid
        self.metrics = metrics

    def _bpe_for(self, source_lang: LangCode):
        if source_lang == self.valid.source_lang:
            return self.setup.source_bpe, self.setup.target_bpe, self.setup.model_config
        config = replace(
            self.setup.model_config,
            vocab_size_src=self.setup.model_config.vocab_size_tgt,
            vocab_size_tgt=self.setup.model_config.vocab_size_src,
        )
        return self.setup.target_bpe, self.setup.source_bpe, config

    def held_out(self, direction: str) -> ParallelCorpus:
        return self.valid if direction in (BACKWARD, BASELINE) else self.valid.reversed()

    def train(self, corpus: ParallelCorpus, direction: str) -> TrainingResult:
        src_bpe, tgt_bpe, config = self._bpe_for(corpus.source_lang)
        max_positions = config.max_positions
        dataset = build_pair_dataset(corpus, 0, src_bpe, tgt_bpe, tag=self.setup.tag, max_positions=max_positions)
        valid = build_pair_dataset(
            self.held_out(direction), 0, src_bpe, tgt_bpe, tag=self.setup.tag, max_positions=max_positions
        )
        model = build_model(config, self.setup.seed)
        logger.info(f"Training {direction} model {corpus.name} on {len(corpus)} pairs")

        def tagged_metrics(record):
            self.metrics({**record, "model": direction})

        return train_bilingual(
            model, dataset, self.setup.hyper, self.setup.epochs, [valid],
            stopping=self.stopping, seed=self.setup.seed,
            metrics=tagged_metrics if self.metrics is not None else None,
        )

    def translate(
        self, result: TrainingResult, sources: List[str], source_lang: LangCode, target_lang: LangCode
    ) -> List[str]:
        src_bpe, tgt_bpe, _ = self._bpe_for(source_lang)
        tag = target_lang if self.setup.tag else None
        # 検証損失が最良だった時点のモデルで訳す
        model = restore_model(result.best)
        return translate_texts(model, sources, src_bpe, tgt_bpe, self.setup.decode, tag)

    def bleu(self, result: TrainingResult, direction: str) -> float:
        held_out = self.held_out(direction)
        hypotheses = self.translate(result, held_out.sources, held_out.source_lang, held_out.target_lang)
        report = corpus_bleu(hypotheses, held_out.targets, smooth=self.setup.bleu_smooth)
        logger.info(f"{direction} model {held_out.name}: {report.format()}")
        return report.score


def backtranslate_iterate(
    c_p: ParallelCorpus,
    c_m: MonoCorpus,
    c_t: ParallelCorpus,
    rounds: int,
    stopping: StoppingPolicy,
    setup: BacktranslationSetup,
    valid: ParallelCorpus,
    round_min_delta: Optional[float] = None,
    metrics: Optional[MetricsSink] = None,
) -> BacktranslationResult:
    """反復逆翻訳

    Lang1 = C_p の目的言語 = C_m の言語、Lang2 = C_p の原言語。各ラウンドで
    新しいモデルを学習する:

    1. Δ→ (Lang1 → Lang2) で C_m を訳し N_1 = (合成 Lang2, C_m) を作る
    2. Tr← = C_p ∪ N_1 で Δ← (Lang2 → Lang1) を学習する
    3. Δ← で C_t の原文側を訳し N_2 = (合成 Lang1, C_t の原文) を作る
    4. Tr→ = 反転 C_p ∪ N_2 で Δ→ を学習する

    最初の Δ→ は反転 C_p だけで学習する。比較用に C_p だけで学習した
    Lang2 → Lang1 のベースラインも評価する。各モデルの学習後に valid で BLEU を記録する。

    Args:
        c_p: 対訳コーパス (Lang2 → Lang1)
        c_m: Lang1 の単言語コーパス
        c_t: C_p と同じ言語ペアの対訳コーパス (原文側を使う)
        rounds: 最大ラウンド数 (0 なら Δ→ を学習するだけ)
        stopping: 各モデル学習の打ち切り方針
        setup: モデル共通設定
        valid: 評価用の対訳コーパス (Lang2 → Lang1)
        round_min_delta: Δ← の BLEU 改善がこれ未満になったらラウンドを打ち切る
        metrics: 学習記録を受け取る関数

    Raises:
        LanguageMismatch: 言語の組み合わせが合わない場合
    """
    lang1, lang2 = c_p.target_lang, c_p.source_lang
    if c_m.lang != lang1:
        raise LanguageMismatch(f"monolingual corpus is {c_m.lang}, expected {lang1}")
    for corpus, role in ((c_t, "C_t"), (valid, "valid")):
        if (corpus.source_lang, corpus.target_lang) != (lang2, lang1):
            raise LanguageMismatch(f"{role} corpus is {corpus.name}, expected {c_p.name}")
    if rounds < 0:
        raise ValueError("rounds must be non-negative")

    trainer = _DirectionTrainer(setup, stopping, valid, metrics)
    trace: List[BleuTraceEntry] = []

    forward = trainer.train(c_p.reversed(), FORWARD)
    trace.append(BleuTraceEntry(0, FORWARD, trainer.bleu(forward, FORWARD)))
    if rounds == 0:
        return BacktranslationResult(forward=forward, backward=None, baseline=None, bleu_trace=trace)

    baseline = trainer.train(c_p, BASELINE)
    trace.append(BleuTraceEntry(0, BASELINE, trainer.bleu(baseline, BASELINE)))

    backward: Optional[TrainingResult] = None
    history: List[RoundCorpora] = []
    previous_bleu = trace[-1].bleu
    for r in range(1, rounds + 1):
        synthetic = trainer.translate(forward, list(c_m.lines), lang1, lang2)
        n1 = ParallelCorpus.from_texts(synthetic, list(c_m.lines), lang2, lang1)
        tr_backward = c_p.union(n1)
        backward = trainer.train(tr_backward, BACKWARD)
        backward_bleu = trainer.bleu(backward, BACKWARD)
        trace.append(BleuTraceEntry(r, BACKWARD, backward_bleu))

        synthetic = trainer.translate(backward, c_t.sources, lang2, lang1)
        n2 = ParallelCorpus.from_texts(synthetic, c_t.sources, lang1, lang2)
        tr_forward = c_p.reversed().union(n2)
        forward = trainer.train(tr_forward, FORWARD)
        trace.append(BleuTraceEntry(r, FORWARD, trainer.bleu(forward, FORWARD)))

        history.append(RoundCorpora(r, n1, n2, len(tr_backward), len(tr_forward)))
        logger.info(
            f"Round {r}: |Tr<-| = {len(tr_backward)}, |Tr->| = {len(tr_forward)}, "
            f"backward BLEU {backward_bleu:.2f}"
        )
        if round_min_delta is not None and backward_bleu - previous_bleu < round_min_delta:
            logger.info(f"Back-translation converged after round {r}")
            break
        previous_bleu = backward_bleu

    return BacktranslationResult(
        forward=forward, backward=backward, baseline=baseline, rounds=history, bleu_trace=trace,
    )
