import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import torch

from domain.entities.bpe import BpeModel
from domain.entities.checkpoint import Checkpoint
from domain.entities.corpus import ParallelCorpus
from domain.entities.dataset import PairDataset
from domain.entities.training import (
    Convergence,
    EpochRecord,
    FixedUpdates,
    SamplingStrategy,
    StopDecision,
    StoppingPolicy,
    TrainHyper,
    TrainState,
)
from domain.exceptions import EmptyDataset
from infra.nn.objectives import (
    Batch,
    accumulate_gradients,
    check_finite_gradients,
    forward,
    loss_label_smoothed,
    make_batch,
)
from infra.nn.optim import AdamState, adam_step, clip_gradients, lr_at
from infra.nn.snapshot import snapshot
from infra.nn.transformer import TransformerModel
from usecases.tokenizer_service import bpe_encode, inject_target_token

logger = logging.getLogger(__name__)

MetricsSink = Callable[[Dict], None]

# 乱数ストリームの識別子 (シードと組み合わせる)
_SELECT_STREAM = 0
_BATCH_STREAM = 1


def build_pair_dataset(
    corpus: ParallelCorpus,
    pair_id: int,
    src_bpe: BpeModel,
    tgt_bpe: BpeModel,
    weight: float = 1.0,
    tag: bool = True,
    max_positions: Optional[int] = None,
) -> PairDataset:
    """対訳コーパスをタグ付け・サブワード化して PairDataset にする

    max_positions を超える文は末尾を切り詰める。
    """
    limit = None if max_positions is None else max_positions - 1
    examples = []
    truncated = 0
    for pair in corpus.pairs:
        if tag:
            pair = inject_target_token(pair)
        src = bpe_encode(src_bpe, pair.source, pair.source_lang).ids
        tgt = bpe_encode(tgt_bpe, pair.target, pair.target_lang).ids
        if limit is not None and (len(src) > limit or len(tgt) > limit):
            truncated += 1
            src, tgt = src[:limit], tgt[:limit]
        examples.append((src, tgt))
    if truncated:
        logger.warning(f"Truncated {truncated} long pairs in {corpus.name} to {limit} subwords")
    return PairDataset(
        pair_id=pair_id,
        source_lang=corpus.source_lang,
        target_lang=corpus.target_lang,
        examples=tuple(examples),
        src_vocab_size=len(src_bpe),
        tgt_vocab_size=len(tgt_bpe),
        weight=weight,
        tagged=tag,
    )


def sampling_weights(datasets: Sequence[PairDataset], hyper: TrainHyper) -> np.ndarray:
    """言語ペアの選択確率

    uniform は各ペアの weight に比例 (既定の weight 1 なら 1/M)。temperature は
    weight * |C_m|^(1/T) に比例する。
    """
    weights = np.array([d.weight for d in datasets], dtype=np.float64)
    if hyper.sampling == SamplingStrategy.TEMPERATURE:
        sizes = np.array([len(d) for d in datasets], dtype=np.float64)
        weights = weights * sizes ** (1.0 / hyper.temperature)
    if weights.sum() <= 0:
        raise EmptyDataset("all language pairs have zero sampling weight")
    return weights / weights.sum()


class PairSampler:
    """更新ごとに言語ペアを選ぶ"""

    def __init__(self, weights: np.ndarray, seed: int):
        self.weights = np.asarray(weights, dtype=np.float64)
        self._rng = np.random.default_rng([seed, _SELECT_STREAM])

    def next_index(self) -> int:
        return int(self._rng.choice(len(self.weights), p=self.weights))


class BatchStream:
    """1 データセットのマイクロバッチを無限に供給する

    1 周ごとに順序をシャッフルする。乱数はデータセットごとに独立。
    """

    def __init__(self, dataset: PairDataset, batch_size: int, seed: int):
        if len(dataset) == 0:
            raise EmptyDataset(f"dataset {dataset.pair_id} ({dataset.name}) is empty")
        self.dataset = dataset
        self.batch_size = batch_size
        self._rng = np.random.default_rng([seed, _BATCH_STREAM, dataset.pair_id])
        self._iterator = self._batches()

    def _batches(self) -> Iterator[Batch]:
        while True:
            order = self._rng.permutation(len(self.dataset))
            for start in range(0, len(order), self.batch_size):
                rows = [self.dataset.examples[i] for i in order[start:start + self.batch_size]]
                yield make_batch([s for s, _ in rows], [t for _, t in rows])

    def next_batch(self) -> Batch:
        return next(self._iterator)


def early_stop(state: TrainState, patience: int) -> StopDecision:
    """epochs_since_best が patience 以上なら停止"""
    if patience < 1:
        raise ValueError("patience must be at least 1")
    return StopDecision.STOP if state.epochs_since_best >= patience else StopDecision.CONTINUE


@torch.no_grad()
def evaluate_loss(model: TransformerModel, datasets: Sequence[PairDataset], hyper: TrainHyper) -> float:
    """データセット群のトークン平均ラベル平滑化損失 (dropout なし)"""
    total = 0.0
    ntokens = 0
    for dataset in datasets:
        for start in range(0, len(dataset), hyper.batch_size):
            rows = dataset.examples[start:start + hyper.batch_size]
            batch = make_batch([s for s, _ in rows], [t for _, t in rows])
            log_probs = forward(model, batch, mode="eval")
            loss, n = loss_label_smoothed(log_probs, batch.decoder_target, hyper.label_smoothing, reduction="sum")
            total += float(loss)
            ntokens += n
    if ntokens == 0:
        raise EmptyDataset("validation data contains no target tokens")
    return total / ntokens


@dataclass
class TrainingResult:
    """学習の結果

    model と optimizer は学習終了時点のもの。best は検証損失が最小だった
    エポックのチェックポイント、last は終了時点のチェックポイント。
    """
    model: TransformerModel
    optimizer: AdamState
    state: TrainState
    best: Checkpoint
    last: Checkpoint
    history: List[EpochRecord] = field(default_factory=list)

    @property
    def train_losses(self) -> List[float]:
        return [record.train_loss for record in self.history]


def _provenance(datasets: Sequence[PairDataset]) -> Dict[str, str]:
    return {f"dataset.{d.pair_id}.{d.name}": d.fingerprint for d in datasets}


def _run_training(
    model: TransformerModel,
    datasets: Sequence[PairDataset],
    select: Callable[[], PairDataset],
    hyper: TrainHyper,
    epochs: int,
    valid: Sequence[PairDataset],
    stopping: Optional[StoppingPolicy],
    seed: int,
    metrics: Optional[MetricsSink],
    optimizer: Optional[AdamState],
    state: Optional[TrainState],
) -> TrainingResult:
    if epochs < 0:
        raise ValueError("epochs must be non-negative")
    total_pairs = sum(len(d) for d in datasets)
    if total_pairs == 0:
        raise EmptyDataset("training data is empty")
    if not valid:
        logger.warning("No validation data given; validating on the training data")
        valid = datasets
    stopping = stopping or Convergence(min_delta=0.0, patience=3)

    torch.manual_seed(seed)
    params = dict(model.named_parameters())
    optimizer = optimizer or AdamState.zeros_like(params)
    state = state or TrainState(rng_seed=seed)
    streams = {d.pair_id: BatchStream(d, hyper.batch_size, seed) for d in datasets if len(d) > 0}
    updates_per_epoch = max(1, math.ceil(total_pairs / (hyper.batch_size * hyper.update_frequency)))
    provenance = _provenance(datasets)
    min_delta = stopping.min_delta if isinstance(stopping, Convergence) else 0.0

    history: List[EpochRecord] = []
    best: Optional[Checkpoint] = None
    lr = 0.0
    logger.info(
        f"Training on {len(datasets)} language pair(s), {total_pairs} pairs, "
        f"{updates_per_epoch} updates per epoch"
    )

    for _ in range(epochs):
        state.epoch += 1
        epoch_loss = 0.0
        epoch_tokens = 0
        budget_spent = False

        for _ in range(updates_per_epoch):
            model.zero_grad(set_to_none=True)
            # 1 回の更新に使うマイクロバッチはすべて同じ言語ペアから取る
            dataset = select()
            if dataset.pair_id not in streams:
                raise EmptyDataset(f"dataset {dataset.pair_id} ({dataset.name}) is empty")
            update_loss = 0.0
            update_tokens = 0
            for _ in range(hyper.update_frequency):
                loss, ntokens = accumulate_gradients(
                    model, streams[dataset.pair_id].next_batch(), hyper.label_smoothing
                )
                update_loss += loss
                update_tokens += ntokens

            # 全マイクロバッチのトークン平均にそろえる
            for param in params.values():
                if param.grad is not None:
                    param.grad.div_(max(update_tokens, 1))
            check_finite_gradients(model)
            if hyper.clip_norm is not None:
                clip_gradients(params, hyper.clip_norm)

            state.step += 1
            lr = lr_at(state.step, hyper)
            adam_step(params, {name: p.grad for name, p in params.items()}, optimizer, hyper, lr)

            epoch_loss += update_loss
            epoch_tokens += update_tokens
            if metrics is not None:
                metrics({
                    "kind": "update",
                    "epoch": state.epoch,
                    "step": state.step,
                    "pair_id": dataset.pair_id,
                    "train_loss": update_loss / max(update_tokens, 1),
                    "lr": lr,
                })
            logger.debug(f"step {state.step}: loss {update_loss / max(update_tokens, 1):.4f} lr {lr:.3e}")

            if isinstance(stopping, FixedUpdates) and state.step >= stopping.max_updates:
                budget_spent = True
                break

        valid_loss = evaluate_loss(model, valid, hyper)
        improved = state.record_validation(valid_loss, min_delta)
        if improved:
            best = snapshot(model, state, optimizer, provenance)
        record = EpochRecord(
            epoch=state.epoch,
            step=state.step,
            train_loss=epoch_loss / max(epoch_tokens, 1),
            valid_loss=valid_loss,
            lr=lr,
            improved=improved,
        )
        history.append(record)
        if metrics is not None:
            metrics({
                "kind": "epoch",
                "epoch": record.epoch,
                "step": record.step,
                "train_loss": record.train_loss,
                "valid_loss": record.valid_loss,
                "best_valid_loss": state.best_valid_loss,
                "lr": record.lr,
            })
        logger.info(
            f"epoch {record.epoch}: train {record.train_loss:.4f} valid {record.valid_loss:.4f} "
            f"(best {state.best_valid_loss:.4f}, step {state.step})"
        )

        if budget_spent:
            logger.info(f"Update budget of {stopping.max_updates} reached")
            break
        if isinstance(stopping, Convergence) and early_stop(state, stopping.patience) == StopDecision.STOP:
            logger.info(f"Early stopping: no improvement for {state.epochs_since_best} epochs")
            break

    last = snapshot(model, state, optimizer, provenance)
    return TrainingResult(
        model=model,
        optimizer=optimizer,
        state=state,
        best=best if best is not None else last,
        last=last,
        history=history,
    )


def train_multiway(
    model: TransformerModel,
    datasets: Sequence[PairDataset],
    hyper: TrainHyper,
    epochs: int,
    valid: Sequence[PairDataset] = (),
    stopping: Optional[StoppingPolicy] = None,
    seed: int = 0,
    metrics: Optional[MetricsSink] = None,
    optimizer: Optional[AdamState] = None,
    state: Optional[TrainState] = None,
) -> TrainingResult:
    """複数言語ペアの共同学習

    更新ごとにペア m を重みに従って 1 つ選び、そのペアの update_frequency 個の
    マイクロバッチの勾配を累積してから 1 回更新する。エポックごとに検証損失を測り、最良の
    チェックポイントを残す。

    Args:
        model: 学習するモデル (その場で更新される)
        datasets: 言語ペアごとのデータセット
        hyper: 最適化ハイパーパラメータ
        epochs: 最大エポック数
        valid: 検証データ (空なら学習データで検証する)
        stopping: 打ち切り方針 (既定は patience 3 の早期終了)
        seed: 乱数シード
        metrics: 更新・エポックごとの記録を受け取る関数
        optimizer: 引き継ぐオプティマイザ状態
        state: 引き継ぐ学習状態

    Raises:
        EmptyDataset: データセットが無い、または空の場合
    """
    if not datasets:
        raise EmptyDataset("no training datasets given")
    if len(datasets) > 1 and not all(d.tagged for d in datasets):
        raise ValueError("multiway training needs target-language tags on every dataset")
    if len({d.pair_id for d in datasets}) != len(datasets):
        raise ValueError("pair ids must be unique")

    sampler = PairSampler(sampling_weights(datasets, hyper), seed)
    return _run_training(
        model, datasets, lambda: datasets[sampler.next_index()], hyper, epochs, valid,
        stopping, seed, metrics, optimizer, state,
    )


def train_bilingual(
    model: TransformerModel,
    dataset: PairDataset,
    hyper: TrainHyper,
    epochs: int,
    valid: Sequence[PairDataset] = (),
    stopping: Optional[StoppingPolicy] = None,
    seed: int = 0,
    metrics: Optional[MetricsSink] = None,
    optimizer: Optional[AdamState] = None,
    state: Optional[TrainState] = None,
) -> TrainingResult:
    """1 言語ペアだけの通常の学習"""
    return _run_training(
        model, [dataset], lambda: dataset, hyper, epochs, valid,
        stopping, seed, metrics, optimizer, state,
    )
