import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from domain.entities.checkpoint import Checkpoint
from domain.entities.dataset import PairDataset
from domain.entities.training import EpochRecord, StoppingPolicy, TrainHyper, TrainState
from domain.exceptions import CheckpointIncompatible
from infra.nn.optim import AdamState
from infra.nn.snapshot import restore_model, restore_optimizer
from infra.nn.transformer import TransformerModel
from usecases.training_service import MetricsSink, TrainingResult, train_multiway

logger = logging.getLogger(__name__)


@dataclass
class AdaptationResult:
    """ドメイン適応の結果 (model は適応後の最終状態、best は領域内検証で最良のもの)"""
    model: TransformerModel
    best: Checkpoint
    last: Checkpoint
    history: List[EpochRecord] = field(default_factory=list)


def check_compatible(base: Checkpoint, datasets: Sequence[PairDataset]) -> None:
    """Raises: CheckpointIncompatible: 語彙サイズがチェックポイントと合わない場合"""
    for dataset in datasets:
        if (dataset.src_vocab_size, dataset.tgt_vocab_size) != (
            base.config.vocab_size_src,
            base.config.vocab_size_tgt,
        ):
            raise CheckpointIncompatible(
                f"dataset {dataset.name} uses vocabularies of size "
                f"{dataset.src_vocab_size}/{dataset.tgt_vocab_size}, checkpoint expects "
                f"{base.config.vocab_size_src}/{base.config.vocab_size_tgt}",
                {"dataset": dataset.name},
            )


def domain_adapt(
    base: Checkpoint,
    in_domain: Sequence[PairDataset],
    epochs: int,
    hyper: TrainHyper,
    valid: Sequence[PairDataset] = (),
    stopping: Optional[StoppingPolicy] = None,
    seed: int = 0,
    reuse_optimizer: bool = False,
    metrics: Optional[MetricsSink] = None,
) -> AdaptationResult:
    """汎用モデルのチェックポイントから領域内データで学習を続ける

    検証の最良値は適応中のエポックだけで追跡し直す。学習率スケジュールは
    ベースの更新回数から続ける。reuse_optimizer が False なら重みだけを引き継ぐ。
    epochs = 0 ならベースと同一のモデルを返す。

    Raises:
        CheckpointIncompatible: 語彙や設定がチェックポイントと合わない場合
    """
    check_compatible(base, list(in_domain) + list(valid))
    model = restore_model(base)

    if epochs == 0:
        logger.info("Zero adaptation epochs; returning the base checkpoint unchanged")
        return AdaptationResult(model=model, best=base, last=base)

    optimizer: Optional[AdamState] = restore_optimizer(base) if reuse_optimizer else None
    if reuse_optimizer and optimizer is None:
        logger.warning("Base checkpoint has no optimizer state; starting from fresh moments")
    state = TrainState(step=base.train_state.step, rng_seed=seed)

    result: TrainingResult = train_multiway(
        model, in_domain, hyper, epochs, valid,
        stopping=stopping, seed=seed, metrics=metrics, optimizer=optimizer, state=state,
    )
    logger.info(
        f"Adapted for {len(result.history)} epoch(s); best in-domain valid loss "
        f"{result.state.best_valid_loss:.4f}"
    )
    return AdaptationResult(model=result.model, best=result.best, last=result.last, history=result.history)
