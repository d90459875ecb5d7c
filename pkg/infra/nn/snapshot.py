"""torch のモデル・オプティマイザ状態と Checkpoint の相互変換"""
from typing import Dict, Optional

import numpy as np
import torch

from domain.entities.checkpoint import Checkpoint, OptimizerSnapshot
from domain.entities.training import TrainState
from domain.exceptions import CheckpointIncompatible
from infra.nn.optim import AdamState
from infra.nn.transformer import DTYPE, TransformerModel


def _to_numpy(tensor: torch.Tensor) -> np.ndarray:
    return tensor.detach().cpu().numpy().astype(np.float64, copy=True)


def snapshot(
    model: TransformerModel,
    train_state: TrainState,
    optimizer: Optional[AdamState] = None,
    provenance: Optional[Dict[str, str]] = None,
) -> Checkpoint:
    """現在のモデルと状態をコピーして Checkpoint にする"""
    parameters = {name: _to_numpy(p) for name, p in model.named_parameters()}
    optimizer_snapshot = None
    if optimizer is not None:
        optimizer_snapshot = OptimizerSnapshot(
            step=optimizer.step,
            exp_avg={k: _to_numpy(v) for k, v in optimizer.exp_avg.items()},
            exp_avg_sq={k: _to_numpy(v) for k, v in optimizer.exp_avg_sq.items()},
        )
    return Checkpoint(
        config=model.config,
        parameters=parameters,
        train_state=TrainState(**vars(train_state)),
        optimizer=optimizer_snapshot,
        provenance=dict(provenance or {}),
    )


@torch.no_grad()
def load_parameters(model: TransformerModel, checkpoint: Checkpoint) -> TransformerModel:
    """チェックポイントのパラメータをモデルへビット単位でコピーする

    Raises:
        CheckpointIncompatible: パラメータ名や形状が合わない場合
    """
    params = dict(model.named_parameters())
    if set(params) != set(checkpoint.parameters):
        missing = sorted(set(params) ^ set(checkpoint.parameters))
        raise CheckpointIncompatible(
            "checkpoint parameters do not match the model", {"mismatched": missing[:10]}
        )
    for name, param in params.items():
        array = checkpoint.parameters[name]
        if tuple(array.shape) != tuple(param.shape):
            raise CheckpointIncompatible(
                f"parameter {name} has shape {tuple(array.shape)}, model expects {tuple(param.shape)}"
            )
        param.copy_(torch.from_numpy(array).to(DTYPE))
    return model


def restore_model(checkpoint: Checkpoint) -> TransformerModel:
    """チェックポイントの設定でモデルを作り、パラメータを読み込む"""
    return load_parameters(TransformerModel(checkpoint.config), checkpoint)


def restore_optimizer(checkpoint: Checkpoint) -> Optional[AdamState]:
    if checkpoint.optimizer is None:
        return None
    return AdamState(
        step=checkpoint.optimizer.step,
        exp_avg={k: torch.from_numpy(v.copy()) for k, v in checkpoint.optimizer.exp_avg.items()},
        exp_avg_sq={k: torch.from_numpy(v.copy()) for k, v in checkpoint.optimizer.exp_avg_sq.items()},
    )
