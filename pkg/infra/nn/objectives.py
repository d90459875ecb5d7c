from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import torch
from torch import Tensor

from domain.entities.bpe import BOS_ID, EOS_ID, PAD_ID
from domain.exceptions import NonFiniteGradient
from infra.nn.transformer import TransformerModel


@dataclass
class Batch:
    """パディング済みのミニバッチ

    原文は ``ids + [EOS]``、訳文は ``[BOS] + ids + [EOS]``。デコーダ入力は
    tgt_ids[:, :-1]、予測対象は tgt_ids[:, 1:]。
    """
    src_ids: Tensor
    tgt_ids: Tensor
    src_lengths: Tensor
    tgt_lengths: Tensor

    @property
    def src_pad_mask(self) -> Tensor:
        return self.src_ids.eq(PAD_ID)

    @property
    def tgt_pad_mask(self) -> Tensor:
        return self.tgt_ids.eq(PAD_ID)

    @property
    def decoder_input(self) -> Tensor:
        return self.tgt_ids[:, :-1]

    @property
    def decoder_target(self) -> Tensor:
        return self.tgt_ids[:, 1:]

    @property
    def ntokens(self) -> int:
        return int(self.decoder_target.ne(PAD_ID).sum())

    def __len__(self) -> int:
        return self.src_ids.shape[0]


def _pad(rows: Sequence[Sequence[int]]) -> Tuple[Tensor, Tensor]:
    lengths = torch.tensor([len(row) for row in rows], dtype=torch.long)
    matrix = torch.full((len(rows), int(lengths.max())), PAD_ID, dtype=torch.long)
    for i, row in enumerate(rows):
        matrix[i, : len(row)] = torch.tensor(row, dtype=torch.long)
    return matrix, lengths


def make_batch(sources: Sequence[Sequence[int]], targets: Sequence[Sequence[int]]) -> Batch:
    """ID 列のリストからバッチを作る (BOS/EOS は自動で付与する)"""
    if len(sources) != len(targets):
        raise ValueError("sources and targets must have the same number of rows")
    if not sources:
        raise ValueError("cannot build an empty batch")
    src_ids, src_lengths = _pad([list(s) + [EOS_ID] for s in sources])
    tgt_ids, tgt_lengths = _pad([[BOS_ID] + list(t) + [EOS_ID] for t in targets])
    return Batch(src_ids, tgt_ids, src_lengths, tgt_lengths)


def forward(model: TransformerModel, batch: Batch, mode: str = "eval") -> Tensor:
    """バッチ全体の対数確率 (B, T-1, V) を求める

    mode が ``"train"`` のときだけ dropout が有効になる。
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode: {mode}")
    model.train(mode == "train")
    return model(batch.src_ids, batch.decoder_input)


def loss_label_smoothed(
    log_probs: Tensor,
    targets: Tensor,
    eps: float,
    pad_id: int = PAD_ID,
    reduction: str = "mean",
) -> Tuple[Tensor, int]:
    """ラベル平滑化付き交差エントロピー

    トークンごとに (1 - eps) * NLL(正解) + eps * mean_v NLL(v) を求め、
    パディング以外で平均 (reduction="sum" なら合計) する。

    Returns:
        (損失, パディング以外のトークン数)
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must be in [0, 1)")
    nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    smooth = -log_probs.mean(dim=-1)
    per_token = (1.0 - eps) * nll + eps * smooth

    keep = targets.ne(pad_id)
    ntokens = int(keep.sum())
    total = per_token.masked_select(keep).sum()
    if reduction == "sum":
        return total, ntokens
    if reduction != "mean":
        raise ValueError(f"unknown reduction: {reduction}")
    return total / max(ntokens, 1), ntokens


def accumulate_gradients(model: TransformerModel, batch: Batch, eps: float) -> Tuple[float, int]:
    """合計損失の勾配を既存の .grad に加算する

    Returns:
        (合計損失, トークン数)
    """
    log_probs = forward(model, batch, mode="train")
    loss, ntokens = loss_label_smoothed(log_probs, batch.decoder_target, eps, reduction="sum")
    loss.backward()
    return float(loss.detach()), ntokens


def check_finite_gradients(model: TransformerModel) -> None:
    """Raises: NonFiniteGradient: NaN/inf を含む勾配がある場合"""
    for name, param in model.named_parameters():
        if param.grad is not None and not torch.isfinite(param.grad).all():
            raise NonFiniteGradient(f"non-finite gradient in {name}", {"parameter": name})


def backward(
    model: TransformerModel,
    batch: Batch,
    eps: float = 0.1,
    mode: str = "eval",
) -> Dict[str, Tensor]:
    """平均損失に対する全パラメータの勾配を求める

    既存の .grad は破棄する。勾配検査のため既定では dropout を無効にする。

    Raises:
        NonFiniteGradient: 勾配に NaN/inf が含まれる場合
    """
    model.zero_grad(set_to_none=True)
    log_probs = forward(model, batch, mode=mode)
    loss, _ = loss_label_smoothed(log_probs, batch.decoder_target, eps)
    loss.backward()
    check_finite_gradients(model)
    return {
        name: param.grad.detach().clone() if param.grad is not None else torch.zeros_like(param)
        for name, param in model.named_parameters()
    }
