import math
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import torch
from torch import Tensor

from domain.entities.training import TrainHyper


@dataclass
class AdamState:
    """Adam のモーメント (パラメータ名ごと) と更新回数"""
    step: int = 0
    exp_avg: Dict[str, Tensor] = field(default_factory=dict)
    exp_avg_sq: Dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def zeros_like(cls, params: Mapping[str, Tensor]) -> "AdamState":
        return cls(
            step=0,
            exp_avg={name: torch.zeros_like(p) for name, p in params.items()},
            exp_avg_sq={name: torch.zeros_like(p) for name, p in params.items()},
        )


def lr_at(step: int, hyper: TrainHyper) -> float:
    """逆平方根スケジュール (線形ウォームアップ付き)

    lr = peak_lr * min(step / warmup, sqrt(warmup / step))
    """
    if step < 1:
        raise ValueError("step must be at least 1")
    warmup = hyper.warmup_updates
    return hyper.peak_lr * min(step / warmup, math.sqrt(warmup / step))


@torch.no_grad()
def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[Tensor]],
    state: AdamState,
    hyper: TrainHyper,
    lr: float,
) -> AdamState:
    """バイアス補正付き Adam で params をその場で更新する

    勾配が None のパラメータは 0 勾配として扱う。
    """
    state.step += 1
    bias_correction1 = 1.0 - hyper.beta1 ** state.step
    bias_correction2 = 1.0 - hyper.beta2 ** state.step
    step_size = lr / bias_correction1

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = torch.zeros_like(param)
        if name not in state.exp_avg:
            state.exp_avg[name] = torch.zeros_like(param)
            state.exp_avg_sq[name] = torch.zeros_like(param)
        exp_avg = state.exp_avg[name]
        exp_avg_sq = state.exp_avg_sq[name]

        exp_avg.mul_(hyper.beta1).add_(grad, alpha=1.0 - hyper.beta1)
        exp_avg_sq.mul_(hyper.beta2).addcmul_(grad, grad, value=1.0 - hyper.beta2)
        denom = (exp_avg_sq.sqrt() / math.sqrt(bias_correction2)).add_(hyper.adam_eps)
        param.addcdiv_(exp_avg, denom, value=-step_size)
    return state


def clip_gradients(params: Mapping[str, Tensor], max_norm: float) -> float:
    """勾配の全体ノルムを max_norm 以下に抑え、クリップ前のノルムを返す"""
    total = torch.nn.utils.clip_grad_norm_(list(params.values()), max_norm)
    return float(total)
