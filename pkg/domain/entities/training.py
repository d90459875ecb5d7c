import math
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Dict, Optional, Union


@dataclass(frozen=True)
class TransformerConfig:
    """エンコーダ・デコーダ型 Transformer の形状

    既定値は 6 層 / 8 ヘッド / 512 次元 / FFN 2048。dropout の既定は 0.1
    (0.6 はマニフェストで指定する)。
    """
    vocab_size_src: int
    vocab_size_tgt: int
    num_layers: int = 6
    num_heads: int = 8
    d_model: int = 512
    d_ffn: int = 2048
    dropout: float = 0.1
    max_positions: int = 256
    shared_embeddings: bool = False

    def __post_init__(self):
        if self.vocab_size_src < 1 or self.vocab_size_tgt < 1:
            raise ValueError("vocabulary sizes must be positive")
        if self.num_layers < 1 or self.num_heads < 1:
            raise ValueError("num_layers and num_heads must be positive")
        if self.d_model % self.num_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by num_heads ({self.num_heads})"
            )
        if self.d_ffn < 1:
            raise ValueError("d_ffn must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.max_positions < 2:
            raise ValueError("max_positions must be at least 2")
        if self.shared_embeddings and self.vocab_size_src != self.vocab_size_tgt:
            raise ValueError("shared embeddings need equal source and target vocabulary sizes")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TransformerConfig":
        return cls(**data)


class SamplingStrategy(str, Enum):
    """言語ペアの選択方法"""
    UNIFORM = "uniform"
    TEMPERATURE = "temperature"


@dataclass(frozen=True)
class TrainHyper:
    """最適化ハイパーパラメータ

    batch_size は 1 マイクロバッチの文数。1 回の更新で update_frequency 個の
    マイクロバッチの勾配を累積する。
    """
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    peak_lr: float = 5e-4
    warmup_updates: int = 8000
    label_smoothing: float = 0.1
    update_frequency: int = 15
    clip_norm: Optional[float] = None
    batch_size: int = 32
    sampling: SamplingStrategy = SamplingStrategy.UNIFORM
    temperature: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("betas must be in (0, 1)")
        if self.adam_eps <= 0:
            raise ValueError("adam_eps must be positive")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if self.warmup_updates < 1:
            raise ValueError("warmup_updates must be at least 1")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must be in [0, 1)")
        if self.update_frequency < 1:
            raise ValueError("update_frequency must be at least 1")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive when given")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        object.__setattr__(self, "sampling", SamplingStrategy(self.sampling))


@dataclass(frozen=True)
class FixedUpdates:
    """一定の更新回数で学習を打ち切る"""
    max_updates: int

    def __post_init__(self):
        if self.max_updates < 1:
            raise ValueError("max_updates must be at least 1")


@dataclass(frozen=True)
class Convergence:
    """検証損失が改善しなくなるまで学習する

    min_delta を超えて best を下回った場合のみ改善とみなす。
    """
    min_delta: float = 1e-3
    patience: int = 3

    def __post_init__(self):
        if self.min_delta < 0:
            raise ValueError("min_delta must be non-negative")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")


StoppingPolicy = Union[FixedUpdates, Convergence]


class StopDecision(str, Enum):
    CONTINUE = "continue"
    STOP = "stop"


@dataclass
class TrainState:
    """学習の進行状態

    best_valid_loss が改善するたびに epochs_since_best は 0 に戻る。
    """
    step: int = 0
    epoch: int = 0
    best_valid_loss: float = math.inf
    epochs_since_best: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if self.step < 0 or self.epoch < 0 or self.epochs_since_best < 0:
            raise ValueError("counters must be non-negative")

    def record_validation(self, valid_loss: float, min_delta: float = 0.0) -> bool:
        """エポック末の検証損失を記録する

        Returns:
            best が更新されたか
        """
        if valid_loss < self.best_valid_loss - min_delta:
            self.best_valid_loss = valid_loss
            self.epochs_since_best = 0
            return True
        self.epochs_since_best += 1
        return False

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        # JSON は inf を表現できない
        data["best_valid_loss"] = None if math.isinf(self.best_valid_loss) else self.best_valid_loss
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainState":
        data = dict(data)
        if data.get("best_valid_loss") is None:
            data["best_valid_loss"] = math.inf
        return cls(**data)


@dataclass(frozen=True)
class DecodeConfig:
    """推論時の探索設定

    出力長の上限は max_len_a * 入力長 + max_len_b。
    """
    beam_size: int = 20
    length_penalty: float = 1.0
    max_len_a: float = 1.2
    max_len_b: int = 10
    batch_size: int = 64

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be at least 1")
        if self.max_len_a < 0 or self.max_len_b < 1:
            raise ValueError("max_len_a must be non-negative and max_len_b at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")

    def max_len_for(self, source_length: int) -> int:
        return int(self.max_len_a * source_length) + self.max_len_b


@dataclass
class EpochRecord:
    """エポック単位の学習記録"""
    epoch: int
    step: int
    train_loss: float
    valid_loss: float
    lr: float
    improved: bool = False
