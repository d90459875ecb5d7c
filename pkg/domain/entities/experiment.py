from dataclasses import dataclass, field
from typing import Optional, Tuple

from domain.entities.filtering import FilterConfig
from domain.entities.language import GroupName, LangCode
from domain.entities.training import (
    Convergence,
    DecodeConfig,
    StoppingPolicy,
    TrainHyper,
    TransformerConfig,
)


@dataclass(frozen=True)
class AugmentSource:
    """関連言語データ拡張に使う高資源側コーパス"""
    source_path: str
    target_path: str
    target_lang: LangCode


@dataclass(frozen=True)
class CorpusSource:
    """ファイル上の対訳コーパスの指定"""
    source_path: str
    target_path: str
    source_lang: LangCode
    target_lang: LangCode
    weight: float = 1.0
    augment: Optional[AugmentSource] = None

    @property
    def name(self) -> str:
        return f"{self.source_lang}-{self.target_lang}"


@dataclass(frozen=True)
class MonoSource:
    path: str
    lang: LangCode


@dataclass(frozen=True)
class TokenizerPlan:
    """BPE の学習方法

    joint なら原文側と訳文側で 1 つのモデルを共有する。
    """
    num_merges: int = 8000
    vocab_size: Optional[int] = None
    joint: bool = False

    def __post_init__(self):
        if self.num_merges < 0:
            raise ValueError("num_merges must be non-negative")


@dataclass(frozen=True)
class ModelShape:
    """語彙サイズを除いたモデルの形状"""
    num_layers: int = 6
    num_heads: int = 8
    d_model: int = 512
    d_ffn: int = 2048
    dropout: float = 0.1
    max_positions: int = 256

    def config(self, vocab_size_src: int, vocab_size_tgt: int, shared: bool = False) -> TransformerConfig:
        return TransformerConfig(
            vocab_size_src=vocab_size_src,
            vocab_size_tgt=vocab_size_tgt,
            num_layers=self.num_layers,
            num_heads=self.num_heads,
            d_model=self.d_model,
            d_ffn=self.d_ffn,
            dropout=self.dropout,
            max_positions=self.max_positions,
            shared_embeddings=shared,
        )


@dataclass(frozen=True)
class BacktranslationPlan:
    """逆翻訳の設定

    mono_ratio を指定すると単言語コーパスを |C_p| * mono_ratio 行に間引く。
    """
    mono: MonoSource
    c_t: CorpusSource
    rounds: int = 1
    round_min_delta: Optional[float] = None
    mono_ratio: Optional[float] = None

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if self.mono_ratio is not None and self.mono_ratio <= 0:
            raise ValueError("mono_ratio must be positive")


@dataclass(frozen=True)
class ExperimentPlan:
    """1 回の実行を完全に決める設定 (解決済みマニフェストの写し)"""
    output_dir: str
    train: Tuple[CorpusSource, ...]
    valid: Tuple[CorpusSource, ...] = ()
    test: Tuple[CorpusSource, ...] = ()
    seed: int = 0
    normalize: str = "nfc"
    group: Optional[GroupName] = None
    tag: bool = True
    filter: FilterConfig = field(default_factory=FilterConfig)
    workers: int = 1
    tokenizer: TokenizerPlan = field(default_factory=TokenizerPlan)
    model: ModelShape = field(default_factory=ModelShape)
    hyper: TrainHyper = field(default_factory=TrainHyper)
    epochs: int = 12
    stopping: StoppingPolicy = field(default_factory=Convergence)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    bleu_smooth: bool = False
    reuse_optimizer: bool = False
    backtranslation: Optional[BacktranslationPlan] = None

    def __post_init__(self):
        if not self.train:
            raise ValueError("at least one training corpus is required")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
