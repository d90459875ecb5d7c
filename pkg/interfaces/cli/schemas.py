from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from domain.entities.experiment import (
    AugmentSource,
    BacktranslationPlan,
    CorpusSource,
    ExperimentPlan,
    ModelShape,
    MonoSource,
    TokenizerPlan,
)
from domain.entities.filtering import FilterConfig
from domain.entities.language import GroupName, LangCode
from domain.entities.training import (
    Convergence,
    DecodeConfig,
    FixedUpdates,
    SamplingStrategy,
    StoppingPolicy,
    TrainHyper,
)
from domain.exceptions import FieldTypeError, ManifestError, MissingRequired, UnknownKey
from domain.repositories.corpus_repository import PathLike


class StrictSchema(BaseModel):
    """未知のキーを拒否する共通基底"""
    model_config = ConfigDict(extra="forbid")


class AugmentSection(StrictSchema):
    """関連言語データ拡張の高資源側コーパス"""
    source: str = Field(..., description="高資源コーパスの原文ファイル")
    target: str = Field(..., description="高資源コーパスの訳文ファイル")
    target_lang: LangCode = Field(..., description="高資源コーパスの訳文言語")

    def to_entity(self) -> AugmentSource:
        return AugmentSource(self.source, self.target, self.target_lang)


class CorpusSection(StrictSchema):
    """対訳コーパスの指定"""
    source: str = Field(..., description="原文ファイル")
    target: str = Field(..., description="訳文ファイル")
    source_lang: LangCode = Field(..., description="原文言語")
    target_lang: LangCode = Field(..., description="訳文言語")
    weight: float = Field(default=1.0, ge=0, description="言語ペアのサンプリング重み")
    augment_from: Optional[AugmentSection] = Field(default=None, description="翻字して追加する関連言語コーパス")

    def to_entity(self) -> CorpusSource:
        return CorpusSource(
            source_path=self.source,
            target_path=self.target,
            source_lang=self.source_lang,
            target_lang=self.target_lang,
            weight=self.weight,
            augment=self.augment_from.to_entity() if self.augment_from else None,
        )


class MonoSection(StrictSchema):
    path: str = Field(..., description="単言語コーパスのファイル")
    lang: LangCode = Field(..., description="言語")

    def to_entity(self) -> MonoSource:
        return MonoSource(self.path, self.lang)


class CorporaSection(StrictSchema):
    """コーパス一式"""
    normalize: Literal["nfc", "none"] = Field(default="nfc", description="読み込み時の Unicode 正規化")
    group: Optional[GroupName] = Field(default=None, description="共同学習する言語グループ (A/B)")
    tag: bool = Field(default=True, description="原文に <2xx> タグを付ける")
    train: List[CorpusSection] = Field(..., min_length=1, description="学習コーパス")
    valid: List[CorpusSection] = Field(default_factory=list, description="検証コーパス")
    test: List[CorpusSection] = Field(default_factory=list, description="評価コーパス")


class FilterSection(StrictSchema):
    """ノイズフィルタリング設定"""
    max_len: int = Field(default=250, ge=1)
    min_len: int = Field(default=1, ge=1)
    max_len_ratio: float = Field(default=3.0, ge=1.0)
    expected_script_fraction: float = Field(default=0.5, ge=0.0, le=1.0)
    drop_duplicates: bool = True
    workers: int = Field(default=1, ge=1, description="判定の並列数")

    def to_entity(self) -> FilterConfig:
        return FilterConfig(
            max_len=self.max_len,
            min_len=self.min_len,
            max_len_ratio=self.max_len_ratio,
            expected_script_fraction=self.expected_script_fraction,
            drop_duplicates=self.drop_duplicates,
        )


class TokenizerSection(StrictSchema):
    num_merges: int = Field(default=8000, ge=0, description="BPE マージ回数")
    vocab_size: Optional[int] = Field(default=None, ge=1, description="語彙サイズの上限")
    joint: bool = Field(default=False, description="原文・訳文で BPE を共有する")

    def to_entity(self) -> TokenizerPlan:
        return TokenizerPlan(self.num_merges, self.vocab_size, self.joint)


class ModelSection(StrictSchema):
    """Transformer の形状"""
    num_layers: int = Field(default=6, ge=1)
    num_heads: int = Field(default=8, ge=1)
    d_model: int = Field(default=512, ge=1)
    d_ffn: int = Field(default=2048, ge=1)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    max_positions: int = Field(default=256, ge=2)

    def to_entity(self) -> ModelShape:
        return ModelShape(**self.model_dump())


class TrainSection(StrictSchema):
    """最適化ハイパーパラメータ"""
    epochs: int = Field(default=12, ge=0)
    batch_size: int = Field(default=32, ge=1)
    update_frequency: int = Field(default=15, ge=1)
    betas: Tuple[float, float] = (0.9, 0.98)
    adam_eps: float = Field(default=1e-9, gt=0)
    peak_lr: float = Field(default=5e-4, gt=0)
    warmup_updates: int = Field(default=8000, ge=1)
    label_smoothing: float = Field(default=0.1, ge=0.0, lt=1.0)
    clip_norm: Optional[float] = Field(default=None, gt=0)
    sampling: SamplingStrategy = SamplingStrategy.UNIFORM
    temperature: float = Field(default=1.0, gt=0)
    reuse_optimizer: bool = Field(default=False, description="追加学習でオプティマイザ状態も引き継ぐ")

    def to_entity(self) -> TrainHyper:
        return TrainHyper(
            beta1=self.betas[0],
            beta2=self.betas[1],
            adam_eps=self.adam_eps,
            peak_lr=self.peak_lr,
            warmup_updates=self.warmup_updates,
            label_smoothing=self.label_smoothing,
            update_frequency=self.update_frequency,
            clip_norm=self.clip_norm,
            batch_size=self.batch_size,
            sampling=self.sampling,
            temperature=self.temperature,
        )


class StoppingSection(StrictSchema):
    """打ち切り方針 (convergence: 検証損失の停滞 / fixed_updates: 更新回数)"""
    kind: Literal["convergence", "fixed_updates"] = "convergence"
    min_delta: float = Field(default=1e-3, ge=0)
    patience: int = Field(default=3, ge=1)
    max_updates: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check_budget(self):
        if self.kind == "fixed_updates" and self.max_updates is None:
            raise ValueError("max_updates is required for fixed_updates")
        return self

    def to_entity(self) -> StoppingPolicy:
        if self.kind == "fixed_updates":
            return FixedUpdates(self.max_updates)
        return Convergence(self.min_delta, self.patience)


class DecodeSection(StrictSchema):
    beam_size: int = Field(default=20, ge=1)
    length_penalty: float = 1.0
    max_len_a: float = Field(default=1.2, ge=0)
    max_len_b: int = Field(default=10, ge=1)
    batch_size: int = Field(default=64, ge=1)

    def to_entity(self) -> DecodeConfig:
        return DecodeConfig(**self.model_dump())


class EvalSection(StrictSchema):
    smooth: bool = Field(default=False, description="BLEU のイプシロン平滑化")


class BacktranslationSection(StrictSchema):
    """反復逆翻訳の設定"""
    mono: MonoSection = Field(..., description="C_p の訳文言語の単言語コーパス")
    source_pool: CorpusSection = Field(..., description="原文側を逆向きモデルで訳すコーパス")
    rounds: int = Field(default=1, ge=0)
    round_min_delta: Optional[float] = Field(default=None, ge=0)
    mono_ratio: Optional[float] = Field(default=None, gt=0, description="単言語コーパスを |C_p| の何倍に間引くか")

    def to_entity(self) -> BacktranslationPlan:
        return BacktranslationPlan(
            mono=self.mono.to_entity(),
            c_t=self.source_pool.to_entity(),
            rounds=self.rounds,
            round_min_delta=self.round_min_delta,
            mono_ratio=self.mono_ratio,
        )


class RunManifest(StrictSchema):
    """実行マニフェスト

    既定値はすべて解決済みマニフェストに書き出される。
    """
    output_dir: str = Field(..., description="成果物ディレクトリ")
    seed: int = Field(default=0, ge=0)
    corpora: CorporaSection
    filter: FilterSection = Field(default_factory=FilterSection)
    tokenizer: TokenizerSection = Field(default_factory=TokenizerSection)
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainSection = Field(default_factory=TrainSection)
    stopping: StoppingSection = Field(default_factory=StoppingSection)
    decode: DecodeSection = Field(default_factory=DecodeSection)
    eval: EvalSection = Field(default_factory=EvalSection)
    backtranslation: Optional[BacktranslationSection] = None

    def to_entity(self) -> ExperimentPlan:
        return ExperimentPlan(
            output_dir=self.output_dir,
            train=tuple(c.to_entity() for c in self.corpora.train),
            valid=tuple(c.to_entity() for c in self.corpora.valid),
            test=tuple(c.to_entity() for c in self.corpora.test),
            seed=self.seed,
            normalize=self.corpora.normalize,
            group=self.corpora.group,
            tag=self.corpora.tag,
            filter=self.filter.to_entity(),
            workers=self.filter.workers,
            tokenizer=self.tokenizer.to_entity(),
            model=self.model.to_entity(),
            hyper=self.train.to_entity(),
            epochs=self.train.epochs,
            stopping=self.stopping.to_entity(),
            decode=self.decode.to_entity(),
            bleu_smooth=self.eval.smooth,
            reuse_optimizer=self.train.reuse_optimizer,
            backtranslation=self.backtranslation.to_entity() if self.backtranslation else None,
        )


class ErrorResponse(BaseModel):
    """エラー出力スキーマ (標準エラーに 1 行の JSON で出す)"""
    error: Dict[str, Any] = Field(..., description="エラー情報")

    @classmethod
    def create(cls, code: str, message: str, details: Optional[Dict[str, Any]] = None) -> "ErrorResponse":
        """エラー出力を作成する"""
        return cls(error={"code": code, "message": message, "details": details or {}})


def _merge(base: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def manifest_error(exc: ValidationError) -> ManifestError:
    """pydantic の検証エラーを最初のエラーに対応するドメイン例外に変換する"""
    first = exc.errors()[0]
    field = ".".join(str(loc) for loc in first["loc"]) or "general"
    details = {"field": field, "reason": first["msg"], "error_count": exc.error_count()}
    if first["type"] == "extra_forbidden":
        return UnknownKey(f"unknown manifest key '{field}'", details)
    if first["type"] == "missing":
        return MissingRequired(f"missing required manifest key '{field}'", details)
    return FieldTypeError(f"invalid value for '{field}': {first['msg']}", details)


def resolve_manifest(path: PathLike, overrides: Optional[Mapping[str, Any]] = None) -> RunManifest:
    """マニフェストを読み込み、既定値を埋めて検証する

    Args:
        path: YAML マニフェスト
        overrides: コマンドライン引数による上書き (入れ子の辞書)

    Returns:
        既定値を展開した RunManifest

    Raises:
        UnknownKey: 未知のキーがある場合
        MissingRequired: 必須キーが無い場合
        FieldTypeError: 値の型や範囲が不正な場合
    """
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as e:
        raise FieldTypeError(f"manifest {path} is not valid YAML: {e}", {"field": "general"}) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise FieldTypeError(f"manifest {path} must be a mapping", {"field": "general"})
    if overrides:
        data = _merge(data, overrides)
    try:
        return RunManifest.model_validate(data)
    except ValidationError as e:
        raise manifest_error(e) from None


def dump_manifest(manifest: RunManifest) -> str:
    """解決済みマニフェストを YAML にする (キーは辞書順)"""
    return yaml.safe_dump(
        manifest.model_dump(mode="json"),
        sort_keys=True,
        allow_unicode=True,
        default_flow_style=False,
    )
