from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional


class RejectRule(str, Enum):
    """棄却ルール (評価順)"""
    EMPTY_SIDE = "EmptySide"
    LENGTH_BOUNDS = "LengthBounds"
    LENGTH_RATIO = "LengthRatio"
    SCRIPT_MISMATCH = "ScriptMismatch"
    DUPLICATE = "Duplicate"


@dataclass(frozen=True)
class FilterConfig:
    """ノイズフィルタリング設定

    長さはすべて空白区切りトークン数。
    """
    max_len: int = 250
    min_len: int = 1
    max_len_ratio: float = 3.0
    expected_script_fraction: float = 0.5
    drop_duplicates: bool = True

    def __post_init__(self):
        if self.min_len < 1:
            raise ValueError("min_len must be at least 1")
        if self.max_len < self.min_len:
            raise ValueError("max_len must not be smaller than min_len")
        if self.max_len_ratio < 1.0:
            raise ValueError("max_len_ratio must be at least 1.0")
        if not 0.0 <= self.expected_script_fraction <= 1.0:
            raise ValueError("expected_script_fraction must be between 0 and 1")


@dataclass(frozen=True)
class FilterVerdict:
    """ペア単位の判定結果 (Keep または Reject(rule))"""
    rule: Optional[RejectRule] = None

    @property
    def kept(self) -> bool:
        return self.rule is None

    @classmethod
    def keep(cls) -> "FilterVerdict":
        return cls(None)

    @classmethod
    def reject(cls, rule: RejectRule) -> "FilterVerdict":
        return cls(rule)


@dataclass
class FilterReport:
    """フィルタリング結果の集計

    retained_pairs + Σ rejected_by_rule = input_pairs が常に成り立つ。
    """
    input_pairs: int = 0
    retained_pairs: int = 0
    rejected_by_rule: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        rejected = sum(self.rejected_by_rule.values())
        if self.retained_pairs + rejected != self.input_pairs:
            raise ValueError(
                f"filter accounting broken: {self.retained_pairs} retained + "
                f"{rejected} rejected != {self.input_pairs} input"
            )

    @property
    def retained_fraction(self) -> float:
        # 空入力は何も失っていないので 1.0
        if self.input_pairs == 0:
            return 1.0
        return self.retained_pairs / self.input_pairs

    @property
    def total_rejected(self) -> int:
        return sum(self.rejected_by_rule.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "input_pairs": self.input_pairs,
            "retained_pairs": self.retained_pairs,
            "rejected_by_rule": dict(self.rejected_by_rule),
            "retained_fraction": self.retained_fraction,
        }
