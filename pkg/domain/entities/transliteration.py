from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

from domain.entities.language import UnicodeBlock


@dataclass(frozen=True)
class ScriptMap:
    """ブロック間オフセットによる翻字表

    exceptions はオフセット写像より優先される。値が None の文字は対応字が
    無いものとしてそのまま通す。
    """
    from_block: UnicodeBlock
    to_block: UnicodeBlock
    exceptions: Dict[int, Optional[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.from_block.width != self.to_block.width:
            raise ValueError(
                f"blocks {self.from_block.name} and {self.to_block.name} differ in width"
            )

    @property
    def offset(self) -> int:
        return self.to_block.start - self.from_block.start

    def lookup(self, codepoint: int) -> Optional[int]:
        """対応するコードポイントを返す。対応字が無ければ None"""
        if codepoint not in self.from_block:
            return None
        if codepoint in self.exceptions:
            return self.exceptions[codepoint]
        return codepoint + self.offset


@dataclass(frozen=True)
class TransliterationCandidate:
    """翻字候補 (M_i, K_i)"""
    text: str
    likelihood: float

    def __post_init__(self):
        if not 0.0 <= self.likelihood <= 1.0:
            raise ValueError("likelihood must be between 0 and 1")


@dataclass(frozen=True)
class TransliterationResult:
    """尤度の降順に並んだ翻字候補リスト"""
    candidates: Tuple[TransliterationCandidate, ...]
    unmapped_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not self.candidates:
            raise ValueError("transliteration result needs at least one candidate")
        likelihoods = [c.likelihood for c in self.candidates]
        if likelihoods != sorted(likelihoods, reverse=True):
            raise ValueError("candidates must be sorted by likelihood, highest first")

    @property
    def best(self) -> str:
        return self.candidates[0].text
