from dataclasses import dataclass, field, replace
from typing import Iterator, List, Sequence, Tuple

from domain.entities.language import LangCode
from domain.exceptions import LanguageMismatch


@dataclass(frozen=True)
class SentencePair:
    """対訳文ペア

    line_no は入力ファイル上の行番号 (1 始まり) で、出自の追跡に使う。
    """
    source: str
    target: str
    source_lang: LangCode
    target_lang: LangCode
    line_no: int

    def __post_init__(self):
        if "\n" in self.source or "\n" in self.target:
            raise ValueError("sentence pair must not contain embedded newlines")
        if self.line_no < 1:
            raise ValueError("line_no must be a positive integer")

    def with_texts(self, source: str, target: str) -> "SentencePair":
        """テキストのみを差し替えた新しいペアを返す"""
        return replace(self, source=source, target=target)

    def reversed(self) -> "SentencePair":
        """翻訳方向を反転したペアを返す"""
        return SentencePair(
            source=self.target,
            target=self.source,
            source_lang=self.target_lang,
            target_lang=self.source_lang,
            line_no=self.line_no,
        )


@dataclass(frozen=True)
class ParallelCorpus:
    """対訳コーパス (ペアの順序は入力ファイルの順序)"""
    source_lang: LangCode
    target_lang: LangCode
    pairs: Tuple[SentencePair, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        seen = set()
        for pair in self.pairs:
            if pair.source_lang != self.source_lang or pair.target_lang != self.target_lang:
                raise LanguageMismatch(
                    f"pair at line {pair.line_no} is {pair.source_lang}-{pair.target_lang}, "
                    f"corpus is {self.source_lang}-{self.target_lang}"
                )
            if pair.line_no in seen:
                raise ValueError(f"duplicate line_no {pair.line_no} in corpus")
            seen.add(pair.line_no)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[SentencePair]:
        return iter(self.pairs)

    @property
    def name(self) -> str:
        return f"{self.source_lang}-{self.target_lang}"

    @property
    def sources(self) -> List[str]:
        return [pair.source for pair in self.pairs]

    @property
    def targets(self) -> List[str]:
        return [pair.target for pair in self.pairs]

    @classmethod
    def from_texts(
        cls,
        sources: Sequence[str],
        targets: Sequence[str],
        source_lang: LangCode,
        target_lang: LangCode,
    ) -> "ParallelCorpus":
        """テキスト列からコーパスを作成する (行番号は 1 から振り直す)"""
        if len(sources) != len(targets):
            raise ValueError("sources and targets must have the same length")
        pairs = tuple(
            SentencePair(s, t, source_lang, target_lang, i)
            for i, (s, t) in enumerate(zip(sources, targets), start=1)
        )
        return cls(source_lang, target_lang, pairs)

    def reversed(self) -> "ParallelCorpus":
        """翻訳方向を反転したコーパスを返す"""
        return ParallelCorpus(
            self.target_lang,
            self.source_lang,
            tuple(pair.reversed() for pair in self.pairs),
        )

    def union(self, other: "ParallelCorpus") -> "ParallelCorpus":
        """2 つのコーパスを連結する

        重複は保持する (重複除去はフィルタリングの責務)。other の行番号は
        self の最大行番号の後ろに振り直す。
        """
        if (other.source_lang, other.target_lang) != (self.source_lang, self.target_lang):
            raise LanguageMismatch(f"cannot join {self.name} with {other.name}")
        offset = max((p.line_no for p in self.pairs), default=0)
        renumbered = tuple(
            replace(pair, line_no=offset + i)
            for i, pair in enumerate(other.pairs, start=1)
        )
        return ParallelCorpus(self.source_lang, self.target_lang, self.pairs + renumbered)


@dataclass(frozen=True)
class MonoCorpus:
    """単言語コーパス"""
    lang: LangCode
    lines: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if any("\n" in line for line in self.lines):
            raise ValueError("monolingual lines must not contain embedded newlines")

    def __len__(self) -> int:
        return len(self.lines)

    def __iter__(self) -> Iterator[str]:
        return iter(self.lines)
