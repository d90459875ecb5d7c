import hashlib
from dataclasses import dataclass, field
from typing import Tuple

from domain.entities.language import LangCode

Example = Tuple[Tuple[int, ...], Tuple[int, ...]]


@dataclass(frozen=True)
class PairDataset:
    """1 言語ペア分のトークン化済み学習データ

    examples は (原文 ID 列, 訳文 ID 列)。原文側には ``<2xx>`` タグが入っている
    (tagged=False の場合を除く)。BOS/EOS はバッチ作成時に付与する。
    """
    pair_id: int
    source_lang: LangCode
    target_lang: LangCode
    examples: Tuple[Example, ...]
    src_vocab_size: int
    tgt_vocab_size: int
    weight: float = 1.0
    tagged: bool = True
    fingerprint: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple((tuple(s), tuple(t)) for s, t in self.examples))
        if self.pair_id < 0:
            raise ValueError("pair_id must be non-negative")
        if self.weight < 0:
            raise ValueError("weight must be non-negative")
        for src, tgt in self.examples:
            if any(i < 0 or i >= self.src_vocab_size for i in src) or any(
                i < 0 or i >= self.tgt_vocab_size for i in tgt
            ):
                raise ValueError(f"dataset {self.pair_id} contains ids outside its vocabulary")
        if not self.fingerprint:
            object.__setattr__(self, "fingerprint", self._compute_fingerprint())

    def _compute_fingerprint(self) -> str:
        digest = hashlib.sha256(f"{self.source_lang}-{self.target_lang}".encode("utf-8"))
        for src, tgt in self.examples:
            digest.update((" ".join(map(str, src)) + "\t" + " ".join(map(str, tgt)) + "\n").encode("utf-8"))
        return digest.hexdigest()

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def name(self) -> str:
        return f"{self.source_lang}-{self.target_lang}"
