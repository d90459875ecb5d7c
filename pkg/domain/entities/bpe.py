from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from domain.entities.language import LangCode

PAD = "<pad>"
BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
END_OF_WORD = "</w>"

# 特殊トークンは常に最小 ID を占める: PAD, BOS, EOS, UNK, 各言語の <2xx>
SPECIAL_TOKENS: Tuple[str, ...] = (PAD, BOS, EOS, UNK) + tuple(lang.target_token for lang in LangCode)

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNK_ID = 3


@dataclass
class BpeModel:
    """BPE サブワードモデル

    merges は学習順。vocab は 特殊トークン → 文字 (コードポイント順) → マージ結果
    の順に連続 ID を持つ。
    """
    merges: List[Tuple[str, str]]
    vocab: Dict[str, int]
    end_of_word_marker: str = END_OF_WORD
    _ranks: Dict[Tuple[str, str], int] = field(init=False, repr=False)
    _id_to_token: List[str] = field(init=False, repr=False)
    _cache: Dict[str, Tuple[str, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        ids = sorted(self.vocab.values())
        if ids != list(range(len(ids))):
            raise ValueError("vocabulary ids must be contiguous from 0")
        for i, token in enumerate(SPECIAL_TOKENS):
            if self.vocab.get(token) != i:
                raise ValueError(f"special token {token} must have id {i}")
        for left, right in self.merges:
            if left + right not in self.vocab:
                raise ValueError(f"merge result {left + right!r} missing from vocabulary")

        self._ranks = {pair: rank for rank, pair in enumerate(self.merges)}
        self._id_to_token = [""] * len(self.vocab)
        for token, i in self.vocab.items():
            self._id_to_token[i] = token
        self._cache = {}

    def __len__(self) -> int:
        return len(self.vocab)

    @property
    def specials(self) -> Dict[str, int]:
        return {token: i for i, token in enumerate(SPECIAL_TOKENS)}

    @property
    def num_specials(self) -> int:
        return len(SPECIAL_TOKENS)

    def rank(self, pair: Tuple[str, str]) -> int:
        return self._ranks.get(pair, -1)

    def token(self, token_id: int) -> str:
        return self._id_to_token[token_id]

    def is_special(self, token_id: int) -> bool:
        return 0 <= token_id < len(SPECIAL_TOKENS)

    def target_token_id(self, lang: LangCode) -> int:
        return self.vocab[LangCode.parse(lang).target_token]


@dataclass(frozen=True)
class TokenizedSentence:
    """ID 列と言語 (言語が不明なら None)"""
    ids: Tuple[int, ...]
    lang: Optional[LangCode] = None

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self) -> int:
        return len(self.ids)
