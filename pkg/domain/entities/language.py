from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Optional, Tuple

from domain.exceptions import UnknownLang


class LangCode(str, Enum):
    """対応言語コード (閉集合)"""

    EN = "en"
    BN = "bn"
    GU = "gu"
    HI = "hi"
    KN = "kn"
    ML = "ml"
    MR = "mr"
    OR = "or"
    PA = "pa"
    TA = "ta"
    TE = "te"
    AS = "as"
    UR = "ur"
    NE = "ne"
    SI = "si"
    SD = "sd"

    @classmethod
    def parse(cls, value: "str | LangCode") -> "LangCode":
        """文字列から言語コードを取得する

        Raises:
            UnknownLang: 未知の言語コードの場合
        """
        if isinstance(value, LangCode):
            return value
        normalized = str(value).strip().lower()
        try:
            return cls(normalized)
        except ValueError:
            raise UnknownLang(f"unknown language code: {value!r}", {"code": value}) from None

    @property
    def target_token(self) -> str:
        """出力言語を指定する人工トークン (例: ``<2hi>``)"""
        return f"<2{self.value}>"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class UnicodeBlock:
    """Unicode ブロック (半開区間 [start, end))"""
    name: str
    start: int
    end: int

    @property
    def width(self) -> int:
        return self.end - self.start

    def __contains__(self, codepoint: int) -> bool:
        return self.start <= codepoint < self.end


DEVANAGARI = UnicodeBlock("Devanagari", 0x0900, 0x0980)
BENGALI = UnicodeBlock("Bengali", 0x0980, 0x0A00)
GURMUKHI = UnicodeBlock("Gurmukhi", 0x0A00, 0x0A80)
GUJARATI = UnicodeBlock("Gujarati", 0x0A80, 0x0B00)
ORIYA = UnicodeBlock("Oriya", 0x0B00, 0x0B80)
TAMIL = UnicodeBlock("Tamil", 0x0B80, 0x0C00)
TELUGU = UnicodeBlock("Telugu", 0x0C00, 0x0C80)
KANNADA = UnicodeBlock("Kannada", 0x0C80, 0x0D00)
MALAYALAM = UnicodeBlock("Malayalam", 0x0D00, 0x0D80)
SINHALA = UnicodeBlock("Sinhala", 0x0D80, 0x0E00)
ARABIC = UnicodeBlock("Arabic", 0x0600, 0x0700)

# 判定順序は固定 (classify_script の出力順にも使う)
SCRIPT_BLOCKS: Tuple[UnicodeBlock, ...] = (
    DEVANAGARI, BENGALI, GURMUKHI, GUJARATI, ORIYA, TAMIL,
    TELUGU, KANNADA, MALAYALAM, SINHALA, ARABIC,
)

LATIN = "Latin"
OTHER = "other"

# Latin 文字とみなす範囲: ASCII, Latin-1 補助, Latin 拡張 A/B, Latin 拡張追加
LATIN_RANGES: Tuple[Tuple[int, int], ...] = (
    (0x0041, 0x005B),
    (0x0061, 0x007B),
    (0x00C0, 0x0250),
    (0x1E00, 0x1F00),
)

# 各言語が期待する文字体系 (pa はシャームキー, sd はデーヴァナーガリーも許容)
EXPECTED_SCRIPTS: Dict[LangCode, FrozenSet[str]] = {
    LangCode.EN: frozenset({LATIN}),
    LangCode.HI: frozenset({DEVANAGARI.name}),
    LangCode.MR: frozenset({DEVANAGARI.name}),
    LangCode.NE: frozenset({DEVANAGARI.name}),
    LangCode.BN: frozenset({BENGALI.name}),
    LangCode.AS: frozenset({BENGALI.name}),
    LangCode.PA: frozenset({GURMUKHI.name, ARABIC.name}),
    LangCode.GU: frozenset({GUJARATI.name}),
    LangCode.OR: frozenset({ORIYA.name}),
    LangCode.TA: frozenset({TAMIL.name}),
    LangCode.TE: frozenset({TELUGU.name}),
    LangCode.KN: frozenset({KANNADA.name}),
    LangCode.ML: frozenset({MALAYALAM.name}),
    LangCode.SI: frozenset({SINHALA.name}),
    LangCode.UR: frozenset({ARABIC.name}),
    LangCode.SD: frozenset({ARABIC.name, DEVANAGARI.name}),
}

# オフセット翻字に使うブロック。ブラーフミー系で配置が並行なものに限る
BRAHMI_BLOCKS: Dict[LangCode, UnicodeBlock] = {
    LangCode.HI: DEVANAGARI,
    LangCode.MR: DEVANAGARI,
    LangCode.NE: DEVANAGARI,
    LangCode.BN: BENGALI,
    LangCode.AS: BENGALI,
    LangCode.PA: GURMUKHI,
    LangCode.GU: GUJARATI,
    LangCode.OR: ORIYA,
    LangCode.TA: TAMIL,
    LangCode.TE: TELUGU,
    LangCode.KN: KANNADA,
    LangCode.ML: MALAYALAM,
}


class GroupName(str, Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class LanguageGroup:
    """関連言語グループ

    A はインド・アーリア系, B はドラヴィダ系。
    """
    name: GroupName
    members: FrozenSet[LangCode]

    def __post_init__(self):
        if LangCode.EN in self.members:
            raise ValueError("English belongs to no language group")

    def __contains__(self, lang: LangCode) -> bool:
        return lang in self.members


GROUP_A = LanguageGroup(
    GroupName.A,
    frozenset({
        LangCode.HI, LangCode.UR, LangCode.PA, LangCode.GU,
        LangCode.MR, LangCode.OR, LangCode.BN, LangCode.SD,
    }),
)
GROUP_B = LanguageGroup(
    GroupName.B,
    frozenset({LangCode.TE, LangCode.TA, LangCode.KN, LangCode.ML}),
)
LANGUAGE_GROUPS: Tuple[LanguageGroup, ...] = (GROUP_A, GROUP_B)


def find_group(lang: LangCode) -> Optional[LanguageGroup]:
    for group in LANGUAGE_GROUPS:
        if lang in group:
            return group
    return None
