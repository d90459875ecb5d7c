import logging
import unicodedata
from functools import lru_cache
from typing import Dict, Optional, Tuple

from domain.entities.corpus import MonoCorpus, ParallelCorpus
from domain.entities.language import BENGALI, BRAHMI_BLOCKS, LangCode, LanguageGroup, find_group
from domain.entities.transliteration import (
    ScriptMap,
    TransliterationCandidate,
    TransliterationResult,
)
from domain.exceptions import GroupMismatch, LanguageMismatch, UnsupportedScriptPair
from domain.repositories.corpus_repository import CorpusRepository, PathLike

logger = logging.getLogger(__name__)

# アッサム文字の RA/WA は他ブロックの RA/VA に寄せる (ブロック内相対位置)
_ASSAMESE_OVERRIDES: Dict[int, int] = {
    0x09F0: 0x30,
    0x09F1: 0x35,
}
_BENGALI_RA = 0x30


def _assigned(codepoint: int) -> bool:
    return unicodedata.name(chr(codepoint), None) is not None


@lru_cache(maxsize=None)
def build_script_map(from_lang: LangCode, to_lang: LangCode) -> ScriptMap:
    """2 言語間の翻字表を作る

    Raises:
        UnsupportedScriptPair: どちらかがオフセット翻字の対象外の文字体系の場合
    """
    if from_lang not in BRAHMI_BLOCKS or to_lang not in BRAHMI_BLOCKS:
        raise UnsupportedScriptPair(
            f"no offset transliteration between {from_lang} and {to_lang}",
            {"from": str(from_lang), "to": str(to_lang)},
        )
    from_block = BRAHMI_BLOCKS[from_lang]
    to_block = BRAHMI_BLOCKS[to_lang]
    offset = to_block.start - from_block.start

    exceptions: Dict[int, Optional[int]] = {}
    for codepoint in range(from_block.start, from_block.end):
        if not _assigned(codepoint + offset):
            exceptions[codepoint] = None

    if from_block != to_block:
        if from_lang == LangCode.AS:
            for codepoint, relative in _ASSAMESE_OVERRIDES.items():
                mapped = to_block.start + relative
                exceptions[codepoint] = mapped if _assigned(mapped) else None
            # ベンガル文字の RA はアッサム語では使わない
            exceptions[BENGALI.start + _BENGALI_RA] = None
        if to_lang == LangCode.AS:
            for assamese, relative in _ASSAMESE_OVERRIDES.items():
                exceptions[assamese - offset] = None
                source = from_block.start + relative
                if _assigned(source):
                    exceptions[source] = assamese

    return ScriptMap(from_block, to_block, exceptions)


def transliterate(text: str, from_lang: LangCode, to_lang: LangCode) -> TransliterationResult:
    """ブロックオフセットで翻字する

    元ブロック外の文字と対応字の無い文字はそのまま通し、unmapped_count に数える。
    規則ベースなので候補は常に 1 つで尤度は 1.0。

    Raises:
        UnsupportedScriptPair: 対象外の言語ペアの場合 (例: hi → ur)
    """
    script_map = build_script_map(LangCode.parse(from_lang), LangCode.parse(to_lang))

    output = []
    unmapped = 0
    for char in text:
        mapped = script_map.lookup(ord(char))
        if mapped is None:
            output.append(char)
            unmapped += 1
        else:
            output.append(chr(mapped))

    return TransliterationResult(
        candidates=(TransliterationCandidate("".join(output), 1.0),),
        unmapped_count=unmapped,
    )


def group_of(lang: LangCode) -> Optional[LanguageGroup]:
    """言語の関連言語グループを返す (英語など所属しない言語は None)"""
    return find_group(LangCode.parse(lang))


def augment_related(low: ParallelCorpus, high: ParallelCorpus) -> ParallelCorpus:
    """高資源の関連言語データを低資源言語の文字に翻字して追加する

    Args:
        low: 低資源言語の対訳コーパス (変更されない)
        high: 同じグループに属する高資源言語の対訳コーパス

    Returns:
        low の後ろに翻字済み high を連結した low と同じ言語コードのコーパス

    Raises:
        LanguageMismatch: 原言語が異なる場合
        GroupMismatch: 目的言語が同じグループに属さない場合
        UnsupportedScriptPair: 文字体系がオフセット翻字の対象外の場合
    """
    if low.source_lang != high.source_lang:
        raise LanguageMismatch(
            f"source languages differ: {low.source_lang} vs {high.source_lang}"
        )
    low_group = group_of(low.target_lang)
    high_group = group_of(high.target_lang)
    if low_group is None or high_group is None or low_group.name != high_group.name:
        raise GroupMismatch(
            f"{high.target_lang} and {low.target_lang} are not in the same language group",
            {"low": str(low.target_lang), "high": str(high.target_lang)},
        )

    transliterated = []
    unmapped = 0
    for pair in high.pairs:
        result = transliterate(pair.target, high.target_lang, low.target_lang)
        unmapped += result.unmapped_count
        transliterated.append((pair.source, result.best))

    extra = ParallelCorpus.from_texts(
        [s for s, _ in transliterated],
        [t for _, t in transliterated],
        low.source_lang,
        low.target_lang,
    )
    logger.info(
        f"Augmented {low.name} ({len(low)} pairs) with {len(high)} pairs from "
        f"{high.name}; {unmapped} characters passed through unmapped"
    )
    return low.union(extra)


class TransliterationService:
    """翻字と関連言語データ拡張を行うサービス"""

    def __init__(self, corpus_repository: CorpusRepository):
        self.corpus_repository = corpus_repository

    def transliterate_file(
        self,
        in_path: PathLike,
        out_path: PathLike,
        from_lang: LangCode,
        to_lang: LangCode,
    ) -> Tuple[int, int]:
        """ファイルを行単位で翻字する

        Returns:
            (行数, 対応字の無かった文字数)
        """
        corpus = self.corpus_repository.load_mono(in_path, from_lang, drop_empty=False)
        lines = []
        unmapped = 0
        for line in corpus.lines:
            result = transliterate(line, from_lang, to_lang)
            lines.append(result.best)
            unmapped += result.unmapped_count
        self.corpus_repository.save_mono(MonoCorpus(LangCode.parse(to_lang), tuple(lines)), out_path)
        logger.info(f"Transliterated {len(lines)} lines {from_lang}->{to_lang}, {unmapped} unmapped")
        return len(lines), unmapped

    def augment_files(
        self,
        low_paths: Tuple[PathLike, PathLike],
        low_langs: Tuple[LangCode, LangCode],
        high_paths: Tuple[PathLike, PathLike],
        high_langs: Tuple[LangCode, LangCode],
        out_prefix: str,
    ) -> ParallelCorpus:
        """ファイル上のコーパスで augment_related を行い ``{prefix}.{src}`` / ``{prefix}.{tgt}`` に書き出す"""
        low = self.corpus_repository.load_parallel(*low_paths, *low_langs)
        high = self.corpus_repository.load_parallel(*high_paths, *high_langs)
        augmented = augment_related(low, high)
        self.corpus_repository.save_parallel(
            augmented,
            f"{out_prefix}.{augmented.source_lang}",
            f"{out_prefix}.{augmented.target_lang}",
        )
        return augmented
