import logging
import re
import unicodedata
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from domain.entities.corpus import MonoCorpus, ParallelCorpus, SentencePair
from domain.entities.language import LangCode
from domain.exceptions import LineCountMismatch, MalformedLine, Utf8Error
from domain.repositories.corpus_repository import CorpusRepository, PathLike

logger = logging.getLogger(__name__)

_WHITESPACE_RUN = re.compile(r"\s+")


def read_lines(path: PathLike) -> List[str]:
    """UTF-8 テキストファイルを行単位で読み込む

    行区切りは LF。末尾の CR は取り除く。

    Raises:
        Utf8Error: 不正なバイト列を含む場合 (ファイル先頭からのバイトオフセット付き)
    """
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise Utf8Error(str(path), e.start) from None

    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [line[:-1] if line.endswith("\r") else line for line in lines]


def write_lines(path: PathLike, lines: List[str]) -> None:
    """行のリストを LF 区切りの UTF-8 ファイルに書き出す"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")


class FileCorpusRepository(CorpusRepository):
    """プレーンテキストファイルを使った CorpusRepository の実装

    Args:
        normalization: ``"nfc"`` なら読み込み時に Unicode NFC 正規化と空白の畳み込みを行う
    """

    def __init__(self, normalization: Optional[str] = None):
        if normalization not in (None, "none", "nfc"):
            raise ValueError(f"unsupported normalization: {normalization}")
        self.normalization = None if normalization == "none" else normalization

    def _normalize(self, text: str) -> str:
        if self.normalization == "nfc":
            text = unicodedata.normalize("NFC", text)
            text = _WHITESPACE_RUN.sub(" ", text).strip()
        return text

    def load_parallel(
        self,
        source_path: PathLike,
        target_path: PathLike,
        source_lang: LangCode,
        target_lang: LangCode,
    ) -> ParallelCorpus:
        source_lang = LangCode.parse(source_lang)
        target_lang = LangCode.parse(target_lang)
        source_lines = read_lines(source_path)
        target_lines = read_lines(target_path)

        if len(source_lines) != len(target_lines):
            raise LineCountMismatch(
                f"{source_path} has {len(source_lines)} lines but "
                f"{target_path} has {len(target_lines)}",
                {"source_lines": len(source_lines), "target_lines": len(target_lines)},
            )

        pairs = [
            SentencePair(
                source=self._normalize(s),
                target=self._normalize(t),
                source_lang=source_lang,
                target_lang=target_lang,
                line_no=i,
            )
            for i, (s, t) in enumerate(zip(source_lines, target_lines), start=1)
        ]
        logger.info(f"Loaded {len(pairs)} {source_lang}-{target_lang} pairs from {source_path}")
        return ParallelCorpus(source_lang, target_lang, tuple(pairs))

    def load_parallel_tsv(
        self,
        path: PathLike,
        source_lang: LangCode,
        target_lang: LangCode,
    ) -> ParallelCorpus:
        source_lang = LangCode.parse(source_lang)
        target_lang = LangCode.parse(target_lang)
        pairs = []
        for i, line in enumerate(read_lines(path), start=1):
            fields = line.split("\t")
            if len(fields) != 2:
                raise MalformedLine(
                    f"{path}:{i}: expected exactly one TAB, found {len(fields) - 1}",
                    {"path": str(path), "line_no": i},
                )
            pairs.append(SentencePair(
                source=self._normalize(fields[0]),
                target=self._normalize(fields[1]),
                source_lang=source_lang,
                target_lang=target_lang,
                line_no=i,
            ))
        logger.info(f"Loaded {len(pairs)} {source_lang}-{target_lang} pairs from {path}")
        return ParallelCorpus(source_lang, target_lang, tuple(pairs))

    def load_lines(self, path: PathLike, drop_empty: bool = False) -> Tuple[str, ...]:
        lines = [self._normalize(line) for line in read_lines(path)]
        if drop_empty:
            lines = [line for line in lines if line.strip()]
        return tuple(lines)

    def load_mono(self, path: PathLike, lang: LangCode, drop_empty: bool = True) -> MonoCorpus:
        lang = LangCode.parse(lang)
        lines = self.load_lines(path, drop_empty=drop_empty)
        logger.info(f"Loaded {len(lines)} {lang} monolingual lines from {path}")
        return MonoCorpus(lang, tuple(lines))

    def save_parallel(
        self,
        corpus: ParallelCorpus,
        source_path: PathLike,
        target_path: PathLike,
    ) -> None:
        write_lines(source_path, corpus.sources)
        write_lines(target_path, corpus.targets)

    def save_parallel_tsv(self, corpus: ParallelCorpus, path: PathLike) -> None:
        write_lines(path, [f"{p.source}\t{p.target}" for p in corpus.pairs])

    def save_mono(self, corpus: MonoCorpus, path: PathLike) -> None:
        write_lines(path, list(corpus.lines))

    def save_lines(self, lines: Sequence[str], path: PathLike) -> None:
        write_lines(path, list(lines))
