from abc import ABC, abstractmethod
from pathlib import Path
from typing import Sequence, Tuple, Union

from domain.entities.corpus import MonoCorpus, ParallelCorpus
from domain.entities.language import LangCode

PathLike = Union[str, Path]


class CorpusRepository(ABC):
    """コーパス入出力の抽象インターフェース"""

    @abstractmethod
    def load_parallel(
        self,
        source_path: PathLike,
        target_path: PathLike,
        source_lang: LangCode,
        target_lang: LangCode,
    ) -> ParallelCorpus:
        """行対応の 2 ファイルから対訳コーパスを読み込む

        Args:
            source_path: 原言語側ファイル
            target_path: 目的言語側ファイル
            source_lang: 原言語
            target_lang: 目的言語

        Returns:
            入力順を保った対訳コーパス

        Raises:
            LineCountMismatch: 行数が一致しない場合
            Utf8Error: 不正な UTF-8 を含む場合
        """
        pass

    @abstractmethod
    def load_parallel_tsv(
        self,
        path: PathLike,
        source_lang: LangCode,
        target_lang: LangCode,
    ) -> ParallelCorpus:
        """``source<TAB>target`` 形式の 1 ファイルから対訳コーパスを読み込む

        Raises:
            MalformedLine: タブ区切りが 1 つでない行がある場合
            Utf8Error: 不正な UTF-8 を含む場合
        """
        pass

    @abstractmethod
    def load_mono(self, path: PathLike, lang: LangCode, drop_empty: bool = True) -> MonoCorpus:
        """単言語コーパスを読み込む

        Args:
            path: 入力ファイル
            lang: 言語
            drop_empty: 空白除去後に空となる行を捨てるか
        """
        pass

    @abstractmethod
    def load_lines(self, path: PathLike, drop_empty: bool = False) -> Tuple[str, ...]:
        """言語を決めずに行を読み込む (BPE 適用・翻訳入力・評価ファイル用)"""
        pass

    @abstractmethod
    def save_parallel(
        self,
        corpus: ParallelCorpus,
        source_path: PathLike,
        target_path: PathLike,
    ) -> None:
        """対訳コーパスを行対応の 2 ファイルに書き出す"""
        pass

    @abstractmethod
    def save_parallel_tsv(self, corpus: ParallelCorpus, path: PathLike) -> None:
        """対訳コーパスを TSV に書き出す"""
        pass

    @abstractmethod
    def save_mono(self, corpus: MonoCorpus, path: PathLike) -> None:
        """単言語コーパスを書き出す"""
        pass

    @abstractmethod
    def save_lines(self, lines: Sequence[str], path: PathLike) -> None:
        """行をそのまま書き出す"""
        pass
