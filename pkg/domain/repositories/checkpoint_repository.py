from abc import ABC, abstractmethod
from typing import Optional

from domain.entities.checkpoint import Checkpoint
from domain.entities.training import TransformerConfig
from domain.repositories.corpus_repository import PathLike


class CheckpointRepository(ABC):
    """チェックポイント保存の抽象インターフェース"""

    @abstractmethod
    def save(self, checkpoint: Checkpoint, path: PathLike) -> None:
        """チェックポイントを書き出す (既存ファイルは置き換える)"""
        pass

    @abstractmethod
    def load(self, path: PathLike, expected_config: Optional[TransformerConfig] = None) -> Checkpoint:
        """チェックポイントを読み込む

        Args:
            path: 入力ファイル
            expected_config: 指定した場合、保存時の設定と一致することを確認する

        Returns:
            Checkpoint

        Raises:
            CorruptCheckpoint: 切り詰め・ハッシュ不一致など中身が壊れている場合
            VersionMismatch: フォーマットバージョンまたは設定が一致しない場合
        """
        pass
