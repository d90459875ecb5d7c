from abc import ABC, abstractmethod

from domain.entities.bpe import BpeModel


class BpeRepository(ABC):
    """BPE モデル保存の抽象インターフェース"""

    @abstractmethod
    def save(self, model: BpeModel, prefix: str) -> None:
        """モデルを ``{prefix}.merges`` と ``{prefix}.vocab`` に保存する

        Args:
            model: 保存する BPE モデル
            prefix: 出力ファイルのプレフィックス
        """
        pass

    @abstractmethod
    def load(self, prefix: str) -> BpeModel:
        """保存済みのモデルを読み込む

        Args:
            prefix: save に渡したプレフィックス

        Returns:
            BpeModel

        Raises:
            MalformedLine: ファイルの形式が不正な場合
        """
        pass
