import json
from pathlib import Path
from typing import Any, Dict, List

from domain.repositories.corpus_repository import PathLike


class JsonlMetricsLog:
    """追記専用の JSON Lines メトリクスログ

    同じ学習からは同じファイルができるように、時刻は記録しない。
    """

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def __call__(self, record: Dict[str, Any]) -> None:
        with self.path.open("a", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            f.write("\n")

    def read(self) -> List[Dict[str, Any]]:
        if not self.path.exists():
            return []
        with self.path.open(encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def reset(self) -> None:
        """ログを空にする (同じディレクトリでの再実行用)"""
        self.path.write_text("", encoding="utf-8")
