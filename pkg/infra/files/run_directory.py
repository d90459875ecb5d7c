import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from configs.settings import Settings, get_settings
from domain.exceptions import RunLocked, VersionMismatch
from domain.repositories.corpus_repository import PathLike

logger = logging.getLogger(__name__)

FORMAT_NAME = "indic-mnmt-run"


class RunDirectory:
    """1 回の実行の成果物ディレクトリ

    with 文の間だけロックファイルを排他的に作成して保持する。入った時点で
    フォーマットマーカーを書き、既存のマーカーのバージョンが違えば拒否する。

    使い方::

        with RunDirectory("runs/exp1") as run:
            run.write_manifest(text)
            repository.save(checkpoint, run.checkpoint("best"))
    """

    def __init__(self, root: PathLike, settings: Optional[Settings] = None):
        self.root = Path(root)
        self.settings = settings or get_settings()
        self._locked = False

    @property
    def lock_path(self) -> Path:
        return self.root / self.settings.lock_filename

    @property
    def marker_path(self) -> Path:
        return self.root / self.settings.format_marker_filename

    @property
    def manifest_path(self) -> Path:
        return self.root / self.settings.resolved_manifest_filename

    @property
    def metrics_path(self) -> Path:
        return self.root / self.settings.metrics_filename

    def __enter__(self) -> "RunDirectory":
        self.root.mkdir(parents=True, exist_ok=True)
        self.acquire()
        try:
            self._write_marker()
        except Exception:
            self.release()
            raise
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.release()

    def acquire(self) -> None:
        """Raises: RunLocked: 他の実行がこのディレクトリを使用中の場合"""
        try:
            fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunLocked(f"{self.root} is locked by another run", {"lock": str(self.lock_path)})
        with os.fdopen(fd, "w") as f:
            f.write(f"{os.getpid()}\n")
        self._locked = True
        logger.debug(f"Locked run directory {self.root}")

    def release(self) -> None:
        if self._locked:
            self.lock_path.unlink(missing_ok=True)
            self._locked = False

    def _write_marker(self) -> None:
        expected = f"{FORMAT_NAME} {self.settings.run_format_version}\n"
        if self.marker_path.exists():
            found = self.marker_path.read_text(encoding="utf-8")
            if found != expected:
                raise VersionMismatch(
                    f"{self.root} holds artifacts of format {found.strip()!r}, expected {expected.strip()!r}",
                    {"path": str(self.marker_path)},
                )
            return
        self.marker_path.write_text(expected, encoding="utf-8")

    def path(self, *parts: str) -> Path:
        """ディレクトリ内のパス (親ディレクトリは作成する)"""
        path = self.root.joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def checkpoint(self, name: str) -> Path:
        return self.path("checkpoints", f"{name}.ckpt")

    def bpe_prefix(self, side: str) -> str:
        return str(self.path("bpe", side))

    def write_manifest(self, text: str) -> Path:
        self.manifest_path.write_text(text, encoding="utf-8")
        return self.manifest_path

    def write_json(self, name: str, data: Any) -> Path:
        path = self.path(*name.split("/"))
        path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
        return path

    def read_json(self, name: str) -> Dict[str, Any]:
        return json.loads(self.root.joinpath(*name.split("/")).read_text(encoding="utf-8"))
