"""チェックポイントのバイナリ形式

    offset  size  内容
    0       8     マジック b"INMTCKPT"
    8       4     フォーマットバージョン (u32, little-endian)
    12      8     ヘッダ長 H (u64, little-endian)
    20      H     ヘッダ (UTF-8 JSON, キー順ソート)
    20+H    D     テンソルデータ (float64, little-endian, ヘッダの tensors 順に連結)
    20+H+D  32    先頭からデータ末尾までの SHA-256

ヘッダは config / train_state / provenance / optimizer_step と、各テンソルの
name / shape / offset (データ領域先頭からのバイト位置) を持つ。
オプティマイザのモーメントは ``exp_avg/<name>`` と ``exp_avg_sq/<name>`` という
名前で同じデータ領域に入る。
"""
import hashlib
import json
import logging
import os
import struct
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from domain.entities.checkpoint import Checkpoint, OptimizerSnapshot
from domain.entities.training import TrainState, TransformerConfig
from domain.exceptions import CorruptCheckpoint, VersionMismatch
from domain.repositories.checkpoint_repository import CheckpointRepository
from domain.repositories.corpus_repository import PathLike

logger = logging.getLogger(__name__)

MAGIC = b"INMTCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DIGEST_SIZE = 32
_FLOAT = np.dtype("<f8")

_EXP_AVG = "exp_avg/"
_EXP_AVG_SQ = "exp_avg_sq/"


def _tensors_of(checkpoint: Checkpoint) -> List[Tuple[str, np.ndarray]]:
    tensors = list(checkpoint.parameters.items())
    if checkpoint.optimizer is not None:
        tensors += [(_EXP_AVG + name, a) for name, a in checkpoint.optimizer.exp_avg.items()]
        tensors += [(_EXP_AVG_SQ + name, a) for name, a in checkpoint.optimizer.exp_avg_sq.items()]
    return tensors


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """チェックポイントをバイト列にする"""
    index = []
    chunks = []
    offset = 0
    for name, array in _tensors_of(checkpoint):
        data = np.ascontiguousarray(array, dtype=_FLOAT).tobytes()
        index.append({"name": name, "shape": list(array.shape), "offset": offset})
        chunks.append(data)
        offset += len(data)

    header = {
        "config": checkpoint.config.to_dict(),
        "train_state": checkpoint.train_state.to_dict(),
        "provenance": dict(checkpoint.provenance),
        "optimizer_step": None if checkpoint.optimizer is None else checkpoint.optimizer.step,
        "tensors": index,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)) + header_bytes + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def decode_checkpoint(raw: bytes, expected_config: Optional[TransformerConfig] = None) -> Checkpoint:
    """バイト列からチェックポイントを復元する

    Raises:
        CorruptCheckpoint: 形式やハッシュが不正な場合
        VersionMismatch: バージョンまたは設定が一致しない場合
    """
    if len(raw) < _PREFIX.size + _DIGEST_SIZE:
        raise CorruptCheckpoint("checkpoint is truncated", {"size": len(raw)})
    body, digest = raw[:-_DIGEST_SIZE], raw[-_DIGEST_SIZE:]
    magic, version, header_size = _PREFIX.unpack_from(body)
    if magic != MAGIC:
        raise CorruptCheckpoint("not a checkpoint file (bad magic)")
    if hashlib.sha256(body).digest() != digest:
        raise CorruptCheckpoint("checkpoint hash mismatch (file truncated or modified)")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"checkpoint format version {version}, expected {FORMAT_VERSION}",
            {"found": version, "expected": FORMAT_VERSION},
        )

    data_start = _PREFIX.size + header_size
    try:
        header = json.loads(body[_PREFIX.size:data_start].decode("utf-8"))
        config = TransformerConfig.from_dict(header["config"])
        train_state = TrainState.from_dict(header["train_state"])
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptCheckpoint(f"unreadable checkpoint header: {e}") from None

    if expected_config is not None and config != expected_config:
        raise VersionMismatch(
            "checkpoint was saved with a different model configuration",
            {"found": config.to_dict(), "expected": expected_config.to_dict()},
        )

    data = body[data_start:]
    tensors: Dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        end = entry["offset"] + count * _FLOAT.itemsize
        if end > len(data):
            raise CorruptCheckpoint(f"tensor {entry['name']} runs past the end of the data")
        array = np.frombuffer(data, dtype=_FLOAT, count=count, offset=entry["offset"])
        tensors[entry["name"]] = array.reshape(entry["shape"]).astype(np.float64)

    parameters = {k: v for k, v in tensors.items() if not k.startswith((_EXP_AVG, _EXP_AVG_SQ))}
    optimizer = None
    if header["optimizer_step"] is not None:
        optimizer = OptimizerSnapshot(
            step=header["optimizer_step"],
            exp_avg={k[len(_EXP_AVG):]: v for k, v in tensors.items() if k.startswith(_EXP_AVG)},
            exp_avg_sq={k[len(_EXP_AVG_SQ):]: v for k, v in tensors.items() if k.startswith(_EXP_AVG_SQ)},
        )
    return Checkpoint(
        config=config,
        parameters=parameters,
        train_state=train_state,
        optimizer=optimizer,
        provenance=dict(header["provenance"]),
    )


class FileCheckpointRepository(CheckpointRepository):
    """単一ファイル形式の CheckpointRepository 実装"""

    def save(self, checkpoint: Checkpoint, path: PathLike) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(encode_checkpoint(checkpoint))
        os.replace(tmp, path)
        logger.info(f"Saved checkpoint (step {checkpoint.train_state.step}) to {path}")

    def load(self, path: PathLike, expected_config: Optional[TransformerConfig] = None) -> Checkpoint:
        checkpoint = decode_checkpoint(Path(path).read_bytes(), expected_config)
        logger.info(f"Loaded checkpoint (step {checkpoint.train_state.step}) from {path}")
        return checkpoint
