import hashlib
import math
import struct
from dataclasses import replace

import numpy as np
import pytest
import torch

from domain.entities.checkpoint import Checkpoint, config_hash
from domain.entities.training import TrainHyper, TrainState
from domain.exceptions import CheckpointIncompatible, CorruptCheckpoint, VersionMismatch
from infra.checkpoint.checkpoint_repository_impl import (
    MAGIC,
    FileCheckpointRepository,
    decode_checkpoint,
    encode_checkpoint,
)
from infra.nn.optim import AdamState, adam_step
from infra.nn.snapshot import load_parameters, restore_model, restore_optimizer, snapshot
from infra.nn.transformer import build_model


@pytest.fixture
def trained_state(tiny_model):
    """1 回だけ更新したモデルと Adam 状態"""
    params = dict(tiny_model.named_parameters())
    grads = {name: torch.full_like(p, 0.01) for name, p in params.items()}
    state = adam_step(params, grads, AdamState(), TrainHyper(), lr=1e-3)
    return tiny_model, state


@pytest.fixture
def checkpoint(trained_state) -> Checkpoint:
    model, optimizer = trained_state
    train_state = TrainState(step=1, epoch=1, best_valid_loss=2.5, epochs_since_best=0, rng_seed=7)
    return snapshot(model, train_state, optimizer, provenance={"data_hash": "abc"})


def _rehash(body: bytes) -> bytes:
    return body + hashlib.sha256(body).digest()


class TestCheckpointEntity:
    """Checkpoint のテスト"""

    def test_config_hash_in_provenance(self, checkpoint, tiny_config):
        assert checkpoint.config_hash == config_hash(tiny_config)
        assert checkpoint.provenance["data_hash"] == "abc"

    def test_config_hash_changes_with_config(self, tiny_config):
        assert config_hash(tiny_config) != config_hash(replace(tiny_config, num_layers=3))

    def test_rejects_non_finite_parameters(self, tiny_config):
        with pytest.raises(ValueError):
            Checkpoint(tiny_config, {"w": np.array([1.0, math.nan])}, TrainState())


class TestEncodeDecode:
    """encode_checkpoint / decode_checkpoint のテスト"""

    def test_round_trip_is_bit_identical(self, checkpoint):
        """パラメータとモーメントはビット単位で一致する"""
        # 実行
        decoded = decode_checkpoint(encode_checkpoint(checkpoint))

        # 検証
        assert decoded.config == checkpoint.config
        assert decoded.train_state == checkpoint.train_state
        assert decoded.provenance == checkpoint.provenance
        assert decoded.parameters.keys() == checkpoint.parameters.keys()
        for name, array in checkpoint.parameters.items():
            assert np.array_equal(decoded.parameters[name], array)
        assert decoded.optimizer.step == 1
        for name, array in checkpoint.optimizer.exp_avg_sq.items():
            assert np.array_equal(decoded.optimizer.exp_avg_sq[name], array)

    def test_without_optimizer(self, checkpoint):
        checkpoint.optimizer = None
        assert decode_checkpoint(encode_checkpoint(checkpoint)).optimizer is None

    def test_infinite_best_loss_survives(self, tiny_model):
        decoded = decode_checkpoint(encode_checkpoint(snapshot(tiny_model, TrainState())))
        assert decoded.train_state.best_valid_loss == math.inf

    def test_encoding_is_deterministic(self, checkpoint):
        assert encode_checkpoint(checkpoint) == encode_checkpoint(checkpoint)

    def test_starts_with_magic(self, checkpoint):
        assert encode_checkpoint(checkpoint)[:8] == MAGIC

    @pytest.mark.parametrize("size", [0, 10, 100])
    def test_truncated(self, checkpoint, size):
        with pytest.raises(CorruptCheckpoint):
            decode_checkpoint(encode_checkpoint(checkpoint)[:size])

    def test_truncated_tail(self, checkpoint):
        """末尾が欠けるとハッシュが合わない"""
        raw = encode_checkpoint(checkpoint)
        with pytest.raises(CorruptCheckpoint):
            decode_checkpoint(raw[:-1])

    def test_flipped_byte(self, checkpoint):
        raw = bytearray(encode_checkpoint(checkpoint))
        raw[len(raw) // 2] ^= 0xFF
        with pytest.raises(CorruptCheckpoint) as exc_info:
            decode_checkpoint(bytes(raw))
        assert exc_info.value.error_code == "PIPELINE.CORRUPT_CHECKPOINT"

    def test_bad_magic(self, checkpoint):
        body = encode_checkpoint(checkpoint)[:-32]
        with pytest.raises(CorruptCheckpoint):
            decode_checkpoint(_rehash(b"NOTACKPT" + body[8:]))

    def test_future_version(self, checkpoint):
        """ハッシュが正しくてもバージョンが違えば読まない"""
        body = bytearray(encode_checkpoint(checkpoint)[:-32])
        body[8:12] = struct.pack("<I", 2)
        with pytest.raises(VersionMismatch) as exc_info:
            decode_checkpoint(_rehash(bytes(body)))
        assert exc_info.value.details == {"found": 2, "expected": 1}

    def test_expected_config_mismatch(self, checkpoint, tiny_config):
        raw = encode_checkpoint(checkpoint)
        assert decode_checkpoint(raw, tiny_config).config == tiny_config
        with pytest.raises(VersionMismatch):
            decode_checkpoint(raw, replace(tiny_config, d_ffn=64))


class TestFileCheckpointRepository:
    """FileCheckpointRepository のテスト"""

    def test_save_and_load(self, checkpoint, tmp_path):
        # 実行
        repository = FileCheckpointRepository()
        path = tmp_path / "run" / "checkpoints" / "best.ckpt"
        repository.save(checkpoint, path)
        loaded = repository.load(path)

        # 検証
        assert path.exists()
        assert not path.with_name("best.ckpt.tmp").exists()
        assert encode_checkpoint(loaded) == encode_checkpoint(checkpoint)

    def test_overwrite(self, checkpoint, tmp_path):
        repository = FileCheckpointRepository()
        path = tmp_path / "last.ckpt"
        repository.save(checkpoint, path)
        checkpoint.train_state.step = 99
        repository.save(checkpoint, path)
        assert repository.load(path).train_state.step == 99


class TestSnapshot:
    """snapshot / restore のテスト"""

    def test_restored_model_gives_identical_outputs(self, checkpoint, trained_state, sample_batch):
        """保存前と復元後で出力がビット単位で一致する"""
        model, _ = trained_state
        src, tgt_in = sample_batch
        model.eval()

        restored = restore_model(decode_checkpoint(encode_checkpoint(checkpoint)))
        restored.eval()

        with torch.no_grad():
            assert torch.equal(restored(src, tgt_in), model(src, tgt_in))

    def test_snapshot_is_a_copy(self, tiny_model):
        checkpoint = snapshot(tiny_model, TrainState())
        with torch.no_grad():
            for p in tiny_model.parameters():
                p.add_(1.0)
        name, param = next(iter(tiny_model.named_parameters()))
        assert not np.array_equal(checkpoint.parameters[name], param.detach().numpy())

    def test_restore_optimizer(self, checkpoint, trained_state):
        _, optimizer = trained_state
        restored = restore_optimizer(checkpoint)
        assert restored.step == optimizer.step
        for name, tensor in optimizer.exp_avg.items():
            assert torch.equal(restored.exp_avg[name], tensor)

    def test_restore_optimizer_without_state(self, tiny_model):
        assert restore_optimizer(snapshot(tiny_model, TrainState())) is None

    def test_incompatible_vocabulary(self, checkpoint, tiny_config):
        """語彙サイズの違うモデルには読み込めない"""
        other = build_model(replace(tiny_config, vocab_size_tgt=40), seed=0)
        with pytest.raises(CheckpointIncompatible):
            load_parameters(other, checkpoint)

    def test_incompatible_depth(self, checkpoint, tiny_config):
        other = build_model(replace(tiny_config, num_layers=1), seed=0)
        with pytest.raises(CheckpointIncompatible):
            load_parameters(other, checkpoint)
