import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from domain.entities.training import TrainState, TransformerConfig


def config_hash(config: TransformerConfig) -> str:
    """設定の SHA-256 (キー順に正規化した JSON から計算する)"""
    payload = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass
class OptimizerSnapshot:
    """Adam の状態のスナップショット"""
    step: int
    exp_avg: Dict[str, np.ndarray] = field(default_factory=dict)
    exp_avg_sq: Dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class Checkpoint:
    """モデルと学習状態のスナップショット

    parameters はパラメータ名 → float64 配列。provenance には設定ハッシュと
    学習データのハッシュを入れる。
    """
    config: TransformerConfig
    parameters: Dict[str, np.ndarray]
    train_state: TrainState
    optimizer: Optional[OptimizerSnapshot] = None
    provenance: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        for name, array in self.parameters.items():
            if not np.all(np.isfinite(array)):
                raise ValueError(f"parameter {name} contains non-finite values")
        self.provenance.setdefault("config_hash", config_hash(self.config))

    @property
    def config_hash(self) -> str:
        return self.provenance["config_hash"]
