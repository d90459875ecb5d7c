from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import pytest
import torch

from domain.entities.corpus import ParallelCorpus
from domain.entities.language import LangCode
from domain.entities.training import TransformerConfig
from infra.files.corpus_repository_impl import write_lines
from infra.nn.transformer import TransformerModel, build_model
from interfaces.cli.app import run

# 計画的に混入させたノイズの内訳 (1000 ペア中 100)
PLANTED_COUNTS: Dict[str, int] = {
    "EmptySide": 20,
    "LengthBounds": 20,
    "LengthRatio": 20,
    "ScriptMismatch": 20,
    "Duplicate": 20,
}
_NOISE_ORDER = ("EmptySide", "LengthBounds", "LengthRatio", "ScriptMismatch", "Duplicate")


def planted_noise_pairs(size: int = 1000) -> List[Tuple[str, str]]:
    """10 行に 1 行ノイズを混ぜた en-hi の対訳 (ノイズ種別は順番に回す)"""
    pairs: List[Tuple[str, str]] = []
    for i in range(size):
        if i % 10 != 9:
            pairs.append((f"hello world {i}", f"नमस्ते दुनिया {i}"))
            continue
        kind = _NOISE_ORDER[(i // 10) % len(_NOISE_ORDER)]
        if kind == "EmptySide":
            pairs.append((f"hello world {i}", "   "))
        elif kind == "LengthBounds":
            pairs.append((" ".join(["word"] * 300), "नमस्ते"))
        elif kind == "LengthRatio":
            pairs.append(("a b c d e f g h i j", "नमस्ते दुनिया"))
        elif kind == "ScriptMismatch":
            pairs.append((f"hello world {i}", f"namaste duniya {i}"))
        else:
            # 直前のきれいなペアの完全な重複
            pairs.append(pairs[-1])
    return pairs


@pytest.fixture
def planted_corpus() -> ParallelCorpus:
    """ノイズ 100 ペアを含む 1000 ペアのコーパス"""
    pairs = planted_noise_pairs()
    return ParallelCorpus.from_texts([s for s, _ in pairs], [t for _, t in pairs], LangCode.EN, LangCode.HI)


@pytest.fixture
def write_parallel(tmp_path) -> Callable[..., Tuple[Path, Path]]:
    """対訳を 2 つのテキストファイルに書き出す関数"""

    def _write(sources: Sequence[str], targets: Sequence[str], name: str = "corpus",
               source_lang: str = "en", target_lang: str = "hi") -> Tuple[Path, Path]:
        source_path = tmp_path / f"{name}.{source_lang}"
        target_path = tmp_path / f"{name}.{target_lang}"
        write_lines(source_path, list(sources))
        write_lines(target_path, list(targets))
        return source_path, target_path

    return _write


@pytest.fixture
def tiny_config() -> TransformerConfig:
    """2 層 / 2 ヘッド / d_model 16 の小さなモデル設定"""
    return TransformerConfig(
        vocab_size_src=30,
        vocab_size_tgt=30,
        num_layers=2,
        num_heads=2,
        d_model=16,
        d_ffn=32,
        dropout=0.0,
        max_positions=64,
    )


@pytest.fixture
def tiny_model(tiny_config) -> TransformerModel:
    return build_model(tiny_config, seed=0)


@pytest.fixture
def sample_batch() -> Tuple[torch.Tensor, torch.Tensor]:
    """(原文, デコーダ入力) の小さなバッチ (パディングを含む)"""
    src = torch.tensor([[5, 6, 7, 8, 2], [9, 10, 2, 0, 0]], dtype=torch.long)
    tgt_in = torch.tensor([[1, 11, 12, 13], [1, 14, 15, 0]], dtype=torch.long)
    return src, tgt_in


@dataclass
class CliResult:
    exit_code: int
    stdout: str
    stderr: str


@pytest.fixture
def run_cli(capsys) -> Callable[..., CliResult]:
    """CLI を同一プロセスで実行して終了コードと出力を返す"""

    def _run(*argv: str) -> CliResult:
        capsys.readouterr()
        code = run([str(a) for a in argv])
        captured = capsys.readouterr()
        return CliResult(code, captured.out, captured.err)

    return _run
