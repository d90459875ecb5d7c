"""自己回帰的な探索 (貪欲法とビームサーチ)

モデルには encode と decode_next だけを要求する。
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
import torch
from torch import Tensor

from domain.entities.bpe import BOS_ID, EOS_ID, PAD_ID

logger = logging.getLogger(__name__)


class Seq2SeqScorer(Protocol):
    def encode(self, src_ids: Tensor) -> Tuple[Tensor, Tensor]:
        ...

    def decode_next(self, memory: Tensor, src_pad_mask: Tensor, prefixes: Tensor) -> Tensor:
        ...


@dataclass(frozen=True)
class Hypothesis:
    """探索結果

    tokens は BOS と EOS を含まない。score は対数確率の和、normalized_score は
    score / 生成長^length_penalty (生成長は EOS を含む)。
    """
    tokens: Tuple[int, ...]
    score: float
    normalized_score: float
    finished: bool


def _mask_invalid(log_probs: Tensor) -> Tensor:
    # PAD と BOS は生成しない
    log_probs = log_probs.clone()
    log_probs[:, PAD_ID] = float("-inf")
    log_probs[:, BOS_ID] = float("-inf")
    return log_probs


def _eval_mode(model: Seq2SeqScorer) -> None:
    if isinstance(model, torch.nn.Module):
        model.eval()


@torch.no_grad()
def greedy_decode(model: Seq2SeqScorer, src_ids: Tensor, max_len: Sequence[int]) -> List[List[int]]:
    """バッチ単位の貪欲デコード

    Args:
        model: encode / decode_next を持つモデル
        src_ids: (B, S) のパディング済み原文 (EOS 付き)
        max_len: 行ごとの生成長の上限 (EOS を含む)

    Returns:
        行ごとの生成トークン列 (BOS/EOS を除く)
    """
    _eval_mode(model)
    batch = src_ids.shape[0]
    limit = max(max_len)
    memory, src_pad_mask = model.encode(src_ids)
    prefixes = torch.full((batch, 1), BOS_ID, dtype=torch.long)
    outputs: List[List[int]] = [[] for _ in range(batch)]
    done = np.zeros(batch, dtype=bool)

    for step in range(limit):
        log_probs = _mask_invalid(model.decode_next(memory, src_pad_mask, prefixes)).numpy()
        # np.argmax は同点なら最小の ID を返す
        next_ids = log_probs.argmax(axis=-1)
        for i in range(batch):
            if done[i]:
                next_ids[i] = PAD_ID
                continue
            if next_ids[i] == EOS_ID:
                done[i] = True
            else:
                outputs[i].append(int(next_ids[i]))
                if len(outputs[i]) >= max_len[i]:
                    done[i] = True
        if done.all():
            break
        prefixes = torch.cat([prefixes, torch.as_tensor(next_ids, dtype=torch.long).unsqueeze(1)], dim=1)
    return outputs


@torch.no_grad()
def beam_search(
    model: Seq2SeqScorer,
    src_ids: Sequence[int],
    beam_size: int,
    max_len: int,
    length_penalty: float = 1.0,
) -> Hypothesis:
    """1 文のビームサーチ

    各ステップで累積対数確率の上位 2 * beam_size 候補を順に見て、EOS で終わる
    候補は順位が beam_size 未満のときだけ完了仮説にする。完了仮説が beam_size 個
    そろうか max_len に達したら終了し、完了仮説を score / len^length_penalty で
    比較する。beam_size = 1 は貪欲法と一致する。

    Args:
        model: encode / decode_next を持つモデル
        src_ids: 原文の ID 列 (EOS 付き)
        beam_size: ビーム幅
        max_len: 生成長の上限 (EOS を含む)
        length_penalty: 長さ正規化の指数

    Returns:
        最良の仮説
    """
    if beam_size < 1:
        raise ValueError("beam_size must be at least 1")
    if max_len < 1:
        raise ValueError("max_len must be at least 1")

    _eval_mode(model)
    memory, src_pad_mask = model.encode(torch.as_tensor([list(src_ids)], dtype=torch.long))

    alive: List[Tuple[List[int], float]] = [([BOS_ID], 0.0)]
    finished: List[Tuple[List[int], float, bool]] = []

    for step in range(max_len):
        n = len(alive)
        prefixes = torch.as_tensor([tokens for tokens, _ in alive], dtype=torch.long)
        log_probs = _mask_invalid(
            model.decode_next(memory.expand(n, *memory.shape[1:]), src_pad_mask.expand(n, -1), prefixes)
        ).numpy()
        totals = np.asarray([score for _, score in alive])[:, None] + log_probs

        flat = totals.reshape(-1)
        vocab = totals.shape[1]
        # 安定ソートで同点は (仮説番号, トークン ID) の小さい順
        order = np.argsort(-flat, kind="stable")[: 2 * beam_size]

        next_alive: List[Tuple[List[int], float]] = []
        for rank, index in enumerate(order):
            score = float(flat[index])
            if score == float("-inf"):
                break
            parent, token = divmod(int(index), vocab)
            tokens = alive[parent][0] + [token]
            if token == EOS_ID:
                if rank < beam_size:
                    finished.append((tokens, score, True))
            else:
                next_alive.append((tokens, score))
            if len(next_alive) == beam_size:
                break

        alive = next_alive
        if len(finished) >= beam_size or not alive:
            break
    else:
        # 上限に達した仮説は未完了のまま候補に加える
        finished.extend((tokens, score, False) for tokens, score in alive)

    if not finished:
        finished.extend((tokens, score, False) for tokens, score in alive)
    if not finished:
        return Hypothesis((), float("-inf"), float("-inf"), False)

    def normalized(item: Tuple[List[int], float, bool]) -> float:
        tokens, score, _ = item
        return score / (len(tokens) - 1) ** length_penalty

    best_tokens, best_score, is_finished = max(finished, key=normalized)
    body = best_tokens[1:-1] if is_finished else best_tokens[1:]
    if not is_finished:
        logger.debug(f"Beam search hit max_len {max_len} without EOS")
    return Hypothesis(tuple(body), best_score, normalized((best_tokens, best_score, is_finished)), is_finished)


def translate_ids(
    model: Seq2SeqScorer,
    sources: Sequence[Sequence[int]],
    beam_size: int,
    max_lens: Sequence[int],
    length_penalty: float = 1.0,
    batch_size: int = 64,
) -> List[List[int]]:
    """原文 ID 列 (EOS なし) のリストを入力順に翻訳する

    beam_size が 1 ならバッチ貪欲法、それ以外は 1 文ずつビームサーチ。
    """
    outputs: List[List[int]] = []
    if beam_size == 1:
        for start in range(0, len(sources), batch_size):
            chunk = sources[start:start + batch_size]
            rows = [list(s) + [EOS_ID] for s in chunk]
            width = max(len(r) for r in rows)
            src = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
            for i, row in enumerate(rows):
                src[i, : len(row)] = torch.as_tensor(row, dtype=torch.long)
            outputs.extend(greedy_decode(model, src, max_lens[start:start + batch_size]))
        return outputs

    for source, limit in zip(sources, max_lens):
        hypothesis = beam_search(model, list(source) + [EOS_ID], beam_size, limit, length_penalty)
        outputs.append(list(hypothesis.tokens))
    return outputs


def clamp_max_len(max_len: int, max_positions: Optional[int]) -> int:
    """デコーダ入力が位置表現の上限を超えないように抑える"""
    if max_positions is None:
        return max_len
    return max(1, min(max_len, max_positions - 1))
