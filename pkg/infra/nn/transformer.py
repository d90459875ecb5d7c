"""エンコーダ・デコーダ型 Transformer

層正規化は pre-norm、位置表現は固定の正弦波。既定の数値型は float64。
マスクはすべて bool で True が「参照禁止」。
"""
import math
from typing import Optional, Tuple

import torch
from torch import Tensor, nn

from domain.entities.bpe import PAD_ID
from domain.entities.training import TransformerConfig
from domain.exceptions import ShapeMismatch

DTYPE = torch.float64


def attention(q: Tensor, k: Tensor, v: Tensor, mask: Optional[Tensor] = None) -> Tensor:
    """softmax(Q Kᵀ / √d_k) V

    Args:
        q: (..., Tq, d_k)
        k: (..., Tk, d_k)
        v: (..., Tk, d_v)
        mask: (..., Tq, Tk) にブロードキャスト可能な bool。True の位置は -inf

    Raises:
        ShapeMismatch: 次元が合わない場合
    """
    if q.shape[-1] != k.shape[-1]:
        raise ShapeMismatch(f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeMismatch(f"{k.shape[-2]} keys but {v.shape[-2]} values")

    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if mask is not None:
        scores = scores.masked_fill(mask, float("-inf"))
    return torch.softmax(scores, dim=-1) @ v


def sinusoidal_positions(max_positions: int, d_model: int) -> Tensor:
    position = torch.arange(max_positions, dtype=DTYPE).unsqueeze(1)
    div_term = torch.exp(torch.arange(0, d_model, 2, dtype=DTYPE) * (-math.log(10000.0) / d_model))
    table = torch.zeros(max_positions, d_model, dtype=DTYPE)
    table[:, 0::2] = torch.sin(position * div_term)
    table[:, 1::2] = torch.cos(position * div_term)[:, : d_model // 2]
    return table


def causal_mask(length: int) -> Tensor:
    """位置 t より後ろを塞ぐ (length, length) のマスク"""
    return torch.triu(torch.ones(length, length, dtype=torch.bool), diagonal=1)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, num_heads: int, dropout: float):
        super().__init__()
        self.num_heads = num_heads
        self.head_dim = d_model // num_heads
        self.q_proj = nn.Linear(d_model, d_model, dtype=DTYPE)
        self.k_proj = nn.Linear(d_model, d_model, dtype=DTYPE)
        self.v_proj = nn.Linear(d_model, d_model, dtype=DTYPE)
        self.out_proj = nn.Linear(d_model, d_model, dtype=DTYPE)
        self.dropout = nn.Dropout(dropout)

    def _split(self, x: Tensor) -> Tensor:
        batch, length, _ = x.shape
        return x.view(batch, length, self.num_heads, self.head_dim).transpose(1, 2)

    def forward(self, query: Tensor, key: Tensor, value: Tensor, mask: Optional[Tensor] = None) -> Tensor:
        q = self._split(self.q_proj(query))
        k = self._split(self.k_proj(key))
        v = self._split(self.v_proj(value))
        heads = attention(q, k, v, mask)
        batch, _, length, _ = heads.shape
        merged = heads.transpose(1, 2).reshape(batch, length, self.num_heads * self.head_dim)
        return self.dropout(self.out_proj(merged))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ffn: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(d_model, d_ffn, dtype=DTYPE)
        self.fc2 = nn.Linear(d_ffn, d_model, dtype=DTYPE)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        return self.dropout(self.fc2(self.dropout(torch.relu(self.fc1(x)))))


class EncoderLayer(nn.Module):
    def __init__(self, config: TransformerConfig):
        super().__init__()
        self.self_attn_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.self_attn = MultiHeadAttention(config.d_model, config.num_heads, config.dropout)
        self.ffn_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.ffn = FeedForward(config.d_model, config.d_ffn, config.dropout)

    def forward(self, x: Tensor, mask: Tensor) -> Tensor:
        h = self.self_attn_norm(x)
        x = x + self.self_attn(h, h, h, mask)
        return x + self.ffn(self.ffn_norm(x))


class DecoderLayer(nn.Module):
    def __init__(self, config: TransformerConfig):
        super().__init__()
        self.self_attn_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.self_attn = MultiHeadAttention(config.d_model, config.num_heads, config.dropout)
        self.cross_attn_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.cross_attn = MultiHeadAttention(config.d_model, config.num_heads, config.dropout)
        self.ffn_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.ffn = FeedForward(config.d_model, config.d_ffn, config.dropout)

    def forward(self, x: Tensor, memory: Tensor, self_mask: Tensor, memory_mask: Tensor) -> Tensor:
        h = self.self_attn_norm(x)
        x = x + self.self_attn(h, h, h, self_mask)
        h = self.cross_attn_norm(x)
        x = x + self.cross_attn(h, memory, memory, memory_mask)
        return x + self.ffn(self.ffn_norm(x))


class TransformerModel(nn.Module):
    """翻訳モデル本体

    encode / decode_next を分けて公開し、探索側はこの 2 つだけを使う。
    """

    def __init__(self, config: TransformerConfig):
        super().__init__()
        self.config = config
        self.src_embed = nn.Embedding(config.vocab_size_src, config.d_model, dtype=DTYPE)
        if config.shared_embeddings:
            self.tgt_embed = self.src_embed
        else:
            self.tgt_embed = nn.Embedding(config.vocab_size_tgt, config.d_model, dtype=DTYPE)
        self.register_buffer(
            "positions", sinusoidal_positions(config.max_positions, config.d_model), persistent=False
        )
        self.embed_dropout = nn.Dropout(config.dropout)
        self.encoder_layers = nn.ModuleList(EncoderLayer(config) for _ in range(config.num_layers))
        self.encoder_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.decoder_layers = nn.ModuleList(DecoderLayer(config) for _ in range(config.num_layers))
        self.decoder_norm = nn.LayerNorm(config.d_model, dtype=DTYPE)
        self.output_proj = nn.Linear(config.d_model, config.vocab_size_tgt, dtype=DTYPE)

    def reset_parameters(self) -> None:
        """Embedding は N(0, d_model^-0.5)、Linear は Xavier 一様分布でバイアス 0"""
        for module in self.modules():
            if isinstance(module, nn.Embedding):
                nn.init.normal_(module.weight, mean=0.0, std=self.config.d_model ** -0.5)
            elif isinstance(module, nn.Linear):
                nn.init.xavier_uniform_(module.weight)
                nn.init.zeros_(module.bias)

    def _check_ids(self, ids: Tensor, vocab_size: int, side: str) -> None:
        if ids.dim() != 2:
            raise ShapeMismatch(f"{side} ids must be a (batch, length) matrix, got {tuple(ids.shape)}")
        if ids.shape[1] > self.config.max_positions:
            raise ShapeMismatch(
                f"{side} length {ids.shape[1]} exceeds max_positions {self.config.max_positions}"
            )
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= vocab_size):
            raise ShapeMismatch(f"{side} ids outside vocabulary of size {vocab_size}")

    def _embed(self, embedding: nn.Embedding, ids: Tensor) -> Tensor:
        x = embedding(ids) * math.sqrt(self.config.d_model)
        return self.embed_dropout(x + self.positions[: ids.shape[1]])

    def encode(self, src_ids: Tensor) -> Tuple[Tensor, Tensor]:
        """原文を符号化する

        Returns:
            (memory (B, S, d_model), 原文のパディングマスク (B, S))
        """
        self._check_ids(src_ids, self.config.vocab_size_src, "source")
        src_pad_mask = src_ids.eq(PAD_ID)
        mask = src_pad_mask[:, None, None, :]
        x = self._embed(self.src_embed, src_ids)
        for layer in self.encoder_layers:
            x = layer(x, mask)
        return self.encoder_norm(x), src_pad_mask

    def decode(self, tgt_in: Tensor, memory: Tensor, src_pad_mask: Tensor) -> Tensor:
        """訳文の各位置で次トークンの対数確率 (B, T, V_tgt) を返す"""
        self._check_ids(tgt_in, self.config.vocab_size_tgt, "target")
        if tgt_in.shape[0] != memory.shape[0]:
            raise ShapeMismatch(f"target batch {tgt_in.shape[0]} != source batch {memory.shape[0]}")
        self_mask = causal_mask(tgt_in.shape[1]).to(tgt_in.device)
        memory_mask = src_pad_mask[:, None, None, :]
        x = self._embed(self.tgt_embed, tgt_in)
        for layer in self.decoder_layers:
            x = layer(x, memory, self_mask, memory_mask)
        return torch.log_softmax(self.output_proj(self.decoder_norm(x)), dim=-1)

    def decode_next(self, memory: Tensor, src_pad_mask: Tensor, prefixes: Tensor) -> Tensor:
        """接頭辞の次トークンの対数確率 (N, V_tgt)"""
        return self.decode(prefixes, memory, src_pad_mask)[:, -1, :]

    def forward(self, src_ids: Tensor, tgt_in: Tensor) -> Tensor:
        memory, src_pad_mask = self.encode(src_ids)
        return self.decode(tgt_in, memory, src_pad_mask)


def build_model(config: TransformerConfig, seed: int) -> TransformerModel:
    """シードを固定してモデルを初期化する"""
    torch.manual_seed(seed)
    model = TransformerModel(config)
    model.reset_parameters()
    return model


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
