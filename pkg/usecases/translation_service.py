import logging
from typing import List, Optional, Sequence

from domain.entities.bpe import BpeModel
from domain.entities.language import LangCode
from domain.entities.training import DecodeConfig
from domain.repositories.bpe_repository import BpeRepository
from domain.repositories.checkpoint_repository import CheckpointRepository
from domain.repositories.corpus_repository import CorpusRepository, PathLike
from infra.nn.decoding import clamp_max_len, translate_ids
from infra.nn.snapshot import restore_model
from infra.nn.transformer import TransformerModel
from usecases.tokenizer_service import bpe_decode, bpe_encode

logger = logging.getLogger(__name__)


def translate_texts(
    model: TransformerModel,
    texts: Sequence[str],
    src_bpe: BpeModel,
    tgt_bpe: BpeModel,
    decode: DecodeConfig,
    target_lang: Optional[LangCode] = None,
) -> List[str]:
    """テキストを入力順に翻訳する

    target_lang を指定すると原文の先頭に ``<2xx>`` タグを付ける。
    """
    prefix = f"{LangCode.parse(target_lang).target_token} " if target_lang is not None else ""
    limit = model.config.max_positions - 1
    sources = []
    for text in texts:
        ids = list(bpe_encode(src_bpe, prefix + text).ids)
        if len(ids) > limit:
            logger.warning(f"Source of {len(ids)} subwords truncated to {limit}")
            ids = ids[:limit]
        sources.append(ids)
    max_lens = [clamp_max_len(decode.max_len_for(len(ids)), model.config.max_positions) for ids in sources]
    outputs = translate_ids(
        model, sources, decode.beam_size, max_lens,
        length_penalty=decode.length_penalty, batch_size=decode.batch_size,
    )
    return [bpe_decode(tgt_bpe, ids) for ids in outputs]


class TranslationService:
    """チェックポイントを使ったファイル翻訳サービス"""

    def __init__(
        self,
        checkpoint_repository: CheckpointRepository,
        bpe_repository: BpeRepository,
        corpus_repository: CorpusRepository,
    ):
        self.checkpoint_repository = checkpoint_repository
        self.bpe_repository = bpe_repository
        self.corpus_repository = corpus_repository

    def translate_file(
        self,
        checkpoint_path: PathLike,
        in_path: PathLike,
        out_path: PathLike,
        src_bpe_prefix: str,
        tgt_bpe_prefix: str,
        decode: DecodeConfig,
        target_lang: Optional[LangCode] = None,
    ) -> int:
        """ファイルを行単位で翻訳して書き出す

        Returns:
            翻訳した行数
        """
        checkpoint = self.checkpoint_repository.load(checkpoint_path)
        model = restore_model(checkpoint)
        src_bpe = self.bpe_repository.load(src_bpe_prefix)
        tgt_bpe = self.bpe_repository.load(tgt_bpe_prefix)
        lines = self.corpus_repository.load_lines(in_path)
        outputs = translate_texts(model, lines, src_bpe, tgt_bpe, decode, target_lang)
        self.corpus_repository.save_lines(outputs, out_path)
        logger.info(f"Translated {len(outputs)} lines from {in_path} with beam {decode.beam_size}")
        return len(outputs)
