import argparse
import sys
from pathlib import Path

from domain.entities.language import LangCode
from domain.entities.training import DecodeConfig
from infra.checkpoint.checkpoint_repository_impl import FileCheckpointRepository
from infra.files.bpe_repository_impl import FileBpeRepository
from infra.files.corpus_repository_impl import FileCorpusRepository
from usecases.experiment_service import SOURCE_SIDE, TARGET_SIDE
from usecases.translation_service import TranslationService

NAME = "translate"


def get_translation_service() -> TranslationService:
    return TranslationService(FileCheckpointRepository(), FileBpeRepository(), FileCorpusRepository())


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="チェックポイントでファイルを翻訳")
    parser.add_argument("--ckpt", required=True)
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    parser.add_argument("--beam", type=int, default=20)
    parser.add_argument("--length-penalty", type=float, default=1.0)
    parser.add_argument("--max-len-a", type=float, default=1.2)
    parser.add_argument("--max-len-b", type=int, default=10)
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--target-lang", help="原文に付ける <2xx> タグの言語")
    parser.add_argument("--src-bpe", help="原文側 BPE の prefix (既定: 実行ディレクトリの bpe/source)")
    parser.add_argument("--tgt-bpe", help="訳文側 BPE の prefix (既定: 実行ディレクトリの bpe/target)")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    bpe_dir = Path(args.ckpt).resolve().parent.parent / "bpe"
    decode = DecodeConfig(
        beam_size=args.beam,
        length_penalty=args.length_penalty,
        max_len_a=args.max_len_a,
        max_len_b=args.max_len_b,
        batch_size=args.batch_size,
    )
    count = get_translation_service().translate_file(
        args.ckpt,
        args.in_path,
        args.out_path,
        args.src_bpe or str(bpe_dir / SOURCE_SIDE),
        args.tgt_bpe or str(bpe_dir / TARGET_SIDE),
        decode,
        LangCode.parse(args.target_lang) if args.target_lang else None,
    )
    sys.stdout.write(f"lines = {count}\n")
    return 0
