import argparse
import sys

from domain.entities.language import LangCode
from infra.files.bpe_repository_impl import FileBpeRepository
from infra.files.corpus_repository_impl import FileCorpusRepository
from usecases.tokenizer_service import TokenizerService

NAME = "bpe"


def get_tokenizer_service() -> TokenizerService:
    return TokenizerService(FileBpeRepository(), FileCorpusRepository())


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="BPE モデルの学習と適用")
    actions = parser.add_subparsers(dest="bpe_action", metavar="{train,apply}")
    actions.required = True

    train = actions.add_parser("train", help="テキストファイル群から BPE を学習")
    train.add_argument("--in", dest="in_paths", nargs="+", required=True)
    train.add_argument("--merges", type=int, required=True)
    train.add_argument("--vocab-size", type=int)
    train.add_argument("--out", dest="out_prefix", required=True, help="出力 {prefix}.merges / {prefix}.vocab")
    train.set_defaults(handler=handle_train)

    apply = actions.add_parser("apply", help="ファイルをサブワードに分割")
    apply.add_argument("--model", dest="model_prefix", required=True)
    apply.add_argument("--in", dest="in_path", required=True)
    apply.add_argument("--out", dest="out_path", required=True)
    apply.add_argument("--tag", help="各行の先頭に付ける <2xx> の言語")
    apply.set_defaults(handler=handle_apply)


def handle_train(args: argparse.Namespace) -> int:
    model = get_tokenizer_service().train_files(args.in_paths, args.merges, args.out_prefix, args.vocab_size)
    sys.stdout.write(f"merges = {len(model.merges)} vocab = {len(model)}\n")
    return 0


def handle_apply(args: argparse.Namespace) -> int:
    tag = LangCode.parse(args.tag) if args.tag else None
    lines = get_tokenizer_service().apply_file(args.model_prefix, args.in_path, args.out_path, tag)
    sys.stdout.write(f"lines = {lines}\n")
    return 0
