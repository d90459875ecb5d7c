import argparse
import sys

from domain.entities.language import LangCode
from infra.files.corpus_repository_impl import FileCorpusRepository
from usecases.translit_service import TransliterationService

NAME = "translit"


def get_transliteration_service() -> TransliterationService:
    return TransliterationService(FileCorpusRepository())


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="ブラーフミー系文字間の翻字")
    parser.add_argument("--from", dest="from_lang", required=True)
    parser.add_argument("--to", dest="to_lang", required=True)
    parser.add_argument("--in", dest="in_path", required=True)
    parser.add_argument("--out", dest="out_path", required=True)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    lines, unmapped = get_transliteration_service().transliterate_file(
        args.in_path, args.out_path, LangCode.parse(args.from_lang), LangCode.parse(args.to_lang)
    )
    sys.stdout.write(f"lines = {lines} unmapped = {unmapped}\n")
    return 0
