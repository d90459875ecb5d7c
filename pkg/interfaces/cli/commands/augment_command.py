import argparse
import sys

from domain.entities.language import LangCode
from infra.files.corpus_repository_impl import FileCorpusRepository
from usecases.translit_service import TransliterationService

NAME = "augment"


def get_transliteration_service() -> TransliterationService:
    return TransliterationService(FileCorpusRepository())


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="関連言語コーパスを翻字して低資源コーパスに追加")
    parser.add_argument("--low-src", required=True, help="低資源コーパスの原文ファイル")
    parser.add_argument("--low-tgt", required=True, help="低資源コーパスの訳文ファイル")
    parser.add_argument("--high-src", required=True, help="高資源コーパスの原文ファイル")
    parser.add_argument("--high-tgt", required=True, help="高資源コーパスの訳文ファイル")
    parser.add_argument("--src-lang", default="en", help="両コーパス共通の原文言語")
    parser.add_argument("--low-lang", required=True, help="低資源コーパスの訳文言語")
    parser.add_argument("--high-lang", required=True, help="高資源コーパスの訳文言語")
    parser.add_argument("--out-prefix", required=True, help="出力 {prefix}.{lang}")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    source_lang = LangCode.parse(args.src_lang)
    augmented = get_transliteration_service().augment_files(
        (args.low_src, args.low_tgt),
        (source_lang, LangCode.parse(args.low_lang)),
        (args.high_src, args.high_tgt),
        (source_lang, LangCode.parse(args.high_lang)),
        args.out_prefix,
    )
    sys.stdout.write(f"pairs = {len(augmented)}\n")
    return 0
