import argparse
import sys

from infra.files.corpus_repository_impl import FileCorpusRepository
from usecases.bleu_service import BleuService

NAME = "score"


def get_bleu_service() -> BleuService:
    return BleuService(FileCorpusRepository())


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="コーパス BLEU の計算")
    parser.add_argument("--hyp", required=True)
    parser.add_argument("--ref", required=True)
    parser.add_argument("--max-n", type=int, default=4)
    parser.add_argument("--smooth", action="store_true", help="イプシロン平滑化")
    parser.add_argument("--report", help="BleuReport の JSON 出力先")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    report = get_bleu_service().score_files(args.hyp, args.ref, args.max_n, args.smooth, args.report)
    sys.stdout.write(report.format() + "\n")
    return 0
