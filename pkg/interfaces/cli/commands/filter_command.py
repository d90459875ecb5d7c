import argparse
import json
import sys

from domain.entities.filtering import FilterConfig
from domain.entities.language import LangCode
from infra.files.corpus_repository_impl import FileCorpusRepository
from usecases.corpus_service import CorpusService

NAME = "filter"


def get_corpus_service(args: argparse.Namespace) -> CorpusService:
    """CorpusService の組み立て"""
    return CorpusService(FileCorpusRepository(args.normalize), workers=args.workers)


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="対訳コーパスのノイズフィルタリング")
    parser.add_argument("--src", help="原文ファイル")
    parser.add_argument("--tgt", help="訳文ファイル")
    parser.add_argument("--tsv", help="原文 TAB 訳文 の 1 ファイル (--src/--tgt の代わり)")
    parser.add_argument("--src-lang", required=True)
    parser.add_argument("--tgt-lang", required=True)
    parser.add_argument("--out-prefix", required=True, help="出力 {prefix}.{lang}")
    parser.add_argument("--report", help="FilterReport の JSON 出力先")
    parser.add_argument("--max-len", type=int, default=250)
    parser.add_argument("--min-len", type=int, default=1)
    parser.add_argument("--max-len-ratio", type=float, default=3.0)
    parser.add_argument("--script-fraction", type=float, default=0.5)
    parser.add_argument("--keep-duplicates", action="store_true")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--normalize", choices=["nfc", "none"], default="nfc")
    parser.set_defaults(handler=handle, parser=parser)


def handle(args: argparse.Namespace) -> int:
    """コーパスをフィルタリングし、レポートを標準出力 (と --report) に書く"""
    if args.tsv is None and (args.src is None or args.tgt is None):
        args.parser.error("either --tsv or both --src and --tgt are required")
    source_lang = LangCode.parse(args.src_lang)
    target_lang = LangCode.parse(args.tgt_lang)
    config = FilterConfig(
        max_len=args.max_len,
        min_len=args.min_len,
        max_len_ratio=args.max_len_ratio,
        expected_script_fraction=args.script_fraction,
        drop_duplicates=not args.keep_duplicates,
    )

    service = get_corpus_service(args)
    if args.tsv is not None:
        corpus = service.load_parallel_tsv(args.tsv, source_lang, target_lang)
    else:
        corpus = service.load_parallel(args.src, args.tgt, source_lang, target_lang)
    cleaned, report = service.clean(corpus, config)
    service.corpus_repository.save_parallel(
        cleaned, f"{args.out_prefix}.{source_lang}", f"{args.out_prefix}.{target_lang}"
    )

    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    sys.stdout.write(text + "\n")
    return 0
