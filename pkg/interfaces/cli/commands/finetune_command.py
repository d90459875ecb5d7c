import argparse
from pathlib import Path

from interfaces.cli.commands._common import (
    add_manifest_arguments,
    get_experiment_service,
    load_plan,
    print_summary,
)
from usecases.experiment_service import SOURCE_SIDE, TARGET_SIDE

NAME = "finetune"


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="汎用モデルの領域内データでの追加学習")
    parser.add_argument("--base", required=True, help="ベースのチェックポイント (L_c)")
    add_manifest_arguments(parser)
    parser.add_argument("--epochs", type=int, required=True, help="追加学習のエポック数 x")
    parser.add_argument(
        "--bpe-dir",
        help="ベースの BPE モデルのディレクトリ (既定: チェックポイントと同じ実行の bpe/)",
    )
    parser.set_defaults(handler=handle, parser=parser)


def handle(args: argparse.Namespace) -> int:
    if args.epochs < 0:
        args.parser.error("--epochs must be non-negative")
    _, plan, resolved = load_plan(args, {"train": {"epochs": args.epochs}})
    bpe_dir = Path(args.bpe_dir) if args.bpe_dir else Path(args.base).resolve().parent.parent / "bpe"
    summary = get_experiment_service(plan).finetune(
        plan, resolved, args.base, (str(bpe_dir / SOURCE_SIDE), str(bpe_dir / TARGET_SIDE)), args.epochs
    )
    print_summary(summary)
    return 0
