import argparse

from interfaces.cli.commands._common import (
    add_manifest_arguments,
    get_experiment_service,
    load_plan,
    print_summary,
)

NAME = "train"


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="マニフェストに従った多言語共同学習")
    add_manifest_arguments(parser)
    parser.add_argument("--epochs", type=int, help="manifest の train.epochs を上書き")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    extra = {"train": {"epochs": args.epochs}} if args.epochs is not None else {}
    _, plan, resolved = load_plan(args, extra)
    summary = get_experiment_service(plan).train(plan, resolved)
    print_summary(summary)
    return 0
