import argparse
from typing import Any, Dict

from interfaces.cli.commands._common import (
    add_manifest_arguments,
    get_experiment_service,
    load_plan,
    print_summary,
)

NAME = "backtranslate"


def parse_stopping(value: str) -> Dict[str, Any]:
    """``budget:K`` または ``converge`` を stopping セクションの上書きにする"""
    if value == "converge":
        return {"kind": "convergence"}
    if value.startswith("budget:"):
        try:
            budget = int(value[len("budget:"):])
        except ValueError:
            budget = 0
        if budget >= 1:
            return {"kind": "fixed_updates", "max_updates": budget}
    raise argparse.ArgumentTypeError(f"expected budget:K or converge, got {value!r}")


def register(subparsers) -> None:
    parser = subparsers.add_parser(NAME, help="反復逆翻訳")
    add_manifest_arguments(parser)
    parser.add_argument("--rounds", type=int, help="manifest の backtranslation.rounds を上書き")
    parser.add_argument("--stopping", type=parse_stopping, help="budget:K | converge")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    extra: Dict[str, Any] = {}
    if args.rounds is not None:
        extra["backtranslation"] = {"rounds": args.rounds}
    if args.stopping is not None:
        extra["stopping"] = args.stopping
    _, plan, resolved = load_plan(args, extra)
    summary = get_experiment_service(plan).backtranslate(plan, resolved)
    print_summary(summary)
    return 0
