import argparse
import logging
from typing import Optional, Sequence

import torch

from configs.settings import Settings, get_settings
from interfaces.cli.commands import (
    augment_command,
    backtranslate_command,
    bpe_command,
    filter_command,
    finetune_command,
    score_command,
    train_command,
    translate_command,
    translit_command,
)
from interfaces.cli.error_handlers import EXIT_USAGE_ERROR, handle_exception

logger = logging.getLogger(__name__)

COMMANDS = (
    filter_command,
    translit_command,
    augment_command,
    bpe_command,
    train_command,
    finetune_command,
    backtranslate_command,
    translate_command,
    score_command,
)


def build_parser(settings: Optional[Settings] = None) -> argparse.ArgumentParser:
    """全サブコマンドを登録した ArgumentParser を作成する"""
    settings = settings or get_settings()
    parser = argparse.ArgumentParser(
        prog="indic-mt",
        description="インド諸語の多言語ニューラル機械翻訳ツールキット",
    )
    parser.add_argument("--version", action="version", version=f"{settings.app_name} {settings.app_version}")
    subparsers = parser.add_subparsers(dest="command", metavar="{" + ",".join(c.NAME for c in COMMANDS) + "}")
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def configure_runtime(settings: Settings) -> None:
    """再現性のための torch の設定"""
    torch.set_num_threads(settings.torch_num_threads)
    if settings.deterministic:
        torch.use_deterministic_algorithms(True)


def run(argv: Sequence[str], settings: Optional[Settings] = None) -> int:
    """コマンドラインを実行して終了コードを返す

    0: 成功、1: ドメインエラー (標準エラーに 1 行の JSON)、2: 使い方の誤り。
    """
    settings = settings or get_settings()
    parser = build_parser(settings)
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return EXIT_USAGE_ERROR if e.code not in (0, None) else 0

    configure_runtime(settings)
    logger.debug(f"Running {args.command}")
    try:
        return args.handler(args)
    except SystemExit as e:
        # ハンドラ内の parser.error
        return e.code if isinstance(e.code, int) else EXIT_USAGE_ERROR
    except Exception as e:
        return handle_exception(e)