import logging
import sys

from configs.settings import get_settings
from interfaces.cli.app import run

# 設定を取得
settings = get_settings()

# ログ設定 (標準エラー出力)
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper()),
    format=settings.log_format,
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


if __name__ == "__main__":
    logger.debug(f"Starting {settings.app_name} v{settings.app_version}")
    sys.exit(run(sys.argv[1:], settings))
