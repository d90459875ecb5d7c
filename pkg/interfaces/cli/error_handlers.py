import logging
import sys
from typing import Optional, TextIO

from domain.exceptions import DomainError
from interfaces.cli.schemas import ErrorResponse

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN_ERROR = 1
EXIT_USAGE_ERROR = 2


def _emit(response: ErrorResponse, stream: Optional[TextIO]) -> None:
    stream = stream or sys.stderr
    stream.write(response.model_dump_json() + "\n")
    stream.flush()


def domain_error_handler(exc: DomainError, stream: Optional[TextIO] = None) -> int:
    """ドメインエラーハンドラ"""
    _emit(ErrorResponse.create(code=exc.error_code, message=exc.message, details=exc.details), stream)
    return EXIT_DOMAIN_ERROR


def value_error_handler(exc: ValueError, stream: Optional[TextIO] = None) -> int:
    """エンティティの検証エラーハンドラ"""
    _emit(ErrorResponse.create(code="VALIDATION_ERROR", message=str(exc)), stream)
    return EXIT_DOMAIN_ERROR


def os_error_handler(exc: OSError, stream: Optional[TextIO] = None) -> int:
    """ファイル入出力エラーハンドラ"""
    details = {"path": exc.filename} if exc.filename else {}
    _emit(ErrorResponse.create(code="IO_ERROR", message=exc.strerror or str(exc), details=details), stream)
    return EXIT_DOMAIN_ERROR


def general_exception_handler(exc: Exception, stream: Optional[TextIO] = None) -> int:
    """一般的な例外ハンドラ"""
    logger.exception(f"Unexpected error: {exc}")
    _emit(ErrorResponse.create(code="INTERNAL_ERROR", message="Internal error"), stream)
    return EXIT_DOMAIN_ERROR


def handle_exception(exc: Exception, stream: Optional[TextIO] = None) -> int:
    """例外を終了コードに変換し、1 行の JSON エラーを書き出す"""
    if isinstance(exc, DomainError):
        return domain_error_handler(exc, stream)
    if isinstance(exc, ValueError):
        return value_error_handler(exc, stream)
    if isinstance(exc, OSError):
        return os_error_handler(exc, stream)
    return general_exception_handler(exc, stream)
