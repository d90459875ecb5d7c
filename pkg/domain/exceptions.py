"""ドメイン例外

各例外はモジュール名付きのエラーコード (例: ``CORPUS.LINE_COUNT_MISMATCH``) を持ち、
CLI のエラーハンドラがそのまま機械可読な 1 行のエラーとして出力する。
"""
from typing import Any, Dict, Optional


class DomainError(ValueError):
    """全ドメインエラーの基底クラス"""

    module: str = "DOMAIN"
    code: str = "ERROR"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    @property
    def error_code(self) -> str:
        return f"{self.module}.{self.code}"


# corpus
class CorpusError(DomainError):
    module = "CORPUS"


class LineCountMismatch(CorpusError):
    code = "LINE_COUNT_MISMATCH"


class Utf8Error(CorpusError):
    code = "UTF8_ERROR"

    def __init__(self, path: str, byte_offset: int):
        super().__init__(
            f"invalid UTF-8 in {path} at byte offset {byte_offset}",
            {"path": path, "byte_offset": byte_offset},
        )
        self.path = path
        self.byte_offset = byte_offset


class UnknownLang(CorpusError):
    code = "UNKNOWN_LANG"


class MalformedLine(CorpusError):
    code = "MALFORMED_LINE"


class LanguageMismatch(CorpusError):
    code = "LANGUAGE_MISMATCH"


# translit
class TranslitError(DomainError):
    module = "TRANSLIT"


class UnsupportedScriptPair(TranslitError):
    code = "UNSUPPORTED_SCRIPT_PAIR"


class GroupMismatch(TranslitError):
    code = "GROUP_MISMATCH"


# tokenizer
class TokenizerError(DomainError):
    module = "TOKENIZER"


class EmptyCorpus(TokenizerError):
    code = "EMPTY_CORPUS"


class InvalidId(TokenizerError):
    code = "INVALID_ID"


# model
class ModelError(DomainError):
    module = "MODEL"


class ShapeMismatch(ModelError):
    code = "SHAPE_MISMATCH"


class NonFiniteGradient(ModelError):
    code = "NON_FINITE_GRADIENT"


# pipeline
class PipelineError(DomainError):
    module = "PIPELINE"


class EmptyDataset(PipelineError):
    code = "EMPTY_DATASET"


class CheckpointIncompatible(PipelineError):
    code = "CHECKPOINT_INCOMPATIBLE"


class CorruptCheckpoint(PipelineError):
    code = "CORRUPT_CHECKPOINT"


class VersionMismatch(PipelineError):
    code = "VERSION_MISMATCH"


class RunLocked(PipelineError):
    code = "RUN_LOCKED"


# eval
class EvalError(DomainError):
    module = "EVAL"


class LengthMismatch(EvalError):
    code = "LENGTH_MISMATCH"


class EmptyEvaluation(EvalError):
    code = "EMPTY_EVALUATION"


# cli
class ManifestError(DomainError):
    module = "CLI"


class UnknownKey(ManifestError):
    code = "UNKNOWN_KEY"


class MissingRequired(ManifestError):
    code = "MISSING_REQUIRED"


class FieldTypeError(ManifestError):
    code = "TYPE_ERROR"
