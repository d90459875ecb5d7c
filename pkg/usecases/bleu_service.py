import json
import logging
import math
import unicodedata
from collections import Counter
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from domain.entities.evaluation import BleuReport
from domain.exceptions import EmptyEvaluation, LengthMismatch
from domain.repositories.corpus_repository import CorpusRepository, PathLike

logger = logging.getLogger(__name__)

# 0 一致の n-gram に与える仮の一致数 (smooth=True のとき)
SMOOTH_EPSILON = 0.1


def _is_separable(char: str) -> bool:
    return unicodedata.category(char)[0] in ("P", "S")


def tokenize_for_bleu(text: str) -> List[str]:
    """評価用トークン化

    空白で分割したうえで、句読点 (P*) と記号 (S*) を 1 文字ずつ独立した
    トークンにする。ダンダ ``।`` などインド系文字の句読点も同じ扱い。
    """
    tokens: List[str] = []
    for word in text.split():
        current = []
        for char in word:
            if _is_separable(char):
                if current:
                    tokens.append("".join(current))
                    current = []
                tokens.append(char)
            else:
                current.append(char)
        if current:
            tokens.append("".join(current))
    return tokens


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    """連続する n-gram の多重集合"""
    if n < 1:
        raise ValueError("n must be at least 1")
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_statistics(
    hypotheses: Sequence[str],
    references: Sequence[str],
    max_n: int = 4,
) -> Tuple[List[int], List[int], int, int]:
    """コーパス全体のクリップ済み一致数・n-gram 数・長さを集計する

    Returns:
        (一致数 [n=1..max_n], 仮説 n-gram 数 [n=1..max_n], 仮説長, 参照長)
    """
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_length = 0
    ref_length = 0
    for hypothesis, reference in zip(hypotheses, references):
        hyp_tokens = tokenize_for_bleu(hypothesis)
        ref_tokens = tokenize_for_bleu(reference)
        hyp_length += len(hyp_tokens)
        ref_length += len(ref_tokens)
        for n in range(1, max_n + 1):
            hyp_counts = ngram_counts(hyp_tokens, n)
            ref_counts = ngram_counts(ref_tokens, n)
            matches[n - 1] += sum(min(count, ref_counts[gram]) for gram, count in hyp_counts.items())
            totals[n - 1] += max(0, len(hyp_tokens) - n + 1)
    return matches, totals, hyp_length, ref_length


def reference_ngram_totals(references: Sequence[str], max_n: int = 4) -> List[int]:
    """参照側の n-gram 数 [n=1..max_n]"""
    lengths = [len(tokenize_for_bleu(reference)) for reference in references]
    return [sum(max(0, length - n + 1) for length in lengths) for n in range(1, max_n + 1)]


def corpus_bleu(
    hypotheses: Sequence[str],
    references: Sequence[str],
    max_n: int = 4,
    smooth: bool = False,
) -> BleuReport:
    """単一参照のコーパス BLEU

    p_n = クリップ済み一致数 / 仮説 n-gram 数、BP = min(1, exp(1 - r/c))。
    既定では平滑化なしで、一致 0 の次数があればスコアは 0。
    仮説・参照のどちらにも n-gram が無い次数は p_n = 1 とする。

    Args:
        hypotheses: 翻訳結果 (脱トークン化済みテキスト)
        references: 参照訳
        max_n: n-gram の最大次数
        smooth: 一致 0 の次数に SMOOTH_EPSILON を使う

    Raises:
        LengthMismatch: 仮説と参照の数が異なる場合
        EmptyEvaluation: 入力が空の場合
    """
    if len(hypotheses) != len(references):
        raise LengthMismatch(
            f"{len(hypotheses)} hypotheses but {len(references)} references",
            {"hypotheses": len(hypotheses), "references": len(references)},
        )
    if not hypotheses:
        raise EmptyEvaluation("no sentences to evaluate")
    if max_n < 1:
        raise ValueError("max_n must be at least 1")

    matches, totals, hyp_length, ref_length = corpus_statistics(hypotheses, references, max_n)
    ref_totals = reference_ngram_totals(references, max_n)

    precisions = []
    for match, total, ref_total in zip(matches, totals, ref_totals):
        if total == 0:
            # 仮説にも参照にも無い次数は一致とみなす
            precisions.append(1.0 if ref_total == 0 else 0.0)
        elif match == 0 and smooth:
            precisions.append(SMOOTH_EPSILON / total)
        else:
            precisions.append(match / total)

    if hyp_length == 0:
        brevity_penalty = 1.0 if ref_length == 0 else 0.0
    elif hyp_length >= ref_length:
        brevity_penalty = 1.0
    else:
        brevity_penalty = math.exp(1.0 - ref_length / hyp_length)

    if all(p > 0 for p in precisions) and brevity_penalty > 0:
        log_mean = math.fsum(math.log(p) for p in precisions) / max_n
        score = 100.0 * brevity_penalty * math.exp(log_mean)
    else:
        score = 0.0

    return BleuReport(
        score=min(score, 100.0),
        precisions=tuple(precisions),
        brevity_penalty=brevity_penalty,
        hyp_length=hyp_length,
        ref_length=ref_length,
    )


class BleuService:
    """ファイル単位の BLEU 評価サービス"""

    def __init__(self, corpus_repository: CorpusRepository):
        self.corpus_repository = corpus_repository

    def score_files(
        self,
        hyp_path: PathLike,
        ref_path: PathLike,
        max_n: int = 4,
        smooth: bool = False,
        report_path: Optional[PathLike] = None,
    ) -> BleuReport:
        """行対応の 2 ファイルを評価し、指定があればレポートを JSON で書き出す"""
        hypotheses = self.corpus_repository.load_lines(hyp_path)
        references = self.corpus_repository.load_lines(ref_path)
        report = corpus_bleu(hypotheses, references, max_n=max_n, smooth=smooth)
        logger.info(f"{hyp_path}: {report.format()}")
        if report_path is not None:
            path = Path(report_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return report
