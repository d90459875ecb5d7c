import logging
import unicodedata
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from domain.entities.corpus import MonoCorpus, ParallelCorpus, SentencePair
from domain.entities.filtering import FilterConfig, FilterReport, FilterVerdict, RejectRule
from domain.entities.language import (
    EXPECTED_SCRIPTS,
    LANGUAGE_GROUPS,
    LATIN,
    LATIN_RANGES,
    OTHER,
    SCRIPT_BLOCKS,
    GroupName,
    LangCode,
)
from domain.repositories.corpus_repository import CorpusRepository, PathLike

logger = logging.getLogger(__name__)


def _script_of(char: str) -> str:
    codepoint = ord(char)
    for block in SCRIPT_BLOCKS:
        if codepoint in block:
            return block.name
    for start, end in LATIN_RANGES:
        if start <= codepoint < end:
            return LATIN
    return OTHER


def classify_script(text: str) -> Dict[str, float]:
    """文字体系ごとの文字比率を求める

    分母は文字 (L*) と結合記号 (M*) のみ。数字・句読点・記号・空白は数えない。
    どのブロックにも属さない文字は ``"other"`` に入る。

    Args:
        text: 判定対象テキスト

    Returns:
        文字体系名 → 比率 (出現したものだけ)。文字が無ければ空の辞書
    """
    counts: Dict[str, int] = {}
    total = 0
    for char in text:
        if unicodedata.category(char)[0] not in ("L", "M"):
            continue
        script = _script_of(char)
        counts[script] = counts.get(script, 0) + 1
        total += 1

    if total == 0:
        return {}
    return {script: count / total for script, count in counts.items()}


def _script_conforms(text: str, lang: LangCode, threshold: float) -> bool:
    fractions = classify_script(text)
    if not fractions:
        # 文字を含まない側 (数字のみ等) は判定対象外
        return True
    expected = EXPECTED_SCRIPTS[lang]
    return sum(fractions.get(script, 0.0) for script in expected) >= threshold


def filter_pair(pair: SentencePair, cfg: FilterConfig) -> FilterVerdict:
    """1 ペアにフィルタリングルールを適用する

    ルールは EmptySide → LengthBounds → LengthRatio → ScriptMismatch の順に
    評価し、最初に失敗したルールを返す。
    """
    source = pair.source.strip()
    target = pair.target.strip()
    if not source or not target:
        return FilterVerdict.reject(RejectRule.EMPTY_SIDE)

    len_s = len(source.split())
    len_t = len(target.split())
    for length in (len_s, len_t):
        if length < cfg.min_len or length > cfg.max_len:
            return FilterVerdict.reject(RejectRule.LENGTH_BOUNDS)

    if max(len_s, len_t) / min(len_s, len_t) > cfg.max_len_ratio:
        return FilterVerdict.reject(RejectRule.LENGTH_RATIO)

    threshold = cfg.expected_script_fraction
    if not (_script_conforms(source, pair.source_lang, threshold)
            and _script_conforms(target, pair.target_lang, threshold)):
        return FilterVerdict.reject(RejectRule.SCRIPT_MISMATCH)

    return FilterVerdict.keep()


def _judge_all(pairs: Sequence[SentencePair], cfg: FilterConfig, workers: int) -> List[FilterVerdict]:
    if workers <= 1 or len(pairs) < 2:
        return [filter_pair(pair, cfg) for pair in pairs]

    chunksize = max(1, len(pairs) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as executor:
        # map は入力順で結果を返す
        return list(executor.map(partial(filter_pair, cfg=cfg), pairs, chunksize=chunksize))


def filter_corpus(
    corpus: ParallelCorpus,
    cfg: FilterConfig,
    workers: int = 1,
) -> Tuple[ParallelCorpus, FilterReport]:
    """コーパス全体をフィルタリングする

    ペア単位の判定は並列化できるが、重複除去と集計は入力順に逐次行うため
    出力と集計はワーカー数に依存しない。

    Args:
        corpus: 入力コーパス
        cfg: フィルタリング設定
        workers: ペア判定のプロセス数

    Returns:
        (残ったペアのコーパス, 集計レポート)
    """
    verdicts = _judge_all(corpus.pairs, cfg, workers)

    retained: List[SentencePair] = []
    rejected = {rule: 0 for rule in RejectRule}
    seen = set()
    for pair, verdict in zip(corpus.pairs, verdicts):
        if not verdict.kept:
            rejected[verdict.rule] += 1
            continue
        if cfg.drop_duplicates:
            key = (pair.source, pair.target)
            if key in seen:
                rejected[RejectRule.DUPLICATE] += 1
                continue
            seen.add(key)
        retained.append(pair)

    report = FilterReport(
        input_pairs=len(corpus),
        retained_pairs=len(retained),
        rejected_by_rule={rule.value: count for rule, count in rejected.items() if count > 0},
    )
    logger.info(
        f"Filtered {corpus.name}: kept {report.retained_pairs}/{report.input_pairs} "
        f"({report.retained_fraction:.2%}), rejected {report.rejected_by_rule}"
    )
    return ParallelCorpus(corpus.source_lang, corpus.target_lang, tuple(retained)), report


def subsample_mono(corpus: MonoCorpus, size: int, seed: int) -> MonoCorpus:
    """単言語コーパスから順序を保って size 行を無作為に抽出する"""
    if size >= len(corpus):
        return corpus
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(corpus), size=size, replace=False))
    return MonoCorpus(corpus.lang, tuple(corpus.lines[i] for i in keep))


def select_group(corpora: Sequence[ParallelCorpus], group: Optional[GroupName]) -> List[ParallelCorpus]:
    """英語でない側が指定グループに属するコーパスだけを残す

    group が None なら全コーパスをそのまま返す。
    """
    if group is None:
        return list(corpora)
    members = next(g for g in LANGUAGE_GROUPS if g.name == group).members
    selected = []
    for corpus in corpora:
        indic = corpus.target_lang if corpus.source_lang == LangCode.EN else corpus.source_lang
        if indic in members:
            selected.append(corpus)
    return selected


class CorpusService:
    """コーパスの読み込みとクリーニングを行うサービス"""

    def __init__(self, corpus_repository: CorpusRepository, workers: int = 1):
        self.corpus_repository = corpus_repository
        self.workers = workers

    def load_parallel(
        self,
        source_path: PathLike,
        target_path: PathLike,
        source_lang: LangCode,
        target_lang: LangCode,
    ) -> ParallelCorpus:
        return self.corpus_repository.load_parallel(source_path, target_path, source_lang, target_lang)

    def load_parallel_tsv(self, path: PathLike, source_lang: LangCode, target_lang: LangCode) -> ParallelCorpus:
        return self.corpus_repository.load_parallel_tsv(path, source_lang, target_lang)

    def load_mono(self, path: PathLike, lang: LangCode) -> MonoCorpus:
        return self.corpus_repository.load_mono(path, lang, drop_empty=True)

    def clean(self, corpus: ParallelCorpus, cfg: FilterConfig) -> Tuple[ParallelCorpus, FilterReport]:
        """設定に従ってコーパスをフィルタリングする"""
        return filter_corpus(corpus, cfg, workers=self.workers)
