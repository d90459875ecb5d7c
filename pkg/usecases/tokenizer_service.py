import logging
from collections import Counter, defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from domain.entities.bpe import END_OF_WORD, SPECIAL_TOKENS, UNK_ID, BpeModel, TokenizedSentence
from domain.entities.corpus import SentencePair
from domain.entities.language import LangCode
from domain.exceptions import EmptyCorpus, InvalidId
from domain.repositories.bpe_repository import BpeRepository
from domain.repositories.corpus_repository import CorpusRepository, PathLike

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]

_TARGET_TOKENS = frozenset(lang.target_token for lang in LangCode)


def merge_symbols(symbols: Tuple[str, ...], pair: Pair) -> Tuple[str, ...]:
    """記号列中の pair を左から重ならないように結合する"""
    left, right = pair
    merged: List[str] = []
    i = 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == left and symbols[i + 1] == right:
            merged.append(left + right)
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return tuple(merged)


def word_symbols(word: str) -> Tuple[str, ...]:
    return tuple(word) + (END_OF_WORD,)


def count_words(texts: Iterable[str]) -> Counter:
    """空白で区切った単語の頻度を数える (言語タグは除く)"""
    counts: Counter = Counter()
    for text in texts:
        counts.update(w for w in text.split() if w not in _TARGET_TOKENS)
    return counts


def bpe_train(
    corpora: Sequence[Iterable[str]],
    num_merges: int,
    vocab_size: Optional[int] = None,
) -> BpeModel:
    """BPE のマージ規則を学習する

    複数言語のコーパスは連結してから数える。最頻の隣接記号対を順にマージし、
    同数の場合は (left, right) の辞書順で小さいものを選ぶ。最頻対の出現数が
    2 未満になったら打ち切る。

    Args:
        corpora: 文の列のリスト (単言語コーパスや対訳コーパスの片側)
        num_merges: マージ回数の上限
        vocab_size: 語彙サイズの上限 (特殊トークン込み)

    Returns:
        学習済み BpeModel

    Raises:
        EmptyCorpus: 単語が 1 つも無い場合
    """
    if num_merges < 0:
        raise ValueError("num_merges must be non-negative")

    word_counts = Counter()
    for corpus in corpora:
        word_counts.update(count_words(corpus))
    if not word_counts:
        raise EmptyCorpus("cannot learn BPE from an empty corpus")

    # 単語は出現順ではなく文字列順に並べる (入力順に依存させない)
    words: List[Tuple[str, ...]] = []
    freqs: List[int] = []
    for word in sorted(word_counts):
        words.append(word_symbols(word))
        freqs.append(word_counts[word])

    alphabet = sorted({char for word in word_counts for char in word})
    vocab: Dict[str, int] = {token: i for i, token in enumerate(SPECIAL_TOKENS)}
    for symbol in [END_OF_WORD] + alphabet:
        vocab[symbol] = len(vocab)

    pair_counts: Dict[Pair, int] = defaultdict(int)
    where: Dict[Pair, Set[int]] = defaultdict(set)
    for i, symbols in enumerate(words):
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += freqs[i]
            where[pair].add(i)

    merges: List[Pair] = []
    while len(merges) < num_merges and pair_counts:
        if vocab_size is not None and len(vocab) >= vocab_size:
            break
        best, best_count = min(pair_counts.items(), key=lambda item: (-item[1], item[0]))
        if best_count < 2:
            break

        merges.append(best)
        merged = best[0] + best[1]
        if merged not in vocab:
            vocab[merged] = len(vocab)

        for i in sorted(where.pop(best)):
            old = words[i]
            new = merge_symbols(old, best)
            if new == old:
                continue
            for pair in zip(old, old[1:]):
                pair_counts[pair] -= freqs[i]
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
            for pair in zip(new, new[1:]):
                pair_counts[pair] += freqs[i]
                where[pair].add(i)
            words[i] = new

    logger.info(
        f"Learned {len(merges)} BPE merges from {len(word_counts)} distinct words; "
        f"vocabulary size {len(vocab)}"
    )
    return BpeModel(merges=merges, vocab=vocab)


def segment_word(model: BpeModel, word: str) -> Tuple[str, ...]:
    """1 単語を学習順のマージで分割する"""
    cached = model._cache.get(word)
    if cached is not None:
        return cached

    symbols = word_symbols(word)
    while len(symbols) > 1:
        ranked = [(model.rank(pair), pair) for pair in zip(symbols, symbols[1:])]
        ranked = [item for item in ranked if item[0] >= 0]
        if not ranked:
            break
        _, best = min(ranked)
        symbols = merge_symbols(symbols, best)

    model._cache[word] = symbols
    return symbols


def bpe_encode(model: BpeModel, text: str, lang: Optional[LangCode] = None) -> TokenizedSentence:
    """テキストを ID 列に変換する

    空白で単語に分け、各単語にマージを学習順に適用する。語彙に無い文字は UNK。
    ``<2xx>`` 形式の言語タグは 1 つの特殊 ID になる。
    """
    ids: List[int] = []
    for word in text.split():
        if word in _TARGET_TOKENS:
            ids.append(model.vocab[word])
            continue
        for symbol in segment_word(model, word):
            ids.append(model.vocab.get(symbol, UNK_ID))
    return TokenizedSentence(tuple(ids), LangCode.parse(lang) if lang is not None else None)


def bpe_pieces(model: BpeModel, text: str) -> List[str]:
    """テキストをサブワード文字列の列に変換する"""
    return [model.token(i) for i in bpe_encode(model, text).ids]


def bpe_decode(model: BpeModel, ids: Iterable[int]) -> str:
    """ID 列をテキストに戻す

    特殊トークンは取り除き、単語末記号を空白に戻す。

    Raises:
        InvalidId: 語彙外の ID を含む場合
    """
    pieces = []
    for token_id in ids:
        token_id = int(token_id)
        if token_id < 0 or token_id >= len(model):
            raise InvalidId(f"token id {token_id} outside vocabulary of size {len(model)}")
        if model.is_special(token_id):
            continue
        pieces.append(model.token(token_id))
    return "".join(pieces).replace(model.end_of_word_marker, " ").rstrip(" ")


def inject_target_token(pair: SentencePair) -> SentencePair:
    """原文の先頭に出力言語タグ ``<2xx>`` を付ける

    冪等ではない: 2 回呼ぶとタグが 2 つ付く。
    """
    lang = LangCode.parse(pair.target_lang)
    return pair.with_texts(f"{lang.target_token} {pair.source}", pair.target)


class TokenizerService:
    """BPE モデルの学習と適用を行うサービス"""

    def __init__(self, bpe_repository: BpeRepository, corpus_repository: CorpusRepository):
        self.bpe_repository = bpe_repository
        self.corpus_repository = corpus_repository

    def train_files(
        self,
        paths: Sequence[PathLike],
        num_merges: int,
        out_prefix: str,
        vocab_size: Optional[int] = None,
    ) -> BpeModel:
        """テキストファイル群から BPE を学習して保存する"""
        corpora = [self.corpus_repository.load_lines(path, drop_empty=True) for path in paths]
        model = bpe_train(corpora, num_merges, vocab_size=vocab_size)
        self.bpe_repository.save(model, out_prefix)
        return model

    def apply_file(
        self,
        model_prefix: str,
        in_path: PathLike,
        out_path: PathLike,
        tag: Optional[LangCode] = None,
    ) -> int:
        """ファイルを行単位でサブワードに分割して書き出す

        Returns:
            処理した行数
        """
        model = self.bpe_repository.load(model_prefix)
        lines = self.corpus_repository.load_lines(in_path)
        prefix = f"{LangCode.parse(tag).target_token} " if tag is not None else ""
        pieces = [" ".join(bpe_pieces(model, prefix + line)) for line in lines]
        self.corpus_repository.save_lines(pieces, out_path)
        return len(pieces)
