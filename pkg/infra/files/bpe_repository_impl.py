import logging
from typing import Dict, List, Tuple

from domain.entities.bpe import BpeModel
from domain.exceptions import MalformedLine
from domain.repositories.bpe_repository import BpeRepository
from infra.files.corpus_repository_impl import read_lines, write_lines

logger = logging.getLogger(__name__)


class FileBpeRepository(BpeRepository):
    """テキストファイルを使った BpeRepository の実装

    ``P.merges`` は 1 行 1 マージで ``LEFT RIGHT``、``P.vocab`` は ``TOKEN<TAB>ID``。
    """

    def save(self, model: BpeModel, prefix: str) -> None:
        write_lines(f"{prefix}.merges", [f"{left} {right}" for left, right in model.merges])
        write_lines(
            f"{prefix}.vocab",
            [f"{token}\t{i}" for token, i in sorted(model.vocab.items(), key=lambda item: item[1])],
        )
        logger.info(f"Saved BPE model ({len(model.merges)} merges, {len(model)} tokens) to {prefix}")

    def load(self, prefix: str) -> BpeModel:
        merges: List[Tuple[str, str]] = []
        merges_path = f"{prefix}.merges"
        for i, line in enumerate(read_lines(merges_path), start=1):
            fields = line.split(" ")
            if len(fields) != 2 or not all(fields):
                raise MalformedLine(f"{merges_path}:{i}: expected 'LEFT RIGHT'", {"path": merges_path, "line_no": i})
            merges.append((fields[0], fields[1]))

        vocab: Dict[str, int] = {}
        vocab_path = f"{prefix}.vocab"
        for i, line in enumerate(read_lines(vocab_path), start=1):
            fields = line.split("\t")
            if len(fields) != 2 or not fields[1].isdigit():
                raise MalformedLine(f"{vocab_path}:{i}: expected 'TOKEN<TAB>ID'", {"path": vocab_path, "line_no": i})
            vocab[fields[0]] = int(fields[1])

        return BpeModel(merges=merges, vocab=vocab)
