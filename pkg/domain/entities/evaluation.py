import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple


@dataclass(frozen=True)
class BleuReport:
    """コーパス BLEU の結果

    score は 0〜100。precisions は p_1..p_max_n (0〜1)。
    """
    score: float
    precisions: Tuple[float, ...]
    brevity_penalty: float
    hyp_length: int
    ref_length: int

    def __post_init__(self):
        object.__setattr__(self, "precisions", tuple(self.precisions))
        if not 0.0 <= self.score <= 100.0 + 1e-9:
            raise ValueError(f"BLEU score out of range: {self.score}")
        if not 0.0 <= self.brevity_penalty <= 1.0:
            raise ValueError(f"brevity penalty out of range: {self.brevity_penalty}")
        if any(not 0.0 <= p <= 1.0 for p in self.precisions):
            raise ValueError("precisions must be between 0 and 1")

    @property
    def max_n(self) -> int:
        return len(self.precisions)

    @property
    def ratio(self) -> float:
        return self.hyp_length / self.ref_length if self.ref_length else math.inf

    def format(self) -> str:
        """``BLEU = 60.65 100.0/100.0 (BP = 0.607 ratio = 0.667 hyp_len = 2 ref_len = 3)``"""
        precisions = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        return (
            f"BLEU = {self.score:.2f} {precisions} (BP = {self.brevity_penalty:.3f} "
            f"ratio = {self.ratio:.3f} hyp_len = {self.hyp_length} ref_len = {self.ref_length})"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "score": self.score,
            "precisions": list(self.precisions),
            "brevity_penalty": self.brevity_penalty,
            "hyp_length": self.hyp_length,
            "ref_length": self.ref_length,
        }
