"""Confidence-based hardness analysis.

Two views over prediction records, both binned by the little model's maximum
softmax confidence (the hardness surrogate):

* calibration: per-bin accuracy of a single model, showing how well confidence
  tracks correctness;
* mistake decomposition: among the little model's errors, how many the big
  model would fix (correctable) versus share (non-correctable), per bin, with
  summary statistics over the correctable mistakes' confidences.

Bins are uniform over [0, 1], half-open ``[lo, hi)`` with the final bin
closed at 1.0.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .errors import ChainMismatchError, EmptyInputError
from .records import AlignedRecordSet, RecordSet


def uniform_bin_edges(n_bins: int) -> list[float]:
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    # i / n_bins, not linspace: a confidence parsed from "0.300000" must land
    # in [0.3, 0.4) even though 3 * (1 / 10) != 3 / 10 in floats.
    return [i / n_bins for i in range(n_bins + 1)]


def bin_index(confidence: float, edges: list[float]) -> int:
    """Bin of a confidence under half-open bins, final bin closed."""
    idx = bisect.bisect_right(edges, confidence) - 1
    return min(idx, len(edges) - 2)


@dataclass(frozen=True)
class ConfidenceBinStats:
    bin_lower: float
    bin_upper: float
    n_samples: int
    n_correct: int

    @property
    def accuracy(self) -> float:
        """n_correct / n_samples; NaN for an empty bin."""
        if self.n_samples == 0:
            return math.nan
        return self.n_correct / self.n_samples


def bin_by_confidence(records: RecordSet, n_bins: int = 10) -> list[ConfidenceBinStats]:
    """Per-bin sample and correct counts for one model's records."""
    if len(records) == 0:
        raise EmptyInputError(f"record set for {records.model.name!r} is empty")
    edges = uniform_bin_edges(n_bins)
    n_samples = [0] * n_bins
    n_correct = [0] * n_bins
    for record in records.records:
        idx = bin_index(record.confidence, edges)
        n_samples[idx] += 1
        if record.correct:
            n_correct[idx] += 1
    return [
        ConfidenceBinStats(edges[i], edges[i + 1], n_samples[i], n_correct[i])
        for i in range(n_bins)
    ]


@dataclass(frozen=True)
class MistakeBin:
    bin_lower: float
    bin_upper: float
    correctable: int
    non_correctable: int

    @property
    def total(self) -> int:
        return self.correctable + self.non_correctable


@dataclass(frozen=True)
class MistakeDecomposition:
    """Little-model mistakes split by whether the big model fixes them.

    ``correctable_confidences`` holds the little-model confidences of the
    correctable mistakes, sorted ascending; summary statistics derive from it.
    ``empty`` flags the degenerate case of a little model with zero mistakes.
    """

    bins: tuple[MistakeBin, ...]
    q: float
    correctable_confidences: tuple[float, ...]

    @property
    def total_correctable(self) -> int:
        return sum(b.correctable for b in self.bins)

    @property
    def total_non_correctable(self) -> int:
        return sum(b.non_correctable for b in self.bins)

    @property
    def total_mistakes(self) -> int:
        return self.total_correctable + self.total_non_correctable

    @property
    def empty(self) -> bool:
        return self.total_mistakes == 0

    @property
    def mean_correctable_confidence(self) -> float | None:
        if not self.correctable_confidences:
            return None
        return sum(self.correctable_confidences) / len(self.correctable_confidences)

    @property
    def correctable_confidence_quantile(self) -> float | None:
        return self.quantile(self.q) if self.correctable_confidences else None

    def quantile(self, q: float) -> float:
        """Smallest observed correctable-mistake confidence c with at least a
        fraction q of correctable mistakes at or below c (inverted CDF, no
        interpolation). quantile(1.0) is the maximum observed confidence."""
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"q must be in [0, 1], got {q}")
        values = self.correctable_confidences
        if not values:
            raise EmptyInputError("no correctable mistakes to take a quantile over")
        rank = math.ceil(q * len(values))
        return values[max(rank, 1) - 1]


def decompose_mistakes(
    aligned: AlignedRecordSet, n_bins: int = 10, q: float = 0.9
) -> MistakeDecomposition:
    """Split the little model's mistakes by the big model's verdict.

    ``aligned`` must hold exactly two models, little first. Returns an empty,
    flagged decomposition when the little model makes no mistakes.
    """
    if len(aligned.models) != 2:
        raise ChainMismatchError(
            f"mistake decomposition needs exactly 2 models, got {len(aligned.models)}"
        )
    edges = uniform_bin_edges(n_bins)
    correctable = [0] * n_bins
    non_correctable = [0] * n_bins
    correctable_confidences: list[float] = []
    for row in aligned.rows:
        (little_pred, little_conf), (big_pred, _) = row.outputs
        if little_pred == row.true_label:
            continue
        idx = bin_index(little_conf, edges)
        if big_pred == row.true_label:
            correctable[idx] += 1
            correctable_confidences.append(little_conf)
        else:
            non_correctable[idx] += 1
    bins = tuple(
        MistakeBin(edges[i], edges[i + 1], correctable[i], non_correctable[i])
        for i in range(n_bins)
    )
    return MistakeDecomposition(
        bins=bins, q=q, correctable_confidences=tuple(sorted(correctable_confidences))
    )
