"""Cascade evaluation over aligned record sets.

A cascade is an ordered chain of K models with K-1 confidence thresholds.
Stage i answers a sample iff its confidence is >= thresholds[i] and no earlier
stage answered; the final stage answers unconditionally. The gate is
inclusive, so a tie at the threshold stays at the earlier (cheaper) stage.

Cost accounting is two-pass, not shortcut: every stage a sample reaches is
charged in full, so a two-model cascade costs
``macs_little + forwarded_fraction * macs_big`` per sample on average.
Accuracies are ratios of integer counts and stage fractions always sum to 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ChainMismatchError, EmptyInputError
from .records import AlignedRecordSet, AlignedRow, ModelProfile

DEFAULT_GRID_SIZE = 50


@dataclass(frozen=True)
class CascadeConfig:
    """Ordered model chain (cheapest-first by convention) plus K-1 thresholds."""

    chain: tuple[ModelProfile, ...]
    thresholds: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.chain) < 2:
            raise ValueError(f"a cascade needs at least 2 models, got {len(self.chain)}")
        if len(self.thresholds) != len(self.chain) - 1:
            raise ValueError(
                f"{len(self.chain)} models need {len(self.chain) - 1} thresholds, "
                f"got {len(self.thresholds)}"
            )
        for t in self.thresholds:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold {t!r} outside [0, 1]")

    @property
    def model_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.chain)


@dataclass(frozen=True)
class CascadePoint:
    """One cascade operating point: accuracy, average cost, stage usage.

    ``stage_fractions[i]`` is the fraction of samples answered by stage i.
    ``n_correct``/``n_rows`` are kept as exact integer counts so accuracy
    comparisons downstream never hinge on float rounding.
    """

    thresholds: tuple[float, ...]
    accuracy: float
    expected_macs: float
    stage_fractions: tuple[float, ...]
    n_rows: int
    n_correct: int
    stage_counts: tuple[int, ...]

    @property
    def reached_counts(self) -> tuple[int, ...]:
        """Samples that reached each stage (suffix sums of stage_counts)."""
        reached = list(itertools.accumulate(reversed(self.stage_counts)))
        return tuple(reversed(reached))


@dataclass(frozen=True)
class TradeoffCurve:
    """Accuracy-cost tradeoff of a little+big pair over a threshold grid."""

    little: ModelProfile
    big: ModelProfile
    points: tuple[CascadePoint, ...]


@dataclass(frozen=True)
class ScalingSpec:
    """Compound-scaling ratios vs a family's base model: input resolution
    squared, width squared, depth linear, times a family coefficient ratio."""

    h_ratio: float
    w_ratio: float
    l_ratio: float
    c_ratio: float = 1.0

    def __post_init__(self) -> None:
        for name in ("h_ratio", "w_ratio", "l_ratio", "c_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")


def estimate_scaling_cost(spec: ScalingSpec) -> float:
    """Relative MACs multiplier of a scaled model vs its base."""
    return spec.c_ratio * spec.h_ratio**2 * spec.w_ratio**2 * spec.l_ratio


def route(row: AlignedRow, config: CascadeConfig) -> tuple[int, int]:
    """Stage index that answers this row, and its predicted label."""
    if len(row.outputs) != len(config.chain):
        raise ChainMismatchError(
            f"row has {len(row.outputs)} model outputs for a {len(config.chain)}-model chain"
        )
    for i, threshold in enumerate(config.thresholds):
        predicted, confidence = row.outputs[i]
        if confidence >= threshold:
            return i, predicted
    return len(config.chain) - 1, row.outputs[-1][0]


def charged_gmacs_total(macs: Sequence[float], reached_counts: Sequence[int]) -> float:
    """Total GMACs with each stage charged for every sample that reached it.

    Fixed stage-order accumulation; the executor shares this so its totals are
    bit-identical to evaluation on the same routing.
    """
    total = 0.0
    for per_sample, count in zip(macs, reached_counts):
        total += per_sample * count
    return total


class _Columns(NamedTuple):
    confidence: np.ndarray  # (n_rows, k) float64
    predicted: np.ndarray  # (n_rows, k) int64
    true_label: np.ndarray  # (n_rows,) int64


def _columns(aligned: AlignedRecordSet) -> _Columns:
    n, k = len(aligned.rows), len(aligned.models)
    confidence = np.empty((n, k), dtype=np.float64)
    predicted = np.empty((n, k), dtype=np.int64)
    true_label = np.empty(n, dtype=np.int64)
    for r, row in enumerate(aligned.rows):
        true_label[r] = row.true_label
        for c, (pred, conf) in enumerate(row.outputs):
            predicted[r, c] = pred
            confidence[r, c] = conf
    return _Columns(confidence, predicted, true_label)


def _evaluate_columns(
    cols: _Columns, macs: Sequence[float], thresholds: Sequence[float]
) -> CascadePoint:
    n = cols.true_label.shape[0]
    k = len(macs)
    assigned = np.full(n, k - 1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)
    reached = [n]
    for i, threshold in enumerate(thresholds):
        answers_here = alive & (cols.confidence[:, i] >= threshold)
        assigned[answers_here] = i
        alive &= ~answers_here
        reached.append(int(alive.sum()))

    stage_counts = np.bincount(assigned, minlength=k)
    chosen = cols.predicted[np.arange(n), assigned]
    n_correct = int((chosen == cols.true_label).sum())

    # Per-stage fractions divide before multiplying so that degenerate
    # endpoints are exact: all thresholds 0 yields exactly macs[0].
    expected_macs = 0.0
    for per_sample, count in zip(macs, reached):
        expected_macs += per_sample * (count / n)

    return CascadePoint(
        thresholds=tuple(thresholds),
        accuracy=n_correct / n,
        expected_macs=expected_macs,
        stage_fractions=tuple(int(c) / n for c in stage_counts),
        n_rows=n,
        n_correct=n_correct,
        stage_counts=tuple(int(c) for c in stage_counts),
    )


def _check_chain(aligned: AlignedRecordSet, chain: Sequence[ModelProfile]) -> None:
    expected = tuple(m.name for m in chain)
    if aligned.model_names != expected:
        raise ChainMismatchError(
            f"aligned set holds models {aligned.model_names}, cascade expects {expected}"
        )
    if len(aligned.rows) == 0:
        raise EmptyInputError("aligned record set has no rows")


def evaluate(aligned: AlignedRecordSet, config: CascadeConfig) -> CascadePoint:
    """Accuracy, expected per-sample GMACs, and stage usage of one cascade."""
    _check_chain(aligned, config.chain)
    macs = [m.macs_per_sample for m in config.chain]
    return _evaluate_columns(_columns(aligned), macs, config.thresholds)


def default_grid(n: int = DEFAULT_GRID_SIZE) -> list[float]:
    """n evenly spaced thresholds spanning [0, 1]."""
    if n < 2:
        raise ValueError(f"grid needs at least 2 values, got {n}")
    return [i / (n - 1) for i in range(n)]


def _check_grid(grid: Sequence[float]) -> None:
    if len(grid) == 0:
        raise EmptyInputError("threshold grid is empty")
    for t in grid:
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"grid value {t!r} outside [0, 1]")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be sorted ascending")


def sweep(
    aligned: AlignedRecordSet,
    chain: tuple[ModelProfile, ModelProfile],
    grid: Sequence[float] | None = None,
) -> TradeoffCurve:
    """Tradeoff curve of a 2-model cascade over an ascending threshold grid.

    Expected MACs are non-decreasing along the grid because the forwarded set
    only grows with the threshold.
    """
    if len(chain) != 2:
        raise ChainMismatchError(f"sweep takes a 2-model chain, got {len(chain)}")
    _check_chain(aligned, chain)
    if grid is None:
        grid = default_grid()
    _check_grid(grid)
    cols = _columns(aligned)
    macs = [m.macs_per_sample for m in chain]
    points = tuple(_evaluate_columns(cols, macs, (t,)) for t in grid)
    return TradeoffCurve(little=chain[0], big=chain[1], points=points)


def sweep_kpass(
    aligned: AlignedRecordSet,
    chain: Sequence[ModelProfile],
    grids: Sequence[Sequence[float]],
) -> list[CascadePoint]:
    """Evaluate a K-model cascade over the Cartesian product of per-threshold
    grids, in row-major order (first threshold varies slowest)."""
    if len(chain) < 2:
        raise ChainMismatchError(f"a cascade needs at least 2 models, got {len(chain)}")
    if len(grids) != len(chain) - 1:
        raise ValueError(f"{len(chain)} models need {len(chain) - 1} grids, got {len(grids)}")
    _check_chain(aligned, chain)
    for grid in grids:
        _check_grid(grid)
    cols = _columns(aligned)
    macs = [m.macs_per_sample for m in chain]
    return [_evaluate_columns(cols, macs, thresholds) for thresholds in itertools.product(*grids)]
