"""Threshold selection, Pareto fronts, and cross-dataset generalization.

Selection is a leftmost-intersection search: the minimum-threshold grid point
whose accuracy stays within a tolerance of the big model's baseline. Because
expected MACs are monotone in the threshold, that point is also the cheapest
feasible one. Feasibility is decided on exact rational counts, never floats:
with the common tolerance of zero, rounding must not flip the verdict.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from . import engine
from .engine import CascadeConfig, CascadePoint, TradeoffCurve
from .errors import EmptyInputError
from .records import AlignedRecordSet, ModelProfile


@dataclass(frozen=True)
class SelectionCriterion:
    """Accuracy target: big-model baseline minus a loss tolerance.

    ``tolerance`` is in accuracy fraction (0.01 = one point); zero means no
    loss allowed, negative demands a gain. When ``baseline_counts`` is given
    as (n_correct, n_rows), the baseline is exact; otherwise the float
    ``baseline_accuracy`` is used verbatim.
    """

    baseline_accuracy: float
    tolerance: float
    baseline_counts: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.tolerance):
            raise ValueError(f"tolerance must be finite, got {self.tolerance!r}")

    @classmethod
    def from_aligned_big(cls, aligned: AlignedRecordSet, tolerance: float) -> "SelectionCriterion":
        """Baseline from the last model's own records in the aligned set."""
        n_correct = aligned.model_correct_count(len(aligned.models) - 1)
        return cls(
            baseline_accuracy=n_correct / len(aligned.rows),
            tolerance=tolerance,
            baseline_counts=(n_correct, len(aligned.rows)),
        )

    def min_accuracy(self) -> Fraction:
        if self.baseline_counts is not None:
            baseline = Fraction(*self.baseline_counts)
        else:
            baseline = Fraction(self.baseline_accuracy)
        return baseline - Fraction(self.tolerance)

    def is_feasible(self, point: CascadePoint) -> bool:
        return Fraction(point.n_correct, point.n_rows) >= self.min_accuracy()


@dataclass(frozen=True)
class SelectionResult:
    """Chosen operating point. ``replacement`` flags a feasible threshold of
    zero: the little model alone meets the target and the big model is never
    consulted. When nothing is feasible, ``point`` is the most accurate
    candidate (ties to lower cost, then grid order) for reporting."""

    config: CascadeConfig
    point: CascadePoint
    macs_reduction: float
    feasible: bool
    replacement: bool


def _result(chain: Sequence[ModelProfile], point: CascadePoint, feasible: bool) -> SelectionResult:
    big = chain[-1]
    return SelectionResult(
        config=CascadeConfig(chain=tuple(chain), thresholds=point.thresholds),
        point=point,
        macs_reduction=1.0 - point.expected_macs / big.macs_per_sample,
        feasible=feasible,
        replacement=feasible and all(t == 0.0 for t in point.thresholds),
    )


def _best_infeasible(points: Sequence[CascadePoint]) -> CascadePoint:
    best = points[0]
    for point in points[1:]:
        if point.n_correct > best.n_correct or (
            point.n_correct == best.n_correct and point.expected_macs < best.expected_macs
        ):
            best = point
    return best


def select_threshold(curve: TradeoffCurve, criterion: SelectionCriterion) -> SelectionResult:
    """Leftmost feasible point of a tradeoff curve.

    Scans points in grid order and returns the first whose accuracy is at
    least baseline - tolerance; duplicate grid values resolve to the earlier
    one. Returns ``feasible=False`` when no point qualifies.
    """
    if not curve.points:
        raise EmptyInputError("tradeoff curve has no points")
    chain = (curve.little, curve.big)
    for point in curve.points:
        if criterion.is_feasible(point):
            return _result(chain, point, feasible=True)
    return _result(chain, _best_infeasible(curve.points), feasible=False)


def select_kpass(
    chain: Sequence[ModelProfile],
    points: Sequence[CascadePoint],
    criterion: SelectionCriterion,
) -> SelectionResult:
    """Cheapest feasible point of a K-pass grid scan.

    The flattened grid is ordered by expected MACs ascending (stable, so grid
    order breaks ties) and scanned for the first feasible point; with K=2 and
    a monotone curve this coincides with ``select_threshold``.
    """
    if not points:
        raise EmptyInputError("no cascade points to select from")
    by_cost = sorted(points, key=lambda p: p.expected_macs)
    for point in by_cost:
        if criterion.is_feasible(point):
            return _result(chain, point, feasible=True)
    return _result(chain, _best_infeasible(points), feasible=False)


def _dominates(a: CascadePoint, b: CascadePoint) -> bool:
    """a is at least as good as b on both axes and strictly better on one."""
    return (
        a.accuracy >= b.accuracy
        and a.expected_macs <= b.expected_macs
        and (a.accuracy > b.accuracy or a.expected_macs < b.expected_macs)
    )


def pareto_front(points: Sequence[CascadePoint]) -> list[CascadePoint]:
    """Non-dominated subset, sorted by expected MACs ascending.

    Exact duplicates are incomparable under strict domination, so all copies
    survive. Every input point is either in the output or dominated by some
    output point.
    """
    if not points:
        raise EmptyInputError("no points to compute a Pareto front over")
    ordered = sorted(points, key=lambda p: (p.expected_macs, -p.accuracy))
    front: list[CascadePoint] = []
    best_accuracy = float("-inf")
    best_macs = float("nan")
    for point in ordered:
        if point.accuracy > best_accuracy:
            best_accuracy = point.accuracy
            best_macs = point.expected_macs
            front.append(point)
        elif point.accuracy == best_accuracy and point.expected_macs == best_macs:
            front.append(point)  # exact duplicate of the current best
    return front


@dataclass(frozen=True)
class DatasetOutcome:
    """One dataset's view of a fixed cascade, deltas vs that dataset's own
    big-model baseline."""

    dataset_name: str
    accuracy: float
    big_accuracy: float
    accuracy_delta: float
    expected_macs: float
    macs_reduction: float
    point: CascadePoint


@dataclass(frozen=True)
class GeneralizationReport:
    config: CascadeConfig
    outcomes: tuple[DatasetOutcome, ...]
    delta_mean: float
    delta_std: float
    reduction_mean: float
    reduction_std: float


def cross_evaluate(
    config: CascadeConfig,
    tuning: AlignedRecordSet,
    targets: Sequence[AlignedRecordSet],
) -> GeneralizationReport:
    """Evaluate a fixed cascade on its tuning set and each target set.

    Every aligned set must cover the config's chain (extra models are
    projected away). Dispersion is the population mean/std across all
    reported datasets, tuning set first.
    """
    names = config.model_names
    big = config.chain[-1]
    outcomes = []
    for dataset in (tuning, *targets):
        projected = dataset.project(names)
        point = engine.evaluate(projected, config)
        big_accuracy = projected.model_correct_count(len(names) - 1) / len(projected.rows)
        outcomes.append(
            DatasetOutcome(
                dataset_name=dataset.dataset_name,
                accuracy=point.accuracy,
                big_accuracy=big_accuracy,
                accuracy_delta=point.accuracy - big_accuracy,
                expected_macs=point.expected_macs,
                macs_reduction=1.0 - point.expected_macs / big.macs_per_sample,
                point=point,
            )
        )
    deltas = [o.accuracy_delta for o in outcomes]
    reductions = [o.macs_reduction for o in outcomes]
    return GeneralizationReport(
        config=config,
        outcomes=tuple(outcomes),
        delta_mean=statistics.fmean(deltas),
        delta_std=statistics.pstdev(deltas),
        reduction_mean=statistics.fmean(reductions),
        reduction_std=statistics.pstdev(reductions),
    )
