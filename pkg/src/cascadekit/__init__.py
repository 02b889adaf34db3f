"""Toolkit for confidence-gated multi-pass classifier cascades.

A cheap first-pass model answers the samples it is confident about; the rest
are forwarded to costlier models. This package loads per-sample prediction
records, analyzes where big models actually help, sweeps thresholds into
accuracy-cost tradeoff curves, selects the cheapest cascade meeting an
accuracy target, and executes cascades against pluggable model runners.
"""

from .engine import (
    CascadeConfig,
    CascadePoint,
    ScalingSpec,
    TradeoffCurve,
    default_grid,
    estimate_scaling_cost,
    evaluate,
    route,
    sweep,
    sweep_kpass,
)
from .errors import (
    AlignmentError,
    CascadeKitError,
    ChainMismatchError,
    ConfigError,
    EmptyInputError,
    RecordFormatError,
    RunnerError,
)
from .executor import ExecutionReport, RunnerSpec, execute, handshake
from .hardness import (
    ConfidenceBinStats,
    MistakeDecomposition,
    bin_by_confidence,
    decompose_mistakes,
)
from .manifest import Manifest, load_manifest
from .optimize import (
    GeneralizationReport,
    SelectionCriterion,
    SelectionResult,
    cross_evaluate,
    pareto_front,
    select_kpass,
    select_threshold,
)
from .records import (
    AlignedRecordSet,
    AlignedRow,
    ModelProfile,
    PredictionRecord,
    RecordSet,
    align,
    load_model_profile,
    load_record_set,
    write_model_profile,
    write_record_set,
)

__version__ = "0.1.0"

__all__ = [
    "AlignedRecordSet",
    "AlignedRow",
    "AlignmentError",
    "CascadeConfig",
    "CascadeKitError",
    "CascadePoint",
    "ChainMismatchError",
    "ConfidenceBinStats",
    "ConfigError",
    "EmptyInputError",
    "ExecutionReport",
    "GeneralizationReport",
    "Manifest",
    "MistakeDecomposition",
    "ModelProfile",
    "PredictionRecord",
    "RecordFormatError",
    "RecordSet",
    "RunnerError",
    "RunnerSpec",
    "ScalingSpec",
    "SelectionCriterion",
    "SelectionResult",
    "TradeoffCurve",
    "align",
    "bin_by_confidence",
    "cross_evaluate",
    "decompose_mistakes",
    "default_grid",
    "estimate_scaling_cost",
    "evaluate",
    "execute",
    "handshake",
    "load_manifest",
    "load_model_profile",
    "load_record_set",
    "pareto_front",
    "route",
    "select_kpass",
    "select_threshold",
    "sweep",
    "sweep_kpass",
    "write_model_profile",
    "write_record_set",
]
