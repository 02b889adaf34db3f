"""Prediction-record data model, on-disk formats, and multi-model alignment.

Record files are UTF-8 CSV with LF line endings and the fixed header::

    sample_id,predicted_label,confidence,true_label
    img_00001,207,0.913442,207

``confidence`` is the classifier's maximum softmax probability and is
serialized as fixed-point with six decimals; parsed values are compared
exactly, with no epsilon. Labels are integer class indices. Fields may not
contain commas, so no CSV quoting is ever emitted or accepted.

Model profiles are JSON objects with keys ``name``, ``macs_per_sample``
(GMACs per forward pass), ``params_m`` (millions of parameters) and
``input_resolution`` (pixels). The latter two are informational.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import AlignmentError, RecordFormatError

RECORD_HEADER = "sample_id,predicted_label,confidence,true_label"
CONFIDENCE_DECIMALS = 6


def format_confidence(value: float) -> str:
    """Canonical fixed-point rendering used everywhere a confidence is written."""
    return f"{value:.{CONFIDENCE_DECIMALS}f}"


@dataclass(frozen=True)
class PredictionRecord:
    """One model's output on one sample."""

    sample_id: str
    predicted_label: int
    confidence: float
    true_label: int

    def __post_init__(self) -> None:
        if not self.sample_id:
            raise ValueError("sample_id must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1]")
        if self.predicted_label < 0 or self.true_label < 0:
            raise ValueError("labels must be non-negative class indices")

    @property
    def correct(self) -> bool:
        return self.predicted_label == self.true_label


@dataclass(frozen=True)
class ModelProfile:
    """A model's identity and per-sample inference cost."""

    name: str
    macs_per_sample: float  # GMACs
    params_m: float = 0.0
    input_resolution: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("profile name must be non-empty")
        if not self.macs_per_sample > 0:
            raise ValueError(f"macs_per_sample must be > 0, got {self.macs_per_sample!r}")
        if self.params_m < 0:
            raise ValueError("params_m must be >= 0")


@dataclass(frozen=True)
class RecordSet:
    """All of one model's records over one dataset. sample_id values are unique."""

    model: ModelProfile
    dataset_name: str
    records: tuple[PredictionRecord, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for record in self.records:
            if record.sample_id in seen:
                raise ValueError(f"duplicate sample_id {record.sample_id!r}")
            seen.add(record.sample_id)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_correct(self) -> int:
        return sum(1 for r in self.records if r.correct)

    @property
    def accuracy(self) -> float:
        if not self.records:
            raise ValueError("accuracy undefined for an empty record set")
        return self.n_correct / len(self.records)


class AlignedRow(NamedTuple):
    """Per-sample join row: ``outputs[k]`` is model k's (predicted_label, confidence)."""

    sample_id: str
    true_label: int
    outputs: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class AlignedRecordSet:
    """Records from K models joined on sample_id over one dataset.

    Immutable after construction; rows are sorted by sample_id and carry
    exactly one (predicted_label, confidence) entry per model, in model order.
    """

    dataset_name: str
    models: tuple[ModelProfile, ...]
    rows: tuple[AlignedRow, ...]

    def __post_init__(self) -> None:
        k = len(self.models)
        for row in self.rows:
            if len(row.outputs) != k:
                raise ValueError(
                    f"row {row.sample_id!r} has {len(row.outputs)} outputs for {k} models"
                )

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def model_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.models)

    def model_correct_count(self, index: int) -> int:
        """Number of rows model ``index`` classifies correctly on its own."""
        return sum(1 for row in self.rows if row.outputs[index][0] == row.true_label)

    def project(self, names: Sequence[str]) -> "AlignedRecordSet":
        """Restrict to the named model columns, in the given order."""
        if len(set(names)) != len(names):
            raise ValueError("projected model names must be distinct")
        by_name = {m.name: i for i, m in enumerate(self.models)}
        try:
            indices = [by_name[name] for name in names]
        except KeyError as exc:
            raise AlignmentError(f"model {exc.args[0]!r} not present in aligned set") from None
        rows = tuple(
            AlignedRow(r.sample_id, r.true_label, tuple(r.outputs[i] for i in indices))
            for r in self.rows
        )
        return AlignedRecordSet(self.dataset_name, tuple(self.models[i] for i in indices), rows)


def _parse_record_line(line: str, lineno: int, source: str) -> PredictionRecord:
    fields = line.split(",")
    if len(fields) != 4:
        raise RecordFormatError(
            f"{source}:{lineno}: expected 4 comma-separated fields, got {len(fields)}"
        )
    sample_id, pred_text, conf_text, true_text = fields
    if not sample_id:
        raise RecordFormatError(f"{source}:{lineno}: empty sample_id")
    try:
        predicted_label = int(pred_text)
        true_label = int(true_text)
    except ValueError:
        raise RecordFormatError(f"{source}:{lineno}: labels must be integers") from None
    try:
        confidence = float(conf_text)
    except ValueError:
        raise RecordFormatError(f"{source}:{lineno}: unparsable confidence {conf_text!r}") from None
    if not 0.0 <= confidence <= 1.0:
        raise RecordFormatError(
            f"{source}:{lineno}: confidence {conf_text} outside [0, 1]"
        )
    if predicted_label < 0 or true_label < 0:
        raise RecordFormatError(f"{source}:{lineno}: negative class index")
    return PredictionRecord(sample_id, predicted_label, confidence, true_label)


def load_records(path: str | Path) -> tuple[PredictionRecord, ...]:
    """Parse a record CSV. Raises RecordFormatError naming file and line."""
    path = Path(path)
    # newline="" so CRLF is not silently translated; the format is LF-only.
    with path.open(encoding="utf-8", newline="") as handle:
        text = handle.read()
    lines = text.split("\n")
    if not lines or lines[0] != RECORD_HEADER:
        raise RecordFormatError(f"{path}:1: header must be exactly {RECORD_HEADER!r}")
    records: list[PredictionRecord] = []
    seen: dict[str, int] = {}
    for offset, line in enumerate(lines[1:], start=2):
        if line == "" and offset == len(lines):
            break  # trailing LF after the last record
        record = _parse_record_line(line, offset, str(path))
        first = seen.setdefault(record.sample_id, offset)
        if first != offset:
            raise RecordFormatError(
                f"{path}:{offset}: duplicate sample_id {record.sample_id!r} (first seen on line {first})"
            )
        records.append(record)
    return tuple(records)


def load_record_set(
    path: str | Path, profile: ModelProfile, dataset_name: str = ""
) -> RecordSet:
    """Load and validate a record file for one model."""
    return RecordSet(model=profile, dataset_name=dataset_name, records=load_records(path))


def write_records(records: Iterable[PredictionRecord], path: str | Path) -> None:
    """Write records in the canonical format (LF endings, 6-decimal confidence)."""
    path = Path(path)
    lines = [RECORD_HEADER]
    for r in records:
        for field in (r.sample_id,):
            if "," in field or "\n" in field or "\r" in field:
                raise ValueError(f"sample_id {field!r} not representable in the record format")
        lines.append(
            f"{r.sample_id},{r.predicted_label},{format_confidence(r.confidence)},{r.true_label}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_record_set(record_set: RecordSet, path: str | Path) -> None:
    write_records(record_set.records, path)


def load_model_profile(path: str | Path) -> ModelProfile:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise RecordFormatError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise RecordFormatError(f"{path}: profile must be a JSON object")
    missing = {"name", "macs_per_sample", "params_m", "input_resolution"} - raw.keys()
    if missing:
        raise RecordFormatError(f"{path}: profile missing keys {sorted(missing)}")
    try:
        return ModelProfile(
            name=str(raw["name"]),
            macs_per_sample=float(raw["macs_per_sample"]),
            params_m=float(raw["params_m"]),
            input_resolution=int(raw["input_resolution"]),
        )
    except (TypeError, ValueError) as exc:
        raise RecordFormatError(f"{path}: invalid profile: {exc}") from None


def write_model_profile(profile: ModelProfile, path: str | Path) -> None:
    payload = {
        "name": profile.name,
        "macs_per_sample": profile.macs_per_sample,
        "params_m": profile.params_m,
        "input_resolution": profile.input_resolution,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="\n")


def align(sets: Sequence[RecordSet]) -> AlignedRecordSet:
    """Join record sets on sample_id, strictly.

    Every sample_id must appear in every set (missing ids are an error, never a
    silent drop) and true labels must agree across sets. Model order follows
    the input order; output rows are sorted by sample_id, so permuting the
    records inside any input set cannot change the result.
    """
    if len(sets) < 2:
        raise AlignmentError(f"alignment needs at least 2 record sets, got {len(sets)}")
    dataset_names = {s.dataset_name for s in sets}
    if len(dataset_names) != 1:
        raise AlignmentError(f"record sets span different datasets: {sorted(dataset_names)}")
    model_names = [s.model.name for s in sets]
    if len(set(model_names)) != len(model_names):
        raise AlignmentError(f"duplicate model names in alignment: {model_names}")

    indexed = [{r.sample_id: r for r in s.records} for s in sets]
    reference_ids = set(indexed[0])
    for record_set, index in zip(sets, indexed):
        missing = reference_ids - set(index)
        extra = set(index) - reference_ids
        if missing or extra:
            offender = sorted(missing or extra)[0]
            side = "missing from" if missing else "absent from the first set but present in"
            raise AlignmentError(f"sample_id {offender!r} {side} {record_set.model.name!r}")

    rows = []
    for sample_id in sorted(reference_ids):
        per_model = [index[sample_id] for index in indexed]
        true_labels = {r.true_label for r in per_model}
        if len(true_labels) != 1:
            raise AlignmentError(
                f"conflicting true_label for sample_id {sample_id!r}: "
                + ", ".join(f"{s.model.name}={r.true_label}" for s, r in zip(sets, per_model))
            )
        rows.append(
            AlignedRow(
                sample_id,
                per_model[0].true_label,
                tuple((r.predicted_label, r.confidence) for r in per_model),
            )
        )
    return AlignedRecordSet(
        dataset_name=sets[0].dataset_name,
        models=tuple(s.model for s in sets),
        rows=tuple(rows),
    )
