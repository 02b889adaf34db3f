from __future__ import annotations

import json
import math
import random
from pathlib import Path

import pytest

from cascadekit.records import (
    AlignedRecordSet,
    AlignedRow,
    ModelProfile,
    PredictionRecord,
    RecordSet,
    align,
    write_model_profile,
    write_record_set,
)

N_CLASSES = 20


def make_profile(name: str, macs: float, params_m: float = 1.0, res: int = 224) -> ModelProfile:
    return ModelProfile(name=name, macs_per_sample=macs, params_m=params_m, input_resolution=res)


def random_confidence(rng: random.Random, tie_pool: list[float] | None = None) -> float:
    """Confidence at record-file precision; sometimes an exact grid value so
    the inclusive gate's tie behavior gets exercised."""
    if tie_pool and rng.random() < 0.3:
        return rng.choice(tie_pool)
    return round(rng.random(), 6)


def random_aligned(
    rng: random.Random,
    n_rows: int,
    profiles: list[ModelProfile],
    tie_pool: list[float] | None = None,
    dataset_name: str = "synthetic",
) -> AlignedRecordSet:
    rows = []
    for i in range(n_rows):
        true_label = rng.randrange(N_CLASSES)
        outputs = []
        for _ in profiles:
            if rng.random() < 0.7:
                predicted = true_label
            else:
                predicted = (true_label + 1 + rng.randrange(N_CLASSES - 1)) % N_CLASSES
            outputs.append((predicted, random_confidence(rng, tie_pool)))
        rows.append(AlignedRow(f"s{i:06d}", true_label, tuple(outputs)))
    return AlignedRecordSet(dataset_name=dataset_name, models=tuple(profiles), rows=tuple(rows))


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


FAMILY_SPECS = [
    # name, GMACs, skill: higher skill means higher confidence and accuracy
    ("small-224", 0.4, 0.0),
    ("medium-320", 1.1, 0.6),
    ("large-456", 4.6, 1.2),
    ("xl-600", 37.8, 2.0),
]


def synth_family_sets(
    rng: random.Random,
    n_rows: int,
    dataset_name: str = "synthetic",
    hardness_shift: float = 0.0,
) -> list[RecordSet]:
    """A calibrated model family sharing per-sample hardness.

    Confidence is sigmoid in (skill - hardness) and each prediction is correct
    with probability equal to its confidence, so bigger models are more
    accurate, confidence tracks accuracy, and the models' mistakes correlate
    on hard samples. ``hardness_shift`` > 0 makes the whole dataset harder.
    """
    profiles = [make_profile(name, macs) for name, macs, _ in FAMILY_SPECS]
    hardness = [rng.random() * 2.0 + hardness_shift for _ in range(n_rows)]
    true_labels = [rng.randrange(N_CLASSES) for _ in range(n_rows)]
    sets = []
    for profile, (_, _, skill) in zip(profiles, FAMILY_SPECS):
        records = []
        for i in range(n_rows):
            confidence = round(_sigmoid(2.5 * (skill - hardness[i]) + 2.0), 6)
            if rng.random() < confidence:
                predicted = true_labels[i]
            else:
                predicted = (true_labels[i] + 1 + rng.randrange(N_CLASSES - 1)) % N_CLASSES
            records.append(PredictionRecord(f"s{i:06d}", predicted, confidence, true_labels[i]))
        sets.append(RecordSet(model=profile, dataset_name=dataset_name, records=tuple(records)))
    return sets


@pytest.fixture(scope="session")
def family_sets() -> list[RecordSet]:
    return synth_family_sets(random.Random(7), 4000, "synthetic-val")


@pytest.fixture(scope="session")
def family_aligned(family_sets) -> AlignedRecordSet:
    return align(family_sets)


def write_family_tree(
    root: Path,
    rng: random.Random,
    n_rows: int = 1500,
    datasets: list[tuple[str, str, float]] | None = None,
) -> Path:
    """Materialize record files, profiles, and a manifest; returns the manifest path."""
    if datasets is None:
        datasets = [("synthetic-val", "tuning", 0.0)]
    profiles_dir = root / "profiles"
    profiles_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"datasets": []}
    profile_paths: dict[str, Path] = {}
    for name, role, shift in datasets:
        sets = synth_family_sets(rng, n_rows, name, hardness_shift=shift)
        records_dir = root / "records" / name
        records_dir.mkdir(parents=True, exist_ok=True)
        entries = []
        for record_set in sets:
            model = record_set.model
            if model.name not in profile_paths:
                profile_paths[model.name] = profiles_dir / f"{model.name}.json"
                write_model_profile(model, profile_paths[model.name])
            record_path = records_dir / f"{model.name}.csv"
            write_record_set(record_set, record_path)
            entries.append(
                {
                    "profile": str(profile_paths[model.name].relative_to(root)),
                    "record": str(record_path.relative_to(root)),
                }
            )
        manifest["datasets"].append({"name": name, "role": role, "entries": entries})
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return manifest_path


@pytest.fixture()
def family_manifest(tmp_path: Path) -> Path:
    return write_family_tree(tmp_path, random.Random(11))
