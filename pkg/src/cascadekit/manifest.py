"""Manifest files: the single source of truth binding profiles to records.

A manifest is JSON::

    {
      "datasets": [
        {
          "name": "imagenet1k-val",
          "role": "tuning",
          "entries": [
            {"profile": "profiles/b0.json", "record": "records/b0.csv"},
            {"profile": "profiles/b7.json", "record": "records/b7.csv"}
          ]
        },
        {"name": "imagenet-v2", "role": "target", "entries": [...]}
      ]
    }

Paths are resolved relative to the manifest's directory and must exist at
load time. Roles are optional: with a single dataset it is the tuning set;
with several and no roles, the first is. Subcommands never accept loose
record paths, so a profile can never be paired with the wrong records.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import AlignmentError, ConfigError
from .records import (
    AlignedRecordSet,
    ModelProfile,
    RecordSet,
    align,
    load_model_profile,
    load_record_set,
)


@dataclass(frozen=True)
class ManifestEntry:
    profile_path: Path
    record_path: Path


@dataclass(frozen=True)
class ManifestDataset:
    name: str
    role: str  # "tuning", "target", or ""
    entries: tuple[ManifestEntry, ...]

    def load(self) -> list[RecordSet]:
        return [
            load_record_set(e.record_path, load_model_profile(e.profile_path), self.name)
            for e in self.entries
        ]

    def load_aligned(self) -> AlignedRecordSet:
        sets = self.load()
        if len(sets) == 1:
            raise AlignmentError(f"dataset {self.name!r} has a single model; nothing to align")
        return align(sets)

    def profiles(self) -> list[ModelProfile]:
        return [load_model_profile(e.profile_path) for e in self.entries]


@dataclass(frozen=True)
class Manifest:
    path: Path
    datasets: tuple[ManifestDataset, ...]

    def tuning_dataset(self) -> ManifestDataset:
        for dataset in self.datasets:
            if dataset.role == "tuning":
                return dataset
        return self.datasets[0]

    def target_datasets(self) -> list[ManifestDataset]:
        tuning = self.tuning_dataset()
        return [d for d in self.datasets if d is not tuning]

    def dataset(self, name: str) -> ManifestDataset:
        for dataset in self.datasets:
            if dataset.name == name:
                return dataset
        raise ConfigError(f"manifest has no dataset named {name!r}")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"manifest {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    datasets_raw = raw.get("datasets")
    if not isinstance(datasets_raw, list) or not datasets_raw:
        raise ConfigError(f"{path}: manifest needs a non-empty 'datasets' list")

    base = path.parent
    datasets = []
    for i, ds in enumerate(datasets_raw):
        name = ds.get("name")
        if not name:
            raise ConfigError(f"{path}: dataset #{i} has no name")
        role = ds.get("role", "")
        if role not in ("", "tuning", "target"):
            raise ConfigError(f"{path}: dataset {name!r} has unknown role {role!r}")
        entries_raw = ds.get("entries")
        if not isinstance(entries_raw, list) or not entries_raw:
            raise ConfigError(f"{path}: dataset {name!r} needs a non-empty 'entries' list")
        entries = []
        for entry in entries_raw:
            try:
                profile_path = (base / entry["profile"]).resolve()
                record_path = (base / entry["record"]).resolve()
            except (KeyError, TypeError):
                raise ConfigError(
                    f"{path}: dataset {name!r} entries need 'profile' and 'record' keys"
                ) from None
            for p in (profile_path, record_path):
                if not p.is_file():
                    raise ConfigError(f"{path}: referenced file {p} does not exist")
            entries.append(ManifestEntry(profile_path, record_path))
        datasets.append(ManifestDataset(name=name, role=role, entries=tuple(entries)))

    tuning_roles = [d for d in datasets if d.role == "tuning"]
    if len(tuning_roles) > 1:
        raise ConfigError(f"{path}: more than one dataset marked 'tuning'")
    return Manifest(path=path, datasets=tuple(datasets))
