"""Run a classifier over a labeled image tree and emit record + profile files.

The dataset layout is one subdirectory per class, sorted directory names
giving the class indices::

    data/
      n01440764/  img_001.png  img_002.png ...
      n01443537/  ...

Sample ids are the relative path without extension, path separators replaced
by ``__``; output rows are sorted by sample id, so repeated runs of the same
job are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .macs import measure_gmacs
from .records_io import write_profile_file, write_record_file
from .zoo import PreprocessSpec, ZooModel

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


@dataclass(frozen=True)
class HarvestJob:
    model_id: str
    data_dir: Path
    spec: PreprocessSpec
    out_dir: Path
    checkpoint: Path | None = None
    seed: int = 0
    macs_override: float | None = None  # published table value instead of measurement


def discover_samples(data_dir: Path) -> list[tuple[str, Path, int]]:
    """(sample_id, image_path, class_index) sorted by sample_id."""
    data_dir = Path(data_dir)
    class_dirs = sorted(d for d in data_dir.iterdir() if d.is_dir())
    if not class_dirs:
        raise ValueError(f"{data_dir} has no class subdirectories")
    samples = []
    seen: set[str] = set()
    for class_index, class_dir in enumerate(class_dirs):
        for image_path in sorted(class_dir.rglob("*")):
            if image_path.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            relative = image_path.relative_to(data_dir).with_suffix("")
            sample_id = relative.as_posix().replace("/", "__")
            if any(ch.isspace() for ch in sample_id) or "," in sample_id:
                raise ValueError(f"image name {image_path} yields unusable sample id")
            if sample_id in seen:
                raise ValueError(f"duplicate sample id {sample_id!r}")
            seen.add(sample_id)
            samples.append((sample_id, image_path, class_index))
    if not samples:
        raise ValueError(f"{data_dir} contains no images")
    samples.sort(key=lambda s: s[0])
    return samples


def harvest(job: HarvestJob) -> tuple[Path, Path]:
    """Returns (record_path, profile_path)."""
    model = ZooModel(job.model_id, job.spec, checkpoint=job.checkpoint, seed=job.seed)
    samples = discover_samples(job.data_dir)

    rows = []
    for sample_id, image_path, class_index in samples:
        predicted, confidence = model.predict_image(image_path)
        rows.append((sample_id, predicted, confidence, class_index))

    job.out_dir.mkdir(parents=True, exist_ok=True)
    record_path = job.out_dir / f"{model.name}.csv"
    profile_path = job.out_dir / f"{model.name}.json"
    write_record_file(rows, record_path)
    if job.macs_override is not None:
        gmacs, source = job.macs_override, "published"
    else:
        gmacs, source = measure_gmacs(model.module, job.spec.resolution), "measured"
    write_profile_file(
        profile_path,
        name=model.name,
        macs_per_sample=gmacs,
        params_m=model.params_m,
        input_resolution=job.spec.resolution,
        macs_source=source,
    )
    return record_path, profile_path
