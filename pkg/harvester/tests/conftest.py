from __future__ import annotations

import random
from pathlib import Path

import pytest
from PIL import Image

from harvester.harvest import HarvestJob, harvest
from harvester.zoo import PreprocessSpec

RESOLUTION = 96
LITTLE_MODEL = "mobilenet_v3_small"
BIG_MODEL = "efficientnet_b0"


def make_image_tree(root: Path, n_classes: int = 2, per_class: int = 50, seed: int = 0) -> Path:
    """Class-subdirectory tree of deterministic random PNGs."""
    rng = random.Random(seed)
    for c in range(n_classes):
        class_dir = root / f"class_{c:03d}"
        class_dir.mkdir(parents=True)
        for i in range(per_class):
            pixels = bytes(rng.randrange(256) for _ in range(128 * 128 * 3))
            image = Image.frombytes("RGB", (128, 128), pixels)
            image.save(class_dir / f"img_{i:04d}.png")
    return root


@pytest.fixture(scope="session")
def image_tree(tmp_path_factory) -> Path:
    return make_image_tree(tmp_path_factory.mktemp("images"))


@pytest.fixture(scope="session")
def harvested(image_tree, tmp_path_factory) -> dict[str, tuple[Path, Path]]:
    """Records and profiles for a little+big pair over the image tree."""
    out_dir = tmp_path_factory.mktemp("harvested")
    outputs = {}
    for model_id in (LITTLE_MODEL, BIG_MODEL):
        job = HarvestJob(
            model_id=model_id,
            data_dir=image_tree,
            spec=PreprocessSpec(resolution=RESOLUTION),
            out_dir=out_dir,
        )
        outputs[model_id] = harvest(job)
    return outputs
