"""Model construction and single-image inference.

Models come from the torchvision zoo by name. Weights load from a local
checkpoint when given; otherwise the model is randomly initialized from a
fixed seed, which keeps repeated runs (and the harvest/serve pair) bit-equal
even where no pretrained checkpoint is available. Inference is single-image,
single-threaded, eval-mode: the same arithmetic on both the harvesting and
the serving path.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
from PIL import Image
from torchvision import transforms
from torchvision.models import get_model

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CROP_RATIO = 0.875

_INTERPOLATION = {
    "bilinear": transforms.InterpolationMode.BILINEAR,
    "bicubic": transforms.InterpolationMode.BICUBIC,
}


@dataclass(frozen=True)
class PreprocessSpec:
    """Eval-time image pipeline; models in a pair may differ in both fields."""

    resolution: int
    interpolation: str = "bilinear"

    def __post_init__(self) -> None:
        if self.resolution < 32:
            raise ValueError(f"resolution {self.resolution} too small")
        if self.interpolation not in _INTERPOLATION:
            raise ValueError(f"interpolation must be one of {sorted(_INTERPOLATION)}")

    def build(self) -> transforms.Compose:
        resize = int(round(self.resolution / CROP_RATIO))
        return transforms.Compose(
            [
                transforms.Resize(resize, interpolation=_INTERPOLATION[self.interpolation]),
                transforms.CenterCrop(self.resolution),
                transforms.ToTensor(),
                transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
            ]
        )


class ZooModel:
    """One classifier plus its preprocessing, ready for deterministic eval."""

    def __init__(
        self,
        model_id: str,
        spec: PreprocessSpec,
        checkpoint: str | Path | None = None,
        seed: int = 0,
    ):
        torch.set_num_threads(1)  # thread-count-independent reductions
        torch.manual_seed(seed)
        try:
            self.module = get_model(model_id, weights=None)
        except ValueError as exc:
            raise ValueError(f"unknown zoo model {model_id!r}: {exc}") from None
        if checkpoint is not None:
            state = torch.load(checkpoint, map_location="cpu", weights_only=True)
            self.module.load_state_dict(state)
        self.module.eval()
        self.model_id = model_id
        self.spec = spec
        self.transform = spec.build()

    @property
    def name(self) -> str:
        return f"{self.model_id}-{self.spec.resolution}"

    @property
    def params_m(self) -> float:
        return sum(p.numel() for p in self.module.parameters()) / 1e6

    def predict_image(self, path: str | Path) -> tuple[int, float]:
        """(argmax class, max softmax probability) for one image file."""
        with Image.open(path) as image:
            tensor = self.transform(image.convert("RGB")).unsqueeze(0)
        with torch.no_grad():
            logits = self.module(tensor)
            probabilities = torch.softmax(logits, dim=1)
            confidence, predicted = torch.max(probabilities, dim=1)
        return int(predicted.item()), float(confidence.item())
