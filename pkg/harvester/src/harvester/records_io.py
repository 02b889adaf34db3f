"""Writers for the cascade toolkit's on-disk interchange formats.

Record files: UTF-8 CSV, LF endings, header
``sample_id,predicted_label,confidence,true_label``, confidence as fixed-point
with six decimals. Profiles: a JSON object with ``name``, ``macs_per_sample``
(GMACs), ``params_m``, ``input_resolution``.

Confidences are truncated, never rounded, so a served prediction and its
harvested record agree exactly at six decimals.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

RECORD_HEADER = "sample_id,predicted_label,confidence,true_label"


def truncate_confidence(value: float) -> str:
    """Six decimals by truncation. Rendered at 17 decimals first, so the cut
    never rounds a digit upward."""
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"confidence {value!r} outside [0, 1]")
    text = f"{value:.17f}"
    return text[: text.index(".") + 7]


def write_record_file(
    rows: Iterable[tuple[str, int, float, int]], path: str | Path
) -> None:
    """rows: (sample_id, predicted_label, confidence, true_label), presorted."""
    lines = [RECORD_HEADER]
    for sample_id, predicted, confidence, true_label in rows:
        lines.append(f"{sample_id},{predicted},{truncate_confidence(confidence)},{true_label}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_profile_file(
    path: str | Path,
    name: str,
    macs_per_sample: float,
    params_m: float,
    input_resolution: int,
    macs_source: str = "measured",
) -> None:
    payload = {
        "name": name,
        "macs_per_sample": macs_per_sample,
        "params_m": params_m,
        "input_resolution": input_resolution,
        "macs_source": macs_source,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8", newline="\n")
