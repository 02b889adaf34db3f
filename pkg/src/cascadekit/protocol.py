"""Line-oriented runner wire protocol.

A runner is any process that speaks this over its standard streams, one UTF-8
line per message, LF-terminated:

    executor -> runner    HELLO
    runner   -> executor  MODEL <name>
    executor -> runner    PREDICT <sample_id> <payload_path>
    runner   -> executor  RESULT <sample_id> <predicted_label> <confidence>
    executor -> runner    BYE

``confidence`` is fixed-point with six decimals. Sample ids must contain no
whitespace; the payload path is everything after the second space and may
contain spaces. Responses may arrive out of order — the executor matches them
by the echoed sample id. On a message it cannot honor, a runner exits nonzero.
"""

from __future__ import annotations

import sys
from typing import IO, Mapping

from .errors import RunnerProtocolError
from .records import format_confidence, load_records

HELLO = "HELLO"
BYE = "BYE"


def model_line(name: str) -> str:
    return f"MODEL {name}"


def predict_line(sample_id: str, payload_path: str) -> str:
    return f"PREDICT {sample_id} {payload_path}"


def result_line(sample_id: str, predicted_label: int, confidence: float) -> str:
    return f"RESULT {sample_id} {predicted_label} {format_confidence(confidence)}"


def parse_model(line: str) -> str:
    parts = line.split(" ", 1)
    if len(parts) != 2 or parts[0] != "MODEL" or not parts[1]:
        raise RunnerProtocolError(f"expected 'MODEL <name>', got {line!r}")
    return parts[1]


def parse_predict(line: str) -> tuple[str, str]:
    parts = line.split(" ", 2)
    if len(parts) != 3 or parts[0] != "PREDICT" or not parts[1]:
        raise RunnerProtocolError(f"expected 'PREDICT <sample_id> <payload>', got {line!r}")
    return parts[1], parts[2]


def parse_result(line: str) -> tuple[str, int, float]:
    parts = line.split(" ")
    if len(parts) != 4 or parts[0] != "RESULT":
        raise RunnerProtocolError(
            f"expected 'RESULT <sample_id> <label> <confidence>', got {line!r}"
        )
    _, sample_id, label_text, conf_text = parts
    try:
        label = int(label_text)
        confidence = float(conf_text)
    except ValueError:
        raise RunnerProtocolError(f"unparsable RESULT fields in {line!r}") from None
    if not 0.0 <= confidence <= 1.0:
        raise RunnerProtocolError(f"confidence {conf_text} outside [0, 1] in {line!r}")
    return sample_id, label, confidence


def serve_lookup(
    model_name: str,
    lookup: Mapping[str, tuple[int, float]],
    stdin: IO[str],
    stdout: IO[str],
    stderr: IO[str] = sys.stderr,
) -> int:
    """Answer protocol requests from a prediction table. Returns an exit code.

    Used by the bundled replay runner; any process with the same loop is a
    valid executor stage.
    """
    for raw in stdin:
        line = raw.rstrip("\n")
        if line == HELLO:
            stdout.write(model_line(model_name) + "\n")
            stdout.flush()
        elif line == BYE:
            return 0
        elif line.startswith("PREDICT "):
            sample_id, _payload = parse_predict(line)
            if sample_id not in lookup:
                stderr.write(f"unknown sample_id {sample_id!r}\n")
                return 3
            label, confidence = lookup[sample_id]
            stdout.write(result_line(sample_id, label, confidence) + "\n")
            stdout.flush()
        else:
            stderr.write(f"unsupported message {line!r}\n")
            return 3
    return 0


def record_lookup(record_path: str) -> dict[str, tuple[int, float]]:
    """Prediction table of a record file, keyed by sample id."""
    return {r.sample_id: (r.predicted_label, r.confidence) for r in load_records(record_path)}
