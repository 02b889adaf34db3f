"""Serve a classifier as an executor runner stage.

Speaks the line protocol on the standard streams, one LF-terminated UTF-8
line per message::

    <- HELLO                                -> MODEL <name>
    <- PREDICT <sample_id> <payload_path>   -> RESULT <sample_id> <label> <confidence>
    <- BYE                                  (exit 0)

The payload is an image path; the confidence is truncated to six decimals
with the same helper the harvester uses, so a served answer equals the
harvested record for the same image and weights. Any message the server
cannot honor terminates it with a nonzero status.
"""

from __future__ import annotations

import sys
from typing import IO

from .records_io import truncate_confidence
from .zoo import ZooModel


def serve(model: ZooModel, stdin: IO[str], stdout: IO[str], stderr: IO[str] = sys.stderr) -> int:
    for raw in stdin:
        line = raw.rstrip("\n")
        if line == "HELLO":
            stdout.write(f"MODEL {model.name}\n")
            stdout.flush()
        elif line == "BYE":
            return 0
        elif line.startswith("PREDICT "):
            parts = line.split(" ", 2)
            if len(parts) != 3:
                stderr.write(f"malformed request {line!r}\n")
                return 3
            sample_id, payload = parts[1], parts[2]
            try:
                predicted, confidence = model.predict_image(payload)
            except (OSError, ValueError) as exc:
                stderr.write(f"cannot predict {payload!r}: {exc}\n")
                return 3
            stdout.write(f"RESULT {sample_id} {predicted} {truncate_confidence(confidence)}\n")
            stdout.flush()
        else:
            stderr.write(f"unsupported message {line!r}\n")
            return 3
    return 0
