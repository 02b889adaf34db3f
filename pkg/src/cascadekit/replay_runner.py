"""Standalone replay runner: serves a record file over the wire protocol.

    python -m cascadekit.replay_runner --record b7.csv --name EfficientNet-B7-600

Useful as a subprocess stage when exercising the executor without any real
model behind it.
"""

from __future__ import annotations

import argparse
import sys

from .protocol import record_lookup, serve_lookup


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="cascadekit-replay-runner", description=__doc__)
    parser.add_argument("--record", required=True, help="record CSV to replay")
    parser.add_argument("--name", required=True, help="model name announced on handshake")
    args = parser.parse_args(argv)
    return serve_lookup(args.name, record_lookup(args.record), sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
