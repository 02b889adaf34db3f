"""Exception hierarchy shared across the toolkit.

``ConfigError`` marks bad user input (unknown model names, unresolvable
manifests, malformed run configs) and maps to CLI exit code 2; every other
``CascadeKitError`` is a runtime failure and maps to exit code 1.
"""

from __future__ import annotations


class CascadeKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CascadeKitError):
    """Bad user-supplied configuration (CLI exit code 2)."""


class RecordFormatError(CascadeKitError):
    """A record or profile file violates the on-disk format."""


class AlignmentError(CascadeKitError):
    """Record sets cannot be joined into an aligned set."""


class ChainMismatchError(CascadeKitError):
    """An aligned set does not match a cascade's model chain."""


class EmptyInputError(CascadeKitError):
    """An operation received an empty record set, grid, or curve."""


class RunnerError(CascadeKitError):
    """Base class for model-runner failures during execution."""

    def __init__(self, message: str, *, stage: int | None = None, sample_id: str | None = None):
        context = []
        if stage is not None:
            context.append(f"stage {stage}")
        if sample_id is not None:
            context.append(f"sample {sample_id!r}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.stage = stage
        self.sample_id = sample_id


class RunnerTimeoutError(RunnerError):
    """A runner did not respond within its timeout."""


class RunnerCrashError(RunnerError):
    """A runner process exited or broke its pipe mid-run."""


class RunnerProtocolError(RunnerError):
    """A runner emitted a line that does not parse under the wire protocol."""


class HandshakeMismatchError(ConfigError):
    """A runner announced a model name that differs from its stage profile."""
