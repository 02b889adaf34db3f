"""Cascade execution against pluggable model runners.

Execution is phased: stage 0's runner predicts every sample, samples whose
confidence clears the stage threshold are answered there, and the remainder
roll into the next stage's phase. The final stage answers whatever reaches
it. Routing therefore matches the evaluation engine's gate exactly for
identical (confidence, threshold) streams.

The memory policy only changes runner lifetimes, never predictions:

* ``resident`` starts every runner up front and keeps them alive for the
  whole run;
* ``swap`` starts stage i+1's runner only after stage i has finished all of
  its samples (and never starts runners for stages nothing reaches), so at
  most one model is live at a time.

Within a phase, requests are pipelined and responses are matched by the
echoed sample id, so out-of-order runners are fine. Per-sample results are
reported in input order regardless.
"""

from __future__ import annotations

import queue
import subprocess
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

from . import protocol
from .engine import CascadeConfig, charged_gmacs_total
from .errors import (
    ConfigError,
    HandshakeMismatchError,
    RunnerCrashError,
    RunnerError,
    RunnerProtocolError,
    RunnerTimeoutError,
)

DEFAULT_STARTUP_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class RunnerSpec:
    """How to obtain predictions for one cascade stage.

    Exactly one kind's fields are populated: a replay runner answers from a
    record file (and needs the model name the records belong to, since the
    file itself does not carry it); a subprocess runner is an external
    process speaking the wire protocol on its standard streams.
    """

    kind: str
    record_path: Path | None = None
    model_name: str | None = None
    argv: tuple[str, ...] | None = None
    cwd: Path | None = None
    startup_timeout_s: float = DEFAULT_STARTUP_TIMEOUT_S

    def __post_init__(self) -> None:
        if self.kind == "replay":
            if self.record_path is None or self.model_name is None or self.argv is not None:
                raise ConfigError("replay runner needs record_path and model_name only")
        elif self.kind == "subprocess":
            if not self.argv or self.record_path is not None or self.model_name is not None:
                raise ConfigError("subprocess runner needs argv only")
        else:
            raise ConfigError(f"unknown runner kind {self.kind!r}")

    @classmethod
    def replay(cls, record_path: str | Path, model_name: str) -> "RunnerSpec":
        return cls(kind="replay", record_path=Path(record_path), model_name=model_name)

    @classmethod
    def subprocess(
        cls,
        argv: Sequence[str],
        cwd: str | Path | None = None,
        startup_timeout_s: float = DEFAULT_STARTUP_TIMEOUT_S,
    ) -> "RunnerSpec":
        return cls(
            kind="subprocess",
            argv=tuple(argv),
            cwd=Path(cwd) if cwd is not None else None,
            startup_timeout_s=startup_timeout_s,
        )


class SampleResult(NamedTuple):
    sample_id: str
    stage: int
    predicted_label: int
    confidence: float


@dataclass(frozen=True)
class ExecutionReport:
    """Outcome of one cascade run. ``stage_counts[i]`` samples were answered
    by stage i and ``reached_counts[i]`` were processed by it; GMACs are
    static accounting from the stage profiles, wall time is measured and
    excluded from report equality concerns."""

    policy: str
    model_names: tuple[str, ...]
    results: tuple[SampleResult, ...]
    stage_counts: tuple[int, ...]
    reached_counts: tuple[int, ...]
    total_gmacs: float
    wall_time_s: float


class _ReplayRunner:
    def __init__(self, spec: RunnerSpec, stage: int):
        self._spec = spec
        self._stage = stage
        self._lookup: Mapping[str, tuple[int, float]] | None = None

    def start(self) -> None:
        try:
            self._lookup = protocol.record_lookup(str(self._spec.record_path))
        except OSError as exc:
            raise RunnerError(
                f"cannot load replay records: {exc}", stage=self._stage
            ) from None

    def handshake(self) -> str:
        assert self._spec.model_name is not None
        return self._spec.model_name

    def predict(self, batch: Sequence[tuple[str, str]]) -> dict[str, tuple[int, float]]:
        assert self._lookup is not None
        out = {}
        for sample_id, _payload in batch:
            if sample_id not in self._lookup:
                raise RunnerError(
                    f"record file {self._spec.record_path} has no such sample",
                    stage=self._stage,
                    sample_id=sample_id,
                )
            out[sample_id] = self._lookup[sample_id]
        return out

    def close(self) -> None:
        self._lookup = None


class _SubprocessRunner:
    """Wire-protocol client around one runner process.

    A background thread drains the runner's stdout into a queue so pipelined
    writes can never deadlock on a full pipe.
    """

    def __init__(self, spec: RunnerSpec, stage: int, response_timeout_s: float | None):
        self._spec = spec
        self._stage = stage
        self._response_timeout_s = response_timeout_s
        self._proc: subprocess.Popen[str] | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()

    def start(self) -> None:
        assert self._spec.argv is not None
        try:
            self._proc = subprocess.Popen(
                self._spec.argv,
                cwd=self._spec.cwd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise RunnerCrashError(f"failed to start {self._spec.argv}: {exc}", stage=self._stage)
        threading.Thread(target=self._drain, daemon=True).start()

    def _drain(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line.rstrip("\n"))
        self._lines.put(None)  # EOF sentinel

    def _send(self, line: str, sample_id: str | None = None) -> None:
        assert self._proc is not None and self._proc.stdin is not None
        try:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError):
            raise RunnerCrashError(
                "runner closed its input pipe", stage=self._stage, sample_id=sample_id
            ) from None

    def _recv(self, timeout_s: float | None, sample_id: str | None = None) -> str:
        try:
            line = self._lines.get(timeout=timeout_s)
        except queue.Empty:
            raise RunnerTimeoutError(
                f"no runner response within {timeout_s}s", stage=self._stage, sample_id=sample_id
            ) from None
        if line is None:
            code = self._proc.poll() if self._proc is not None else None
            raise RunnerCrashError(
                f"runner exited (status {code}) while a response was pending",
                stage=self._stage,
                sample_id=sample_id,
            )
        return line

    def handshake(self) -> str:
        self._send(protocol.HELLO)
        line = self._recv(self._spec.startup_timeout_s)
        try:
            return protocol.parse_model(line)
        except RunnerProtocolError as exc:
            raise RunnerProtocolError(str(exc), stage=self._stage) from None

    def predict(self, batch: Sequence[tuple[str, str]]) -> dict[str, tuple[int, float]]:
        pending = {sample_id for sample_id, _ in batch}
        for sample_id, payload in batch:
            self._send(protocol.predict_line(sample_id, payload), sample_id)
        out: dict[str, tuple[int, float]] = {}
        while pending:
            line = self._recv(self._response_timeout_s, next(iter(pending)))
            try:
                sample_id, label, confidence = protocol.parse_result(line)
            except RunnerProtocolError as exc:
                raise RunnerProtocolError(str(exc), stage=self._stage) from None
            if sample_id not in pending:
                raise RunnerProtocolError(
                    f"unexpected RESULT for {sample_id!r}", stage=self._stage
                )
            pending.remove(sample_id)
            out[sample_id] = (label, confidence)
        return out

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.poll() is None:
                self._send(protocol.BYE)
                self._proc.wait(timeout=self._spec.startup_timeout_s)
        except (RunnerError, subprocess.TimeoutExpired):
            self._proc.kill()
            self._proc.wait()
        finally:
            self._proc = None


def _make_runner(spec: RunnerSpec, stage: int, response_timeout_s: float | None):
    if spec.kind == "replay":
        return _ReplayRunner(spec, stage)
    return _SubprocessRunner(spec, stage, response_timeout_s)


def handshake(spec: RunnerSpec) -> str:
    """Start a runner long enough to learn its self-declared model name."""
    runner = _make_runner(spec, stage=0, response_timeout_s=None)
    runner.start()
    try:
        return runner.handshake()
    finally:
        runner.close()


def _normalize_samples(samples: Sequence[str | tuple[str, str]]) -> list[tuple[str, str]]:
    normalized: list[tuple[str, str]] = []
    seen: set[str] = set()
    for entry in samples:
        sample_id, payload = (entry, entry) if isinstance(entry, str) else entry
        if not sample_id or any(ch.isspace() for ch in sample_id):
            raise ConfigError(f"sample id {sample_id!r} must be non-empty without whitespace")
        if sample_id in seen:
            raise ConfigError(f"duplicate sample id {sample_id!r}")
        seen.add(sample_id)
        normalized.append((sample_id, payload))
    if not normalized:
        raise ConfigError("no samples to execute")
    return normalized


def _check_handshake(runner, stage: int, expected: str) -> None:
    announced = runner.handshake()
    if announced != expected:
        raise HandshakeMismatchError(
            f"stage {stage} runner announced {announced!r}, profile says {expected!r}"
        )


def execute(
    samples: Sequence[str | tuple[str, str]],
    config: CascadeConfig,
    runners: Sequence[RunnerSpec],
    memory_policy: str = "resident",
    response_timeout_s: float | None = None,
) -> ExecutionReport:
    """Run the configured cascade over samples given as ids or (id, payload).

    The payload is handed to runners verbatim (a file path for real models;
    replay runners ignore it). Reports are identical across memory policies
    except for wall time.
    """
    if memory_policy not in ("resident", "swap"):
        raise ConfigError(f"memory_policy must be 'resident' or 'swap', got {memory_policy!r}")
    if len(runners) != len(config.chain):
        raise ConfigError(
            f"{len(config.chain)}-model chain needs {len(config.chain)} runners, got {len(runners)}"
        )
    batch = _normalize_samples(samples)
    k = len(config.chain)
    started = time.perf_counter()

    live = []
    try:
        if memory_policy == "resident":
            for stage, spec in enumerate(runners):
                runner = _make_runner(spec, stage, response_timeout_s)
                runner.start()
                live.append(runner)
                _check_handshake(runner, stage, config.chain[stage].name)

        outcomes: dict[str, SampleResult] = {}
        reached_counts = []
        pending = batch
        for stage in range(k):
            reached_counts.append(len(pending))
            if not pending:
                continue
            if memory_policy == "resident":
                runner = live[stage]
            else:
                runner = _make_runner(runners[stage], stage, response_timeout_s)
                runner.start()
                live.append(runner)
                _check_handshake(runner, stage, config.chain[stage].name)
            predictions = runner.predict(pending)
            if memory_policy == "swap":
                runner.close()
                live.remove(runner)

            forwarded = []
            final = stage == k - 1
            threshold = None if final else config.thresholds[stage]
            for sample_id, payload in pending:
                label, confidence = predictions[sample_id]
                if final or confidence >= threshold:
                    outcomes[sample_id] = SampleResult(sample_id, stage, label, confidence)
                else:
                    forwarded.append((sample_id, payload))
            pending = forwarded
    finally:
        for runner in live:
            runner.close()

    results = tuple(outcomes[sample_id] for sample_id, _ in batch)
    stage_counts = [0] * k
    for result in results:
        stage_counts[result.stage] += 1
    macs = [m.macs_per_sample for m in config.chain]
    return ExecutionReport(
        policy=memory_policy,
        model_names=config.model_names,
        results=results,
        stage_counts=tuple(stage_counts),
        reached_counts=tuple(reached_counts),
        total_gmacs=charged_gmacs_total(macs, reached_counts),
        wall_time_s=time.perf_counter() - started,
    )
