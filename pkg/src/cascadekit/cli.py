"""Command-line entry point.

Subcommands: ``analyze`` (calibration and mistake-decomposition tables),
``sweep`` (tradeoff curves), ``optimize`` (ranked cascade selection),
``execute`` (run a cascade against live runners), ``report`` (merge curve
files). All outputs are CSV with LF endings and fixed 6-decimal floats, so
identical inputs produce byte-identical files. Exit codes: 0 success,
1 runtime error, 2 usage or configuration error. Set ``CASCADE_OPT_LOG`` to a
level name to change verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from pathlib import Path
from typing import Iterable, Sequence

from . import engine, hardness, optimize
from .errors import CascadeKitError, ConfigError
from .executor import RunnerSpec, execute
from .manifest import Manifest, ManifestDataset, load_manifest
from .records import AlignedRecordSet, ModelProfile, align, load_model_profile
from .protocol import record_lookup

log = logging.getLogger("cascadekit")

FLOAT_DECIMALS = 6


def _fmt(value: float) -> str:
    return f"{value:.{FLOAT_DECIMALS}f}"


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-._" else "_" for ch in name)


def _parse_grid(text: str | None, default: list[float]) -> list[float]:
    if text is None:
        return default
    try:
        if "," in text:
            grid = [float(v) for v in text.split(",") if v]
        else:
            grid = engine.default_grid(int(text))
    except ValueError as exc:
        raise ConfigError(f"bad --grid value {text!r}: {exc}") from None
    if not grid:
        raise ConfigError(f"bad --grid value {text!r}: no values")
    return grid


# 0.02-step lattice; selection tables conventionally quote thresholds on it.
OPTIMIZE_GRID = [i / 50 for i in range(51)]


def _aligned_for(dataset: ManifestDataset, names: Sequence[str] | None = None) -> AlignedRecordSet:
    aligned = dataset.load_aligned()
    return aligned.project(names) if names is not None else aligned


def _require_models(dataset: ManifestDataset, names: Sequence[str]) -> list[ModelProfile]:
    profiles = {p.name: p for p in dataset.profiles()}
    missing = [n for n in names if n not in profiles]
    if missing:
        raise ConfigError(
            f"model(s) {missing} not in dataset {dataset.name!r}; "
            f"available: {sorted(profiles)}"
        )
    return [profiles[n] for n in names]


def cmd_analyze(
    manifest: Manifest, little: str, big: str, n_bins: int, out_dir: Path
) -> list[Path]:
    """Write per-model calibration and pair mistake-decomposition CSVs."""
    dataset = manifest.tuning_dataset()
    _require_models(dataset, [little, big])
    sets = {s.model.name: s for s in dataset.load()}

    calibration_path = out_dir / "calibration.csv"
    rows = []
    for name in (little, big):
        for stats in hardness.bin_by_confidence(sets[name], n_bins):
            rows.append(
                (
                    name,
                    _fmt(stats.bin_lower),
                    _fmt(stats.bin_upper),
                    str(stats.n_samples),
                    str(stats.n_correct),
                    _fmt(stats.accuracy),
                )
            )
    _write_csv(
        calibration_path,
        ("model", "bin_lower", "bin_upper", "n_samples", "n_correct", "accuracy"),
        rows,
    )

    aligned = align([sets[little], sets[big]])
    decomposition = hardness.decompose_mistakes(aligned, n_bins)
    decomposition_path = out_dir / "decomposition.csv"
    _write_csv(
        decomposition_path,
        ("bin_lower", "bin_upper", "correctable", "non_correctable"),
        (
            (_fmt(b.bin_lower), _fmt(b.bin_upper), str(b.correctable), str(b.non_correctable))
            for b in decomposition.bins
        ),
    )
    if decomposition.empty:
        log.warning("little model %s makes no mistakes on %s", little, dataset.name)
    elif decomposition.total_correctable == 0:
        log.info(
            "none of %s's %d mistakes are correctable by %s",
            little, decomposition.total_mistakes, big,
        )
    else:
        log.info(
            "correctable mistakes: %d of %d; mean confidence %s; %.0f%% fall below %s",
            decomposition.total_correctable,
            decomposition.total_mistakes,
            _fmt(decomposition.mean_correctable_confidence),
            decomposition.q * 100,
            _fmt(decomposition.correctable_confidence_quantile),
        )
    return [calibration_path, decomposition_path]


def _curve_header(k: int) -> tuple[str, ...]:
    thresholds = ("threshold",) if k == 2 else ("threshold", "threshold2")
    return thresholds + ("accuracy", "expected_gmacs") + tuple(f"frac_stage{i}" for i in range(k))


def _point_row(point: engine.CascadePoint) -> tuple[str, ...]:
    return (
        tuple(_fmt(t) for t in point.thresholds)
        + (_fmt(point.accuracy), _fmt(point.expected_macs))
        + tuple(_fmt(f) for f in point.stage_fractions)
    )


def cmd_sweep(
    manifest: Manifest, names: Sequence[str], grid: list[float], out_dir: Path
) -> Path:
    """Write the tradeoff curve of a 2- or 3-model chain over the grid."""
    if len(names) not in (2, 3):
        raise ConfigError(f"sweep takes 2 or 3 model names, got {len(names)}")
    dataset = manifest.tuning_dataset()
    profiles = _require_models(dataset, names)
    aligned = _aligned_for(dataset, names)
    if len(names) == 2:
        curve = engine.sweep(aligned, (profiles[0], profiles[1]), grid)
        points = curve.points
    else:
        points = engine.sweep_kpass(aligned, profiles, [grid, grid])
    out_path = out_dir / ("tradeoff_" + "__".join(_safe_name(n) for n in names) + ".csv")
    _write_csv(out_path, _curve_header(len(names)), (_point_row(p) for p in points))
    return out_path


def cmd_optimize(
    manifest: Manifest, tolerance: float, kpass: bool, grid: list[float], out_dir: Path,
    big_name: str | None = None,
) -> list[Path]:
    """Rank little companions for a big model under an accuracy-loss tolerance.

    The big model defaults to the costliest profile in the tuning dataset.
    Each candidate is swept over the grid and the cheapest feasible point is
    selected; rows are ranked feasible-first by expected GMACs. With target
    datasets in the manifest, the best feasible config is also cross-evaluated
    into ``generalization.csv``.
    """
    dataset = manifest.tuning_dataset()
    profiles = dataset.profiles()
    if len(profiles) < 2:
        raise ConfigError(f"dataset {dataset.name!r} needs at least 2 models to optimize")
    if big_name is None:
        big = max(profiles, key=lambda p: p.macs_per_sample)
    else:
        (big,) = _require_models(dataset, [big_name])
    littles = [p for p in profiles if p.name != big.name]
    aligned_all = dataset.load_aligned()
    big_view = aligned_all.project([big.name])
    baseline_counts = (big_view.model_correct_count(0), len(big_view.rows))
    criterion = optimize.SelectionCriterion(
        baseline_accuracy=baseline_counts[0] / baseline_counts[1],
        tolerance=tolerance,
        baseline_counts=baseline_counts,
    )

    selections: list[tuple[tuple[str, ...], optimize.SelectionResult]] = []
    for little in littles:
        pair = aligned_all.project([little.name, big.name])
        curve = engine.sweep(pair, (little, big), grid)
        result = optimize.select_threshold(curve, criterion)
        selections.append(((little.name, big.name), result))

    if kpass:
        for first in littles:
            for second in littles:
                if first.macs_per_sample >= second.macs_per_sample:
                    continue  # cheapest-first chains only
                chain = (first, second, big)
                aligned = aligned_all.project([m.name for m in chain])
                points = engine.sweep_kpass(aligned, chain, [grid, grid])
                result = optimize.select_kpass(chain, points, criterion)
                selections.append(((first.name, second.name, big.name), result))

    def rank_key(item):
        names, result = item
        return (not result.feasible, result.point.expected_macs, names)

    selections.sort(key=rank_key)
    big_accuracy = criterion.baseline_accuracy
    header = (
        "chain",
        "threshold",
        "threshold2",
        "accuracy_pct",
        "delta_acc_pct",
        "expected_gmacs",
        "delta_gmacs_pct",
        "feasible",
        "replacement",
    )
    rows = []
    for names, result in selections:
        point = result.point
        thresholds = [_fmt(t) for t in point.thresholds]
        if len(thresholds) == 1:
            thresholds.append("")
        rows.append(
            (
                "+".join(names),
                thresholds[0],
                thresholds[1],
                _fmt(point.accuracy * 100),
                _fmt((point.accuracy - big_accuracy) * 100),
                _fmt(point.expected_macs),
                _fmt((point.expected_macs / big.macs_per_sample - 1.0) * 100),
                str(int(result.feasible)),
                str(int(result.replacement)),
            )
        )
    out_path = out_dir / "optimize.csv"
    _write_csv(out_path, header, rows)
    written = [out_path]

    targets = manifest.target_datasets()
    best_feasible = next((r for _, r in selections if r.feasible), None)
    if targets and best_feasible is not None:
        report = optimize.cross_evaluate(
            best_feasible.config,
            aligned_all,
            [t.load_aligned() for t in targets],
        )
        gen_path = out_dir / "generalization.csv"
        _write_csv(
            gen_path,
            (
                "dataset",
                "accuracy_pct",
                "big_accuracy_pct",
                "delta_acc_pct",
                "expected_gmacs",
                "macs_reduction_pct",
            ),
            (
                (
                    o.dataset_name,
                    _fmt(o.accuracy * 100),
                    _fmt(o.big_accuracy * 100),
                    _fmt(o.accuracy_delta * 100),
                    _fmt(o.expected_macs),
                    _fmt(o.macs_reduction * 100),
                )
                for o in report.outcomes
            ),
        )
        written.append(gen_path)
    return written


def _load_exec_config(path: Path) -> tuple[list[ModelProfile], list[RunnerSpec], list[str | tuple[str, str]]]:
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"run config {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    stages_raw = raw.get("stages")
    if not isinstance(stages_raw, list) or len(stages_raw) < 2:
        raise ConfigError(f"{path}: run config needs a 'stages' list of at least 2 stages")
    base = path.parent
    profiles: list[ModelProfile] = []
    runners: list[RunnerSpec] = []
    for i, stage in enumerate(stages_raw):
        try:
            profile_path = base / stage["profile"]
            runner_raw = stage["runner"]
            kind = runner_raw["kind"]
        except (KeyError, TypeError):
            raise ConfigError(f"{path}: stage #{i} needs 'profile' and 'runner.kind'") from None
        if not profile_path.is_file():
            raise ConfigError(f"{path}: stage #{i} profile {profile_path} does not exist")
        profile = load_model_profile(profile_path)
        if kind == "replay":
            if "record" not in runner_raw:
                raise ConfigError(f"{path}: stage #{i} replay runner needs 'record'")
            record_path = base / runner_raw["record"]
            if not record_path.is_file():
                raise ConfigError(f"{path}: stage #{i} record {record_path} does not exist")
            spec = RunnerSpec.replay(record_path, profile.name)
        elif kind == "subprocess":
            argv = runner_raw.get("argv")
            if not isinstance(argv, list) or not argv:
                raise ConfigError(f"{path}: stage #{i} subprocess runner needs non-empty 'argv'")
            spec = RunnerSpec.subprocess(
                [str(a) for a in argv],
                cwd=base / runner_raw["cwd"] if "cwd" in runner_raw else None,
                startup_timeout_s=float(runner_raw.get("startup_timeout_s", 30.0)),
            )
        else:
            raise ConfigError(f"{path}: stage #{i} has unknown runner kind {kind!r}")
        profiles.append(profile)
        runners.append(spec)

    samples: list[str | tuple[str, str]] = []
    if "samples" in raw:
        samples_path = base / raw["samples"]
        if not samples_path.is_file():
            raise ConfigError(f"{path}: samples file {samples_path} does not exist")
        for line in samples_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            parts = line.split(" ", 1)
            samples.append(parts[0] if len(parts) == 1 else (parts[0], parts[1]))
    else:
        first = runners[0]
        if first.kind != "replay":
            raise ConfigError(
                f"{path}: 'samples' is required unless stage 0 is a replay runner"
            )
        samples = sorted(record_lookup(str(first.record_path)))
    return profiles, runners, samples


def cmd_execute(
    config_path: Path,
    thresholds: Sequence[float],
    policy: str,
    out_path: Path,
    limit: int | None = None,
    seed: int = 0,
) -> Path:
    """Run a cascade from a JSON run config and write the report CSVs."""
    profiles, runners, samples = _load_exec_config(config_path)
    if len(thresholds) != len(profiles) - 1:
        raise ConfigError(
            f"{len(profiles)} stages need {len(profiles) - 1} thresholds, got {len(thresholds)}"
        )
    if limit is not None and limit < len(samples):
        rng = random.Random(seed)
        samples = rng.sample(samples, limit)
    config = engine.CascadeConfig(chain=tuple(profiles), thresholds=tuple(thresholds))
    report = execute(samples, config, runners, memory_policy=policy)
    _write_csv(
        out_path,
        ("sample_id", "stage", "predicted_label", "confidence"),
        (
            (r.sample_id, str(r.stage), str(r.predicted_label), _fmt(r.confidence))
            for r in report.results
        ),
    )
    totals_path = out_path.with_name(out_path.stem + "_totals.csv")
    _write_csv(
        totals_path,
        ("stage", "model", "answered", "reached", "gmacs_charged"),
        (
            (
                str(i),
                profiles[i].name,
                str(report.stage_counts[i]),
                str(report.reached_counts[i]),
                _fmt(profiles[i].macs_per_sample * report.reached_counts[i]),
            )
            for i in range(len(profiles))
        ),
    )
    log.info(
        "executed %d samples under %s policy in %.3fs; total %.3f GMACs",
        len(report.results),
        report.policy,
        report.wall_time_s,
        report.total_gmacs,
    )
    return out_path


def cmd_report(curve_paths: Sequence[Path], out_dir: Path) -> Path:
    """Merge sweep CSVs into one long-format table keyed by (pair, threshold)."""
    if not curve_paths:
        raise ConfigError("report needs at least one curve file")
    expected_headers = {_curve_header(2), _curve_header(3)}
    merged_header: tuple[str, ...] | None = None
    rows: list[tuple[str, ...]] = []
    for path in curve_paths:
        try:
            lines = path.read_text(encoding="utf-8").splitlines()
        except FileNotFoundError:
            raise ConfigError(f"curve file {path} does not exist") from None
        if not lines:
            raise ConfigError(f"{path}: empty curve file")
        header = tuple(lines[0].split(","))
        if header not in expected_headers:
            reference = _curve_header(3) if len(header) > 6 else _curve_header(2)
            for got, want in zip(header, reference):
                if got != want:
                    raise ConfigError(f"{path}: schema mismatch at column {got!r} (expected {want!r})")
            raise ConfigError(f"{path}: schema mismatch: wrong column count")
        if merged_header is None:
            merged_header = header
        elif header != merged_header:
            raise ConfigError(f"{path}: schema differs from first curve file")
        pair = path.stem
        if pair.startswith("tradeoff_"):
            pair = pair[len("tradeoff_"):]
        for lineno, line in enumerate(lines[1:], start=2):
            fields = tuple(line.split(","))
            if len(fields) != len(merged_header):
                raise ConfigError(f"{path}:{lineno}: expected {len(merged_header)} fields")
            rows.append((pair,) + fields)
    out_path = out_dir / "report.csv"
    assert merged_header is not None
    _write_csv(out_path, ("pair",) + merged_header, rows)
    return out_path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascadekit",
        description="Analyze, optimize, and execute confidence-gated classifier cascades.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", type=Path, help="manifest JSON binding profiles to records")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    common.add_argument("--grid", help="threshold grid: a count or a comma list of values")
    common.add_argument("--seed", type=int, default=0, help="seed for any subsampling")

    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", parents=[common], help="calibration + mistake tables")
    p_analyze.add_argument("--little", required=True, help="little model name")
    p_analyze.add_argument("--big", required=True, help="big model name")
    p_analyze.add_argument("--bins", type=int, default=10, help="confidence bins")

    p_sweep = sub.add_parser("sweep", parents=[common], help="tradeoff curve over thresholds")
    p_sweep.add_argument(
        "--models", required=True, help="comma list of 2 or 3 model names, cheapest first"
    )

    p_opt = sub.add_parser("optimize", parents=[common], help="rank cascades under a tolerance")
    p_opt.add_argument(
        "--tolerance", type=float, default=0.0,
        help="accuracy-loss tolerance as a fraction (0 = lossless, negative demands a gain)",
    )
    p_opt.add_argument("--big", help="big model name (default: costliest in manifest)")
    p_opt.add_argument("--kpass", action="store_true", help="also scan 3-model chains")

    p_exec = sub.add_parser("execute", parents=[common], help="run a cascade against runners")
    p_exec.add_argument("--config", type=Path, required=True, help="run config JSON")
    p_exec.add_argument("--threshold", required=True, help="T or T1,T2")
    p_exec.add_argument("--policy", choices=("resident", "swap"), default="resident")
    p_exec.add_argument("--out", type=Path, required=True, help="per-sample report CSV path")
    p_exec.add_argument("--limit", type=int, help="subsample this many inputs (uses --seed)")

    p_report = sub.add_parser("report", parents=[common], help="merge sweep CSVs")
    p_report.add_argument("curves", nargs="+", type=Path, help="tradeoff curve CSVs")

    return parser


def _need_manifest(args: argparse.Namespace) -> Manifest:
    if args.manifest is None:
        raise ConfigError("--manifest is required for this subcommand")
    return load_manifest(args.manifest)


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("CASCADE_OPT_LOG", "WARNING").upper()
    if level not in ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG", "NOTSET"):
        level = "WARNING"
    logging.basicConfig(level=level)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analyze":
            cmd_analyze(_need_manifest(args), args.little, args.big, args.bins, args.out_dir)
        elif args.command == "sweep":
            names = [n for n in args.models.split(",") if n]
            grid = _parse_grid(args.grid, engine.default_grid())
            cmd_sweep(_need_manifest(args), names, grid, args.out_dir)
        elif args.command == "optimize":
            grid = _parse_grid(args.grid, list(OPTIMIZE_GRID))
            cmd_optimize(
                _need_manifest(args),
                args.tolerance,
                args.kpass,
                grid,
                args.out_dir,
                big_name=args.big,
            )
        elif args.command == "execute":
            try:
                thresholds = [float(t) for t in args.threshold.split(",")]
            except ValueError:
                raise ConfigError(f"bad --threshold value {args.threshold!r}") from None
            cmd_execute(args.config, thresholds, args.policy, args.out, args.limit, args.seed)
        elif args.command == "report":
            cmd_report(args.curves, args.out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CascadeKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main_entry() -> None:
    sys.exit(main())
