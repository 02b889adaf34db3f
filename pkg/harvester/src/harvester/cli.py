"""Command line: ``harvest`` writes record/profile files, ``serve`` runs a
model as a live runner stage on the standard streams."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harvest import HarvestJob, harvest
from .serve import serve
from .zoo import PreprocessSpec, ZooModel


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cascade-harvester", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, help="torchvision zoo name, e.g. efficientnet_b0")
    common.add_argument("--res", type=int, required=True, help="input resolution in pixels")
    common.add_argument("--interpolation", choices=("bilinear", "bicubic"), default="bilinear")
    common.add_argument("--checkpoint", type=Path, help="local state-dict to load")
    common.add_argument("--seed", type=int, default=0, help="init seed when no checkpoint is given")

    p_harvest = sub.add_parser("harvest", parents=[common], help="emit record + profile files")
    p_harvest.add_argument("--data", type=Path, required=True, help="class-subdirectory image tree")
    p_harvest.add_argument("--out", type=Path, required=True, help="output directory")
    p_harvest.add_argument(
        "--macs-override", type=float,
        help="record this published GMACs value instead of measuring",
    )

    sub.add_parser("serve", parents=[common], help="speak the runner protocol on stdio")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = PreprocessSpec(resolution=args.res, interpolation=args.interpolation)
    if args.command == "harvest":
        record_path, profile_path = harvest(
            HarvestJob(
                model_id=args.model,
                data_dir=args.data,
                spec=spec,
                out_dir=args.out,
                checkpoint=args.checkpoint,
                seed=args.seed,
                macs_override=args.macs_override,
            )
        )
        print(record_path)
        print(profile_path)
        return 0
    model = ZooModel(args.model, spec, checkpoint=args.checkpoint, seed=args.seed)
    return serve(model, sys.stdin, sys.stdout)


def main_entry() -> None:
    sys.exit(main())
