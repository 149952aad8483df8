# app/cli/commands/dataset.py
import argparse
import sys
from pathlib import Path

import structlog

from app.cli.dependencies import (
    fraction_arg,
    get_settings_dependency,
    get_workers,
    positive_int_arg,
    thresholds_arg,
)
from app.schemas.dataset import DatasetManifest
from app.schemas.imaging import BlurThresholds
from app.services.dataset import dataset_service
from app.utils.file_handler import file_handler

logger = structlog.get_logger()


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("dataset", help="Manifests, blur-mix splits and train config")
    actions = parser.add_subparsers(dest="action", required=True)

    build = actions.add_parser("build", help="Score and label frames into a manifest JSON")
    build.add_argument("--images", nargs="+", type=Path, required=True,
                       help="frame files or directories")
    build.add_argument("--labels", type=Path, help="directory of YOLO txt label files")
    build.add_argument("--name", default="dataset", help="manifest name")
    build.add_argument("--meta", type=Path, help="CSV with path,participant,fps columns")
    build.add_argument("--thresholds", type=thresholds_arg, help="low,high blur thresholds")
    build.add_argument("--workers", type=positive_int_arg, help="parallel workers")
    build.add_argument("--out", type=Path, required=True, help="manifest JSON output")
    build.set_defaults(handler=build_manifest)

    split = actions.add_parser("split", help="Build clear-only and blur-mixed datasets")
    split.add_argument("manifest", type=Path, help="manifest JSON")
    split.add_argument("--mix", type=fraction_arg,
                       help="fraction of non-clear frames in dataset2 (default: all available)")
    split.add_argument("--val", type=fraction_arg, default=0.0,
                       help="validation fraction for a train/val/test partition of dataset2")
    split.add_argument("--test", type=fraction_arg, default=0.0,
                       help="test fraction for a train/val/test partition of dataset2")
    split.add_argument("--seed", type=int, default=0, help="partition seed")
    split.add_argument("--out-dir", type=Path, required=True, help="output directory")
    split.set_defaults(handler=split_manifest)

    config = actions.add_parser("config", help="Validate a key=value training config")
    config.add_argument("file", type=Path, nargs="?", help="config file (omit for defaults)")
    config.set_defaults(handler=show_config)


def build_manifest(args: argparse.Namespace) -> int:
    settings = get_settings_dependency()
    thresholds = args.thresholds or BlurThresholds(low=settings.blur_low, high=settings.blur_high)
    metadata = file_handler.read_metadata(args.meta) if args.meta else None

    manifest = dataset_service.build_manifest(
        name=args.name,
        image_paths=file_handler.list_images(args.images),
        label_dir=args.labels,
        thresholds=thresholds,
        metadata=metadata,
        workers=get_workers(args),
    )
    file_handler.write_json(args.out, manifest)
    counts = ", ".join(f"{k.value}={v}" for k, v in manifest.counts.items())
    print(f"{manifest.name}: {len(manifest)} images ({counts})")
    return 0


def split_manifest(args: argparse.Namespace) -> int:
    manifest = DatasetManifest.model_validate_json(file_handler.read_text(args.manifest))
    result = dataset_service.build_splits(manifest, args.mix)

    file_handler.write_json(args.out_dir / "dataset1.json", result.dataset1)
    file_handler.write_json(args.out_dir / "dataset2.json", result.dataset2)
    print(f"{'Dataset':<10} {'Total':>7} {'Clear':>7} {'Blurred':>8} {'Totally blurred':>16}")
    for label, ds in (("Dataset 1", result.dataset1), ("Dataset 2", result.dataset2)):
        c = list(ds.counts.values())
        print(f"{label:<10} {len(ds):>7} {c[0]:>7} {c[1]:>8} {c[2]:>16}")
    if result.shortfall:
        print(f"warning: requested mix short by {result.shortfall} images "
              f"(achieved {result.achieved_mix:.4f})", file=sys.stderr)

    if args.val or args.test:
        parts = dataset_service.partition(result.dataset2, args.val, args.test, args.seed)
        for name in ("train", "val", "test"):
            file_handler.write_json(args.out_dir / f"{name}.json", getattr(parts, name))
        print(f"partition: train={len(parts.train)} val={len(parts.val)} test={len(parts.test)}")
    return 0


def show_config(args: argparse.Namespace) -> int:
    text = file_handler.read_text(args.file) if args.file else ""
    config = dataset_service.load_train_config(text)
    print(config.model_dump_json(indent=2))
    return 0
