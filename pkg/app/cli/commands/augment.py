# app/cli/commands/augment.py
import argparse
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import structlog

from app.cli.dependencies import pair_arg, positive_int_arg
from app.schemas.dataset import LabeledBox
from app.services.augment import AugmentService
from app.services.dataset import dataset_service
from app.services.imaging import blur_service
from app.utils.exceptions import ArityException
from app.utils.file_handler import file_handler

logger = structlog.get_logger()

OPS = ("flip", "affine", "random-affine", "mosaic")


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "augment",
        help="Apply a label-aware augmentation and write image + YOLO labels",
    )
    parser.add_argument("op", choices=OPS, help="augmentation")
    parser.add_argument("images", nargs="+", type=Path, help="input images (mosaic takes four)")
    parser.add_argument("--labels", type=Path,
                        help="label directory (stem.txt per image; missing files mean no boxes)")
    parser.add_argument("--translate", type=pair_arg(float), default=(0.0, 0.0),
                        help="affine shift tx,ty as fractions of the image")
    parser.add_argument("--scale", type=float, default=1.0,
                        help="affine zoom factor")
    parser.add_argument("--max-shift", type=float, default=0.1,
                        help="random-affine shift bound per axis")
    parser.add_argument("--zoom-jitter", type=float, default=0.5,
                        help="random-affine zoom drawn from 1 +- jitter")
    parser.add_argument("--canvas", type=positive_int_arg, default=640, help="mosaic canvas size")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--out", type=Path, required=True, help="output image path")
    parser.add_argument("--out-labels", type=Path,
                        help="output label file (default: next to --out with .txt)")
    parser.set_defaults(handler=run_augment)


def _load(path: Path, label_dir: Optional[Path]) -> Tuple[np.ndarray, List[LabeledBox]]:
    image = blur_service.load_image(path)
    boxes: List[LabeledBox] = []
    if label_dir is not None:
        label_path = label_dir / f"{path.stem}.txt"
        if label_path.is_file():
            boxes = dataset_service.parse_annotation(file_handler.read_text(label_path))
    return image, boxes


def run_augment(args: argparse.Namespace) -> int:
    service = AugmentService()
    samples = [_load(p, args.labels) for p in args.images]

    if args.op == "mosaic":
        image, boxes = service.mosaic(samples, canvas=args.canvas, seed=args.seed)
    else:
        if len(samples) != 1:
            raise ArityException(1, len(samples))
        img, labels = samples[0]
        if args.op == "flip":
            image, boxes = service.flip_lr(img, labels)
        elif args.op == "affine":
            image, boxes = service.affine_augment(img, labels, translate=args.translate, scale=args.scale)
        else:
            image, boxes = service.random_affine(
                img, labels, translate=args.max_shift, scale=args.zoom_jitter,
                rng=np.random.default_rng(args.seed))

    file_handler.save_image(args.out, image)
    out_labels = args.out_labels or args.out.with_suffix(".txt")
    file_handler.write_text(out_labels, dataset_service.write_annotation(boxes))
    print(f"{args.op}: {image.shape[1]}x{image.shape[0]}, {len(boxes)} boxes -> {args.out}")
    logger.info("augment_command_complete", op=args.op, boxes=len(boxes))
    return 0
