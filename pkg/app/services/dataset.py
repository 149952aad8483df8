# app/services/dataset.py
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import structlog
from pydantic import ValidationError

from app.schemas.dataset import (
    AnnotatedImage,
    DatasetManifest,
    GestureClass,
    LabeledBox,
    PartitionResult,
    SplitResult,
    TrainConfig,
)
from app.schemas.evaluation import BBox
from app.schemas.imaging import BlurCategory, BlurThresholds
from app.services.imaging import blur_service
from app.utils.exceptions import AnnotationParseException, ConfigException
from app.utils.file_handler import file_handler

logger = structlog.get_logger()

NUM_CLASSES = len(GestureClass)
TRAIN_CONFIG_KEYS = tuple(TrainConfig.model_fields)


class DatasetService:
    """Annotation IO, blur-stratified manifests and split building."""

    def parse_annotation(self, text: str) -> List[LabeledBox]:
        """YOLO txt: one `class cx cy w h` line per box, normalized coordinates."""
        boxes = []
        for n, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 5:
                raise AnnotationParseException(n, f"expected 5 fields, got {len(parts)}")
            try:
                values = [float(p) for p in parts]
            except ValueError:
                raise AnnotationParseException(n, f"non-numeric field in '{line.strip()}'")

            raw_class = values[0]
            if not math.isfinite(raw_class) or raw_class != int(raw_class):
                raise AnnotationParseException(n, f"class id {parts[0]} is not an integer")
            if not 0 <= int(raw_class) < NUM_CLASSES:
                raise AnnotationParseException(n, f"class {int(raw_class)} of {NUM_CLASSES}")

            cx, cy, w, h = values[1:]
            for name, raw, v in zip(("cx", "cy", "w", "h"), parts[1:], values[1:]):
                if not 0.0 <= v <= 1.0:
                    raise AnnotationParseException(n, f"{name}={raw} outside [0, 1]")
            if w == 0.0 or h == 0.0:
                raise AnnotationParseException(n, "box width and height must be positive")
            boxes.append(LabeledBox(
                gesture=GestureClass(int(raw_class)),
                box=BBox(cx=cx, cy=cy, w=w, h=h),
            ))
        return boxes

    def write_annotation(self, boxes: Sequence[LabeledBox]) -> str:
        lines = [
            f"{int(b.gesture)} {b.box.cx:.6f} {b.box.cy:.6f} {b.box.w:.6f} {b.box.h:.6f}"
            for b in boxes
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def build_manifest(
        self,
        name: str,
        image_paths: Sequence[Path],
        label_dir: Optional[Path],
        thresholds: BlurThresholds,
        metadata: Optional[Dict[str, Dict[str, str]]] = None,
        workers: int = 1,
    ) -> DatasetManifest:
        """Score and label every frame; a missing label file means no boxes."""
        metadata = metadata or {}
        ordered = sorted(image_paths, key=str)
        scored = blur_service.score_paths(ordered, thresholds, workers=workers)

        entries = []
        for path, record in scored:
            boxes: List[LabeledBox] = []
            if label_dir is not None:
                label = label_dir / f"{path.stem}.txt"
                if label.exists():
                    try:
                        boxes = self.parse_annotation(file_handler.read_text(label))
                    except AnnotationParseException as e:
                        raise AnnotationParseException(e.line_number, f"{label}: {e.detail}")
            meta = metadata.get(path.name) or metadata.get(str(path)) or {}
            entries.append(AnnotatedImage(
                path=str(path),
                width=record.width,
                height=record.height,
                blur_score=record.score,
                blur_category=record.category,
                boxes=boxes,
                participant=meta.get("participant") or None,
                fps=float(meta["fps"]) if meta.get("fps") else None,
            ))

        manifest = DatasetManifest.from_entries(name, entries)
        logger.info(
            "manifest_built",
            name=name,
            images=len(manifest),
            counts={k.value: v for k, v in manifest.counts.items()},
        )
        return manifest

    def build_splits(
        self, manifest: DatasetManifest, mix: Optional[float] = None
    ) -> SplitResult:
        """dataset1 = clear frames; dataset2 adds non-clear frames (path order) up to `mix`.

        `mix` is the wanted fraction of non-clear frames in dataset2; None takes all of them.
        """
        if mix is not None and not 0.0 <= mix < 1.0:
            raise ConfigException(f"mix {mix} must lie in [0, 1)", key="mix")

        clear = sorted(
            (e for e in manifest.entries if e.blur_category == BlurCategory.CLEAR),
            key=lambda e: e.path,
        )
        noisy = sorted(
            (e for e in manifest.entries if e.blur_category != BlurCategory.CLEAR),
            key=lambda e: e.path,
        )

        if mix is None:
            wanted = len(noisy)
        else:
            wanted = round(mix * len(clear) / (1.0 - mix))

        shortfall = max(wanted - len(noisy), 0)
        if shortfall:
            logger.warning(
                "split_shortfall",
                requested_mix=mix,
                wanted=wanted,
                available=len(noisy),
            )
        chosen = noisy[:wanted]

        dataset1 = DatasetManifest.from_entries(f"{manifest.name}-dataset1", clear)
        dataset2 = DatasetManifest.from_entries(
            f"{manifest.name}-dataset2", sorted(clear + chosen, key=lambda e: e.path))
        achieved = len(chosen) / len(dataset2) if len(dataset2) else 0.0

        logger.info(
            "splits_built",
            dataset1=len(dataset1),
            dataset2=len(dataset2),
            achieved_mix=round(achieved, 6),
        )
        return SplitResult(
            dataset1=dataset1,
            dataset2=dataset2,
            requested_mix=mix,
            achieved_mix=achieved,
            shortfall=shortfall,
        )

    def partition(
        self,
        manifest: DatasetManifest,
        val_fraction: float = 0.1,
        test_fraction: float = 0.1,
        seed: int = 0,
    ) -> PartitionResult:
        """Seeded train/val/test split; frames of one participant stay together."""
        if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1:
            raise ConfigException(
                f"val {val_fraction} + test {test_fraction} must be below 1")

        groups: Dict[str, List[AnnotatedImage]] = {}
        for e in sorted(manifest.entries, key=lambda e: e.path):
            key = e.participant if e.participant is not None else e.path
            groups.setdefault(key, []).append(e)

        keys = sorted(groups)
        order = np.random.default_rng(seed).permutation(len(keys))
        total = len(manifest.entries)
        buckets: Dict[str, List[AnnotatedImage]] = {"test": [], "val": [], "train": []}
        targets = {"test": test_fraction * total, "val": val_fraction * total}
        for idx in order:
            group = groups[keys[idx]]
            for bucket in ("test", "val"):
                if len(buckets[bucket]) + len(group) <= targets[bucket]:
                    buckets[bucket].extend(group)
                    break
            else:
                buckets["train"].extend(group)

        def as_manifest(bucket: str) -> DatasetManifest:
            entries = sorted(buckets[bucket], key=lambda e: e.path)
            return DatasetManifest.from_entries(f"{manifest.name}-{bucket}", entries)

        return PartitionResult(
            train=as_manifest("train"),
            val=as_manifest("val"),
            test=as_manifest("test"),
        )

    def load_train_config(self, text: str) -> TrainConfig:
        """`key=value` lines; blank lines and `#` comments are skipped."""
        values: Dict[str, str] = {}
        for n, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigException(f"line {n} is not key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in TRAIN_CONFIG_KEYS:
                raise ConfigException(
                    f"unknown key (expected one of {', '.join(TRAIN_CONFIG_KEYS)})", key=key)
            values[key] = value

        try:
            return TrainConfig.model_validate(values)
        except ValidationError as e:
            first = e.errors()[0]
            key = str(first["loc"][0]) if first["loc"] else None
            raise ConfigException(f"invalid value: {first['msg']}", key=key)


dataset_service = DatasetService()
