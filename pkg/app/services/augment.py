# app/services/augment.py
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.ndimage import affine_transform

from app.config import get_settings
from app.schemas.dataset import LabeledBox
from app.schemas.evaluation import BBox
from app.utils.exceptions import ArityException, ConfigException

logger = structlog.get_logger()

Sample = Tuple[np.ndarray, List[LabeledBox]]

MIN_BOX_PIXELS = 2


def _clip_box(
    gesture, x1: float, y1: float, x2: float, y2: float,
    bounds: Tuple[float, float, float, float], canvas_w: int, canvas_h: int,
) -> Optional[LabeledBox]:
    """Clip pixel corners to `bounds`, drop boxes under MIN_BOX_PIXELS, normalize by the canvas."""
    bx1, by1, bx2, by2 = bounds
    x1, x2 = min(max(x1, bx1), bx2), min(max(x2, bx1), bx2)
    y1, y2 = min(max(y1, by1), by2), min(max(y2, by1), by2)
    if x2 - x1 < MIN_BOX_PIXELS or y2 - y1 < MIN_BOX_PIXELS:
        return None
    return LabeledBox(gesture=gesture, box=BBox.from_corners(x1, y1, x2, y2, canvas_w, canvas_h))


class AugmentService:
    """Label-aware flip, affine and mosaic augmentations (nearest-neighbour resampling)."""

    def __init__(self, fill: Optional[int] = None):
        self.fill = get_settings().fill_value if fill is None else fill

    def flip_lr(self, img: np.ndarray, boxes: Sequence[LabeledBox]) -> Sample:
        flipped = [
            LabeledBox(gesture=b.gesture, box=b.box.model_copy(update={"cx": 1.0 - b.box.cx}))
            for b in boxes
        ]
        return np.ascontiguousarray(img[:, ::-1]), flipped

    def affine_augment(
        self,
        img: np.ndarray,
        boxes: Sequence[LabeledBox],
        translate: Tuple[float, float] = (0.0, 0.0),
        scale: float = 1.0,
        origin: Tuple[float, float] = (0.5, 0.5),
    ) -> Sample:
        """Scale about `origin` then shift by `translate`, all in normalized coordinates."""
        if scale <= 0:
            raise ConfigException(f"scale {scale} must be positive", key="scale")
        h, w = img.shape[:2]
        tx, ty = translate
        ox, oy = origin

        # output pixel centre (i + 0.5) / n maps back to (i + 0.5 - (o + t) * n) / s + o * n - 0.5
        matrix = np.ones(img.ndim)
        matrix[:2] = 1.0 / scale
        offset = np.zeros(img.ndim)
        offset[0] = (0.5 - (oy + ty) * h) / scale + oy * h - 0.5
        offset[1] = (0.5 - (ox + tx) * w) / scale + ox * w - 0.5
        out = affine_transform(
            img, matrix, offset=offset, order=0, mode="constant", cval=float(self.fill))

        mapped = []
        for b in boxes:
            x1, y1, x2, y2 = b.box.corners()
            clipped = _clip_box(
                b.gesture,
                ((x1 - ox) * scale + ox + tx) * w,
                ((y1 - oy) * scale + oy + ty) * h,
                ((x2 - ox) * scale + ox + tx) * w,
                ((y2 - oy) * scale + oy + ty) * h,
                (0.0, 0.0, float(w), float(h)), w, h,
            )
            if clipped is not None:
                mapped.append(clipped)

        if len(mapped) < len(boxes):
            logger.debug("boxes_dropped", dropped=len(boxes) - len(mapped), op="affine")
        return out, mapped

    def random_affine(
        self,
        img: np.ndarray,
        boxes: Sequence[LabeledBox],
        translate: float = 0.1,
        scale: float = 0.5,
        rng: Optional[np.random.Generator] = None,
    ) -> Sample:
        """Sample shift in +-translate and zoom in 1 +- scale, then apply affine_augment."""
        if scale >= 1:
            raise ConfigException(f"scale jitter {scale} would allow a non-positive zoom", key="scale")
        rng = rng or np.random.default_rng(0)
        tx, ty = rng.uniform(-translate, translate, 2)
        s = rng.uniform(1 - scale, 1 + scale)
        return self.affine_augment(img, boxes, translate=(float(tx), float(ty)), scale=float(s))

    def mosaic(
        self,
        samples: Sequence[Sample],
        canvas: int = 640,
        seed: int = 0,
        center: Optional[Tuple[int, int]] = None,
    ) -> Sample:
        """Tile four samples around a seeded centre drawn from the middle half of the canvas."""
        if len(samples) != 4:
            raise ArityException(4, len(samples))
        if canvas <= 0 or canvas % 2:
            raise ConfigException(f"canvas size {canvas} must be positive and even", key="canvas")

        images = [np.asarray(img) for img, _ in samples]
        if any(img.ndim == 3 for img in images):
            images = [img if img.ndim == 3 else np.repeat(img[:, :, None], 3, axis=2) for img in images]
        s = canvas
        if center is None:
            rng = np.random.default_rng(seed)
            xc, yc = (int(rng.uniform(s // 4, 3 * s // 4)) for _ in range(2))
        else:
            xc, yc = center

        out = np.full((s, s) + images[0].shape[2:], self.fill, dtype=np.uint8)
        boxes_out: List[LabeledBox] = []
        for i, (img, (_, boxes)) in enumerate(zip(images, samples)):
            h, w = img.shape[:2]
            if i == 0:  # top left
                x1a, y1a, x2a, y2a = max(xc - w, 0), max(yc - h, 0), xc, yc
                x1b, y1b, x2b, y2b = w - (x2a - x1a), h - (y2a - y1a), w, h
            elif i == 1:  # top right
                x1a, y1a, x2a, y2a = xc, max(yc - h, 0), min(xc + w, s), yc
                x1b, y1b, x2b, y2b = 0, h - (y2a - y1a), min(w, x2a - x1a), h
            elif i == 2:  # bottom left
                x1a, y1a, x2a, y2a = max(xc - w, 0), yc, xc, min(s, yc + h)
                x1b, y1b, x2b, y2b = w - (x2a - x1a), 0, w, min(y2a - y1a, h)
            else:  # bottom right
                x1a, y1a, x2a, y2a = xc, yc, min(xc + w, s), min(s, yc + h)
                x1b, y1b, x2b, y2b = 0, 0, min(w, x2a - x1a), min(y2a - y1a, h)
            out[y1a:y2a, x1a:x2a] = img[y1b:y2b, x1b:x2b]
            padw, padh = x1a - x1b, y1a - y1b

            for b in boxes:
                bx1, by1, bx2, by2 = b.box.corners()
                clipped = _clip_box(
                    b.gesture,
                    bx1 * w + padw, by1 * h + padh, bx2 * w + padw, by2 * h + padh,
                    (float(x1a), float(y1a), float(x2a), float(y2a)), s, s,
                )
                if clipped is not None:
                    boxes_out.append(clipped)

        logger.debug("mosaic_built", center=(xc, yc), boxes=len(boxes_out))
        return out, boxes_out


augment_service = AugmentService()
