# app/services/imaging.py
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np
import structlog
from PIL import Image
from scipy.ndimage import uniform_filter
from scipy.signal import convolve2d

from app.schemas.imaging import BlurCategory, BlurRecord, BlurThresholds, GrayImage
from app.utils.exceptions import ImageTooSmallException, InvalidInputException

logger = structlog.get_logger()


class BlurService:
    """Laplace-mask blur scoring and quality categories."""

    # 4-neighbour Laplacian, zero-sum
    KERNEL = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=np.float64)
    BT601 = np.array([0.299, 0.587, 0.114], dtype=np.float64)

    def load_image(self, path: Path) -> np.ndarray:
        """Decode an image file into an HxW (gray) or HxWx3 (RGB) uint8 array."""
        try:
            with Image.open(path) as img:
                if img.mode not in ("L", "RGB"):
                    img = img.convert("RGB")
                return np.asarray(img, dtype=np.uint8).copy()
        except (OSError, ValueError) as e:
            logger.error("image_decode_failed", path=str(path), error=str(e))
            raise InvalidInputException(f"cannot decode image {path}: {e}")

    def to_grayscale(self, image: np.ndarray) -> GrayImage:
        """
        Convert a decoded raster to a float64 gray image.

        Args:
            image: HxW gray or HxWx3 RGB array

        Returns:
            GrayImage; RGB uses BT.601 luma weights

        Raises:
            InvalidInputException: zero-size or non-RGB input
        """
        image = np.asarray(image)
        if image.size == 0 or 0 in image.shape:
            raise InvalidInputException(f"zero-dimension image {image.shape}")
        if image.ndim == 2:
            return GrayImage(image.astype(np.float64))
        if image.ndim != 3 or image.shape[2] != 3:
            raise InvalidInputException(
                f"expected HxW or HxWx3 raster, got shape {image.shape}")
        return GrayImage(image.astype(np.float64) @ self.BT601)

    def laplacian_response(self, img: GrayImage) -> np.ndarray:
        """(H-2)x(W-2) Laplacian response over the valid region only."""
        if img.width < 3 or img.height < 3:
            raise ImageTooSmallException(img.width, img.height)
        # symmetric kernel, so convolution and correlation agree
        return convolve2d(img.data, self.KERNEL, mode="valid")

    def blur_score(self, img: GrayImage) -> float:
        """Population variance of the valid Laplacian responses."""
        return float(np.var(self.laplacian_response(img)))

    def categorize(self, score: float, thresholds: BlurThresholds) -> BlurCategory:
        """Clear above `high`, totally blurred below `low`, blurred for low <= score <= high."""
        if score > thresholds.high:
            return BlurCategory.CLEAR
        if score < thresholds.low:
            return BlurCategory.TOTALLY_BLURRED
        return BlurCategory.BLURRED

    def assess(self, img: GrayImage, thresholds: BlurThresholds) -> BlurRecord:
        """Score and categorize in one call."""
        score = self.blur_score(img)
        return BlurRecord(score=score, category=self.categorize(score, thresholds))

    def box_blur(self, img: GrayImage) -> GrayImage:
        """One 3x3 mean-filter pass over the whole image (reflected edges)."""
        out = uniform_filter(img.data, size=3, mode="reflect")
        return GrayImage(np.clip(out, 0.0, 255.0))

    def score_path(self, path: Path, thresholds: BlurThresholds) -> BlurRecord:
        """Decode once, score, and keep the raster size on the record."""
        gray = self.to_grayscale(self.load_image(path))
        record = self.assess(gray, thresholds).model_copy(
            update={"width": gray.width, "height": gray.height})
        logger.debug("blur_scored", path=str(path), score=record.score,
                     category=record.category.value)
        return record

    def score_paths(
        self,
        paths: Sequence[Path],
        thresholds: BlurThresholds,
        workers: int = 1,
    ) -> List[Tuple[Path, BlurRecord]]:
        """Score many images; result order follows `paths` whatever the worker count."""
        if workers <= 1:
            records = [self.score_path(p, thresholds) for p in paths]
        else:
            with ThreadPoolExecutor(max_workers=workers) as executor:
                records = list(executor.map(
                    lambda p: self.score_path(p, thresholds), paths))

        logger.info("blur_scoring_complete", images=len(records), workers=workers)
        return list(zip(paths, records))


blur_service = BlurService()
