# tests/conftest.py
from pathlib import Path
from typing import Callable, List

import numpy as np
import pytest
import structlog
from PIL import Image

from app.config import get_settings
from app.schemas.dataset import GestureClass, LabeledBox
from app.schemas.evaluation import BBox, Detection, GroundTruthBox
from app.schemas.imaging import BlurThresholds


@pytest.fixture(autouse=True)
def reset_logging():
    """run() binds structlog to the captured stderr; restore the lazy defaults afterwards."""
    yield
    structlog.reset_defaults()


@pytest.fixture
def settings():
    return get_settings()


@pytest.fixture
def thresholds() -> BlurThresholds:
    return BlurThresholds(low=10.0, high=50.0)


@pytest.fixture
def impulse_image() -> np.ndarray:
    """5x5 zeros with a single 1 in the centre."""
    img = np.zeros((5, 5))
    img[2, 2] = 1.0
    return img


@pytest.fixture
def checkerboard() -> np.ndarray:
    """8x8 checkerboard of 0/255."""
    return (np.indices((8, 8)).sum(axis=0) % 2) * 255.0


@pytest.fixture
def write_image(tmp_path: Path) -> Callable[..., Path]:
    """Write a uint8 array to tmp_path/name through Pillow."""

    def _write(name: str, array: np.ndarray) -> Path:
        path = tmp_path / name
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(array, dtype=np.uint8)).save(path)
        return path

    return _write


@pytest.fixture
def noise_image() -> np.ndarray:
    return np.random.default_rng(7).integers(0, 256, size=(48, 64), dtype=np.uint8)


def box(cx: float, cy: float, w: float, h: float) -> BBox:
    return BBox(cx=cx, cy=cy, w=w, h=h)


def gt(class_id: int, cx: float, cy: float, w: float, h: float) -> GroundTruthBox:
    return GroundTruthBox(class_id=class_id, box=box(cx, cy, w, h))


def det(class_id: int, confidence: float, cx: float, cy: float, w: float, h: float) -> Detection:
    return Detection(class_id=class_id, confidence=confidence, box=box(cx, cy, w, h))


def labeled(gesture: int, cx: float, cy: float, w: float, h: float) -> LabeledBox:
    return LabeledBox(gesture=GestureClass(gesture), box=box(cx, cy, w, h))


def random_boxes(rng: np.random.Generator, count: int) -> List[LabeledBox]:
    """Boxes fully inside the unit square, coordinates rounded to 6 decimals."""
    out = []
    for _ in range(count):
        w, h = (round(float(v), 6) for v in rng.uniform(0.05, 0.4, 2))
        cx = round(float(rng.uniform(w / 2, 1 - w / 2)), 6)
        cy = round(float(rng.uniform(h / 2, 1 - h / 2)), 6)
        out.append(labeled(int(rng.integers(0, 5)), cx, cy, w, h))
    return out


@pytest.fixture
def scene():
    """Two images, three classes present; predictions with one miss and one false alarm."""
    ground_truths = {
        "a": [gt(0, 0.3, 0.3, 0.2, 0.2), gt(1, 0.7, 0.7, 0.2, 0.2)],
        "b": [gt(0, 0.5, 0.5, 0.4, 0.4), gt(2, 0.2, 0.8, 0.1, 0.1)],
    }
    predictions = {
        "a": [det(0, 0.9, 0.3, 0.3, 0.2, 0.2), det(1, 0.8, 0.7, 0.7, 0.2, 0.2)],
        "b": [det(0, 0.7, 0.5, 0.5, 0.4, 0.4), det(3, 0.6, 0.5, 0.5, 0.2, 0.2)],
    }
    return predictions, ground_truths
