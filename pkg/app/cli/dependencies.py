# app/cli/dependencies.py
import argparse
import math
from typing import Callable, List, Tuple, TypeVar

from app.config import Settings, get_settings
from app.schemas.dataset import GestureClass
from app.schemas.imaging import BlurThresholds

T = TypeVar("T")


def get_settings_dependency() -> Settings:
    return get_settings()


def get_workers(args: argparse.Namespace) -> int:
    """--workers flag, else GESTUREQC_WORKERS, else 1."""
    workers = getattr(args, "workers", None)
    return workers if workers else get_settings().workers


# argparse `type=` parsers: flags are validated before any file is touched

def thresholds_arg(text: str) -> BlurThresholds:
    try:
        low, high = (float(v) for v in text.split(","))
        return BlurThresholds(low=low, high=high)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'low,high' with 0 < low < high, got '{text}'")


def iou_range_arg(text: str) -> List[float]:
    """`a:b:step` inclusive range, or a single threshold."""
    try:
        parts = [float(v) for v in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a:b:step', got '{text}'")
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(f"expected 'a:b:step' with a <= b and step > 0, got '{text}'")
    a, b, step = parts
    count = int(round((b - a) / step)) + 1
    values = [round(a + i * step, 10) for i in range(count)]
    if any(not 0 < v < 1 for v in values):
        raise argparse.ArgumentTypeError("IoU thresholds must lie in (0, 1)")
    return values


def fraction_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a fraction in [0, 1], got {value}")
    return value


def positive_int_arg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def positive_float_arg(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not math.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def odd_window_arg(text: str) -> int:
    value = positive_int_arg(text)
    if value % 2 == 0:
        raise argparse.ArgumentTypeError(f"expected an odd window, got {value}")
    return value


def gesture_pair_arg(text: str) -> Tuple[GestureClass, GestureClass]:
    try:
        a, b = (GestureClass.parse(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected two gestures from {GestureClass.names()}, got '{text}'")
    if a == b:
        raise argparse.ArgumentTypeError("the two gestures must differ")
    return a, b


def names_arg(text: str) -> List[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return names


def pair_arg(parse: Callable[[str], T]) -> Callable[[str], Tuple[T, T]]:
    def _parse(text: str) -> Tuple[T, T]:
        try:
            a, b = (parse(v) for v in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected 'x,y', got '{text}'")
        return a, b
    return _parse

