# app/utils/plots.py
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from app.schemas.evaluation import PRCurve  # noqa: E402
from app.schemas.imaging import BlurThresholds  # noqa: E402

# fixed ids and no date keep the SVG bytes reproducible
plt.rcParams["svg.hashsalt"] = "gestureqc"
SVG_METADATA = {"Date": None, "Creator": None}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata=SVG_METADATA)
    plt.close(fig)
    return path


def blur_histogram(scores: Sequence[float], thresholds: BlurThresholds, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(list(scores), bins=40, color="#4c72b0")
    ax.axvline(thresholds.low, color="#c44e52", linestyle="--", label=f"low {thresholds.low:g}")
    ax.axvline(thresholds.high, color="#55a868", linestyle="--", label=f"high {thresholds.high:g}")
    ax.set_xlabel("blur score (Laplacian variance)")
    ax.set_ylabel("images")
    ax.legend()
    return _save(fig, path)


def pr_curve(curve: PRCurve, name: str, ap: float, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([p.recall for p in curve.points], [p.precision for p in curve.points],
            drawstyle="steps-post")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("recall")
    ax.set_ylabel("precision")
    ax.set_title(f"{name} (AP {ap:.3f}, {curve.support} GT)")
    return _save(fig, path)
