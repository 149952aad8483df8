# app/schemas/compliance.py
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from app.schemas.dataset import GestureClass


class FrameLabel(BaseModel):
    model_config = {"frozen": True}

    frame: int = Field(ge=0)
    gesture: Optional[GestureClass] = None
    confidence: float = Field(default=0.0, ge=0.0, le=1.0)


class ProtocolSpec(BaseModel):
    """Instructed gesture pair and audit criteria; validated by the compliance service."""

    expected: Tuple[GestureClass, GestureClass]
    fps: float
    min_transitions: int = Field(default=4, ge=0)
    window: int = 3
    max_no_detection: float = Field(default=0.2, ge=0.0, le=1.0)


class ComplianceReport(BaseModel):
    compliant: bool
    transitions: int
    tap_frequency: float
    unexpected: Dict[str, int] = Field(default_factory=dict)
    no_detection_fraction: float = Field(ge=0.0, le=1.0)
    frames: int
    duration_seconds: float
    runs: int
    flicker_frames: int = 0
    smoothed_transitions: int = 0
    reasons: List[str] = Field(default_factory=list)
