# app/services/compliance.py
import csv
import io
from collections import Counter
from itertools import groupby
from typing import List, Optional, Sequence

import structlog

from app.schemas.compliance import ComplianceReport, FrameLabel, ProtocolSpec
from app.schemas.dataset import GestureClass
from app.utils.exceptions import AnnotationParseException, ConfigException, InvalidInputException

logger = structlog.get_logger()


class ComplianceService:
    """Audits a per-frame gesture sequence against the alternating-gesture instructions."""

    def smooth_sequence(self, frames: Sequence[FrameLabel], k: int) -> List[FrameLabel]:
        """Centered majority vote over k frames; ties keep the frame's own label."""
        if k < 1 or k % 2 == 0:
            raise ConfigException(f"smoothing window {k} must be odd and >= 1", key="window")
        if k == 1:
            return list(frames)

        half = k // 2
        labels = [f.gesture for f in frames]
        smoothed = []
        for i, frame in enumerate(frames):
            window = Counter(labels[max(0, i - half): i + half + 1])
            ranked = window.most_common()
            top = ranked[0][1]
            leaders = [label for label, count in ranked if count == top]
            label = leaders[0] if len(leaders) == 1 else frame.gesture
            smoothed.append(frame if label == frame.gesture
                            else frame.model_copy(update={"gesture": label}))
        return smoothed

    def check_alternation(
        self, frames: Sequence[FrameLabel], protocol: ProtocolSpec
    ) -> ComplianceReport:
        if protocol.fps <= 0:
            raise ConfigException(f"fps {protocol.fps} must be positive", key="fps")
        a, b = protocol.expected
        if a == b:
            raise ConfigException("the expected gestures must differ", key="expected")
        for prev, cur in zip(frames, frames[1:]):
            if cur.frame <= prev.frame:
                raise InvalidInputException(
                    f"frame indices must increase (frame {cur.frame} after {prev.frame})")

        total = len(frames)
        duration = total / protocol.fps

        detected = [f.gesture for f in frames if f.gesture is not None]
        missing = total - len(detected)
        no_detection = missing / total if total else 0.0
        unexpected = Counter(g.label for g in detected if g not in (a, b))

        # runs over detected frames; no-detection frames neither start nor break a run
        runs = [gesture for gesture, _ in groupby(detected)]
        transitions = sum(1 for prev, cur in zip(runs, runs[1:]) if {prev, cur} == {a, b})
        alternating = all(r in (a, b) for r in runs)
        frequency = transitions / (2 * duration) if duration > 0 else 0.0

        # the verdict reads the raw run structure; smoothing is reported, never applied
        smoothed = self.smooth_sequence(frames, protocol.window)
        flicker = sum(1 for raw, sm in zip(frames, smoothed) if raw.gesture != sm.gesture)
        smoothed_runs = [
            g for g, _ in groupby(f.gesture for f in smoothed if f.gesture is not None)]
        smoothed_transitions = sum(
            1 for prev, cur in zip(smoothed_runs, smoothed_runs[1:]) if {prev, cur} == {a, b})

        reasons = []
        if unexpected:
            reasons.append("unexpected gestures detected")
        if not alternating:
            reasons.append("runs do not alternate between the instructed gestures")
        if transitions < protocol.min_transitions:
            reasons.append(f"{transitions} transitions, {protocol.min_transitions} required")
        if no_detection > protocol.max_no_detection:
            reasons.append(
                f"no detection in {no_detection:.0%} of frames "
                f"(tolerance {protocol.max_no_detection:.0%})")
        if total == 0:
            reasons.append("empty sequence")

        report = ComplianceReport(
            compliant=not reasons,
            transitions=transitions,
            tap_frequency=frequency,
            unexpected=dict(sorted(unexpected.items())),
            no_detection_fraction=no_detection,
            frames=total,
            duration_seconds=duration,
            runs=len(runs),
            flicker_frames=flicker,
            smoothed_transitions=smoothed_transitions,
            reasons=reasons,
        )
        logger.info(
            "compliance_checked",
            compliant=report.compliant,
            transitions=transitions,
            tap_frequency=round(frequency, 4),
            frames=total,
        )
        return report

    def parse_frame_labels(self, text: str) -> List[FrameLabel]:
        """CSV `frame,gesture,confidence`; gesture by name or id, empty for no detection."""
        reader = csv.reader(io.StringIO(text))
        frames = []
        for n, row in enumerate(reader, start=1):
            if not row or not "".join(row).strip():
                continue
            if n == 1 and row[0].strip().lower() == "frame":
                continue
            if len(row) < 2:
                raise AnnotationParseException(n, "expected frame,gesture[,confidence]")
            try:
                frame = int(row[0])
                gesture: Optional[GestureClass] = (
                    GestureClass.parse(row[1]) if row[1].strip() else None)
                confidence = float(row[2]) if len(row) > 2 and row[2].strip() else 0.0
                frames.append(FrameLabel(frame=frame, gesture=gesture, confidence=confidence))
            except ValueError as e:
                raise AnnotationParseException(n, str(e))
        return frames


compliance_service = ComplianceService()
