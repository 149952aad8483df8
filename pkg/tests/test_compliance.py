# tests/test_compliance.py
import numpy as np
import pytest

from app.schemas.compliance import FrameLabel, ProtocolSpec
from app.schemas.dataset import GestureClass
from app.services.compliance import compliance_service
from app.utils.exceptions import AnnotationParseException, ConfigException, InvalidInputException

A, B, FLIP = GestureClass.OPEN, GestureClass.CLOSE, GestureClass.FLIP


def frames_of(labels):
    return [FrameLabel(frame=i, gesture=g) for i, g in enumerate(labels)]


def protocol(expected=(A, B), fps=30.0, **kwargs) -> ProtocolSpec:
    return ProtocolSpec(expected=expected, fps=fps, **kwargs)


# Smoothing

def test_smoothing_removes_single_frame_flicker():
    smoothed = compliance_service.smooth_sequence(frames_of([A, B, A, A]), 3)
    assert [f.gesture for f in smoothed] == [A, A, A, A]
    assert [f.frame for f in smoothed] == [0, 1, 2, 3]


def test_smoothing_ties_keep_own_label():
    labels = [A, B, FLIP, A, B]
    smoothed = compliance_service.smooth_sequence(frames_of(labels), 3)
    assert [f.gesture for f in smoothed] == labels


def test_smoothing_window_one_is_identity():
    frames = frames_of([A, None, B])
    assert compliance_service.smooth_sequence(frames, 1) == frames


@pytest.mark.parametrize("k", [0, 2, -1])
def test_smoothing_window_must_be_odd(k):
    with pytest.raises(ConfigException):
        compliance_service.smooth_sequence(frames_of([A]), k)


# Alternation audit

def test_alternating_sequence_is_compliant():
    labels = ([A] * 5 + [B] * 5) * 3
    report = compliance_service.check_alternation(frames_of(labels), protocol())
    assert report.compliant
    assert report.transitions == 5
    assert report.runs == 6
    assert report.tap_frequency == pytest.approx(2.5)
    assert report.duration_seconds == pytest.approx(1.0)
    assert report.unexpected == {}
    assert report.reasons == []


def test_wrong_gesture_pair_is_flagged():
    report = compliance_service.check_alternation(
        frames_of([A, B, FLIP, A, B]),
        protocol(expected=(GestureClass.PINCH_OPEN, GestureClass.PINCH_CLOSE)),
    )
    assert not report.compliant
    assert report.unexpected == {"close": 2, "flip": 1, "open": 2}
    assert report.transitions == 0
    assert "unexpected gestures detected" in report.reasons


def test_too_few_transitions():
    report = compliance_service.check_alternation(frames_of([A] * 6 + [B] * 6), protocol())
    assert report.transitions == 1
    assert not report.compliant
    assert report.reasons == ["1 transitions, 4 required"]


def test_missing_detections_do_not_break_runs():
    labels = [A, A, None, A, B, B, A, A, B, B, A, A]
    report = compliance_service.check_alternation(frames_of(labels), protocol(window=1))
    assert report.runs == 5
    assert report.transitions == 4
    assert report.no_detection_fraction == pytest.approx(1 / 12)
    assert report.compliant


def test_too_many_missing_frames():
    labels = [A, B, A, B, A, None, None, None, B, A]
    report = compliance_service.check_alternation(frames_of(labels), protocol(window=1))
    assert report.no_detection_fraction == pytest.approx(0.3)
    assert not report.compliant
    assert any(r.startswith("no detection in 30%") for r in report.reasons)


def test_empty_sequence():
    report = compliance_service.check_alternation([], protocol())
    assert not report.compliant
    assert report.frames == 0
    assert report.tap_frequency == 0.0
    assert "empty sequence" in report.reasons


@pytest.mark.parametrize("seed", range(100))
def test_reversed_sequence_gives_same_verdict(seed):
    rng = np.random.default_rng(seed)
    choices = [A, B, FLIP, None]
    labels = [choices[i] for i in rng.choice(4, size=int(rng.integers(1, 40)), p=[0.4, 0.4, 0.1, 0.1])]
    forward = compliance_service.check_alternation(frames_of(labels), protocol())
    backward = compliance_service.check_alternation(frames_of(labels[::-1]), protocol())
    assert backward.compliant == forward.compliant
    assert backward.transitions == forward.transitions
    assert backward.unexpected == forward.unexpected
    assert backward.no_detection_fraction == forward.no_detection_fraction


def test_doubled_frames_keep_the_verdict():
    labels = [A, B, A, B, A]
    once = compliance_service.check_alternation(frames_of(labels), protocol(fps=5.0))
    twice = compliance_service.check_alternation(
        frames_of([g for g in labels for _ in range(2)]), protocol(fps=5.0))
    assert once.compliant and twice.compliant
    assert once.transitions == twice.transitions == 4
    assert twice.tap_frequency == pytest.approx(once.tap_frequency / 2)


def test_smoothing_is_reported_not_applied():
    labels = [A, A, A, B, A, A, A]
    report = compliance_service.check_alternation(
        frames_of(labels), protocol(min_transitions=2))
    assert report.transitions == 2
    assert report.compliant
    assert report.flicker_frames == 1
    assert report.smoothed_transitions == 0


@pytest.mark.parametrize("seed", range(100))
def test_duplicate_frames_never_change_the_verdict(seed):
    rng = np.random.default_rng(seed)
    choices = [A, B, FLIP]
    labels = [choices[i] for i in rng.choice(3, size=int(rng.integers(1, 30)), p=[0.45, 0.45, 0.1])]
    repeats = rng.integers(1, 4, size=len(labels))
    stretched = [g for g, r in zip(labels, repeats) for _ in range(r)]

    base = compliance_service.check_alternation(frames_of(labels), protocol(min_transitions=2))
    other = compliance_service.check_alternation(frames_of(stretched), protocol(min_transitions=2))
    assert other.compliant == base.compliant
    assert other.transitions == base.transitions
    assert other.runs == base.runs
    assert other.unexpected.keys() == base.unexpected.keys()


@pytest.mark.parametrize("seed", range(20))
def test_uniform_repetition_keeps_missing_fraction(seed):
    rng = np.random.default_rng(seed)
    choices = [A, B, None]
    labels = [choices[i] for i in rng.choice(3, size=int(rng.integers(1, 30)), p=[0.45, 0.45, 0.1])]
    tripled = [g for g in labels for _ in range(3)]

    base = compliance_service.check_alternation(frames_of(labels), protocol())
    other = compliance_service.check_alternation(frames_of(tripled), protocol())
    assert other.compliant == base.compliant
    assert other.no_detection_fraction == pytest.approx(base.no_detection_fraction)


def test_protocol_errors():
    frames = frames_of([A, B])
    with pytest.raises(ConfigException):
        compliance_service.check_alternation(frames, protocol(fps=0.0))
    with pytest.raises(ConfigException):
        compliance_service.check_alternation(frames, protocol(expected=(A, A)))
    with pytest.raises(InvalidInputException):
        compliance_service.check_alternation(
            [FrameLabel(frame=3, gesture=A), FrameLabel(frame=3, gesture=B)], protocol())


# Frame label CSV

def test_parse_frame_labels():
    text = "frame,gesture,confidence\n0,open,0.9\n1,,\n\n2,3\n3,Pinch Close,0.5\n"
    frames = compliance_service.parse_frame_labels(text)
    assert [f.frame for f in frames] == [0, 1, 2, 3]
    assert [f.gesture for f in frames] == [A, None, GestureClass.PINCH_CLOSE, GestureClass.PINCH_CLOSE]
    assert frames[0].confidence == 0.9
    assert frames[2].confidence == 0.0


@pytest.mark.parametrize("text,line", [
    ("0,open\nx,close\n", 2),
    ("0,wave\n", 1),
    ("0\n", 1),
    ("frame,gesture\n0,open,1.5\n", 2),
])
def test_parse_frame_label_errors(text, line):
    with pytest.raises(AnnotationParseException) as exc:
        compliance_service.parse_frame_labels(text)
    assert exc.value.line_number == line
