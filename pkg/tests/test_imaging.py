# tests/test_imaging.py
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.schemas.imaging import BlurCategory, BlurRecord, BlurThresholds, GrayImage
from app.services.imaging import blur_service
from app.utils.exceptions import ImageTooSmallException, InvalidInputException


def score(array) -> float:
    return blur_service.blur_score(GrayImage(np.asarray(array, dtype=np.float64)))


def test_uniform_image_scores_zero():
    """Zero-sum kernel: any constant image has all-zero responses."""
    for c in (0.0, 17.0, 255.0):
        img = GrayImage(np.full((6, 9), c))
        assert np.all(blur_service.laplacian_response(img) == 0)
        assert blur_service.blur_score(img) == 0.0


def test_impulse_responses_and_score(impulse_image):
    """Centre -4, 4-neighbours 1, corners 0; population variance 20/9."""
    response = blur_service.laplacian_response(GrayImage(impulse_image))
    expected = np.array([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=float)
    np.testing.assert_array_equal(response, expected)
    assert score(impulse_image) == pytest.approx(20 / 9, abs=1e-12)


def test_three_by_three_single_response():
    img = np.array([[1, 2, 3], [4, 5, 6], [7, 8, 9]], dtype=float)
    response = blur_service.laplacian_response(GrayImage(img))
    assert response.shape == (1, 1)
    assert response[0, 0] == 2 + 4 + 6 + 8 - 4 * 5
    assert score(img) == 0.0


def test_two_response_variance():
    img = np.zeros((3, 4))
    img[1, 1] = 10
    # responses -40 and 10 around mean -15
    assert score(img) == pytest.approx(625.0)


def test_checkerboard_score_drops_after_box_blur(checkerboard):
    sharp = GrayImage(checkerboard)
    assert blur_service.blur_score(sharp) == pytest.approx(1020.0 ** 2)
    assert blur_service.blur_score(blur_service.box_blur(sharp)) < blur_service.blur_score(sharp)


@pytest.mark.parametrize("seed", range(5))
def test_repeated_box_blur_is_non_increasing(seed):
    img = GrayImage(np.random.default_rng(seed).uniform(0, 255, (64, 64)))
    scores = [blur_service.blur_score(img)]
    for _ in range(4):
        img = blur_service.box_blur(img)
        scores.append(blur_service.blur_score(img))
    assert all(b <= a for a, b in zip(scores, scores[1:]))


def test_offset_invariance_and_quadratic_scaling():
    rng = np.random.default_rng(3)
    img = rng.uniform(0, 100, (20, 20))
    base = score(img)
    assert score(img + 50) == pytest.approx(base, rel=1e-9)
    assert score(img * 2.5) == pytest.approx(base * 2.5 ** 2, rel=1e-9)


@pytest.mark.parametrize("value,category", [
    (60, BlurCategory.CLEAR),
    (30, BlurCategory.BLURRED),
    (5, BlurCategory.TOTALLY_BLURRED),
    (50, BlurCategory.BLURRED),
    (10, BlurCategory.BLURRED),
    (50.0001, BlurCategory.CLEAR),
    (9.9999, BlurCategory.TOTALLY_BLURRED),
])
def test_categorize(value, category, thresholds):
    assert blur_service.categorize(value, thresholds) == category


def test_categorize_is_order_respecting(thresholds):
    rank = {BlurCategory.TOTALLY_BLURRED: 0, BlurCategory.BLURRED: 1, BlurCategory.CLEAR: 2}
    values = np.linspace(0, 100, 401)
    ranks = [rank[blur_service.categorize(float(v), thresholds)] for v in values]
    assert ranks == sorted(ranks)


def test_too_small_image():
    with pytest.raises(ImageTooSmallException):
        blur_service.blur_score(GrayImage(np.zeros((2, 5))))


def test_gray_image_validation():
    with pytest.raises(InvalidInputException):
        GrayImage(np.zeros((0, 4)))
    with pytest.raises(InvalidInputException):
        GrayImage(np.full((3, 3), 300.0))


def test_thresholds_must_be_ordered():
    with pytest.raises(ValidationError):
        BlurThresholds(low=50, high=10)


def test_grayscale_uses_bt601():
    rgb = np.zeros((3, 3, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    gray = blur_service.to_grayscale(rgb)
    assert gray.data[0, 0] == pytest.approx(0.299 * 255)
    with pytest.raises(InvalidInputException):
        blur_service.to_grayscale(np.zeros((3, 3, 2)))


def test_std_is_sqrt_of_score():
    record = BlurRecord(score=64.0, category=BlurCategory.CLEAR)
    assert record.std == 8.0
    assert math.isclose(record.std ** 2, record.score)


def test_assess_from_files_in_order(write_image, noise_image, thresholds):
    flat = write_image("b_flat.pgm", np.full((20, 20), 128))
    sharp = write_image("a_noise.png", noise_image)
    paths = [flat, sharp]

    serial = blur_service.score_paths(paths, thresholds, workers=1)
    parallel = blur_service.score_paths(paths, thresholds, workers=2)
    assert [p for p, _ in serial] == paths
    assert serial == parallel
    assert serial[0][1].category == BlurCategory.TOTALLY_BLURRED
    assert serial[1][1].category == BlurCategory.CLEAR


def test_rgb_file_is_decoded(write_image, thresholds):
    path = write_image("rgb.ppm", np.zeros((10, 12, 3)))
    image = blur_service.load_image(path)
    assert image.shape == (10, 12, 3)
    record = blur_service.score_path(path, thresholds)
    assert record.score == 0.0
    assert (record.width, record.height) == (12, 10)


def test_undecodable_file(tmp_path):
    path = tmp_path / "broken.png"
    path.write_bytes(b"not an image")
    with pytest.raises(InvalidInputException):
        blur_service.load_image(path)
