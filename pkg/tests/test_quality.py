import numpy as np
import pytest

from claimcheck.classifiers import AuxClassifier, ClassifierSpec
from claimcheck.errors import ClassifierIOError, DegenerateLandmarksError
from claimcheck.ingest import (
    CROP_SIZE,
    TEMPLATE,
    AlignedFace,
    FivePointLandmarks,
    ImageSample,
    assume_aligned_face,
)
from claimcheck.quality import (
    DEFAULT_CONFIG,
    METRIC_NAMES,
    PoseAngles,
    QualityClassifiers,
    brightness,
    contrast,
    exposure,
    face_luminance,
    femininity,
    head_pose,
    pose_frontality,
    score_all,
    sharpness,
    sunglasses_absence,
)

from helpers import face_from_pixels, gray_face, random_face, uniform_face
from oracles import (
    brightness_oracle,
    contrast_oracle,
    exposure_oracle,
    face_luminance_oracle,
    sharpness_oracle,
)


def constant_classifier(probs, classes=("sunglasses", "non_sunglasses"),
                        positive="non_sunglasses"):
    return AuxClassifier(ClassifierSpec(
        name="stub", kind="constant", classes=tuple(classes),
        positive_class=positive, probabilities=tuple(probs)))


# --- brightness -----------------------------------------------------------

def test_brightness_black_white():
    assert brightness(uniform_face(0)) == 0.0
    assert brightness(uniform_face(255)) == 1.0


def test_brightness_gray128():
    assert brightness(uniform_face(128)) == pytest.approx(128 / 255, abs=1e-6)


def test_brightness_matches_per_pixel_oracle(rng):
    face = random_face(rng)
    assert brightness(face) == pytest.approx(brightness_oracle(face.luma),
                                             abs=1e-9)


# --- face luminance -------------------------------------------------------

def test_face_luminance_uniform():
    assert face_luminance(uniform_face(255)) == pytest.approx(1.0, abs=1e-9)
    assert face_luminance(uniform_face(128)) == pytest.approx(128 / 255,
                                                              abs=1e-6)


def test_face_luminance_half_black_half_white_matches_oracle():
    gray = np.zeros((112, 112), np.uint8)
    gray[56:] = 255
    face = gray_face(gray)
    expected = face_luminance_oracle(face.luma,
                                     face.canonical_landmarks.as_array())
    assert face_luminance(face) == pytest.approx(expected, abs=1e-9)


def test_face_luminance_equals_brightness_on_uniform_images():
    for level in (0, 37, 128, 200, 255):
        face = uniform_face(level)
        assert face_luminance(face) == pytest.approx(brightness(face),
                                                     abs=1e-6)


# --- exposure -------------------------------------------------------------

def test_exposure_examples():
    assert exposure(uniform_face(0)) == 0.0
    assert exposure(uniform_face(128)) == 1.0


def test_exposure_quarter_clipped():
    gray = np.full((112, 112), 128, np.uint8)
    gray[:56, :56] = 0  # exactly one quarter
    assert exposure(gray_face(gray)) == pytest.approx(0.75, abs=1e-9)


def test_exposure_matches_oracle(rng):
    face = random_face(rng)
    assert exposure(face) == pytest.approx(exposure_oracle(face.luma),
                                           abs=1e-9)


# --- contrast -------------------------------------------------------------

def test_contrast_uniform_zero():
    for level in (0, 100, 255):
        assert contrast(uniform_face(level)) == pytest.approx(0.0, abs=1e-12)


def test_contrast_half_half_is_one():
    gray = np.zeros((112, 112), np.uint8)
    gray[56:] = 255
    assert contrast(gray_face(gray)) == pytest.approx(1.0, abs=1e-9)


def test_contrast_checkerboard_is_one():
    gray = np.indices((112, 112)).sum(axis=0) % 2 * 255
    assert contrast(gray_face(gray.astype(np.uint8))) == pytest.approx(
        1.0, abs=1e-9)


def test_contrast_matches_oracle(rng):
    face = random_face(rng)
    assert contrast(face) == pytest.approx(contrast_oracle(face.luma),
                                           abs=1e-9)


# --- sharpness ------------------------------------------------------------

def test_sharpness_uniform_zero():
    assert sharpness(uniform_face(128)) == 0.0


def test_sharpness_step_edge_matches_convolution_oracle():
    gray = np.zeros((112, 112), np.uint8)
    gray[:, 56:] = 255
    face = gray_face(gray)
    assert sharpness(face) == pytest.approx(sharpness_oracle(face.luma),
                                            abs=1e-6)


def test_sharpness_matches_oracle_on_random(rng):
    face = random_face(rng)
    assert sharpness(face) == pytest.approx(sharpness_oracle(face.luma),
                                            abs=1e-6)


def test_blur_does_not_increase_sharpness(rng):
    from claimcheck.kernels import gaussian_blur
    from claimcheck.quality import gaussian_weights

    for _ in range(10):
        face = random_face(rng)
        w = gaussian_weights(1.0, 3)
        blurred = np.stack(
            [gaussian_blur(np.ascontiguousarray(
                face.pixels[..., ch].astype(np.float64)), w)
             for ch in range(3)], axis=2)
        blurred_face = face_from_pixels(np.rint(blurred).astype(np.uint8))
        assert sharpness(blurred_face) <= sharpness(face)


# --- sunglasses -----------------------------------------------------------

def test_sunglasses_heuristic_white_crop():
    assert sunglasses_absence(uniform_face(255)) == 1.0


def test_sunglasses_heuristic_dark_eye_patches():
    gray = np.full((112, 112), 255, np.uint8)
    for cx, cy in TEMPLATE[:2]:
        gray[int(round(cy)) - 8:int(round(cy)) + 8,
             int(round(cx)) - 12:int(round(cx)) + 12] = 0
    assert sunglasses_absence(gray_face(gray)) == 0.0


def test_sunglasses_classifier_passthrough():
    clf = constant_classifier([0.3, 0.7])
    assert sunglasses_absence(uniform_face(0), clf) == pytest.approx(0.7)


# --- femininity -----------------------------------------------------------

def test_femininity_passthrough_and_unavailable():
    clf = constant_classifier([0.9, 0.1], classes=("female", "male"),
                              positive="female")
    face = uniform_face(100)
    assert femininity(face, clf) == pytest.approx(0.9)
    assert femininity(face, None) is None


def test_femininity_invalid_probability_sum():
    clf = constant_classifier([0.9, 0.3], classes=("female", "male"),
                              positive="female")
    with pytest.raises(ClassifierIOError, match="probability"):
        femininity(uniform_face(100), clf)


def test_classifier_wrong_length_output():
    clf = constant_classifier([1.0], classes=("a",), positive="a")
    spec = ClassifierSpec(name="s", kind="constant",
                          classes=("a", "b"), positive_class="a",
                          probabilities=(0.5, 0.25, 0.25))
    with pytest.raises(Exception):
        AuxClassifier(spec).predict_proba(uniform_face(1))
    assert clf.predict_proba(uniform_face(1))[0] == 1.0


# --- head pose ------------------------------------------------------------

def test_head_pose_template_is_frontal():
    angles = head_pose(uniform_face(128))
    assert abs(angles.yaw) < 0.5
    assert abs(angles.pitch) < 0.5
    assert abs(angles.roll) < 0.5


def test_head_pose_roll_from_rotated_landmarks():
    theta = np.radians(10.0)
    rot = np.array([[np.cos(theta), -np.sin(theta)],
                    [np.sin(theta), np.cos(theta)]])
    center = np.array([55.5, 55.5])
    pts = (TEMPLATE - center) @ rot.T + center
    face = AlignedFace.from_pixels(
        np.full((112, 112, 3), 128, np.uint8),
        FivePointLandmarks.from_array(pts), "s")
    angles = head_pose(face)
    assert angles.roll == pytest.approx(10.0, abs=1.0)


def test_head_pose_yaw_sign_toward_left_eye():
    pts = TEMPLATE.copy()
    eye_mid = (pts[0] + pts[1]) / 2.0
    pts[2, 0] = eye_mid[0] + 0.4 * (pts[0, 0] - eye_mid[0])  # toward left eye
    face = AlignedFace.from_pixels(
        np.full((112, 112, 3), 128, np.uint8),
        FivePointLandmarks.from_array(pts), "s")
    angles = head_pose(face)
    assert angles.yaw < 0.0


def test_head_pose_degenerate_eyes():
    pts = TEMPLATE.copy()
    pts[1] = pts[0]
    face = AlignedFace.from_pixels(
        np.full((112, 112, 3), 128, np.uint8),
        FivePointLandmarks.from_array(pts), "s")
    with pytest.raises(DegenerateLandmarksError):
        head_pose(face)


# --- frontality -----------------------------------------------------------

def test_pose_frontality_examples():
    assert pose_frontality(PoseAngles(0, 0, 123.0)) == 1.0
    assert pose_frontality(PoseAngles(90, 0, 0)) == pytest.approx(0.0,
                                                                  abs=1e-12)
    assert pose_frontality(PoseAngles(60, 0, 0)) == pytest.approx(0.5,
                                                                  abs=1e-9)


def test_pose_frontality_sign_symmetric():
    for yaw, pitch in ((30, 10), (45, 45), (80, 5)):
        f = pose_frontality(PoseAngles(yaw, pitch, 0))
        assert f == pytest.approx(pose_frontality(PoseAngles(-yaw, pitch, 0)))
        assert f == pytest.approx(pose_frontality(PoseAngles(yaw, -pitch, 0)))


# --- score_all ------------------------------------------------------------

def test_score_all_uniform_gray_no_classifiers():
    scores = score_all(uniform_face(128))
    assert set(scores.scores) == set(METRIC_NAMES)
    assert scores.get("brightness") == pytest.approx(0.502, abs=1e-3)
    assert scores.get("exposure") == 1.0
    assert scores.get("contrast") == 0.0
    assert scores.get("sharpness") == 0.0
    assert scores.get("femininity") is None


def test_score_all_has_exactly_eight_keys(rng):
    scores = score_all(random_face(rng))
    assert set(scores.scores) == set(METRIC_NAMES)


def test_score_all_assume_aligned_face_has_all_keys(rng):
    sample = ImageSample(id="s", pixels=random_face(rng).pixels, label="x")
    face = assume_aligned_face(sample)
    scores = score_all(face)
    assert set(scores.scores) == set(METRIC_NAMES)
    assert scores.get("face_luminance") is not None
    assert scores.get("pose_frontality") is not None


def test_score_all_failing_classifier_downgrades_to_unavailable():
    bad = constant_classifier([0.9, 0.3])  # sums to 1.2
    scores = score_all(uniform_face(100),
                       QualityClassifiers(sunglasses=bad, gender=None))
    assert scores.get("sunglasses_absence") is None
    assert set(scores.scores) == set(METRIC_NAMES)


# --- shared invariants ----------------------------------------------------

def test_global_statistics_mirror_invariant(rng):
    face = random_face(rng)
    mirrored = face_from_pixels(face.pixels[:, ::-1])
    assert brightness(face) == pytest.approx(brightness(mirrored), abs=1e-12)
    assert exposure(face) == pytest.approx(exposure(mirrored), abs=1e-12)
    assert contrast(face) == pytest.approx(contrast(mirrored), abs=1e-12)


def test_brightness_monotone_under_luma_scaling(rng):
    for _ in range(10):
        face = random_face(rng)
        alpha = rng.uniform(0.05, 0.95)
        scaled = face_from_pixels(
            np.rint(face.pixels.astype(np.float64) * alpha).astype(np.uint8))
        assert brightness(scaled) <= brightness(face)


def test_all_available_scores_in_range(rng):
    for _ in range(25):
        scores = score_all(random_face(rng))
        for name in METRIC_NAMES:
            v = scores.get(name)
            if v is not None:
                assert 0.0 <= v <= 1.0, name
