"""The eight image-quality metrics, each a score in [0, 1], higher = better
for recognition.

Acquisition metrics: brightness, face_luminance, exposure, contrast,
sharpness. Subject metrics: sunglasses_absence, femininity,
pose_frontality. Every tunable constant lives in QualityConfig so
experiments can vary them; the defaults are the documented fixed choices.

Pose is estimated geometrically from the five canonical landmarks:

* roll  = angle of the eye line, atan2(re.y - le.y, re.x - le.x);
* yaw   = asin of the de-rolled nose-tip x offset from the eye midpoint,
  normalized by half the interocular distance (negative = nose toward the
  left eye);
* pitch = asin of 2 * (t0 - t), where t is the de-rolled nose-tip y
  position as a fraction of the eye-line-to-mouth-line span and t0 is the
  template's value of t (negative = head down).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .classifiers import AuxClassifier
from .errors import (
    ClaimcheckError,
    DegenerateLandmarksError,
    EmptyRegionError,
)
from .ingest import AlignedFace, TEMPLATE

logger = logging.getLogger(__name__)

METRIC_NAMES = (
    "brightness",
    "face_luminance",
    "exposure",
    "contrast",
    "sharpness",
    "sunglasses_absence",
    "femininity",
    "pose_frontality",
)

# Template nose position between eye line and mouth line (the t0 of the
# pitch formula above).
_EYE_MID_Y = (TEMPLATE[0, 1] + TEMPLATE[1, 1]) / 2.0
_MOUTH_MID_Y = (TEMPLATE[3, 1] + TEMPLATE[4, 1]) / 2.0
TEMPLATE_NOSE_T = float((TEMPLATE[2, 1] - _EYE_MID_Y)
                        / (_MOUTH_MID_Y - _EYE_MID_Y))


@dataclass(frozen=True)
class QualityConfig:
    """Fixed constants behind the quality metrics.

    The triangle set for face_luminance is a stand-in choice; notes in
    the repo docs. All defaults are deliberate, testable decisions, not
    values taken from any external source.
    """

    midtone_low: float = 0.10
    midtone_high: float = 0.90
    contrast_normalizer: float = 0.5
    blur_sigma: float = 2.0
    blur_radius_sigmas: float = 3.0
    sharpness_normalizer: float = 0.05
    eye_patch_width: int = 24
    eye_patch_height: int = 16
    eye_dark_threshold: float = 0.25

    @property
    def blur_radius(self) -> int:
        return int(round(self.blur_sigma * self.blur_radius_sigmas))


DEFAULT_CONFIG = QualityConfig()


@dataclass(frozen=True)
class PoseAngles:
    yaw: float  # degrees in [-90, 90]
    pitch: float  # degrees in [-90, 90]
    roll: float  # degrees in (-180, 180]


@dataclass
class QualityScores:
    """Map from metric name to score in [0, 1], or None (unavailable)."""

    scores: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.scores) != set(METRIC_NAMES):
            raise ValueError(f"quality scores must have exactly the keys "
                             f"{METRIC_NAMES}")
        for name, v in self.scores.items():
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} score {v} outside [0, 1]")

    def get(self, name: str) -> float | None:
        return self.scores[name]


def gaussian_weights(sigma: float, radius: int) -> np.ndarray:
    ks = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(ks ** 2) / (2.0 * sigma * sigma))
    return w / w.sum()


def brightness(face: AlignedFace) -> float:
    """Mean luma over the crop."""
    return float(face.luma.mean())


_TRIANGLE_INDEX = (
    (0, 1, 2),  # left eye, right eye, nose
    (0, 2, 3),  # left eye, nose, left mouth
    (1, 2, 4),  # right eye, nose, right mouth
    (3, 4, 2),  # left mouth, right mouth, nose
)


def face_luminance(face: AlignedFace,
                   config: QualityConfig = DEFAULT_CONFIG) -> float:
    """Average of mean luma over four landmark triangles (eye-eye-nose,
    each eye-nose-mouth corner, mouth-mouth-nose)."""
    pts = face.canonical_landmarks.as_array()
    luma = np.ascontiguousarray(face.luma)
    means = []
    for ia, ib, ic in _TRIANGLE_INDEX:
        total, count = kernels.triangle_mean(
            luma, pts[ia, 0], pts[ia, 1], pts[ib, 0], pts[ib, 1],
            pts[ic, 0], pts[ic, 1])
        if count == 0:
            raise EmptyRegionError(
                f"{face.source_id}: triangle {(ia, ib, ic)} covers no "
                "pixel centers")
        means.append(total / count)
    return float(sum(means) / len(means))


def exposure(face: AlignedFace,
             config: QualityConfig = DEFAULT_CONFIG) -> float:
    """Fraction of luma in the mid-tone band [midtone_low, midtone_high]."""
    inband = ((face.luma >= config.midtone_low)
              & (face.luma <= config.midtone_high))
    return float(inband.mean())


def contrast(face: AlignedFace,
             config: QualityConfig = DEFAULT_CONFIG) -> float:
    """RMS contrast: luma standard deviation / 0.5, clamped to [0, 1]."""
    return min(1.0, float(face.luma.std()) / config.contrast_normalizer)


def sharpness(face: AlignedFace,
              config: QualityConfig = DEFAULT_CONFIG) -> float:
    """Unsharp-mask residual magnitude, normalized and clamped.

    residual = luma - gaussian_blur(luma); score = min(1, mean|residual|
    / normalizer).
    """
    weights = gaussian_weights(config.blur_sigma, config.blur_radius)
    blurred = kernels.gaussian_blur(np.ascontiguousarray(face.luma), weights)
    residual = np.abs(face.luma - blurred).mean()
    return min(1.0, float(residual) / config.sharpness_normalizer)


def sunglasses_absence(face: AlignedFace,
                       classifier: AuxClassifier | None = None,
                       config: QualityConfig = DEFAULT_CONFIG) -> float:
    """P(non-sunglasses) from the classifier, or the dark-eye-patch
    heuristic: fraction of eye-patch pixels brighter than the dark
    threshold."""
    if classifier is not None:
        return classifier.positive_probability(face)
    h, w = face.luma.shape
    half_w = config.eye_patch_width // 2
    half_h = config.eye_patch_height // 2
    pts = face.canonical_landmarks.as_array()
    bright = 0
    total = 0
    for cx, cy in pts[:2]:
        c0 = max(int(round(cx)) - half_w, 0)
        c1 = min(int(round(cx)) + half_w, w)
        r0 = max(int(round(cy)) - half_h, 0)
        r1 = min(int(round(cy)) + half_h, h)
        patch = face.luma[r0:r1, c0:c1]
        bright += int((patch > config.eye_dark_threshold).sum())
        total += patch.size
    if total == 0:
        raise EmptyRegionError(f"{face.source_id}: eye patches are empty")
    return bright / total


def femininity(face: AlignedFace,
               classifier: AuxClassifier | None = None) -> float | None:
    """P(female) from a gender classifier; None when no classifier is
    configured (no credible landmark heuristic exists)."""
    if classifier is None:
        return None
    return classifier.positive_probability(face)


def head_pose(face: AlignedFace) -> PoseAngles:
    """Geometric pose estimate from the canonical landmarks (see module
    docstring for the exact formulas)."""
    pts = face.canonical_landmarks.as_array()
    le, re, nose = pts[0], pts[1], pts[2]
    mouth_mid = (pts[3] + pts[4]) / 2.0
    eye_mid = (le + re) / 2.0
    dx, dy = re - le
    dist = math.hypot(dx, dy)
    if dist < 1e-9:
        raise DegenerateLandmarksError(
            f"{face.source_id}: coincident eye landmarks")
    roll = math.degrees(math.atan2(dy, dx))

    # De-roll around the eye midpoint so the eye line is horizontal.
    c, s = dx / dist, dy / dist
    derolled = (pts - eye_mid) @ np.array([[c, -s], [s, c]])
    nose_d = derolled[2]
    mouth_y = (derolled[3, 1] + derolled[4, 1]) / 2.0
    if abs(mouth_y) < 1e-9:
        raise DegenerateLandmarksError(
            f"{face.source_id}: mouth line coincides with eye line")

    yaw = math.degrees(math.asin(
        max(-1.0, min(1.0, nose_d[0] / (0.5 * dist)))))
    t = nose_d[1] / mouth_y
    pitch = math.degrees(math.asin(
        max(-1.0, min(1.0, 2.0 * (TEMPLATE_NOSE_T - t)))))
    return PoseAngles(yaw=yaw, pitch=pitch, roll=roll)


def pose_frontality(angles: PoseAngles) -> float:
    """cos(yaw) * cos(pitch), clamped at 0; roll is excluded because
    alignment removes it."""
    return max(0.0, math.cos(math.radians(angles.yaw))
               * math.cos(math.radians(angles.pitch)))


@dataclass
class QualityClassifiers:
    sunglasses: AuxClassifier | None = None
    gender: AuxClassifier | None = None


def score_all(face: AlignedFace,
              classifiers: QualityClassifiers | None = None,
              config: QualityConfig = DEFAULT_CONFIG) -> QualityScores:
    """Evaluate all eight metrics; failures downgrade to unavailable."""
    cls = classifiers or QualityClassifiers()
    out: dict[str, float | None] = {}

    def run(name, fn):
        try:
            out[name] = fn()
        except ClaimcheckError as exc:
            logger.warning("%s unavailable for %s: %s", name, face.source_id,
                           exc)
            out[name] = None

    run("brightness", lambda: brightness(face))
    run("face_luminance", lambda: face_luminance(face, config))
    run("exposure", lambda: exposure(face, config))
    run("contrast", lambda: contrast(face, config))
    run("sharpness", lambda: sharpness(face, config))
    run("sunglasses_absence",
        lambda: sunglasses_absence(face, cls.sunglasses, config))
    run("femininity", lambda: femininity(face, cls.gender))
    run("pose_frontality", lambda: pose_frontality(head_pose(face)))
    return QualityScores(scores=out)
