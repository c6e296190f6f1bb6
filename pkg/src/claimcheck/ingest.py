"""Manifest loading, image decoding, and canonical face alignment.

Coordinate conventions used throughout the package:

* pixel (r, c) of an image array has its center at (x=c, y=r), x growing
  right and y growing down;
* ``left_eye``/``right_eye`` etc. name the subject's features as seen in
  an upright image: ``left_eye`` is the eye on the image's left, so
  manifest landmarks must satisfy ``right_eye.x > left_eye.x``
  (programmatically built samples may be rotated arbitrarily).

Aligned crops are 112x112 with the five-point template used by the
ArcFace-family descriptors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageOps, UnidentifiedImageError

from . import kernels
from .errors import (
    DecodeError,
    DegenerateLandmarksError,
    ParseError,
    TooSmallError,
    ValidationError,
)

CROP_SIZE = 112
MIN_IMAGE_SIZE = 16

# Canonical five-point template for a 112x112 crop:
# left eye, right eye, nose tip, left mouth corner, right mouth corner.
TEMPLATE = np.array(
    [
        [38.2946, 51.6963],
        [73.5318, 51.5014],
        [56.0252, 71.7366],
        [41.5493, 92.3655],
        [70.7299, 92.2041],
    ],
    dtype=np.float64,
)

LANDMARK_NAMES = ("left_eye", "right_eye", "nose_tip", "left_mouth",
                  "right_mouth")

# BT.601 luma weights.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


@dataclass(frozen=True)
class FivePointLandmarks:
    """Five 2-D points in pixel coordinates of their source image."""

    left_eye: tuple[float, float]
    right_eye: tuple[float, float]
    nose_tip: tuple[float, float]
    left_mouth: tuple[float, float]
    right_mouth: tuple[float, float]

    def as_array(self) -> np.ndarray:
        return np.array([self.left_eye, self.right_eye, self.nose_tip,
                         self.left_mouth, self.right_mouth],
                        dtype=np.float64)

    @classmethod
    def from_array(cls, pts) -> "FivePointLandmarks":
        arr = np.asarray(pts, dtype=np.float64)
        if arr.shape != (5, 2):
            raise ValidationError(f"landmarks must be 5 (x, y) points, got "
                                  f"shape {arr.shape}")
        return cls(*(tuple(float(v) for v in p) for p in arr))

    def validate_in_bounds(self, width: int, height: int) -> None:
        for name, (x, y) in zip(LANDMARK_NAMES, self.as_array()):
            if not (0.0 <= x <= width - 1 and 0.0 <= y <= height - 1):
                raise ValidationError(
                    f"landmark {name} ({x}, {y}) outside image bounds "
                    f"{width}x{height}")


TEMPLATE_LANDMARKS = FivePointLandmarks.from_array(TEMPLATE)


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: str
    landmarks: FivePointLandmarks | None = None


@dataclass(frozen=True)
class Manifest:
    """A validated case or reference manifest.

    Entry paths are stored as written and resolved against ``base_dir``
    (the manifest file's directory).
    """

    case_name: str
    entries: tuple[ManifestEntry, ...]
    reference: str | None = None
    base_dir: Path = field(default_factory=Path)

    @property
    def labels(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.label, None)
        return tuple(seen)

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.base_dir / entry.path

    def resolve_reference(self) -> Path | None:
        if self.reference is None:
            return None
        return self.base_dir / self.reference


def load_manifest(path: str | Path, role: str = "case") -> Manifest:
    """Load and validate a manifest JSON file.

    ``role`` is "case" (at most two identity tags) or "reference" (any
    number of tags). See schemas/manifest.schema.json.
    """
    if role not in ("case", "reference"):
        raise ValueError(f"unknown manifest role {role!r}")
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest {path} is not valid JSON: {exc}") from exc

    if not isinstance(raw, dict) or "entries" not in raw:
        raise ParseError(f"manifest {path} must be an object with 'entries'")
    case_name = raw.get("case_name", path.stem)
    if not isinstance(case_name, str) or not case_name:
        raise ParseError(f"manifest {path}: case_name must be a non-empty "
                         "string")
    reference = raw.get("reference")
    if reference is not None and not isinstance(reference, str):
        raise ParseError(f"manifest {path}: reference must be a path string")

    entries = []
    for i, item in enumerate(raw["entries"]):
        if not isinstance(item, dict) or "path" not in item or "label" not in item:
            raise ParseError(f"manifest {path}: entry {i} needs 'path' and "
                             "'label'")
        lm = None
        if item.get("landmarks") is not None:
            try:
                lm = FivePointLandmarks.from_array(item["landmarks"])
            except (ValidationError, TypeError, ValueError) as exc:
                raise ParseError(f"manifest {path}: entry {i} has malformed "
                                 f"landmarks: {exc}") from exc
            if lm.right_eye[0] <= lm.left_eye[0]:
                raise ValidationError(
                    f"manifest {path}: entry {i} violates the landmark "
                    "convention right_eye.x > left_eye.x")
        entries.append(ManifestEntry(path=str(item["path"]),
                                     label=str(item["label"]), landmarks=lm))

    if not entries:
        raise ValidationError(f"manifest {path} has no entries")
    paths = [e.path for e in entries]
    if len(set(paths)) != len(paths):
        dupes = sorted({p for p in paths if paths.count(p) > 1})
        raise ValidationError(f"manifest {path} lists duplicate paths: "
                              f"{', '.join(dupes)}")
    labels = {e.label for e in entries}
    if role == "case" and len(labels) > 2:
        raise ValidationError(f"case manifest {path} has {len(labels)} "
                              f"identity tags (max 2): {sorted(labels)}")

    return Manifest(case_name=case_name, entries=tuple(entries),
                    reference=reference, base_dir=path.parent)


@dataclass(frozen=True)
class ImageSample:
    """A decoded RGB image with its identity tag."""

    id: str
    pixels: np.ndarray  # HxWx3 uint8
    label: str
    landmarks: FivePointLandmarks | None = None


def decode_image(path: str | Path, label: str,
                 landmarks: FivePointLandmarks | None = None,
                 id: str | None = None) -> ImageSample:
    """Decode a PNG/JPEG file to 8-bit RGB (EXIF orientation applied)."""
    path = Path(path)
    try:
        with Image.open(path) as img:
            img = ImageOps.exif_transpose(img)
            rgb = img.convert("RGB")
            pixels = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode {path}: {exc}") from exc
    h, w = pixels.shape[0], pixels.shape[1]
    if h < MIN_IMAGE_SIZE or w < MIN_IMAGE_SIZE:
        raise TooSmallError(f"{path} is {w}x{h}; minimum is "
                            f"{MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE}")
    if landmarks is not None:
        landmarks.validate_in_bounds(w, h)
    return ImageSample(id=id if id is not None else str(path),
                       pixels=pixels, label=label, landmarks=landmarks)


def luma_of(pixels: np.ndarray) -> np.ndarray:
    """BT.601 luma in [0, 1] from uint8 RGB."""
    return pixels.astype(np.float64) @ LUMA_WEIGHTS / 255.0


@dataclass(frozen=True)
class AlignedFace:
    """Canonical 112x112 crop with landmarks in crop coordinates."""

    pixels: np.ndarray  # 112x112x3 uint8
    luma: np.ndarray  # 112x112 float64 in [0, 1]
    canonical_landmarks: FivePointLandmarks
    source_id: str

    @classmethod
    def from_pixels(cls, pixels: np.ndarray,
                    landmarks: FivePointLandmarks,
                    source_id: str) -> "AlignedFace":
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        if pixels.shape != (CROP_SIZE, CROP_SIZE, 3):
            raise ValidationError(f"aligned crop must be "
                                  f"{CROP_SIZE}x{CROP_SIZE}x3, got "
                                  f"{pixels.shape}")
        return cls(pixels=pixels, luma=luma_of(pixels),
                   canonical_landmarks=landmarks, source_id=source_id)


def similarity_transform(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Least-squares similarity (rotation + uniform scale + translation).

    Returns the 2x3 matrix M with dst ~= M @ [x, y, 1]. Umeyama closed
    form; raises DegenerateLandmarksError when the source points are
    coincident or collinear.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    n = src.shape[0]
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    sc = src - mu_s
    dc = dst - mu_d
    var_s = (sc ** 2).sum() / n
    sing = np.linalg.svd(sc, compute_uv=False)
    if var_s == 0 or sing[1] <= 1e-8 * sing[0]:
        raise DegenerateLandmarksError(
            "source landmarks are coincident or collinear")
    cov = dc.T @ sc / n
    u, d, vt = np.linalg.svd(cov)
    s = np.ones(2)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        s[1] = -1.0
    rot = u @ np.diag(s) @ vt
    scale = (d * s).sum() / var_s
    t = mu_d - scale * rot @ mu_s
    m = np.empty((2, 3), dtype=np.float64)
    m[:, :2] = scale * rot
    m[:, 2] = t
    return m


def invert_affine(m: np.ndarray) -> np.ndarray:
    a = m[:, :2]
    inv = np.empty((2, 3), dtype=np.float64)
    inv[:, :2] = np.linalg.inv(a)
    inv[:, 2] = -inv[:, :2] @ m[:, 2]
    return inv


def apply_affine(m: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return pts @ m[:, :2].T + m[:, 2]


def align_face(sample: ImageSample) -> AlignedFace:
    """Warp a sample onto the canonical template (bilinear, clamp-to-edge)."""
    if sample.landmarks is None:
        raise ValidationError(f"{sample.id}: no landmarks; use "
                              "assume_aligned_face for pre-cropped faces")
    src_pts = sample.landmarks.as_array()
    m = similarity_transform(src_pts, TEMPLATE)
    inv = invert_affine(m)
    warped = kernels.warp_bilinear_rgb(
        np.ascontiguousarray(sample.pixels), inv, CROP_SIZE, CROP_SIZE)
    pixels = np.rint(warped).astype(np.uint8)
    mapped = FivePointLandmarks.from_array(apply_affine(m, src_pts))
    return AlignedFace.from_pixels(pixels, mapped, sample.id)


def assume_aligned_face(sample: ImageSample) -> AlignedFace:
    """Resize an already-cropped face to 112x112 with template landmarks."""
    h, w = sample.pixels.shape[0], sample.pixels.shape[1]
    # Pixel-center resize expressed as an inverse affine map; exact
    # identity when the input is already 112x112.
    inv = np.array([
        [w / CROP_SIZE, 0.0, 0.5 * w / CROP_SIZE - 0.5],
        [0.0, h / CROP_SIZE, 0.5 * h / CROP_SIZE - 0.5],
    ])
    resized = kernels.warp_bilinear_rgb(
        np.ascontiguousarray(sample.pixels), inv, CROP_SIZE, CROP_SIZE)
    pixels = np.rint(resized).astype(np.uint8)
    return AlignedFace.from_pixels(pixels, TEMPLATE_LANDMARKS, sample.id)
