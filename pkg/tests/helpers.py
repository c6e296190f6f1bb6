"""Shared test utilities: crop builders, random fixtures, tree hashing."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from claimcheck.ingest import AlignedFace, TEMPLATE_LANDMARKS
from claimcheck.synthetic import synth_face


def face_from_pixels(pixels: np.ndarray, source_id: str = "t") -> AlignedFace:
    return AlignedFace.from_pixels(np.ascontiguousarray(pixels, np.uint8),
                                   TEMPLATE_LANDMARKS, source_id)


def uniform_face(level: int, source_id: str = "t") -> AlignedFace:
    return face_from_pixels(np.full((112, 112, 3), level, np.uint8),
                            source_id)


def gray_face(gray: np.ndarray, source_id: str = "t") -> AlignedFace:
    """Build a face whose three channels equal the given 112x112 uint8
    plane."""
    return face_from_pixels(np.repeat(gray[:, :, None], 3, axis=2),
                            source_id)


def random_crop(rng: np.random.Generator) -> np.ndarray:
    """A randomized 112x112x3 crop drawn from several texture families."""
    kind = int(rng.integers(0, 4))
    if kind == 0:
        return rng.integers(0, 256, (112, 112, 3)).astype(np.uint8)
    if kind == 1:
        ys, xs = np.mgrid[0:112, 0:112].astype(np.float64)
        a, b = rng.uniform(-1, 1, 2)
        plane = 128 + a * (xs - 56) + b * (ys - 56)
        plane += rng.normal(0, rng.uniform(0, 30), (112, 112))
        plane = np.clip(plane, 0, 255).astype(np.uint8)
        return np.repeat(plane[:, :, None], 3, axis=2)
    if kind == 2:
        blocks = rng.integers(0, 256, (16, 16)).astype(np.float64)
        plane = np.kron(blocks, np.ones((7, 7))).astype(np.uint8)
        return np.repeat(plane[:, :, None], 3, axis=2)
    return synth_face(int(rng.integers(0, 64)), int(rng.integers(0, 2**31)))


def random_face(rng: np.random.Generator, source_id: str = "t") -> AlignedFace:
    return face_from_pixels(random_crop(rng), source_id)


def random_unit_vectors(rng: np.random.Generator, n: int,
                        dim: int) -> list[np.ndarray]:
    vecs = rng.standard_normal((n, dim))
    return [v / np.linalg.norm(v) for v in vecs]


def hash_tree(root: Path) -> dict[str, str]:
    """Relative path -> sha256, for byte-identical output-tree checks."""
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(
                p.read_bytes()).hexdigest()
    return out
