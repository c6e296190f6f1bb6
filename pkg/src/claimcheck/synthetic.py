"""Parametric synthetic face fixtures.

Generates 112x112 ellipse-and-feature face crops with controllable
brightness, blur, and sunglasses occlusion, plus manifests/configs ready
for the CLI, so every test and demo runs with zero external data.

Identity design: each identity adds a distinct 2-D Walsh-Hadamard block
pattern (16x16, zero-mean, mutually orthogonal, constant |amplitude|) on
top of a shared base face whose projection onto the signature subspace
is removed. Consequences used by the tests:

* within-identity cosine similarity of the baseline descriptor sits near
  1 (per-image noise only);
* every cross-identity cosine concentrates at the profile's
  ``target_cross_cosine`` regardless of the identity pair.

Faces are painted at 16x16 block resolution and upsampled x7, so the
images are exactly their block-mean representation.
"""

from __future__ import annotations

import argparse
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .ingest import CROP_SIZE, TEMPLATE
from .quality import gaussian_weights
from .render import write_png

GRID = 16
BLOCK = CROP_SIZE // GRID  # 7


@dataclass(frozen=True)
class SyntheticProfile:
    """Shared parameters of a generated population (levels are uint8)."""

    background_level: float = 70.0
    skin_level: float = 150.0
    feature_depth: float = 50.0
    target_cross_cosine: float = 0.30
    noise_level: float = 1.5  # per-block gaussian sigma, levels
    name: str = "default"


DEFAULT_PROFILE = SyntheticProfile()

# Low block contrast and fine noise: the profile whose identity/noise
# texture sits close to the uint8 quantization step, so darkening
# genuinely destroys signal (the quality-confound miniature).
SOFT_PROFILE = SyntheticProfile(
    background_level=100.0,
    skin_level=140.0,
    feature_depth=20.0,
    noise_level=0.75,
    name="soft",
)


@dataclass(frozen=True)
class FaceStyle:
    """Per-image acquisition controls."""

    brightness: float = 1.0
    blur_sigma: float = 0.0
    sunglasses: bool = False


def _hadamard(n: int) -> np.ndarray:
    h = np.array([[1.0]])
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


_H16 = _hadamard(GRID)


def _signature(identity: int) -> np.ndarray:
    """Unit-norm 16x16 Walsh pattern for an identity index (zero-mean,
    orthogonal across identities)."""
    p = 4 + identity % 12
    q = 4 + (identity // 12) % 12
    return np.outer(_H16[p], _H16[q]) / GRID


_N_SIGNATURES = 144


def _signature_stack() -> np.ndarray:
    return np.stack([_signature(k).ravel() for k in range(_N_SIGNATURES)])


def _base_face(profile: SyntheticProfile) -> np.ndarray:
    """Shared 16x16 base face, de-projected from the signature subspace."""
    g = np.zeros((GRID, GRID), dtype=np.float64)
    g[:] = profile.background_level
    ys, xs = np.mgrid[0:GRID, 0:GRID]
    head = (((xs - 7.7) / 5.6) ** 2 + ((ys - 8.6) / 6.9) ** 2) <= 1.0
    g[head] = profile.skin_level

    # features near the canonical landmark positions (block coords)
    d = profile.feature_depth
    for cx, cy in (TEMPLATE[0] / BLOCK, TEMPLATE[1] / BLOCK):
        g[int(round(cy)) - 1:int(round(cy)) + 1,
          int(round(cx)) - 1:int(round(cx)) + 1] -= d
    nx, ny = TEMPLATE[2] / BLOCK
    g[int(round(ny)) - 1:int(round(ny)) + 1, int(round(nx))] -= d * 0.4
    my = int(round(((TEMPLATE[3] + TEMPLATE[4]) / 2.0 / BLOCK)[1]))
    g[my, 5:11] -= d * 0.8

    flat = g.ravel()
    sigs = _signature_stack()
    flat = flat - sigs.T @ (sigs @ flat)
    return flat.reshape(GRID, GRID)


def synth_face(identity: int, image_seed: int,
               profile: SyntheticProfile = DEFAULT_PROFILE,
               style: FaceStyle = FaceStyle()) -> np.ndarray:
    """Render one identity sample as a 112x112x3 uint8 array."""
    base = _base_face(profile)
    centered = base - base.mean()
    c = profile.target_cross_cosine
    sig_norm = float(np.linalg.norm(centered)) * np.sqrt((1.0 - c) / c)
    blocks = base + _signature(identity) * sig_norm

    rng = np.random.default_rng(image_seed)
    blocks = blocks + rng.normal(0.0, profile.noise_level, (GRID, GRID))

    if style.sunglasses:
        blocks = blocks.copy()
        blocks[6:9, 3:13] = 15.0

    img = np.kron(blocks, np.ones((BLOCK, BLOCK)))
    img = img * style.brightness
    if style.blur_sigma > 0:
        w = gaussian_weights(style.blur_sigma,
                             max(1, int(round(3 * style.blur_sigma))))
        img = kernels.gaussian_blur(np.ascontiguousarray(img), w)
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    return np.repeat(img[:, :, None], 3, axis=2)


@dataclass(frozen=True)
class FaceSpec:
    label: str
    identity: int
    seed: int
    style: FaceStyle = FaceStyle()


def write_faces(root: Path, specs: list[FaceSpec],
                profile: SyntheticProfile,
                manifest_path: Path, case_name: str,
                reference: str | None = None,
                with_landmarks: bool = True) -> Path:
    """Render the specs under root/ and write a manifest for them."""
    root.mkdir(parents=True, exist_ok=True)
    img_dir = root / "images"
    img_dir.mkdir(exist_ok=True)
    entries = []
    for i, spec in enumerate(specs):
        fname = f"images/{case_name}_{i:03d}.png"
        write_png(root / fname, synth_face(spec.identity, spec.seed,
                                           profile, spec.style))
        entry: dict = {"path": fname, "label": spec.label}
        if with_landmarks:
            entry["landmarks"] = [[float(x), float(y)] for x, y in TEMPLATE]
        entries.append(entry)
    doc = {"case_name": case_name, "entries": entries}
    if reference is not None:
        doc["reference"] = reference
    manifest_path.write_text(json.dumps(doc, indent=2) + "\n")
    return manifest_path


def case_specs(label_a: str, label_b: str, identity_a: int, identity_b: int,
               n_a: int = 16, n_b: int = 14, seed0: int = 1000,
               style_a: FaceStyle = FaceStyle(),
               style_b: FaceStyle = FaceStyle()) -> list[FaceSpec]:
    """Two labeled sets; pass identity_a == identity_b for a same-person
    case."""
    specs = [FaceSpec(label_a, identity_a, seed0 + i, style_a)
             for i in range(n_a)]
    specs += [FaceSpec(label_b, identity_b, seed0 + 500 + i, style_b)
              for i in range(n_b)]
    return specs


def reference_specs(n_identities: int = 8, images_each: int = 6,
                    first_identity: int = 16,
                    seed0: int = 9000) -> list[FaceSpec]:
    return [
        FaceSpec(f"celeb{k:02d}", first_identity + k,
                 seed0 + k * 100 + i)
        for k in range(n_identities)
        for i in range(images_each)
    ]


def write_demo_case(out_dir: Path, distinct: bool = False,
                    varied: bool = True) -> Path:
    """Emit a complete runnable case: images, manifests, classifier
    stubs, and a config for ``claimcheck analyze``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    style_b = (FaceStyle(brightness=0.55, blur_sigma=1.0)
               if varied else FaceStyle())
    specs = case_specs("real", "double", identity_a=0,
                       identity_b=1 if distinct else 0,
                       style_b=style_b)
    if varied:
        # a few occluded samples in the second set, like a dirty
        # social-media crawl
        specs = [replace(s, style=replace(s.style, sunglasses=True))
                 if s.label == "double" and i % 5 == 0 else s
                 for i, s in enumerate(specs)]
    write_faces(out_dir, specs, DEFAULT_PROFILE, out_dir / "case.json",
                "demo_case", reference="reference.json")
    write_faces(out_dir, reference_specs(), DEFAULT_PROFILE,
                out_dir / "reference.json", "demo_reference")

    # Constant stand-in for the gender model so all 8 metrics are
    # available; sunglasses falls back to the eye-patch heuristic.
    (out_dir / "gender_stub.json").write_text(json.dumps({
        "name": "gender_stub",
        "kind": "constant",
        "classes": ["female", "male"],
        "positive_class": "female",
        "probabilities": [0.85, 0.15],
    }, indent=2) + "\n")

    config = {
        "case_manifest": "case.json",
        "descriptors": ["baseline"],
        "classifiers": {
            "gender": "gender_stub.json",
        },
        "output_dir": "out",
        "workers": 1,
    }
    cfg_path = out_dir / "config.json"
    cfg_path.write_text(json.dumps(config, indent=2) + "\n")
    return cfg_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Generate a synthetic demo case for claimcheck")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--distinct", action="store_true",
                        help="use two distinct identities for the two sets")
    parser.add_argument("--plain", action="store_true",
                        help="skip the brightness/blur/occlusion variation")
    args = parser.parse_args(argv)
    cfg = write_demo_case(Path(args.out), distinct=args.distinct,
                          varied=not args.plain)
    print(f"wrote {cfg}")
    print(f"run: claimcheck analyze --config {cfg}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
