"""Descriptor backends: aligned face -> unit-norm embedding vector.

Two kinds:

* ``baseline`` — deterministic, model-free: 16x16 block-mean luma,
  mean-subtracted and L2-normalized (256-d). Lets the whole pipeline and
  test suite run with zero model files.
* ``neural-model`` — an ONNX file executed through onnxruntime when
  installed, else the built-in onnxlite evaluator.

Presets for the published descriptor families ship in presets/; their
normalization constants are configuration, not ground truth.
"""

from __future__ import annotations

import importlib.resources
import json
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import onnxlite
from .errors import (
    ConfigError,
    DescriptorMismatchError,
    InferenceError,
    ModelLoadError,
    ShapeMismatchError,
    ZeroVectorError,
)
from .ingest import CROP_SIZE, AlignedFace, LUMA_WEIGHTS
from . import kernels

BASELINE_GRID = 16  # 112/7 blocks per side; 256-d embedding


@dataclass(frozen=True)
class InputSpec:
    """How to turn an aligned crop into a model input tensor."""

    height: int = CROP_SIZE
    width: int = CROP_SIZE
    layout: str = "nchw"  # or "nhwc"
    color: str = "rgb"  # "rgb", "bgr", or "gray"
    mean: tuple[float, ...] = (0.0, 0.0, 0.0)
    scale: tuple[float, ...] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class DescriptorSpec:
    name: str
    kind: str  # "neural-model" or "baseline"
    embedding_dim: int
    model_path: str | None = None
    input: InputSpec = InputSpec()

    def __post_init__(self):
        if self.kind not in ("neural-model", "baseline"):
            raise ConfigError(f"descriptor {self.name!r}: unknown kind "
                              f"{self.kind!r}")
        if self.embedding_dim <= 0:
            raise ConfigError(f"descriptor {self.name!r}: embedding_dim "
                              "must be positive")


@dataclass(frozen=True)
class EmbeddingVector:
    descriptor_name: str
    values: np.ndarray  # float64, L2 norm 1
    source_id: str

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def spec_from_dict(obj: dict, base_dir: Path | None = None) -> DescriptorSpec:
    try:
        inp = obj.get("input", {})
        n_ch = 1 if inp.get("color", "rgb") == "gray" else 3
        model_path = obj.get("model_path")
        if model_path is not None and base_dir is not None:
            p = Path(model_path)
            model_path = str(p if p.is_absolute() else base_dir / p)
        return DescriptorSpec(
            name=obj["name"],
            kind=obj["kind"],
            embedding_dim=int(obj["embedding_dim"]),
            model_path=model_path,
            input=InputSpec(
                height=int(inp.get("height", CROP_SIZE)),
                width=int(inp.get("width", CROP_SIZE)),
                layout=inp.get("layout", "nchw"),
                color=inp.get("color", "rgb"),
                mean=tuple(float(v) for v in inp.get("mean", [0.0] * n_ch)),
                scale=tuple(float(v) for v in inp.get("scale", [1.0] * n_ch)),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed descriptor spec: {exc}") from exc


def load_preset(name: str) -> DescriptorSpec:
    """Load one of the descriptor presets shipped with the package."""
    res = importlib.resources.files("claimcheck") / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"no descriptor preset named {name!r}")
    return spec_from_dict(json.loads(res.read_text()))


def image_tensor(face: AlignedFace, spec: InputSpec) -> np.ndarray:
    """Resize/reorder/normalize an aligned crop per the input spec."""
    if (spec.height, spec.width) == (CROP_SIZE, CROP_SIZE):
        rgb = face.pixels.astype(np.float64)
    else:
        h, w = CROP_SIZE, CROP_SIZE
        inv = np.array([
            [w / spec.width, 0.0, 0.5 * w / spec.width - 0.5],
            [0.0, h / spec.height, 0.5 * h / spec.height - 0.5],
        ])
        rgb = kernels.warp_bilinear_rgb(face.pixels, inv, spec.height,
                                        spec.width)
    if spec.color == "bgr":
        chans = rgb[:, :, ::-1]
    elif spec.color == "gray":
        chans = (rgb @ LUMA_WEIGHTS)[:, :, None]
    else:
        chans = rgb
    mean = np.asarray(spec.mean, dtype=np.float64)
    scale = np.asarray(spec.scale, dtype=np.float64)
    if mean.shape[0] != chans.shape[2] or scale.shape[0] != chans.shape[2]:
        raise ConfigError(f"normalization needs {chans.shape[2]} per-channel "
                          "values")
    x = (chans - mean) * scale
    if spec.layout == "nchw":
        x = x.transpose(2, 0, 1)
    elif spec.layout != "nhwc":
        raise ConfigError(f"unknown layout {spec.layout!r}")
    return x[None, ...]


class BaselineDescriptor:
    """Model-free descriptor: mean-subtracted 16x16 block-mean luma."""

    def __init__(self, spec: DescriptorSpec):
        self.spec = spec

    def embed(self, face: AlignedFace) -> np.ndarray:
        blocks = kernels.block_mean(
            np.ascontiguousarray(face.luma),
            CROP_SIZE // BASELINE_GRID, CROP_SIZE // BASELINE_GRID)
        v = np.asarray(blocks, dtype=np.float64).ravel()
        v = v - v.mean()
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise ZeroVectorError(
                f"{face.source_id}: uniform crop gives a zero baseline "
                "embedding")
        return v / norm


class OnnxDescriptor:
    """ONNX-backed descriptor (onnxruntime preferred, onnxlite fallback)."""

    def __init__(self, spec: DescriptorSpec):
        self.spec = spec
        self._lock = threading.Lock()  # one inference at a time per handle
        if spec.model_path is None:
            raise ModelLoadError(f"descriptor {spec.name!r} declares no "
                                 "model_path")
        path = Path(spec.model_path)
        if not path.is_file():
            raise ModelLoadError(f"descriptor {spec.name!r}: model file "
                                 f"not found: {path}")
        self._session = None
        self._model = None
        try:
            import onnxruntime  # type: ignore

            self._session = onnxruntime.InferenceSession(
                str(path), providers=["CPUExecutionProvider"])
            self._input_name = self._session.get_inputs()[0].name
            out_shape = self._session.get_outputs()[0].shape
        except ImportError:
            self._model = onnxlite.load_model(path)
            out_shape = self._model.output_shape
        except Exception as exc:
            raise ModelLoadError(f"descriptor {spec.name!r}: cannot load "
                                 f"{path}: {exc}") from exc
        self._check_declared_shape(out_shape)

    def _check_declared_shape(self, shape) -> None:
        dims = [d for d in shape if isinstance(d, int) and d > 1]
        if dims and int(np.prod(dims)) != self.spec.embedding_dim:
            raise ShapeMismatchError(
                f"descriptor {self.spec.name!r} declares "
                f"embedding_dim={self.spec.embedding_dim} but the model "
                f"outputs {shape}")

    def embed(self, face: AlignedFace) -> np.ndarray:
        x = image_tensor(face, self.spec.input)
        try:
            with self._lock:
                if self._session is not None:
                    out = self._session.run(
                        None, {self._input_name: x.astype(np.float32)})[0]
                else:
                    out = self._model.run(x)
        except InferenceError:
            raise
        except Exception as exc:
            raise InferenceError(f"descriptor {self.spec.name!r} failed on "
                                 f"{face.source_id}: {exc}") from exc
        v = np.asarray(out, dtype=np.float64).ravel()
        if v.shape[0] != self.spec.embedding_dim:
            raise ShapeMismatchError(
                f"descriptor {self.spec.name!r}: model produced "
                f"{v.shape[0]} values, declared {self.spec.embedding_dim}")
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            raise ZeroVectorError(f"{face.source_id}: model output is the "
                                  "zero vector")
        return v / norm


def load_descriptor(spec: DescriptorSpec):
    """Build a descriptor handle able to embed aligned faces."""
    if spec.kind == "baseline":
        return BaselineDescriptor(spec)
    return OnnxDescriptor(spec)


def embed(handle, face: AlignedFace) -> EmbeddingVector:
    values = handle.embed(face)
    return EmbeddingVector(descriptor_name=handle.spec.name, values=values,
                           source_id=face.source_id)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two unit embeddings (their dot product)."""
    if a.descriptor_name != b.descriptor_name or a.dim != b.dim:
        raise DescriptorMismatchError(
            f"cannot compare {a.descriptor_name!r}[{a.dim}] with "
            f"{b.descriptor_name!r}[{b.dim}]")
    return float(a.values @ b.values)
