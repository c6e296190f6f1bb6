"""Auxiliary classifiers for the subject-related quality metrics.

A classifier is declared by a JSON spec (see schemas/classifier.schema.json)
and produces a probability vector over named classes. Two kinds:

* ``onnx`` — an interchange-format model run like a descriptor backend;
* ``constant`` — a declared fixed probability vector, for tests, demos,
  and smoke runs (no learned behavior).

The quality metric reads the probability of the spec's ``positive_class``
("non_sunglasses" for the sunglasses detector, "female" for gender).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import onnxlite
from .descriptors import InputSpec, image_tensor
from .errors import ClassifierIOError, ConfigError, ModelLoadError
from .ingest import AlignedFace

PROB_SUM_TOL = 1e-5


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    kind: str  # "onnx" or "constant"
    classes: tuple[str, ...]
    positive_class: str
    model_path: str | None = None
    probabilities: tuple[float, ...] | None = None
    input: InputSpec = field(default_factory=InputSpec)

    def __post_init__(self):
        if self.kind not in ("onnx", "constant"):
            raise ConfigError(f"classifier {self.name!r}: unknown kind "
                              f"{self.kind!r}")
        if self.positive_class not in self.classes:
            raise ConfigError(f"classifier {self.name!r}: positive_class "
                              f"{self.positive_class!r} not in classes")


def classifier_spec_from_dict(obj: dict,
                              base_dir: Path | None = None) -> ClassifierSpec:
    try:
        inp = obj.get("input", {})
        model_path = obj.get("model_path")
        if model_path is not None and base_dir is not None:
            p = Path(model_path)
            model_path = str(p if p.is_absolute() else base_dir / p)
        probs = obj.get("probabilities")
        return ClassifierSpec(
            name=obj["name"],
            kind=obj["kind"],
            classes=tuple(obj["classes"]),
            positive_class=obj["positive_class"],
            model_path=model_path,
            probabilities=tuple(probs) if probs is not None else None,
            input=InputSpec(
                height=int(inp.get("height", 112)),
                width=int(inp.get("width", 112)),
                layout=inp.get("layout", "nchw"),
                color=inp.get("color", "rgb"),
                mean=tuple(inp.get("mean", [0.0, 0.0, 0.0])),
                scale=tuple(inp.get("scale", [1.0, 1.0, 1.0])),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed classifier spec: {exc}") from exc


def load_classifier_file(path: str | Path) -> "AuxClassifier":
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read classifier spec {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"classifier spec {path} is not valid JSON: "
                          f"{exc}") from exc
    return AuxClassifier(classifier_spec_from_dict(obj, base_dir=path.parent))


class AuxClassifier:
    """Executable handle for a declared classifier."""

    def __init__(self, spec: ClassifierSpec):
        self.spec = spec
        self._lock = threading.Lock()  # serialize calls per handle
        self._session = None
        self._model = None
        if spec.kind == "constant":
            if spec.probabilities is None:
                raise ConfigError(f"classifier {spec.name!r}: constant kind "
                                  "needs 'probabilities'")
            if len(spec.probabilities) != len(spec.classes):
                raise ConfigError(f"classifier {spec.name!r}: probabilities/"
                                  "classes length mismatch")
            return
        if spec.model_path is None:
            raise ModelLoadError(f"classifier {spec.name!r} declares no "
                                 "model_path")
        path = Path(spec.model_path)
        if not path.is_file():
            raise ModelLoadError(f"classifier {spec.name!r}: model file not "
                                 f"found: {path}")
        try:
            import onnxruntime  # type: ignore

            self._session = onnxruntime.InferenceSession(
                str(path), providers=["CPUExecutionProvider"])
            self._input_name = self._session.get_inputs()[0].name
        except ImportError:
            self._model = onnxlite.load_model(path)
        except Exception as exc:
            raise ModelLoadError(f"classifier {spec.name!r}: cannot load "
                                 f"{path}: {exc}") from exc

    def predict_proba(self, face: AlignedFace) -> np.ndarray:
        """Probability vector over spec.classes; validated before return."""
        if self.spec.kind == "constant":
            probs = np.asarray(self.spec.probabilities, dtype=np.float64)
        else:
            x = image_tensor(face, self.spec.input)
            try:
                with self._lock:
                    if self._session is not None:
                        out = self._session.run(
                            None, {self._input_name: x.astype(np.float32)})[0]
                    else:
                        out = self._model.run(x)
            except Exception as exc:
                raise ClassifierIOError(
                    f"classifier {self.spec.name!r} failed on "
                    f"{face.source_id}: {exc}") from exc
            probs = np.asarray(out, dtype=np.float64).ravel()
        if probs.shape[0] != len(self.spec.classes):
            raise ClassifierIOError(
                f"classifier {self.spec.name!r} produced {probs.shape[0]} "
                f"values for {len(self.spec.classes)} classes")
        if np.any(probs < -PROB_SUM_TOL) or abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ClassifierIOError(
                f"classifier {self.spec.name!r} output is not a probability "
                f"vector (sum={probs.sum():.6f})")
        return probs

    def positive_probability(self, face: AlignedFace) -> float:
        probs = self.predict_proba(face)
        idx = self.spec.classes.index(self.spec.positive_class)
        return float(probs[idx])
