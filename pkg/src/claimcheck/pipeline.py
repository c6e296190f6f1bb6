"""End-to-end orchestration: ingest -> quality -> embed -> analysis ->
render, per selected descriptor.

Per-image failures (undecodable files, degenerate landmarks, zero-vector
baseline inputs) are excluded with a logged warning and surfaced in the
report; they never abort the run silently.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analysis, descriptors, render
from .analysis import ScoreDistributions, Thresholds
from .classifiers import AuxClassifier, load_classifier_file
from .errors import (
    ClaimcheckError,
    ConfigError,
    DataError,
    DegenerateVarianceError,
    ModelError,
    TooFewSamplesError,
    UnavailableMetricError,
)
from .ingest import (
    AlignedFace,
    Manifest,
    align_face,
    assume_aligned_face,
    decode_image,
    load_manifest,
)
from .quality import (
    DEFAULT_CONFIG,
    METRIC_NAMES,
    QualityClassifiers,
    QualityConfig,
    QualityScores,
    score_all,
)

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    case_manifest: Path
    descriptors: list[str]
    reference_manifest: Path | None = None
    calibration_cache: Path | None = None
    classifier_paths: dict[str, Path] = field(default_factory=dict)
    thresholds: Thresholds = Thresholds()
    quality_overrides: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    workers: int = 1
    assume_aligned: bool = False

    def __post_init__(self):
        if not self.descriptors:
            raise ConfigError("select at least one descriptor")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        unknown = set(self.quality_overrides) - {
            f.name for f in dataclasses.fields(QualityConfig)}
        if unknown:
            raise ConfigError(f"unknown quality override(s): "
                              f"{sorted(unknown)}")


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or "case_manifest" not in raw:
        raise ConfigError(f"config {path} must be an object with "
                          "'case_manifest'")
    base = path.parent

    def respath(v):
        p = Path(v)
        return p if p.is_absolute() else base / p

    thresholds = Thresholds(
        tau_same=float(raw.get("thresholds", {}).get("tau_same", 0.50)),
        tau_diff=float(raw.get("thresholds", {}).get("tau_diff", 0.20)),
    )
    return RunConfig(
        case_manifest=respath(raw["case_manifest"]),
        descriptors=list(raw.get("descriptors", [])),
        reference_manifest=(respath(raw["reference_manifest"])
                            if raw.get("reference_manifest") else None),
        calibration_cache=(respath(raw["calibration_cache"])
                           if raw.get("calibration_cache") else None),
        classifier_paths={k: respath(v) for k, v in
                          raw.get("classifiers", {}).items()},
        thresholds=thresholds,
        quality_overrides=dict(raw.get("quality_overrides", {})),
        output_dir=respath(raw.get("output_dir", "out")),
        workers=int(raw.get("workers", 1)),
        assume_aligned=bool(raw.get("assume_aligned", False)),
    )


def resolve_descriptor_spec(name_or_path: str) -> descriptors.DescriptorSpec:
    """A selector is either a shipped preset name or a spec JSON path."""
    if name_or_path.endswith(".json"):
        p = Path(name_or_path)
        try:
            obj = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read descriptor spec {p}: "
                              f"{exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"descriptor spec {p} is not valid JSON: "
                              f"{exc}") from exc
        return descriptors.spec_from_dict(obj, base_dir=p.parent)
    return descriptors.load_preset(name_or_path)


def _map_ordered(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class LoadedDataset:
    faces: list[AlignedFace]
    labels_by_id: dict[str, str]
    excluded: dict[str, str]  # id -> reason


def load_dataset(manifest: Manifest, assume_aligned: bool,
                 workers: int = 1) -> LoadedDataset:
    """Decode and align every manifest entry; failures are excluded with
    a warning."""

    def one(entry):
        path = manifest.resolve(entry)
        try:
            sample = decode_image(path, entry.label, entry.landmarks,
                                  id=entry.path)
            if sample.landmarks is not None:
                face = align_face(sample)
            elif assume_aligned:
                face = assume_aligned_face(sample)
            else:
                raise DataError(
                    f"{entry.path}: no landmarks in manifest (use "
                    "--assume-aligned for pre-cropped faces)")
            return entry, face, None
        except ClaimcheckError as exc:
            return entry, None, str(exc)

    results = _map_ordered(one, list(manifest.entries), workers)
    faces: list[AlignedFace] = []
    labels: dict[str, str] = {}
    excluded: dict[str, str] = {}
    for entry, face, err in results:
        if face is None:
            logger.warning("excluding %s: %s", entry.path, err)
            excluded[entry.path] = err
        else:
            faces.append(face)
            labels[entry.path] = entry.label
    if not faces:
        raise DataError("all images failed to load")
    return LoadedDataset(faces=faces, labels_by_id=labels, excluded=excluded)


def load_quality_classifiers(paths: dict[str, Path]) -> QualityClassifiers:
    handles: dict[str, AuxClassifier] = {}
    for kind, p in paths.items():
        if kind not in ("sunglasses", "gender"):
            raise ConfigError(f"unknown classifier role {kind!r}")
        handles[kind] = load_classifier_file(p)
    return QualityClassifiers(sunglasses=handles.get("sunglasses"),
                              gender=handles.get("gender"))


def compute_quality(dataset: LoadedDataset,
                    classifiers: QualityClassifiers,
                    config: QualityConfig,
                    workers: int = 1) -> dict[str, QualityScores]:
    scores = _map_ordered(
        lambda face: score_all(face, classifiers, config),
        dataset.faces, workers)
    return {face.source_id: s for face, s in zip(dataset.faces, scores)}


def embed_dataset(handle, dataset: LoadedDataset, workers: int = 1
                  ) -> tuple[list, dict[str, str]]:
    """Embed every face; per-image inference failures are excluded."""

    def one(face):
        try:
            return descriptors.embed(handle, face), None
        except ModelError as exc:
            return None, (face.source_id, str(exc))

    results = _map_ordered(one, dataset.faces, workers)
    embeddings = []
    excluded: dict[str, str] = {}
    for emb, err in results:
        if emb is None:
            logger.warning("excluding %s from embedding: %s", err[0], err[1])
            excluded[err[0]] = err[1]
        else:
            embeddings.append(emb)
    return embeddings, excluded


def calibration_distributions(manifest: Manifest, handle,
                              assume_aligned: bool = False,
                              workers: int = 1) -> ScoreDistributions:
    """Embed a reference population and partition scores by identity."""
    dataset = load_dataset(manifest, assume_aligned, workers)
    embeddings, excl = embed_dataset(handle, dataset, workers)
    if len(embeddings) < 2:
        raise TooFewSamplesError("reference set has fewer than 2 usable "
                                 "images")
    matrix = analysis.with_labels(analysis.all_vs_all(embeddings),
                                  dataset.labels_by_id)
    return analysis.reference_distributions(matrix)


def write_calibration_cache(dist: ScoreDistributions, descriptor: str,
                            source: str, path: str | Path) -> None:
    payload = {
        "schema_version": 1,
        "descriptor": descriptor,
        "source_manifest": source,
        "genuine": [float(v) for v in dist.genuine],
        "impostor": [float(v) for v in dist.impostor],
        "stats": dist.to_dict(),
        "conventions": dict(analysis.CONVENTIONS),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_calibration_cache(path: str | Path,
                           descriptor: str) -> ScoreDistributions:
    from .errors import ParseError

    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read calibration cache {path}: "
                         f"{exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"calibration cache {path} is not valid JSON: "
                         f"{exc}") from exc
    if raw.get("descriptor") != descriptor:
        raise ConfigError(
            f"calibration cache {path} was built with descriptor "
            f"{raw.get('descriptor')!r}, not {descriptor!r}")
    return ScoreDistributions(
        genuine=np.array(raw["genuine"], dtype=np.float64),
        impostor=np.array(raw["impostor"], dtype=np.float64))


def analyze_case(config: RunConfig) -> dict:
    """Full pipeline; returns the index payload that is also written to
    output_dir/index.json."""
    case_manifest = load_manifest(config.case_manifest, role="case")
    classifiers = load_quality_classifiers(config.classifier_paths)
    quality_config = (dataclasses.replace(DEFAULT_CONFIG,
                                          **config.quality_overrides)
                      if config.quality_overrides else DEFAULT_CONFIG)

    dataset = load_dataset(case_manifest, config.assume_aligned,
                           config.workers)
    quality = compute_quality(dataset, classifiers, quality_config,
                              config.workers)

    reference_manifest = None
    ref_path = config.reference_manifest
    if ref_path is None:
        ref_path = case_manifest.resolve_reference()
    if config.calibration_cache is None and ref_path is not None:
        reference_manifest = load_manifest(ref_path, role="reference")

    out_root = Path(config.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    index: dict = {"schema_version": 1,
                   "case_name": case_manifest.case_name,
                   "descriptors": {}}

    for selector in config.descriptors:
        spec = resolve_descriptor_spec(selector)
        handle = descriptors.load_descriptor(spec)
        out_dir = out_root / spec.name
        out_dir.mkdir(parents=True, exist_ok=True)

        embeddings, embed_excluded = embed_dataset(handle, dataset,
                                                   config.workers)
        if len(embeddings) < 2:
            raise TooFewSamplesError(
                f"descriptor {spec.name}: fewer than 2 usable embeddings")
        matrix = analysis.with_labels(analysis.all_vs_all(embeddings),
                                      dataset.labels_by_id)
        case_dists = analysis.partition_scores(matrix)

        calibration = None
        if config.calibration_cache is not None:
            calibration = load_calibration_cache(config.calibration_cache,
                                                 spec.name)
        elif reference_manifest is not None:
            calibration = calibration_distributions(
                reference_manifest, handle, config.assume_aligned,
                config.workers)

        confounds: dict[str, float | None] = {}
        confound_reasons: dict[str, str] = {}
        for metric in METRIC_NAMES:
            try:
                confounds[metric] = analysis.quality_confound(
                    matrix, quality, metric)
            except (UnavailableMetricError, DegenerateVarianceError,
                    TooFewSamplesError) as exc:
                confounds[metric] = None
                confound_reasons[metric] = str(exc)

        report = analysis.verdict(
            case_dists, calibration, confounds,
            thresholds=config.thresholds,
            case_name=case_manifest.case_name,
            descriptor=spec.name,
            confound_reasons=confound_reasons)
        excluded = {**dataset.excluded, **embed_excluded}
        for img_id, reason in excluded.items():
            report.reasons.append(f"excluded {img_id}: {reason}")

        analysis.write_scores_csv(matrix, out_dir / "scores.csv")
        analysis.write_stats_json(case_dists, calibration,
                                  out_dir / "stats.json",
                                  descriptor=spec.name,
                                  case_name=case_manifest.case_name)

        style = render.HeatmapStyle(
            label_colors=render.label_color_map(
                matrix.labels, render.HeatmapStyle()))
        figures: dict[str, dict] = {}

        def add_figure(name: str, meta: dict) -> None:
            # report.json sits next to the figures: keep paths relative
            meta["path"] = Path(meta["path"]).name
            figures[name] = meta

        add_figure("affinity", render.render_heatmap(
            matrix, style, out_dir / "affinity.png"))
        for metric in METRIC_NAMES:
            try:
                sorted_matrix = analysis.sort_by_quality(matrix, quality,
                                                         metric)
            except UnavailableMetricError as exc:
                logger.warning("no quality-sorted heatmap for %s: %s",
                               metric, exc)
                continue
            add_figure(f"affinity_by_{metric}", render.render_heatmap(
                sorted_matrix, style, out_dir / f"affinity_by_{metric}.png"))
        add_figure("distributions", render.render_distributions(
            case_dists, calibration, out_dir / "distributions.png"))

        render.write_report(report, figures, out_dir / "report.json",
                            out_dir / "report.md")
        index["descriptors"][spec.name] = {
            "verdict": report.verdict,
            "report": str(out_dir / "report.json"),
            "excluded": sorted(excluded),
        }

    (out_root / "index.json").write_text(
        json.dumps(index, indent=2) + "\n")
    return index


def quality_csv(manifest_path: Path, out_csv: Path,
                classifier_paths: dict[str, Path] | None = None,
                assume_aligned: bool = False, workers: int = 1,
                quality_overrides: dict | None = None) -> int:
    """cmd_quality: per-image quality scores as CSV (id, label, 8
    metrics; unavailable scores are empty cells)."""
    import csv as _csv

    manifest = load_manifest(manifest_path, role="case")
    classifiers = load_quality_classifiers(classifier_paths or {})
    config = (dataclasses.replace(DEFAULT_CONFIG, **quality_overrides)
              if quality_overrides else DEFAULT_CONFIG)
    dataset = load_dataset(manifest, assume_aligned, workers)
    quality = compute_quality(dataset, classifiers, config, workers)

    with open(out_csv, "w", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label", *METRIC_NAMES])
        for face in dataset.faces:
            q = quality[face.source_id]
            row = [face.source_id, dataset.labels_by_id[face.source_id]]
            for metric in METRIC_NAMES:
                v = q.get(metric)
                row.append("" if v is None else repr(float(v)))
            writer.writerow(row)
    return len(dataset.faces)


def calibrate(manifest_path: Path, out_json: Path, selector: str,
              assume_aligned: bool = False, workers: int = 1) -> dict:
    """cmd_calibrate: compute and cache reference distributions."""
    manifest = load_manifest(manifest_path, role="reference")
    spec = resolve_descriptor_spec(selector)
    handle = descriptors.load_descriptor(spec)
    dist = calibration_distributions(manifest, handle, assume_aligned,
                                     workers)
    write_calibration_cache(dist, spec.name, str(manifest_path), out_json)
    return {"descriptor": spec.name,
            "genuine": int(dist.genuine.size),
            "impostor": int(dist.impostor.size)}
