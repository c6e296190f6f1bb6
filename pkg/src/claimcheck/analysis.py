"""All-vs-All protocol: affinity matrices, genuine/impostor partitioning,
calibration against a reference population, and the quality-confound
statistic.

Conventions (recorded in every emitted stats/report file): unordered
pairs with the diagonal excluded; 50-bin histograms over [-1, 1]; scores
clipped into [-1, 1] before binning; population standard deviations.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .descriptors import EmbeddingVector
from .errors import (
    DegenerateVarianceError,
    DescriptorMismatchError,
    EmptySampleError,
    LabelCountError,
    TooFewSamplesError,
    UnavailableMetricError,
    ValidationError,
)
from .quality import QualityScores

HIST_BINS = 50
HIST_RANGE = (-1.0, 1.0)

CONVENTIONS = {
    "pairs": "unordered, diagonal excluded",
    "histogram_bins": HIST_BINS,
    "histogram_range": list(HIST_RANGE),
    "std": "population",
    "density_estimate": "filled step histogram (no kernel smoothing)",
}


@dataclass(frozen=True)
class AffinityMatrix:
    """N x N cosine-similarity matrix with labels and a provenance
    permutation (``order[i]`` = row of the pre-sort matrix now at i)."""

    values: np.ndarray
    ids: tuple[str, ...]
    labels: tuple[str, ...]
    order: np.ndarray
    sort_key: str | None = None

    def __post_init__(self):
        n = self.values.shape[0]
        if self.values.shape != (n, n):
            raise ValidationError("affinity matrix must be square")
        if len(self.ids) != n or len(self.labels) != n:
            raise ValidationError("ids/labels must match matrix size")
        if np.abs(self.values - self.values.T).max(initial=0.0) > 1e-6:
            raise ValidationError("affinity matrix must be symmetric")
        if n and np.abs(np.diag(self.values) - 1.0).max() > 1e-6:
            raise ValidationError("affinity diagonal must be 1.0")
        if sorted(self.order.tolist()) != list(range(n)):
            raise ValidationError("order must be a permutation of 0..n-1")

    @property
    def n(self) -> int:
        return self.values.shape[0]


def all_vs_all(embeddings: list[EmbeddingVector]) -> AffinityMatrix:
    """Cosine similarity for every pair of embeddings (identity order)."""
    if len(embeddings) < 2:
        raise TooFewSamplesError("all-vs-all needs at least 2 embeddings")
    names = {e.descriptor_name for e in embeddings}
    dims = {e.dim for e in embeddings}
    if len(names) > 1 or len(dims) > 1:
        raise DescriptorMismatchError(
            f"embeddings mix descriptors {sorted(names)} / dims "
            f"{sorted(dims)}")
    mat = np.stack([e.values for e in embeddings])
    values = mat @ mat.T
    values = (values + values.T) / 2.0  # exact symmetry
    return AffinityMatrix(
        values=values,
        ids=tuple(e.source_id for e in embeddings),
        labels=tuple("" for _ in embeddings),
        order=np.arange(len(embeddings)),
    )


def with_labels(matrix: AffinityMatrix,
                labels_by_id: dict[str, str]) -> AffinityMatrix:
    return AffinityMatrix(
        values=matrix.values,
        ids=matrix.ids,
        labels=tuple(labels_by_id[i] for i in matrix.ids),
        order=matrix.order,
        sort_key=matrix.sort_key,
    )


@dataclass(frozen=True)
class ScoreDistributions:
    """Genuine and impostor score samples."""

    genuine: np.ndarray
    impostor: np.ndarray

    def side_stats(self, side: str) -> dict:
        scores = getattr(self, side)
        n = int(scores.shape[0])
        return {
            "count": n,
            "mean": float(scores.mean()) if n else None,
            "std": float(scores.std()) if n else None,
        }

    def to_dict(self) -> dict:
        return {
            "genuine": {**self.side_stats("genuine"),
                        "histogram": histogram_masses(self.genuine).tolist()
                        if self.genuine.size else None},
            "impostor": {**self.side_stats("impostor"),
                         "histogram": histogram_masses(self.impostor).tolist()
                         if self.impostor.size else None},
        }


def histogram_masses(scores: np.ndarray) -> np.ndarray:
    """Normalized 50-bin histogram over [-1, 1]; scores clipped into
    range so the masses always sum to 1."""
    if scores.size == 0:
        raise EmptySampleError("cannot bin an empty score sample")
    clipped = np.clip(scores, *HIST_RANGE)
    counts, _ = np.histogram(clipped, bins=HIST_BINS, range=HIST_RANGE)
    return counts / scores.size


def _pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def partition_scores(matrix: AffinityMatrix) -> ScoreDistributions:
    """Split unordered off-diagonal pairs into genuine (same label) and
    impostor (cross label); requires exactly two distinct labels."""
    distinct = sorted(set(matrix.labels))
    if len(distinct) != 2:
        raise LabelCountError(f"need exactly 2 labels, found {len(distinct)}:"
                              f" {distinct}")
    lab = np.array([distinct.index(l) for l in matrix.labels])
    iu, ju = _pair_indices(matrix.n)
    same = lab[iu] == lab[ju]
    scores = matrix.values[iu, ju]
    return ScoreDistributions(genuine=scores[same], impostor=scores[~same])


def reference_distributions(matrix: AffinityMatrix) -> ScoreDistributions:
    """Genuine/impostor partition for a many-identity reference matrix;
    every identity needs at least 2 images."""
    distinct = sorted(set(matrix.labels))
    if len(distinct) < 2:
        raise TooFewSamplesError(
            f"reference set needs >= 2 identities, found {len(distinct)}")
    counts = {d: matrix.labels.count(d) for d in distinct}
    thin = [d for d, c in counts.items() if c < 2]
    if thin:
        raise TooFewSamplesError(
            f"reference identities with fewer than 2 images: {thin}")
    lab = np.array([distinct.index(l) for l in matrix.labels])
    iu, ju = _pair_indices(matrix.n)
    same = lab[iu] == lab[ju]
    scores = matrix.values[iu, ju]
    return ScoreDistributions(genuine=scores[same], impostor=scores[~same])


def overlap_coefficient(d1: np.ndarray, d2: np.ndarray) -> float:
    """Shared probability mass of the two binned distributions."""
    m1 = histogram_masses(np.asarray(d1, dtype=np.float64))
    m2 = histogram_masses(np.asarray(d2, dtype=np.float64))
    return float(np.minimum(m1, m2).sum())


def d_prime(d1: np.ndarray, d2: np.ndarray) -> float:
    """|mu1 - mu2| / sqrt((var1 + var2) / 2), population variances."""
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    if d1.size < 2 or d2.size < 2:
        raise TooFewSamplesError("d_prime needs >= 2 scores per sample")
    pooled = (d1.var() + d2.var()) / 2.0
    if pooled == 0.0:
        raise DegenerateVarianceError("both samples are constant")
    return float(abs(d1.mean() - d2.mean()) / np.sqrt(pooled))


def _metric_values(matrix: AffinityMatrix,
                   quality: dict[str, QualityScores],
                   metric: str) -> np.ndarray:
    missing = [i for i in matrix.ids
               if i not in quality or quality[i].get(metric) is None]
    if missing:
        raise UnavailableMetricError(metric, missing)
    return np.array([quality[i].get(metric) for i in matrix.ids],
                    dtype=np.float64)


def sort_by_quality(matrix: AffinityMatrix,
                    quality: dict[str, QualityScores],
                    metric: str) -> AffinityMatrix:
    """Reorder the matrix by ascending quality score (ties broken by
    source_id)."""
    vals = _metric_values(matrix, quality, metric)
    perm = sorted(range(matrix.n), key=lambda i: (vals[i], matrix.ids[i]))
    perm = np.array(perm, dtype=np.int64)
    return AffinityMatrix(
        values=matrix.values[np.ix_(perm, perm)],
        ids=tuple(matrix.ids[i] for i in perm),
        labels=tuple(matrix.labels[i] for i in perm),
        order=perm,
        sort_key=metric,
    )


def rank_average(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1, ties getting the average of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.shape[0], dtype=np.float64)
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation with average-rank tie handling."""
    rx = rank_average(x)
    ry = rank_average(y)
    sx = rx.std()
    sy = ry.std()
    if sx == 0.0 or sy == 0.0:
        raise DegenerateVarianceError(
            "rank correlation undefined for a constant sample")
    return float(((rx - rx.mean()) * (ry - ry.mean())).mean() / (sx * sy))


def mean_offdiag_similarity(matrix: AffinityMatrix) -> np.ndarray:
    return ((matrix.values.sum(axis=1) - np.diag(matrix.values))
            / (matrix.n - 1))


def quality_confound(matrix: AffinityMatrix,
                     quality: dict[str, QualityScores],
                     metric: str) -> float:
    """Spearman correlation between per-image quality and mean
    off-diagonal similarity: positive = low-quality images score low."""
    if matrix.n < 3:
        raise TooFewSamplesError("confound statistic needs >= 3 images")
    vals = _metric_values(matrix, quality, metric)
    return spearman(vals, mean_offdiag_similarity(matrix))


@dataclass(frozen=True)
class Thresholds:
    tau_same: float = 0.50
    tau_diff: float = 0.20


@dataclass
class VerdictReport:
    case_name: str
    descriptor: str
    case: ScoreDistributions
    calibration: ScoreDistributions | None
    thresholds: Thresholds
    overlap_impostor_calibration_genuine: float | None
    overlap_impostor_calibration_impostor: float | None
    d_prime_case: float | None
    confounds: dict[str, float | None]
    confound_reasons: dict[str, str]
    verdict: str
    reasons: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "case_name": self.case_name,
            "descriptor": self.descriptor,
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "thresholds": {"tau_same": self.thresholds.tau_same,
                           "tau_diff": self.thresholds.tau_diff},
            "case": self.case.to_dict(),
            "calibration": (self.calibration.to_dict()
                            if self.calibration is not None else None),
            "overlaps": {
                "case_impostor_vs_calibration_genuine":
                    self.overlap_impostor_calibration_genuine,
                "case_impostor_vs_calibration_impostor":
                    self.overlap_impostor_calibration_impostor,
            },
            "d_prime_case": self.d_prime_case,
            "quality_confound": dict(self.confounds),
            "quality_confound_reasons": dict(self.confound_reasons),
            "conventions": dict(CONVENTIONS),
        }


def verdict(case: ScoreDistributions,
            calibration: ScoreDistributions | None,
            confounds: dict[str, float | None],
            thresholds: Thresholds = Thresholds(),
            case_name: str = "",
            descriptor: str = "",
            confound_reasons: dict[str, str] | None = None) -> VerdictReport:
    """Apply the calibrated decision rule.

    same-person: the case impostor scores mostly fall where the
    calibration genuine scores fall (overlap >= tau_same) while barely
    overlapping the calibration impostors (<= tau_diff); distinct-person
    when reversed; inconclusive otherwise or when a statistic is
    degenerate.
    """
    reasons: list[str] = []
    ov_gen = ov_imp = None
    dpr = None
    decided = "inconclusive"

    try:
        dpr = d_prime(case.genuine, case.impostor)
    except (TooFewSamplesError, DegenerateVarianceError) as exc:
        reasons.append(f"d_prime degenerate: {exc}")

    if calibration is None:
        reasons.append("no-calibration: reference distributions not provided")
    else:
        try:
            ov_gen = overlap_coefficient(case.impostor, calibration.genuine)
            ov_imp = overlap_coefficient(case.impostor, calibration.impostor)
        except EmptySampleError as exc:
            reasons.append(f"overlap degenerate: {exc}")
        if ov_gen is not None and ov_imp is not None:
            same = (ov_gen >= thresholds.tau_same
                    and ov_imp <= thresholds.tau_diff)
            distinct = (ov_imp >= thresholds.tau_same
                        and ov_gen <= thresholds.tau_diff)
            if same and not distinct:
                decided = "same-person"
            elif distinct and not same:
                decided = "distinct-person"
            else:
                reasons.append(
                    f"neither rule fired: overlap(case-impostor, "
                    f"calibration-genuine)={ov_gen:.4f}, overlap("
                    f"case-impostor, calibration-impostor)={ov_imp:.4f}")

    return VerdictReport(
        case_name=case_name,
        descriptor=descriptor,
        case=case,
        calibration=calibration,
        thresholds=thresholds,
        overlap_impostor_calibration_genuine=ov_gen,
        overlap_impostor_calibration_impostor=ov_imp,
        d_prime_case=dpr,
        confounds=dict(confounds),
        confound_reasons=dict(confound_reasons or {}),
        verdict=decided,
        reasons=reasons,
    )


def write_scores_csv(matrix: AffinityMatrix, path: str | Path) -> None:
    """Unordered-pair scores file: source_id_a, source_id_b, label_a,
    label_b, similarity."""
    iu, ju = _pair_indices(matrix.n)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["source_id_a", "source_id_b", "label_a", "label_b",
                         "similarity"])
        for i, j in zip(iu.tolist(), ju.tolist()):
            writer.writerow([matrix.ids[i], matrix.ids[j], matrix.labels[i],
                             matrix.labels[j], repr(float(matrix.values[i, j]))])


def write_stats_json(case: ScoreDistributions,
                     calibration: ScoreDistributions | None,
                     path: str | Path, descriptor: str = "",
                     case_name: str = "") -> None:
    """Statistics file consumed by the render module."""
    payload = {
        "schema_version": 1,
        "case_name": case_name,
        "descriptor": descriptor,
        "case": case.to_dict(),
        "calibration": calibration.to_dict() if calibration else None,
        "conventions": dict(CONVENTIONS),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
