import json

import numpy as np
import pytest

from claimcheck.analysis import (
    AffinityMatrix,
    ScoreDistributions,
    Thresholds,
    all_vs_all,
    d_prime,
    histogram_masses,
    overlap_coefficient,
    partition_scores,
    quality_confound,
    rank_average,
    reference_distributions,
    sort_by_quality,
    spearman,
    verdict,
    with_labels,
    write_scores_csv,
    write_stats_json,
)
from claimcheck.descriptors import EmbeddingVector
from claimcheck.errors import (
    DegenerateVarianceError,
    DescriptorMismatchError,
    EmptySampleError,
    LabelCountError,
    TooFewSamplesError,
    UnavailableMetricError,
    ValidationError,
)
from claimcheck.quality import METRIC_NAMES, QualityScores

from helpers import random_unit_vectors
from oracles import (
    d_prime_oracle,
    overlap_oracle,
    pairwise_cosine_oracle,
    spearman_oracle,
)


def embeddings_from(vectors, name="baseline"):
    return [EmbeddingVector(descriptor_name=name, values=v,
                            source_id=f"img{i:03d}")
            for i, v in enumerate(vectors)]


def labeled_matrix(vectors, labels):
    m = all_vs_all(embeddings_from(vectors))
    return with_labels(m, {f"img{i:03d}": lab for i, lab in
                           enumerate(labels)})


def quality_map(ids, metric, values):
    out = {}
    for i, v in zip(ids, values):
        scores = {name: 0.5 for name in METRIC_NAMES}
        scores[metric] = v
        out[i] = QualityScores(scores=scores)
    return out


# --- all_vs_all -------------------------------------------------------------

def test_all_vs_all_identical_pair():
    v = np.zeros(8)
    v[0] = 1.0
    m = all_vs_all(embeddings_from([v, v.copy()]))
    np.testing.assert_allclose(m.values, 1.0, atol=1e-12)
    assert m.n == 2
    assert list(m.order) == [0, 1]


def test_all_vs_all_thirty_images(rng):
    m = all_vs_all(embeddings_from(random_unit_vectors(rng, 30, 64)))
    assert m.values.shape == (30, 30)


def test_all_vs_all_matches_double_loop_oracle(rng):
    vecs = random_unit_vectors(rng, 3, 16)
    m = all_vs_all(embeddings_from(vecs))
    np.testing.assert_allclose(m.values, pairwise_cosine_oracle(vecs),
                               atol=1e-9)


def test_all_vs_all_too_few():
    with pytest.raises(TooFewSamplesError):
        all_vs_all(embeddings_from([np.ones(4) / 2.0]))


def test_all_vs_all_descriptor_mismatch(rng):
    vecs = random_unit_vectors(rng, 2, 8)
    embs = embeddings_from(vecs)
    embs[1] = EmbeddingVector("other", embs[1].values, "img001")
    with pytest.raises(DescriptorMismatchError):
        all_vs_all(embs)


def test_affinity_matrix_validates():
    bad = np.array([[1.0, 0.5], [0.4, 1.0]])  # asymmetric
    with pytest.raises(ValidationError):
        AffinityMatrix(values=bad, ids=("a", "b"), labels=("x", "y"),
                       order=np.arange(2))
    with pytest.raises(ValidationError):
        AffinityMatrix(values=np.eye(2) * 0.5, ids=("a", "b"),
                       labels=("x", "y"), order=np.arange(2))


# --- partition_scores -------------------------------------------------------

def test_partition_small_example(rng):
    m = labeled_matrix(random_unit_vectors(rng, 5, 16),
                       ["A", "A", "A", "B", "B"])
    d = partition_scores(m)
    assert d.genuine.size == 4  # C(3,2) + C(2,2)
    assert d.impostor.size == 6  # 3*2


def test_partition_paper_sized_case(rng):
    labels = ["real"] * 16 + ["double"] * 14
    m = labeled_matrix(random_unit_vectors(rng, 30, 32), labels)
    d = partition_scores(m)
    assert d.genuine.size == 211  # C(16,2) + C(14,2)
    assert d.impostor.size == 224  # 16*14


def test_partition_single_label_rejected(rng):
    m = labeled_matrix(random_unit_vectors(rng, 2, 8), ["A", "A"])
    with pytest.raises(LabelCountError):
        partition_scores(m)


def test_partition_pair_count_conservation(rng):
    for n, ka in ((6, 2), (9, 4), (12, 7)):
        labels = ["A"] * ka + ["B"] * (n - ka)
        m = labeled_matrix(random_unit_vectors(rng, n, 16), labels)
        d = partition_scores(m)
        assert d.genuine.size + d.impostor.size == n * (n - 1) // 2


def test_partition_values_match_manual_enumeration(rng):
    labels = ["A", "B", "A", "B"]
    m = labeled_matrix(random_unit_vectors(rng, 4, 8), labels)
    d = partition_scores(m)
    genuine = sorted([m.values[0, 2], m.values[1, 3]])
    impostor = sorted([m.values[0, 1], m.values[0, 3], m.values[1, 2],
                       m.values[2, 3]])
    np.testing.assert_allclose(sorted(d.genuine), genuine, atol=0)
    np.testing.assert_allclose(sorted(d.impostor), impostor, atol=0)


# --- reference_distributions ------------------------------------------------

def test_reference_two_by_two(rng):
    m = labeled_matrix(random_unit_vectors(rng, 4, 8), ["u", "u", "v", "v"])
    d = reference_distributions(m)
    assert d.genuine.size == 2
    assert d.impostor.size == 4


def test_reference_paper_sized_combinatorics():
    n_id, per = 50, 30
    n = n_id * per
    labels = tuple(f"id{k}" for k in range(n_id) for _ in range(per))
    ids = tuple(f"img{i}" for i in range(n))
    m = AffinityMatrix(values=np.eye(n), ids=ids, labels=labels,
                       order=np.arange(n))
    d = reference_distributions(m)
    assert d.genuine.size == 21750  # 50 * C(30,2)
    assert d.impostor.size == n * (n - 1) // 2 - 21750


def test_reference_single_identity_rejected(rng):
    m = labeled_matrix(random_unit_vectors(rng, 4, 8), ["u"] * 4)
    with pytest.raises(TooFewSamplesError):
        reference_distributions(m)


def test_reference_identity_with_one_image_rejected(rng):
    m = labeled_matrix(random_unit_vectors(rng, 3, 8), ["u", "u", "v"])
    with pytest.raises(TooFewSamplesError):
        reference_distributions(m)


# --- overlap ----------------------------------------------------------------

def test_overlap_identical_samples(rng):
    d = rng.uniform(-1, 1, 500)
    assert overlap_coefficient(d, d.copy()) == pytest.approx(1.0, abs=1e-9)


def test_overlap_disjoint_supports(rng):
    d1 = rng.uniform(-0.9, -0.1, 300)
    d2 = rng.uniform(0.1, 0.9, 300)
    assert overlap_coefficient(d1, d2) == 0.0


def test_overlap_matches_brute_force(rng):
    for _ in range(20):
        d1 = rng.uniform(-1, 1, int(rng.integers(5, 200)))
        d2 = rng.normal(0.2, 0.3, int(rng.integers(5, 200)))
        assert overlap_coefficient(d1, d2) == pytest.approx(
            overlap_oracle(d1, d2), abs=1e-9)


def test_overlap_empty_sample():
    with pytest.raises(EmptySampleError):
        overlap_coefficient(np.array([]), np.array([0.5]))


def test_overlap_symmetric(rng):
    d1 = rng.uniform(-1, 1, 50)
    d2 = rng.uniform(-1, 1, 80)
    assert overlap_coefficient(d1, d2) == overlap_coefficient(d2, d1)


def test_histogram_masses_sum_to_one(rng):
    m = histogram_masses(rng.uniform(-1, 1, 321))
    assert m.sum() == pytest.approx(1.0, abs=1e-9)
    assert m.shape == (50,)


# --- d_prime ----------------------------------------------------------------

def test_d_prime_identical_samples(rng):
    d = rng.uniform(0, 1, 50)
    assert d_prime(d, d.copy()) == 0.0


def test_d_prime_exact_moments():
    # two-point samples with exact mean/std: mean +- sigma
    d1 = np.array([0.7, 0.9] * 25)  # mean 0.8, std 0.1
    d2 = np.array([0.3, 0.5] * 25)  # mean 0.4, std 0.1
    assert d_prime(d1, d2) == pytest.approx(4.0, abs=1e-6)


def test_d_prime_constant_samples():
    with pytest.raises(DegenerateVarianceError):
        d_prime(np.full(10, 0.5), np.full(10, 0.5))


def test_d_prime_matches_oracle(rng):
    d1 = rng.normal(0.6, 0.2, 40)
    d2 = rng.normal(0.1, 0.15, 60)
    assert d_prime(d1, d2) == pytest.approx(d_prime_oracle(d1, d2), abs=1e-9)


def test_d_prime_shift_and_scale_invariance(rng):
    d1 = rng.normal(0.5, 0.1, 30)
    d2 = rng.normal(0.2, 0.2, 30)
    base = d_prime(d1, d2)
    assert d_prime(d1 + 0.17, d2 + 0.17) == pytest.approx(base, abs=1e-9)
    assert d_prime(d1 * 3.0, d2 * 3.0) == pytest.approx(base, abs=1e-9)


# --- sort_by_quality --------------------------------------------------------

def test_sort_already_sorted_is_identity(rng):
    m = labeled_matrix(random_unit_vectors(rng, 5, 16), list("AABBB"))
    q = quality_map(m.ids, "brightness", [0.1, 0.2, 0.3, 0.4, 0.5])
    s = sort_by_quality(m, q, "brightness")
    assert list(s.order) == [0, 1, 2, 3, 4]
    assert s.sort_key == "brightness"


def test_sort_is_symmetric_permutation(rng):
    m = labeled_matrix(random_unit_vectors(rng, 8, 16), list("AAAABBBB"))
    q = quality_map(m.ids, "contrast", rng.uniform(0, 1, 8))
    s = sort_by_quality(m, q, "contrast")
    p = s.order
    for i in range(8):
        for j in range(8):
            assert s.values[i, j] == m.values[p[i], p[j]]
        assert s.ids[i] == m.ids[p[i]]
        assert s.labels[i] == m.labels[p[i]]


def test_sort_preserves_offdiagonal_multiset(rng):
    m = labeled_matrix(random_unit_vectors(rng, 7, 16), list("AAABBBB"))
    q = quality_map(m.ids, "sharpness", rng.uniform(0, 1, 7))
    s = sort_by_quality(m, q, "sharpness")
    mask = ~np.eye(7, dtype=bool)
    assert sorted(m.values[mask]) == sorted(s.values[mask])


def test_sort_breaks_ties_by_id(rng):
    m = labeled_matrix(random_unit_vectors(rng, 4, 16), list("AABB"))
    q = quality_map(m.ids, "exposure", [0.5, 0.5, 0.5, 0.5])
    s = sort_by_quality(m, q, "exposure")
    assert list(s.ids) == sorted(m.ids)


def test_sort_missing_metric(rng):
    m = labeled_matrix(random_unit_vectors(rng, 3, 16), list("AAB"))
    q = quality_map(m.ids, "brightness", [0.1, 0.2, 0.3])
    q[m.ids[1]].scores["brightness"] = None
    with pytest.raises(UnavailableMetricError, match="img001"):
        sort_by_quality(m, q, "brightness")


# --- spearman / confound ----------------------------------------------------

def test_rank_average_with_ties():
    np.testing.assert_allclose(rank_average(np.array([3.0, 1.0, 3.0, 2.0])),
                               [3.5, 1.0, 3.5, 2.0])


def test_spearman_perfect_and_reversed():
    x = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
    assert spearman(x, x * 2.0) == pytest.approx(1.0, abs=1e-12)
    assert spearman(x, -x) == pytest.approx(-1.0, abs=1e-12)


def test_spearman_matches_brute_force_with_ties(rng):
    for _ in range(20):
        n = int(rng.integers(4, 30))
        x = rng.integers(0, 5, n).astype(float)  # many ties
        y = rng.integers(0, 5, n).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        assert spearman(x, y) == pytest.approx(spearman_oracle(x, y),
                                               abs=1e-9)


def test_spearman_matches_scipy(rng):
    scipy_stats = pytest.importorskip("scipy.stats")
    for _ in range(10):
        n = int(rng.integers(5, 40))
        x = rng.integers(0, 6, n).astype(float)
        y = rng.integers(0, 6, n).astype(float)
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        expected = scipy_stats.spearmanr(x, y).statistic
        assert spearman(x, y) == pytest.approx(expected, abs=1e-9)


def test_spearman_degenerate():
    with pytest.raises(DegenerateVarianceError):
        spearman(np.full(5, 1.0), np.arange(5.0))


def test_quality_confound_perfect_correlation():
    n = 5
    # build a valid affinity matrix whose mean off-diagonal similarity
    # is strictly increasing with index
    values = np.eye(n)
    for i in range(n):
        for j in range(n):
            if i != j:
                values[i, j] = values[j, i] = 0.05 * (i + j) + 0.1
    m = AffinityMatrix(values=values,
                       ids=tuple(f"img{i:03d}" for i in range(n)),
                       labels=("A",) * n, order=np.arange(n))
    q = quality_map(m.ids, "brightness", [0.1, 0.2, 0.3, 0.4, 0.5])
    assert quality_confound(m, q, "brightness") == pytest.approx(1.0,
                                                                 abs=1e-12)
    q_rev = quality_map(m.ids, "brightness", [0.5, 0.4, 0.3, 0.2, 0.1])
    assert quality_confound(m, q_rev, "brightness") == pytest.approx(
        -1.0, abs=1e-12)


def test_quality_confound_matches_oracle_with_ties(rng):
    m = labeled_matrix(random_unit_vectors(rng, 5, 16), list("AABBB"))
    vals = [0.2, 0.2, 0.7, 0.7, 0.4]  # hand-built ties
    q = quality_map(m.ids, "exposure", vals)
    mean_sim = [(m.values[i].sum() - 1.0) / 4.0 for i in range(5)]
    assert quality_confound(m, q, "exposure") == pytest.approx(
        spearman_oracle(vals, mean_sim), abs=1e-9)


def test_quality_confound_needs_three(rng):
    m = labeled_matrix(random_unit_vectors(rng, 2, 16), list("AB"))
    q = quality_map(m.ids, "contrast", [0.1, 0.2])
    with pytest.raises(TooFewSamplesError):
        quality_confound(m, q, "contrast")


# --- verdict ----------------------------------------------------------------

def dist(genuine, impostor):
    return ScoreDistributions(genuine=np.asarray(genuine, float),
                              impostor=np.asarray(impostor, float))


def test_verdict_same_person():
    calib = dist(genuine=np.full(100, 0.95), impostor=np.full(100, 0.10))
    case = dist(genuine=np.full(50, 0.96), impostor=np.full(50, 0.95))
    r = verdict(case, calib, confounds={})
    assert r.verdict == "same-person"
    assert r.overlap_impostor_calibration_genuine == pytest.approx(1.0)
    assert r.overlap_impostor_calibration_impostor == 0.0


def test_verdict_distinct_person():
    calib = dist(genuine=np.full(100, 0.95), impostor=np.full(100, 0.10))
    case = dist(genuine=np.full(50, 0.94), impostor=np.full(50, 0.10))
    r = verdict(case, calib, confounds={})
    assert r.verdict == "distinct-person"


def test_verdict_inconclusive_when_neither_rule_fires():
    # case impostors: 35% with calib genuine, 35% with calib impostor
    ci = [0.50] * 7 + [0.01] * 7 + [-0.51] * 6
    calib = dist(genuine=np.full(20, 0.50), impostor=np.full(20, 0.01))
    case = dist(genuine=np.full(10, 0.9), impostor=np.array(ci))
    r = verdict(case, calib, confounds={})
    assert r.verdict == "inconclusive"
    assert r.overlap_impostor_calibration_genuine == pytest.approx(0.35)
    assert r.overlap_impostor_calibration_impostor == pytest.approx(0.35)
    assert any("neither rule fired" in x for x in r.reasons)


def test_verdict_without_calibration_is_inconclusive(rng):
    case = dist(genuine=rng.uniform(0.8, 1, 10),
                impostor=rng.uniform(0.7, 1, 10))
    r = verdict(case, None, confounds={})
    assert r.verdict == "inconclusive"
    assert any("no-calibration" in x for x in r.reasons)
    assert r.overlap_impostor_calibration_genuine is None


def test_verdict_permutation_invariance(rng):
    vecs = random_unit_vectors(rng, 10, 32)
    labels = list("AAAAABBBBB")
    calib = dist(rng.uniform(0.8, 1.0, 60), rng.uniform(-0.2, 0.4, 60))

    def run(order):
        m = labeled_matrix([vecs[i] for i in order],
                           [labels[i] for i in order])
        return verdict(partition_scores(m), calib, confounds={})

    base = run(list(range(10)))
    perm = run(list(np.random.default_rng(1).permutation(10)))
    assert base.verdict == perm.verdict
    assert base.d_prime_case == pytest.approx(perm.d_prime_case, abs=1e-12)
    assert (base.overlap_impostor_calibration_genuine
            == pytest.approx(perm.overlap_impostor_calibration_genuine,
                             abs=1e-12))


def test_verdict_custom_thresholds():
    calib = dist(genuine=np.full(100, 0.95), impostor=np.full(100, 0.10))
    case = dist(genuine=np.full(50, 0.96), impostor=np.full(50, 0.95))
    r = verdict(case, calib, confounds={},
                thresholds=Thresholds(tau_same=1.1, tau_diff=0.0))
    assert r.verdict == "inconclusive"


# --- emitters ---------------------------------------------------------------

def test_scores_csv_roundtrip(tmp_path, rng):
    m = labeled_matrix(random_unit_vectors(rng, 4, 16), list("AABB"))
    p = tmp_path / "scores.csv"
    write_scores_csv(m, p)
    import csv

    rows = list(csv.DictReader(open(p)))
    assert len(rows) == 6  # C(4,2)
    for row in rows:
        i = m.ids.index(row["source_id_a"])
        j = m.ids.index(row["source_id_b"])
        assert float(row["similarity"]) == m.values[i, j]  # exact round-trip


def test_stats_json_shape(tmp_path, rng):
    case = dist(rng.uniform(0.5, 1, 20), rng.uniform(-1, 0.5, 30))
    p = tmp_path / "stats.json"
    write_stats_json(case, None, p, descriptor="baseline", case_name="c")
    doc = json.loads(p.read_text())
    assert doc["case"]["genuine"]["count"] == 20
    assert doc["calibration"] is None
    assert doc["conventions"]["histogram_bins"] == 50
    assert sum(doc["case"]["impostor"]["histogram"]) == pytest.approx(
        1.0, abs=1e-9)
