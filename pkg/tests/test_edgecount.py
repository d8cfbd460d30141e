import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphclust.cluster import KMeansConfig, kmeans
from graphclust.edgecount import (
    CLUSTERER_FAILURE,
    DEGENERATE_VARIANCE,
    EMPTY_CLUSTER,
    ClusterLabels,
    DegenerateMomentError,
    estimate_k,
    null_moments,
    q_statistic,
    select_k,
    within_counts,
    QRecord,
)
from graphclust.graph import SimilarityGraph, build_kmst, graph_stats, pairwise_distances


def enumerate_w(G, sizes):
    """Exact (E[W], Var[W]) over all distinct label placements, in rationals."""
    n = G.n
    ws = []
    base = sum(([j] * s for j, s in enumerate(sizes)), [])
    for perm in set(itertools.permutations(base)):
        w = Fraction(0)
        for u, v in G.edges:
            if perm[u] == perm[v]:
                w += Fraction(1, sizes[perm[u]])
        ws.append(w)
    mean = sum(ws) / len(ws)
    return mean, sum((w - mean) ** 2 for w in ws) / len(ws), len(ws)


def test_labels_compaction():
    lab = ClusterLabels([7, 7, 9, 3])
    assert lab.assignments.tolist() == [1, 1, 2, 3]
    assert lab.k == 3 and lab.sizes.tolist() == [2, 1, 1]


def test_within_counts_examples(path4):
    assert within_counts(path4, [1, 1, 2, 2]).tolist() == [1, 1]
    assert within_counts(path4, [1, 1, 1, 1]).tolist() == [3]
    assert within_counts(path4, [1, 2, 3, 4]).tolist() == [0, 0, 0, 0]
    with pytest.raises(ValueError, match="length"):
        within_counts(path4, [1, 2, 1])


def test_star_moments(star):
    m = null_moments(graph_stats(star), 4, [2, 2])
    assert m.per_cluster_e[0] == pytest.approx(0.5, abs=1e-15)
    assert m.per_cluster_var[0] == pytest.approx(0.25, abs=1e-15)
    assert m.per_cluster_cov[0, 1] == pytest.approx(-0.25, abs=1e-15)
    assert m.weighted_var == pytest.approx(0.0, abs=1e-15)
    e, var, count = enumerate_w(star, [2, 2])
    assert count == 6 and e == Fraction(1, 2) and var == 0


def test_path_moments(path4):
    e, var, _ = enumerate_w(path4, [2, 2])
    assert (e, var) == (Fraction(1, 2), Fraction(1, 6))
    m = null_moments(graph_stats(path4), 4, [2, 2])
    assert m.weighted_e == pytest.approx(0.5, rel=1e-14)
    assert m.weighted_var == pytest.approx(1 / 6, rel=1e-14)


def test_mst_expectation_n60():
    G = build_kmst(pairwise_distances(np.random.default_rng(0).standard_normal((60, 2))), 1)
    m = null_moments(graph_stats(G), 60, [20, 20, 20])
    assert m.per_cluster_e == pytest.approx([19 / 3] * 3, rel=1e-14)


def test_null_moments_errors(path4):
    stats = graph_stats(path4)
    with pytest.raises(ValueError):
        null_moments(stats, 4, [2, 2, 0])
    with pytest.raises(ValueError):
        null_moments(stats, 4, [2, 1])
    G3 = SimilarityGraph(3, [(0, 1), (1, 2)])
    with pytest.raises(DegenerateMomentError, match="n < 4"):
        null_moments(graph_stats(G3), 3, [2, 1])


def test_null_moments_size_n_minus_one():
    # n_i = n - 1 makes the raw coefficient (n_i - 2)/(n - n_i - 1) divide by zero
    G = SimilarityGraph(5, [(0, 1), (1, 2), (2, 3), (0, 4), (1, 3)])
    m = null_moments(graph_stats(G), 5, [4, 1])
    assert np.all(np.isfinite(m.per_cluster_var))
    e, var, _ = enumerate_w(G, [4, 1])
    assert m.weighted_var == pytest.approx(float(var), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 7).flatmap(lambda n: st.tuples(
    st.just(n),
    st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda e: e[0] < e[1]),
            min_size=1),
    st.lists(st.integers(1, 3), min_size=2, max_size=3).filter(lambda s: sum(s) <= n),
)))
def test_weighted_moments_match_enumeration(case):
    n, edges, head = case
    sizes = head + [n - sum(head)] if sum(head) < n else head
    G = SimilarityGraph(n, sorted(edges))
    e, var, _ = enumerate_w(G, sizes)
    m = null_moments(graph_stats(G), n, sizes)
    assert m.weighted_e == pytest.approx(float(e), rel=1e-12, abs=1e-14)
    assert m.weighted_var == pytest.approx(float(var), rel=1e-12, abs=1e-12 * len(edges) ** 2)
    assert np.allclose(m.per_cluster_cov, m.per_cluster_cov.T)
    assert (m.per_cluster_var >= -1e-12 * len(edges) ** 2).all()


def test_q_path_example(path4):
    r = q_statistic(path4, [1, 1, 2, 2])
    assert r.valid
    assert r.W == 1.0
    assert r.E == pytest.approx(0.5, rel=1e-14)
    assert r.var == pytest.approx(1 / 6, rel=1e-14)
    assert r.Q == pytest.approx(1.5, rel=1e-13)
    assert r.z == pytest.approx(np.sqrt(1.5), rel=1e-13)


def test_q_star_is_degenerate(star):
    for labels in ([1, 1, 2, 2], [1, 2, 1, 2], [1, 2, 2, 1]):
        r = q_statistic(star, labels)
        assert not r.valid and r.reason == DEGENERATE_VARIANCE


def test_q_single_cluster_is_degenerate(path4):
    r = q_statistic(path4, [1, 1, 1, 1])
    assert not r.valid and r.reason == DEGENERATE_VARIANCE
    assert r.W == pytest.approx(r.E)


def test_q_requested_k_mismatch_is_empty_cluster(path4):
    r = q_statistic(path4, [1, 1, 2, 2], k=3)
    assert not r.valid and r.reason == EMPTY_CLUSTER


def _random_case(seed, n=12, k=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 2))
    G = build_kmst(pairwise_distances(X), 2)
    labels = rng.permutation(np.arange(n) % k) + 1
    return X, G, labels, rng


@pytest.mark.parametrize("seed", range(5))
def test_label_id_invariance(seed):
    _, G, labels, rng = _random_case(seed)
    base = q_statistic(G, labels)
    renamed = rng.permutation(np.arange(1, 4))[labels - 1] + 10
    other = q_statistic(G, renamed)
    assert (other.W, other.E, other.var, other.Q) == (base.W, base.E, base.var, base.Q)


@pytest.mark.parametrize("seed", range(5))
def test_observation_order_invariance(seed):
    X, G, labels, rng = _random_case(seed)
    perm = rng.permutation(len(X))
    G2 = build_kmst(pairwise_distances(X[perm]), 2)
    base = q_statistic(G, labels)
    moved = q_statistic(G2, labels[perm])
    assert moved.Q == pytest.approx(base.Q, rel=1e-12)
    assert moved.W == base.W


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_budget_identity(seed, k):
    _, G, _, rng = _random_case(seed)
    labels = rng.integers(1, k + 1, size=G.n)
    R = within_counts(G, labels)
    lab = ClusterLabels(labels).index
    between = int(np.sum(lab[G.edges[:, 0]] != lab[G.edges[:, 1]]))
    assert R.sum() + between == G.size


def test_select_k_tie_goes_to_smallest():
    recs = [QRecord(2, 0, 0, 1, 5.0, 0, True), QRecord(3, 0, 0, 1, 5.0, 0, True),
            QRecord(4, 0, 0, 1, 9.0, 0, False, DEGENERATE_VARIANCE)]
    assert select_k(recs) == 2
    assert select_k(recs[2:]) is None


def test_estimate_two_point_masses():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0, 1e-6, (10, 2)), 100 + rng.normal(0, 1e-6, (10, 2))])
    G = build_kmst(pairwise_distances(X), 1)
    prof = estimate_k(G, lambda k: kmeans(X, KMeansConfig(k, seed=k)), 2, 6)
    assert prof.chosen_k == 2


def test_estimate_records_clusterer_failure(path4):
    def labeler(k):
        if k == 3:
            raise RuntimeError("boom")
        return [1, 1, 2, 2] if k == 2 else [1, 2, 3, 3]

    prof = estimate_k(SimilarityGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)]), labeler, 2, 3)
    assert prof.records[1].reason.startswith(CLUSTERER_FAILURE)
    assert prof.chosen_k == 2


def test_estimate_no_valid_k(star):
    prof = estimate_k(star, lambda k: [1, 1, 2, 2], 2, 2)
    assert prof.chosen_k is None
    assert DEGENERATE_VARIANCE in prof.reason


def test_estimate_argument_checks(path4):
    with pytest.raises(ValueError):
        estimate_k(path4, lambda k: None, 1, 2)
    with pytest.raises(ValueError):
        estimate_k(path4, lambda k: None, 3, 2)
    with pytest.raises(ValueError):
        estimate_k(path4, lambda k: None, 2, 4)


def test_profile_serialisation(path4):
    prof = estimate_k(path4, lambda k: [1, 1, 2, 2], 2, 2)
    d = prof.to_dict()
    assert d["chosen_k"] == 2
    assert set(d["records"][0]) == {"k", "W", "E", "var", "Q", "z", "valid", "reason"}
    lines = prof.to_csv().splitlines()
    assert lines[0] == "k,W,E,var,Q,z,valid,reason"
    assert float(lines[1].split(",")[4]) == prof.records[0].Q


def test_null_data_q2_rarely_the_maximum():
    # iid Gaussian: the profile tends to increase with k
    hits = 0
    for seed in range(100):
        X = np.random.default_rng(seed).standard_normal((200, 10))
        G = build_kmst(pairwise_distances(X), 10)
        prof = estimate_k(G, lambda k: kmeans(X, KMeansConfig(k, restarts=3, seed=seed * 37 + k)),
                          2, 10)
        hits += prof.chosen_k != 2
    assert hits >= 80


def test_labels_from_labels():
    lab = ClusterLabels([3, 3, 1])
    assert ClusterLabels(lab).assignments.tolist() == [1, 1, 2]
