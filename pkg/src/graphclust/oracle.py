"""Brute-force checks of the closed-form permutation moments.

Exhaustive mode enumerates every distinct placement of the cluster labels
and accumulates integer sums, so its moments are exact rationals. Monte
Carlo mode shuffles the labels uniformly at random. Neither path touches the
closed-form expressions in :mod:`graphclust.edgecount`.
"""
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .edgecount import null_moments
from .graph import SimilarityGraph, build_kmst, graph_stats, pairwise_distances

MAX_PLACEMENTS = 10**6


@dataclass
class OracleEstimate:
    E: float
    var: float
    per_cluster_e: np.ndarray
    per_cluster_var: np.ndarray
    per_cluster_cov: np.ndarray
    draws: int
    stderr: dict = None


def multinomial(sizes):
    out = math.factorial(sum(sizes))
    for s in sizes:
        out //= math.factorial(s)
    return out


@lru_cache(maxsize=512)
def _placements(sizes):
    """All distinct label vectors with the given cluster sizes, one per row."""
    n = sum(sizes)
    rows = []

    def fill(labels, free, j):
        if j == len(sizes) - 1:
            for i in free:
                labels[i] = j
            rows.append(labels.copy())
            return
        for chosen in itertools.combinations(free, sizes[j]):
            for i in chosen:
                labels[i] = j
            rest = [i for i in free if i not in chosen]
            fill(labels, rest, j + 1)

    fill([0] * n, list(range(n)), 0)
    out = np.array(rows, dtype=np.int8)
    out.setflags(write=False)
    return out


def _counts(G, L, k):
    """Within-cluster counts for each row of the label matrix ``L``."""
    lu = L[:, G.edges[:, 0]]
    lv = L[:, G.edges[:, 1]]
    same = lu == lv
    return np.stack([(same & (lu == j)).sum(axis=1) for j in range(k)], axis=1)


def _check_sizes(G, sizes):
    sizes = tuple(int(s) for s in sizes)
    if not sizes or min(sizes) < 1:
        raise ValueError("cluster sizes must be positive")
    if sum(sizes) != G.n:
        raise ValueError(f"sizes sum to {sum(sizes)}, graph has n = {G.n}")
    return sizes


def _exact_from_sums(s1, s2, count, sizes):
    k = len(sizes)
    e = [Fraction(int(s1[i]), count) for i in range(k)]
    cov = [[Fraction(int(s2[i, j]), count) - e[i] * e[j] for j in range(k)] for i in range(k)]
    w = [Fraction(1, s) for s in sizes]
    e_w = sum(w[i] * e[i] for i in range(k))
    var_w = sum(w[i] * w[j] * cov[i][j] for i in range(k) for j in range(k))
    return e, cov, e_w, var_w


def exhaustive_moments(G, sizes):
    """Exact permutation moments by full enumeration of label placements."""
    sizes = _check_sizes(G, sizes)
    count = multinomial(sizes)
    if count > MAX_PLACEMENTS:
        raise ValueError(
            f"{count} placements exceed the exhaustive limit of {MAX_PLACEMENTS}; "
            "use mc_moments instead"
        )
    k = len(sizes)
    R = _counts(G, _placements(sizes), k).astype(np.int64)
    e, cov, e_w, var_w = _exact_from_sums(R.sum(axis=0), R.T @ R, count, sizes)
    var = np.array([float(cov[i][i]) for i in range(k)])
    cov_f = np.array([[float(cov[i][j]) if i != j else 0.0 for j in range(k)]
                      for i in range(k)])
    return OracleEstimate(float(e_w), float(var_w), np.array([float(x) for x in e]),
                          var, cov_f, count)


def permutation_draws(G, sizes, draws, seed, batch=20_000):
    """Within-cluster counts under ``draws`` uniform label shuffles.

    Batches use independent child seeds, so the result depends only on
    ``(sizes, draws, seed, batch)``.
    """
    sizes = _check_sizes(G, sizes)
    k = len(sizes)
    base = np.repeat(np.arange(k, dtype=np.int8), sizes)
    n_batches = -(-draws // batch)
    out = []
    for b, seq in enumerate(np.random.SeedSequence(seed).spawn(n_batches)):
        m = min(batch, draws - b * batch)
        rng = np.random.default_rng(seq)
        L = rng.permuted(np.tile(base, (m, 1)), axis=1)
        out.append(_counts(G, L, k))
    return np.concatenate(out).astype(np.int64)


def _var_stderr(x):
    c = x - x.mean()
    m2 = np.mean(c**2)
    m4 = np.mean(c**4)
    return math.sqrt(max(m4 - m2 * m2, 0.0) / len(x))


def mc_moments(G, sizes, draws=100_000, seed=0):
    """Monte Carlo estimates of the permutation moments with standard errors."""
    if draws < 1000:
        raise ValueError("draws must be >= 1000")
    sizes = _check_sizes(G, sizes)
    k = len(sizes)
    R = permutation_draws(G, sizes, draws, seed)
    # integer sums are exact, so the estimate is independent of batch order
    e, cov, e_w, var_w = _exact_from_sums(R.sum(axis=0), R.T @ R, draws, sizes)
    Rf = R.astype(float)
    W = Rf @ (1.0 / np.array(sizes, dtype=float))
    se_cov = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                prod = (Rf[:, i] - Rf[:, i].mean()) * (Rf[:, j] - Rf[:, j].mean())
                se_cov[i, j] = prod.std() / math.sqrt(draws)
    stderr = {
        "per_cluster_e": Rf.std(axis=0) / math.sqrt(draws),
        "per_cluster_var": np.array([_var_stderr(Rf[:, i]) for i in range(k)]),
        "per_cluster_cov": se_cov,
        "E": W.std() / math.sqrt(draws),
        "var": _var_stderr(W),
    }
    var = np.array([float(cov[i][i]) for i in range(k)])
    cov_f = np.array([[float(cov[i][j]) if i != j else 0.0 for j in range(k)]
                      for i in range(k)])
    return OracleEstimate(float(e_w), float(var_w), np.array([float(x) for x in e]),
                          var, cov_f, draws, stderr)


def partitions(n, max_part=None):
    """Integer partitions of ``n`` with parts in non-increasing order."""
    max_part = n if max_part is None else max_part
    if n == 0:
        yield ()
        return
    for p in range(min(n, max_part), 0, -1):
        for rest in partitions(n - p, p):
            yield (p,) + rest


def compositions(n):
    """Ordered size vectors summing to ``n``, one per set of cut points."""
    for cuts in itertools.product((False, True), repeat=n - 1):
        parts, run = [], 1
        for cut in cuts:
            if cut:
                parts.append(run)
                run = 1
            else:
                run += 1
        parts.append(run)
        yield tuple(parts)


def random_graph(n, rng):
    pairs = list(itertools.combinations(range(n), 2))
    p = rng.uniform(0.2, 1.0)
    keep = rng.random(len(pairs)) < p
    if not keep.any():
        keep[rng.integers(len(pairs))] = True
    return SimilarityGraph(n, np.array(pairs)[keep])


def rel_err(a, b, scale):
    """``|a - b| / |b|``; exact zeros are compared on ``scale`` instead."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.where(b != 0, np.abs(b), scale)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


FIELDS = ("per_cluster_e", "per_cluster_var", "per_cluster_cov", "E", "var")


def _closed(G, sizes, fault=None):
    stats = graph_stats(G)
    if fault == "ge-sign":
        stats = (stats[0], stats[1], -stats[2])
    elif fault is not None:
        raise ValueError(f"unknown fault {fault!r}")
    m = null_moments(stats, G.n, sizes)
    return {"per_cluster_e": m.per_cluster_e, "per_cluster_var": m.per_cluster_var,
            "per_cluster_cov": m.per_cluster_cov, "E": m.weighted_e, "var": m.weighted_var}


def _oracle_dict(est):
    return {f: getattr(est, f) for f in FIELDS}


def compare_exhaustive(G, sizes, fault=None):
    closed = _closed(G, sizes, fault)
    exact = _oracle_dict(exhaustive_moments(G, sizes))
    scale = max(1.0, float(G.size) ** 2)
    return max(rel_err(closed[f], exact[f], scale) for f in FIELDS)


def _as_json(d):
    return {f: np.asarray(v).tolist() for f, v in d.items()}


def verify(seed=0, n_graphs=50, mc_draws=100_000, tol=1e-12, z_gate=5.0, fault=None):
    """Run the exhaustive and Monte Carlo batteries; returns a JSON-ready report."""
    rng = np.random.default_rng(seed)
    failures = []
    max_err = 0.0
    cases = 0
    for g in range(n_graphs):
        n = int(rng.integers(4, 9))
        G = random_graph(n, rng)
        for sizes in compositions(n):
            err = compare_exhaustive(G, sizes, fault)
            cases += 1
            max_err = max(max_err, err)
            if not err <= tol:
                failures.append({"block": "exhaustive", "graph": g, "n": n,
                                 "sizes": list(sizes), "rel_err": err})

    # Monte Carlo block: 10-MST on 60 Gaussian points
    X = np.random.default_rng([seed, 60]).standard_normal((60, 2))
    G60 = build_kmst(pairwise_distances(X), 10)
    mc_cases = []
    max_z = 0.0
    for i, sizes in enumerate([(20, 20, 20), (30, 20, 10)]):
        closed = _closed(G60, sizes, fault)
        est = mc_moments(G60, sizes, mc_draws, seed=[seed, i])
        worst = 0.0
        for f in FIELDS:
            se = np.asarray(est.stderr[f], dtype=float)
            diff = np.abs(np.asarray(closed[f]) - np.asarray(getattr(est, f)))
            mask = se > 0
            z = float(np.max(diff[mask] / se[mask])) if mask.any() else 0.0
            if (~mask).any() and np.max(diff[~mask]) > 1e-9:
                z = math.inf
            worst = max(worst, z)
        max_z = max(max_z, worst)
        mc_cases.append({"sizes": list(sizes), "closed_form": _as_json(closed),
                         "oracle": _as_json(_oracle_dict(est)), "max_z": worst})
        if not worst <= z_gate:
            failures.append({"block": "monte-carlo", "sizes": list(sizes), "max_z": worst})

    star = SimilarityGraph(4, [(0, 1), (0, 2), (0, 3)])
    path = SimilarityGraph(4, [(0, 1), (1, 2), (2, 3)])
    anchors = {name: (G, (2, 2)) for name, G in (("star", star), ("path", path))}
    return {
        "closed_form": {name: _as_json(_closed(G, s, fault)) for name, (G, s) in anchors.items()},
        "oracle": {name: _as_json(_oracle_dict(exhaustive_moments(G, s)))
                   for name, (G, s) in anchors.items()},
        "max_rel_err": max_err,
        "pass": not failures,
        "exhaustive": {"graphs": n_graphs, "cases": cases, "tol": tol},
        "monte_carlo": {"draws": mc_draws, "z_gate": z_gate, "max_z": max_z, "cases": mc_cases},
        "failures": failures,
        "seed": seed,
        "fault": fault,
    }
