"""k-means backend, clustering accuracy, and label-file intake."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .edgecount import ClusterLabels, as_labels
from .graph import check_data


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    restarts: int = 10
    max_iter: int = 100
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.k < 1 or self.restarts < 1 or self.max_iter < 1:
            raise ValueError("k, restarts and max_iter must all be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class KMeansResult:
    labels: ClusterLabels
    centers: np.ndarray
    wcss: float
    n_iter: int
    trace: list


def _sq_dists(X, x_sq, C):
    d = x_sq[:, None] - 2.0 * (X @ C.T) + np.einsum("ij,ij->i", C, C)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(X, x_sq, k, rng):
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, x_sq, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a center
            i = rng.integers(n)
        else:
            i = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            i = min(i, n - 1)
        centers[j] = X[i]
        closest = np.minimum(closest, _sq_dists(X, x_sq, centers[j:j + 1])[:, 0])
    return centers


def _wcss(X, centers, assign):
    diff = X - centers[assign]
    return float(np.einsum("ij,ij->", diff, diff))


def _repair_empty(X, centers, assign, k):
    """Give every empty cluster the point farthest from its own center."""
    counts = np.bincount(assign, minlength=k)
    empty = np.flatnonzero(counts == 0)
    if len(empty) == 0:
        return assign, centers
    assign = assign.copy()
    centers = centers.copy()
    diff = X - centers[assign]
    resid = np.einsum("ij,ij->i", diff, diff)
    for j in empty:
        # never strip a cluster of its last point
        resid[counts[assign] <= 1] = -1.0
        far = int(np.argmax(resid))
        counts[assign[far]] -= 1
        assign[far] = j
        counts[j] = 1
        centers[j] = X[far]
        resid[far] = -1.0
    return assign, centers


def _means(X, assign, k):
    onehot = np.zeros((k, len(X)))
    onehot[assign, np.arange(len(X))] = 1.0
    return (onehot @ X) / onehot.sum(axis=1)[:, None]


def _lloyd(X, x_sq, centers, max_iter, tol_abs):
    k = len(centers)
    dist = _sq_dists(X, x_sq, centers)
    assign = np.argmin(dist, axis=1)
    # trace from the expanded distances; exact WCSS is computed once at the end
    trace = [float(dist.min(axis=1).sum())]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        assign, _ = _repair_empty(X, centers, assign, k)
        new_centers = _means(X, assign, k)
        shift = float(np.sum((new_centers - centers) ** 2))
        centers = new_centers
        dist = _sq_dists(X, x_sq, centers)
        new_assign = np.argmin(dist, axis=1)
        trace.append(float(dist.min(axis=1).sum()))
        done = shift <= tol_abs or np.array_equal(new_assign, assign)
        assign = new_assign
        if done:
            break
    assign, centers = _repair_empty(X, centers, assign, k)
    return assign, centers, n_iter, trace


def kmeans_fit(X, cfg):
    X = check_data(X)
    n = len(X)
    if cfg.k > n:
        raise ValueError(f"k = {cfg.k} exceeds n = {n}")
    x_sq = np.einsum("ij,ij->i", X, X)
    tol_abs = cfg.tol * float(np.var(X, axis=0).sum())
    best = None
    for seq in np.random.SeedSequence(cfg.seed).spawn(cfg.restarts):
        rng = np.random.default_rng(seq)
        centers = _plusplus(X, x_sq, cfg.k, rng)
        assign, centers, n_iter, trace = _lloyd(X, x_sq, centers, cfg.max_iter, tol_abs)
        wcss = _wcss(X, centers, assign)
        # strict < keeps the earliest restart on ties
        if best is None or wcss < best.wcss:
            best = KMeansResult(ClusterLabels(assign), centers, wcss, n_iter, trace)
    return best


def kmeans(X, cfg):
    return kmeans_fit(X, cfg).labels


@dataclass
class AccuracyReport:
    accuracy: float
    matching: dict


def accuracy(true_labels, est_labels):
    """Best fraction of agreements over one-to-one renamings of the estimated ids."""
    t = as_labels(true_labels)
    e = as_labels(est_labels)
    if t.n != e.n:
        raise ValueError(f"label lengths differ: {t.n} vs {e.n}")
    if t.k > 64 or e.k > 64:
        raise ValueError("accuracy supports at most 64 clusters")
    agree = np.zeros((e.k, t.k), dtype=np.int64)
    np.add.at(agree, (e.index, t.index), 1)
    rows, cols = linear_sum_assignment(agree, maximize=True)
    matching = {int(r) + 1: int(c) + 1 for r, c in zip(rows, cols)}
    return AccuracyReport(float(agree[rows, cols].sum()) / t.n, matching)


def load_labels(path):
    values = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise ValueError(f"{path}: non-integer label at line {line_no}") from None
    if not values:
        raise ValueError(f"{path}: empty label file at line 1")
    return ClusterLabels(np.array(values))


def write_labels(path, labels):
    labels = as_labels(labels)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(f"{a}\n" for a in labels.assignments))
