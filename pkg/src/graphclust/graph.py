"""Similarity graphs over a fixed set of observations.

Graphs are stored as an ``(m, 2)`` integer edge array with ``u < v`` per row,
plus a parallel weight array. Weights are kept for export and diagnostics;
nothing downstream of the graph uses them.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

METRICS = {
    "euclidean": "euclidean",
    "sqeuclidean": "sqeuclidean",
    "squared-euclidean": "sqeuclidean",
    "manhattan": "cityblock",
}


class InfeasibleGraphError(ValueError):
    """Raised when the complete graph cannot supply the requested K trees."""

    def __init__(self, requested, max_feasible):
        self.requested = requested
        self.max_feasible = max_feasible
        super().__init__(
            f"cannot build {requested}-MST: max feasible K = {max_feasible}"
        )


@dataclass(frozen=True)
class SimilarityGraph:
    n: int
    edges: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if self.weights is None:
            weights = np.full(len(edges), np.nan)
        else:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(weights) != len(edges):
            raise ValueError("one weight per edge required")
        if self.n < 2:
            raise ValueError(f"graph needs n >= 2 vertices, got {self.n}")
        if len(edges):
            if edges.min() < 0 or edges.max() >= self.n:
                raise ValueError("edge endpoint outside [0, n)")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loop in edge set")
            lo = edges.min(axis=1)
            hi = edges.max(axis=1)
            edges = np.column_stack([lo, hi])
            if len(np.unique(lo * self.n + hi)) != len(edges):
                raise ValueError("duplicate edge in edge set")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self):
        return len(self.edges)

    @property
    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def edge_set(self):
        return {(int(u), int(v)) for u, v in self.edges}


def check_data(X):
    """Coerce ``X`` to a finite 2-D float array with at least two rows."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("data matrix must be 2-D")
    if X.shape[0] < 2:
        raise ValueError(f"need at least 2 observations, got {X.shape[0]}")
    if X.shape[1] < 1:
        raise ValueError("need at least 1 feature")
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        raise ValueError(f"non-finite value in row {int(np.argmax(bad))}")
    return X


def pairwise_distances(X, metric="euclidean"):
    X = check_data(X)
    try:
        name = METRICS[metric]
    except KeyError:
        raise ValueError(
            f"unknown metric {metric!r}; choose from {sorted(METRICS)}"
        ) from None
    return squareform(pdist(X, metric=name))


def check_distances(D):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if D.shape[0] < 2:
        raise ValueError("distance matrix needs n >= 2")
    if not np.isfinite(D).all() or (D < 0).any():
        raise ValueError("distances must be finite and non-negative")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    return D


def _prim(W):
    """Minimum spanning tree of the dense weight matrix ``W``.

    ``inf`` marks unavailable edges. Edges compare by ``(weight, u, v)`` with
    ``u < v``, so the tree is unique even with tied weights. Returns ``None``
    when the available edges do not span all vertices.
    """
    n = W.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_w = W[0].copy()
    best_src = np.zeros(n, dtype=np.int64)
    idx = np.arange(n)
    tree = []
    for _ in range(n - 1):
        cand_w = np.where(in_tree, np.inf, best_w)
        m = cand_w.min()
        if not np.isfinite(m):
            return None
        tied = np.flatnonzero(cand_w == m)
        if len(tied) == 1:
            v = tied[0]
        else:
            lo = np.minimum(best_src[tied], tied)
            hi = np.maximum(best_src[tied], tied)
            v = tied[np.lexsort((hi, lo))[0]]
        u = best_src[v]
        tree.append((min(u, v), max(u, v), m))
        in_tree[v] = True
        # relax via v; on equal weight prefer the lexicographically smaller edge
        row = W[v]
        lo_new = np.minimum(idx, v)
        hi_new = np.maximum(idx, v)
        lo_old = np.minimum(idx, best_src)
        hi_old = np.maximum(idx, best_src)
        better = (row < best_w) | (
            (row == best_w)
            & np.isfinite(row)
            & ((lo_new < lo_old) | ((lo_new == lo_old) & (hi_new < hi_old)))
        )
        better &= ~in_tree
        best_w = np.where(better, row, best_w)
        best_src = np.where(better, v, best_src)
    return tree


def kmst_trees(D, K):
    """The K successive edge-disjoint minimum spanning trees, as edge lists."""
    D = check_distances(D)
    if K < 1:
        raise ValueError("K must be >= 1")
    n = D.shape[0]
    W = D.copy()
    np.fill_diagonal(W, np.inf)
    trees = []
    for j in range(K):
        tree = _prim(W)
        if tree is None:
            raise InfeasibleGraphError(K, j)
        for u, v, _ in tree:
            W[u, v] = W[v, u] = np.inf
        trees.append(tree)
    return trees


def build_kmst(D, K):
    """Union of K edge-disjoint MSTs, each extracted from the edges left over
    by its predecessors."""
    trees = kmst_trees(D, K)
    n = np.asarray(D).shape[0]
    flat = [e for tree in trees for e in tree]
    edges = np.array([(u, v) for u, v, _ in flat], dtype=np.int64)
    weights = np.array([w for _, _, w in flat])
    return SimilarityGraph(n, edges, weights)


def build_knn(D, K):
    """Symmetrised K-nearest-neighbour graph; neighbour ties go to the smaller
    vertex index."""
    D = check_distances(D)
    n = D.shape[0]
    if not 1 <= K <= n - 1:
        raise ValueError(f"K-NN needs 1 <= K <= n-1 = {n - 1}, got {K}")
    W = D.copy()
    np.fill_diagonal(W, np.inf)
    nbrs = np.argsort(W, axis=1, kind="stable")[:, :K]
    u = np.repeat(np.arange(n), K)
    v = nbrs.ravel()
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    keys = np.unique(lo * n + hi)
    edges = np.column_stack([keys // n, keys % n])
    return SimilarityGraph(n, edges, D[edges[:, 0], edges[:, 1]])


def graph_stats(G):
    """Return ``(|G|, G_C, G_E)``.

    ``G_C = sum_t deg(t)^2 - 4|G|^2/n`` and ``G_E = 2|G|^2/(n(n-1))``.
    """
    n = G.n
    m = G.size
    deg = G.degrees.astype(np.int64)
    sum_sq = int(deg @ deg)
    g_c = sum_sq - 4.0 * m * m / n
    g_e = 2.0 * m * m / (n * (n - 1))
    return m, g_c, g_e


def graph_from_edges(n, records):
    """Build a simple graph from ``(u, v)`` or ``(u, v, w)`` records.

    Duplicate unordered pairs are collapsed, keeping the first weight seen.
    Errors name the 1-based position of the offending record.
    """
    if n < 2:
        raise ValueError(f"graph needs n >= 2 vertices, got {n}")
    seen = {}
    for line_no, rec in enumerate(records, start=1):
        if len(rec) not in (2, 3):
            raise ValueError(f"expected u,v[,w] at line {line_no}")
        u, v = int(rec[0]), int(rec[1])
        w = float(rec[2]) if len(rec) == 3 else np.nan
        if u == v:
            raise ValueError(f"self-loop at line {line_no}")
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"vertex index out of range [0, {n}) at line {line_no}")
        seen.setdefault((min(u, v), max(u, v)), w)
    edges = np.array(list(seen), dtype=np.int64).reshape(-1, 2)
    return SimilarityGraph(n, edges, np.array(list(seen.values()), dtype=float))


def parse_edge_list(text, n=None):
    """Parse edge-list text: ``u,v`` or ``u,v,w`` per line, ``#`` comments.

    ``n`` defaults to one more than the largest vertex index.
    """
    records = []
    line_nos = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in (2, 3):
            raise ValueError(f"expected u,v[,w] at line {line_no}")
        try:
            rec = (int(parts[0]), int(parts[1]))
            if len(parts) == 3:
                rec = rec + (float(parts[2]),)
        except ValueError:
            raise ValueError(f"malformed edge at line {line_no}") from None
        records.append(rec)
        line_nos.append(line_no)
    if n is None:
        n = 1 + max((max(r[0], r[1]) for r in records), default=-1)
    try:
        return graph_from_edges(n, records)
    except ValueError as exc:
        # remap record position to file line
        msg = str(exc)
        if " at line " in msg:
            head, pos = msg.rsplit(" at line ", 1)
            msg = f"{head} at line {line_nos[int(pos) - 1]}"
        raise ValueError(msg) from None


def read_edge_list(path, n=None):
    with open(path, encoding="utf-8") as fh:
        return parse_edge_list(fh.read(), n=n)


def format_edge_list(G):
    buf = io.StringIO()
    for (u, v), w in zip(G.edges, G.weights):
        if np.isnan(w):
            buf.write(f"{u},{v}\n")
        else:
            buf.write(f"{u},{v},{float(w)!r}\n")
    return buf.getvalue()


def read_matrix(path):
    """Read a numeric CSV; a non-numeric first row is taken as a header."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    try:
        [float(x) for x in rows[0][1]]
    except ValueError:
        rows = rows[1:]
    data = []
    width = None
    for line_no, row in rows:
        try:
            vals = [float(x) for x in row]
        except ValueError:
            raise ValueError(f"{path}: non-numeric value at line {line_no}") from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ValueError(
                f"{path}: expected {width} columns at line {line_no}, got {len(vals)}"
            )
        if not all(np.isfinite(vals)):
            raise ValueError(f"{path}: non-finite value at line {line_no}")
        data.append(vals)
    if not data:
        raise ValueError(f"{path}: no data rows")
    return np.array(data, dtype=float)
