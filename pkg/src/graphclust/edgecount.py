"""Within-cluster edge counts and the standardized statistic used to pick k.

For a labelling with cluster sizes ``n_1..n_k`` on a graph ``G`` the
statistic is

    Q(k) = (W - E[W])^2 / Var[W],   W = sum_i R_i / n_i,

where ``R_i`` counts edges with both endpoints in cluster ``i`` and the
moments are taken under uniform reshuffling of the labels. The moments are
exact closed forms, so no resampling is needed to evaluate ``Q``.
"""
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import graph_stats

DEGENERATE_VARIANCE = "degenerate-variance"
EMPTY_CLUSTER = "empty-cluster"
CLUSTERER_FAILURE = "clusterer-failure"


class DegenerateMomentError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterLabels:
    """Cluster assignment with ids compacted to ``1..k`` in order of first
    appearance."""

    assignments: np.ndarray

    def __post_init__(self):
        a = self.assignments
        if isinstance(a, ClusterLabels):
            a = a.assignments
        a = np.asarray(a).reshape(-1)
        if len(a) == 0:
            raise ValueError("labels must be non-empty")
        _, first, inverse = np.unique(a, return_index=True, return_inverse=True)
        # rank distinct ids by first appearance
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        object.__setattr__(self, "assignments", rank[inverse].astype(np.int64) + 1)

    @property
    def n(self):
        return len(self.assignments)

    @property
    def k(self):
        return int(self.assignments.max())

    @property
    def sizes(self):
        return np.bincount(self.assignments - 1, minlength=self.k)

    @property
    def index(self):
        """0-based cluster index per observation."""
        return self.assignments - 1


def as_labels(labels):
    return labels if isinstance(labels, ClusterLabels) else ClusterLabels(labels)


def within_counts(G, labels):
    labels = as_labels(labels)
    if labels.n != G.n:
        raise ValueError(f"labels have length {labels.n}, graph has n = {G.n}")
    cu = labels.index[G.edges[:, 0]]
    cv = labels.index[G.edges[:, 1]]
    return np.bincount(cu[cu == cv], minlength=labels.k)


@dataclass
class NullMoments:
    per_cluster_e: np.ndarray
    per_cluster_var: np.ndarray
    per_cluster_cov: np.ndarray
    weighted_e: float
    weighted_var: float


def null_moments(stats, n, sizes):
    """Permutation-null moments of the R_i and of W = sum R_i / n_i.

    ``stats`` is ``(|G|, G_C, G_E)`` as returned by :func:`graph_stats`.
    """
    size_g, g_c, g_e = stats
    sizes = np.asarray(sizes, dtype=float).reshape(-1)
    k = len(sizes)
    if k == 0 or (sizes < 1).any():
        raise ValueError("every cluster needs at least one member")
    if sizes.sum() != n:
        raise ValueError(f"cluster sizes sum to {sizes.sum():g}, expected n = {n}")
    e = size_g * sizes * (sizes - 1) / (n * (n - 1))
    if k == 1:
        var = np.zeros(1)
        cov = np.zeros((1, 1))
        return NullMoments(e, var, cov, float(e[0] / n), 0.0)
    if n < 4:
        raise DegenerateMomentError("n < 4: null variance undefined")
    denom = n * (n - 1) * (n - 2) * (n - 3)
    # (n_i - 2) / (n - n_i - 1) * G_C multiplied through, so n_i = n - 1 is fine
    var = (
        sizes * (sizes - 1) * (n - sizes) / denom
        * ((n - sizes - 1) * (size_g - g_e) + (sizes - 2) * g_c)
    )
    pair = sizes * (sizes - 1)
    cov = np.outer(pair, pair) / denom * (size_g - g_c - g_e)
    np.fill_diagonal(cov, 0.0)
    w = 1.0 / sizes
    weighted_e = float(w @ e)
    weighted_var = float(w**2 @ var + w @ cov @ w)
    return NullMoments(e, var, cov, weighted_e, weighted_var)


def variance_floor(size_g, n):
    return 1e-10 * max(1.0, size_g**2 / n**2)


@dataclass
class QRecord:
    k: int
    W: float
    E: float
    var: float
    Q: float
    z: float
    valid: bool
    reason: str = ""


def q_statistic(G, labels, k=None, stats=None):
    """Evaluate Q for one labelling; ``k`` is the requested cluster count.

    A labelling with fewer distinct ids than requested is marked
    ``empty-cluster``. A null variance at or below the floor is marked
    ``degenerate-variance``; such records never win the argmax.
    """
    labels = as_labels(labels)
    k = labels.k if k is None else k
    stats = graph_stats(G) if stats is None else stats
    counts = within_counts(G, labels)
    sizes = labels.sizes
    mom = null_moments(stats, G.n, sizes)
    W = float(counts @ (1.0 / sizes))
    E, var = mom.weighted_e, mom.weighted_var
    nan = float("nan")
    if labels.k != k:
        return QRecord(k, W, E, var, nan, nan, False, EMPTY_CLUSTER)
    if var <= variance_floor(stats[0], G.n):
        return QRecord(k, W, E, var, nan, nan, False, DEGENERATE_VARIANCE)
    z = (W - E) / math.sqrt(var)
    return QRecord(k, W, E, var, (W - E) ** 2 / var, z, True)


@dataclass
class QProfile:
    records: list
    chosen_k: int = None
    reason: str = ""
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"chosen_k": self.chosen_k}
        if self.reason:
            out["reason"] = self.reason
        out["records"] = [_record_dict(r) for r in self.records]
        if self.meta:
            out["meta"] = self.meta
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "W", "E", "var", "Q", "z", "valid", "reason"])
        for r in self.records:
            writer.writerow([r.k, repr(r.W), repr(r.E), repr(r.var), repr(r.Q),
                             repr(r.z), int(r.valid), r.reason])
        return buf.getvalue()


def _record_dict(r):
    d = asdict(r)
    # JSON has no NaN; undefined statistics become null
    for key in ("W", "E", "var", "Q", "z"):
        if d[key] is not None and not math.isfinite(d[key]):
            d[key] = None
    return d


def select_k(records):
    """k of the largest valid Q; ties go to the smallest k."""
    best = None
    for r in sorted(records, key=lambda r: r.k):
        if r.valid and (best is None or r.Q > best.Q):
            best = r
    return None if best is None else best.k


def estimate_k(G, labeler, kmin=2, kmax=10):
    """Score ``labeler(k)`` for every k in ``[kmin, kmax]`` on the one graph ``G``.

    A labeler that raises marks that k as ``clusterer-failure`` and the scan
    continues.
    """
    if kmin < 2:
        raise ValueError("kmin must be >= 2; Q(1) is always degenerate")
    if kmax < kmin:
        raise ValueError(f"kmin = {kmin} exceeds kmax = {kmax}")
    if kmax > G.n - 1:
        raise ValueError(f"kmax = {kmax} exceeds n - 1 = {G.n - 1}")
    if G.n < 4:
        raise DegenerateMomentError("n < 4: null variance undefined")
    stats = graph_stats(G)
    records = []
    nan = float("nan")
    for k in range(kmin, kmax + 1):
        try:
            labels = labeler(k)
        except Exception as exc:  # noqa: BLE001 - any clusterer error invalidates k
            records.append(QRecord(k, nan, nan, nan, nan, nan, False,
                                   f"{CLUSTERER_FAILURE}: {exc}"))
            continue
        records.append(q_statistic(G, labels, k=k, stats=stats))
    chosen = select_k(records)
    reason = ""
    if chosen is None:
        reasons = sorted({r.reason.split(":")[0] for r in records})
        reason = "no valid k: " + ", ".join(reasons)
    return QProfile(records, chosen, reason)
