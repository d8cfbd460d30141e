"""Simulation scenarios, replicate runner and selection-frequency tables."""
import configparser
import csv
import dataclasses
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from threadpoolctl import threadpool_limits

from . import graph as graph_mod
from .cluster import KMeansConfig, accuracy, kmeans
from .edgecount import ClusterLabels, as_labels, estimate_k

METHODS = ("graph-based", "silhouette")
SCENARIO_IDS = ("I", "II", "III", "IV", "V", "null")


@dataclass(frozen=True)
class ScenarioSpec:
    id: str
    family: str
    sizes: tuple
    d: int = 400
    nblocks: int = 1
    blocks: tuple = ()
    shift: float = 0.0
    scales: tuple = ()
    rho: float = 0.0
    rates: tuple = ()
    offsets: tuple = ()
    seed: int = 0
    version: int = 0

    def __post_init__(self):
        k = len(self.sizes)
        if k < 1 or min(self.sizes) < 1:
            raise ValueError(f"scenario {self.id}: sizes must be positive")
        if self.d < 1:
            raise ValueError(f"scenario {self.id}: d must be >= 1")
        if self.family == "gaussian":
            if len(self.blocks) != k or len(self.scales) != k:
                raise ValueError(f"scenario {self.id}: blocks/scales need {k} entries")
            if any(b is not None and not 0 <= b < self.nblocks for b in self.blocks):
                raise ValueError(f"scenario {self.id}: block index out of range")
            if not -1 < self.rho < 1:
                raise ValueError(f"scenario {self.id}: rho must lie in (-1, 1)")
        elif self.family == "exponential":
            if len(self.rates) != k or len(self.offsets) != k:
                raise ValueError(f"scenario {self.id}: rates/offsets need {k} entries")
        else:
            raise ValueError(f"scenario {self.id}: unknown family {self.family!r}")

    @property
    def true_k(self):
        return len(self.sizes)

    @property
    def n(self):
        return int(sum(self.sizes))


def _floats(text):
    return tuple(float(x) for x in text.split(","))


def load_scenarios(path=None):
    """Read scenario definitions; ``path=None`` uses the bundled file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    if path is None:
        parser.read_string(resources.files(__package__).joinpath("scenarios.ini").read_text())
    else:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    version = parser.getint("meta", "version", fallback=0)
    out = {}
    for name in parser.sections():
        if name == "meta":
            continue
        sec = parser[name]
        kw = dict(
            id=name,
            family=sec.get("family", "gaussian"),
            sizes=tuple(int(x) for x in sec["sizes"].split(",")),
            d=sec.getint("d", 400),
            version=version,
        )
        if kw["family"] == "gaussian":
            kw.update(
                nblocks=sec.getint("nblocks", 1),
                blocks=tuple(None if b.strip() == "-" else int(b)
                             for b in sec["blocks"].split(",")),
                shift=sec.getfloat("shift", 0.0),
                scales=_floats(sec["scales"]),
                rho=sec.getfloat("rho", 0.0),
            )
        else:
            kw.update(rates=_floats(sec["rates"]), offsets=_floats(sec["offsets"]))
        out[name] = ScenarioSpec(**kw)
    return out


def get_scenario(scenario_id, path=None, **overrides):
    scenarios = load_scenarios(path)
    if scenario_id not in scenarios:
        raise ValueError(
            f"unknown scenario {scenario_id!r}; choose from {sorted(scenarios)}"
        )
    return dataclasses.replace(scenarios[scenario_id], **overrides)


def _ar1_noise(rng, n, d, rho):
    e = rng.standard_normal((n, d))
    if rho == 0:
        return e
    z = np.empty_like(e)
    z[:, 0] = e[:, 0]
    c = np.sqrt(1.0 - rho * rho)
    for j in range(1, d):
        z[:, j] = rho * z[:, j - 1] + c * e[:, j]
    return z


def generate(spec, rng=None):
    """Draw ``(X, true_labels)``; deterministic in ``spec.seed`` unless an
    explicit generator is passed."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    parts = []
    if spec.family == "gaussian":
        edges = np.linspace(0, spec.d, spec.nblocks + 1).round().astype(int)
        for n_j, block, scale in zip(spec.sizes, spec.blocks, spec.scales):
            mean = np.zeros(spec.d)
            if block is not None:
                mean[edges[block]:edges[block + 1]] = spec.shift
            parts.append(mean + scale * _ar1_noise(rng, n_j, spec.d, spec.rho))
    else:
        for n_j, rate, offset in zip(spec.sizes, spec.rates, spec.offsets):
            parts.append(offset + rng.exponential(1.0 / rate, size=(n_j, spec.d)))
    X = np.vstack(parts)
    labels = np.repeat(np.arange(1, spec.true_k + 1), spec.sizes)
    return X, ClusterLabels(labels)


def silhouette_scores(D, labels):
    """Per-observation silhouette widths from a distance matrix; singletons
    score 0."""
    labels = as_labels(labels)
    idx = labels.index
    sizes = labels.sizes
    onehot = np.zeros((len(idx), labels.k))
    onehot[np.arange(len(idx)), idx] = 1.0
    sums = D @ onehot
    own = sums[np.arange(len(idx)), idx]
    own_n = sizes[idx]
    a = np.divide(own, own_n - 1, out=np.zeros_like(own), where=own_n > 1)
    mean_other = sums / sizes[None, :]
    mean_other[np.arange(len(idx)), idx] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.divide(b - a, denom, out=np.zeros_like(a), where=denom > 0)
    s[own_n == 1] = 0.0
    return s


def silhouette_baseline(D, labels_by_k):
    """Pick the k with the largest mean silhouette; ties go to the smallest k.

    Returns ``(chosen_k, {k: mean silhouette})``.
    """
    scores = {}
    for k in sorted(labels_by_k):
        if k < 2:
            raise ValueError("silhouette needs k >= 2")
        scores[k] = float(silhouette_scores(D, labels_by_k[k]).mean())
    if not scores:
        return None, scores
    best = max(scores.values())
    return min(k for k, v in scores.items() if v == best), scores


def distance_ratio(X, labels):
    """Mean between-cluster distance over mean within-cluster distance."""
    labels = as_labels(labels)
    D = graph_mod.pairwise_distances(X)
    same = labels.index[:, None] == labels.index[None, :]
    off = ~np.eye(len(D), dtype=bool)
    return float(D[~same].mean() / D[same & off].mean())


def equidistance_ratios(dims, n_per=100, separation=11.5, scales=(1.0, 1.0, 1.5), seed=0):
    """Distance ratio of three-cluster data with a fixed center separation,
    one value per dimension in ``dims``."""
    out = []
    for d in dims:
        rng = np.random.default_rng([seed, d])
        centers = np.zeros((3, d))
        centers[1, 0] = separation
        centers[2, min(1, d - 1)] += separation
        X = np.vstack([c + s * rng.standard_normal((n_per, d))
                       for c, s in zip(centers, scales)])
        out.append(distance_ratio(X, np.repeat([1, 2, 3], n_per)))
    return out


@dataclass
class FrequencyTable:
    method: str
    counts: dict
    replicates: int
    failures: int = 0
    kmin: int = 2
    kmax: int = 10

    def row(self, kmax=None):
        kmax = self.kmax if kmax is None else kmax
        return [self.counts.get(k, 0) if k >= self.kmin else "-" for k in range(1, kmax + 1)]


def tables_to_csv(tables, kmax=10):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + list(range(1, kmax + 1)) + ["failures"])
    for t in tables:
        w.writerow([t.method] + t.row(kmax) + [t.failures])
    return buf.getvalue()


@dataclass
class ReplicateResult:
    rep: int
    chosen: dict
    accuracy: dict
    q: dict = field(default_factory=dict)
    silhouette: dict = field(default_factory=dict)
    graph_builds: int = 0
    error: str = ""


def _rep_seeds(seed, rep):
    data_seq, cluster_seq = np.random.SeedSequence([seed, rep]).spawn(2)
    return data_seq, int(cluster_seq.generate_state(1, np.uint64)[0])


def run_replicate(spec, rep, methods=METHODS, kmin=2, kmax=10, graph_k=10,
                  metric="euclidean", restarts=10):
    """One replicate: generate, build the graph once, cluster per k, score."""
    data_seq, cluster_seed = _rep_seeds(spec.seed, rep)
    out = ReplicateResult(rep, {}, {})
    try:
        with threadpool_limits(1):
            X, truth = generate(spec, np.random.default_rng(data_seq))
            D = graph_mod.pairwise_distances(X, metric)
            G = graph_mod.build_kmst(D, graph_k)
            out.graph_builds += 1
            kmin_eff = max(2, kmin)
            labels = {}
            for k in sorted(set(range(kmin_eff, kmax + 1)) | {spec.true_k}):
                if k > len(X):
                    continue
                labels[k] = kmeans(X, KMeansConfig(k, restarts=restarts, seed=cluster_seed + k))
                out.accuracy[k] = accuracy(truth, labels[k]).accuracy
            ks = [k for k in range(kmin_eff, kmax + 1) if k in labels]
            if "graph-based" in methods:
                profile = estimate_k(G, labels.__getitem__, ks[0], ks[-1])
                out.chosen["graph-based"] = profile.chosen_k
                out.q = {r.k: r.Q for r in profile.records}
            if "silhouette" in methods:
                k_sil, out.silhouette = silhouette_baseline(D, {k: labels[k] for k in ks})
                out.chosen["silhouette"] = k_sil
    except Exception as exc:  # noqa: BLE001 - recorded per replicate
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def _run_one(args):
    return run_replicate(*args[0], **args[1])


def thread_count(threads=None):
    if threads is None:
        threads = int(os.environ.get("GRAPHCLUST_THREADS", "1") or 1)
    return max(1, threads)


def run_replicates(spec, methods=METHODS, reps=100, kmin=2, kmax=10, graph_k=10,
                   metric="euclidean", restarts=10, threads=None):
    """Run ``reps`` replicates and tally the chosen k per method.

    Returns ``(tables, results)``: a :class:`FrequencyTable` per method and
    the per-replicate records, ordered by replicate index.
    """
    unknown = set(methods) - set(METHODS)
    if unknown or not methods:
        raise ValueError(f"methods must be a non-empty subset of {METHODS}")
    methods = tuple(m for m in METHODS if m in set(methods))
    if reps < 1:
        raise ValueError("reps must be >= 1")
    kw = dict(methods=methods, kmin=kmin, kmax=kmax, graph_k=graph_k,
              metric=metric, restarts=restarts)
    jobs = [((spec, rep), kw) for rep in range(reps)]
    n_workers = min(thread_count(threads), reps)
    if n_workers == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(n_workers) as ex:
            results = list(ex.map(_run_one, jobs))
    tables = []
    for m in methods:
        counts = {}
        failures = 0
        for r in results:
            k = r.chosen.get(m)
            if r.error or k is None:
                failures += 1
            else:
                counts[k] = counts.get(k, 0) + 1
        tables.append(FrequencyTable(m, counts, reps, failures, max(2, kmin), kmax))
    return tables, results
