"""From-scratch K-means, DBSCAN and spectral clustering, plus the grid sweep
that turns one dataset into a large clustering ensemble.

All engines are deterministic given their hyperparameters (and seed, where
one applies), so a clustering's provenance is enough to reproduce it.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import Dataset, distance_stats

logger = logging.getLogger(__name__)

#: Label used for DBSCAN points that belong to no cluster.
NOISE = -1

MAX_LLOYD_ITER = 300

# Rows of the spectral embedding with norm below this are isolated vertices
# and stay at zero instead of being normalized.
_ZERO_ROW_TOL = 1e-12


class SpectralDegenerateError(RuntimeError):
    """The affinity graph cannot support the requested embedding."""


@dataclass(frozen=True)
class Provenance:
    """Algorithm name + hyperparameters (+ seed) identifying one clustering."""

    algorithm: str
    params: tuple[tuple[str, Any], ...]
    seed: int | None = None

    @classmethod
    def make(cls, algorithm: str, seed: int | None = None, **params) -> "Provenance":
        return cls(algorithm, tuple(sorted(params.items())), seed)

    def param(self, key: str):
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)

    def as_dict(self) -> dict:
        return {"algorithm": self.algorithm, "params": dict(self.params),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls.make(d["algorithm"], seed=d.get("seed"), **d.get("params", {}))

    def label(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params)
        if self.seed is not None:
            inner += f", seed={self.seed}"
        return f"{self.algorithm}({inner})"


@dataclass(frozen=True, eq=False)
class Clustering:
    """One assignment of every instance to a cluster id (or NOISE)."""

    assignment: np.ndarray
    provenance: Provenance

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.assignment, dtype=np.int64))
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    @property
    def n_clusters(self) -> int:
        """Distinct non-noise cluster ids."""
        return int(np.unique(self.assignment[self.assignment != NOISE]).size)

    @property
    def n_noise(self) -> int:
        return int(np.count_nonzero(self.assignment == NOISE))


# ---------------------------------------------------------------------------
# K-means (Lloyd)
# ---------------------------------------------------------------------------

@dataclass
class LloydResult:
    labels: np.ndarray
    centers: np.ndarray
    objective_trace: list[float]
    converged: bool
    n_iter: int


def _squared_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # ||x - c||^2 expanded; clip tiny negatives from cancellation
    d2 = (
        (X * X).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * X @ centers.T
    )
    return np.maximum(d2, 0.0)


def _repair_empty(X, labels, centers, n_clusters):
    """Reseed each empty cluster at the point farthest from its own centroid.

    A point is only stolen from a cluster with more than one member, and each
    point is stolen at most once per repair pass.
    """
    counts = np.bincount(labels, minlength=n_clusters)
    empties = np.flatnonzero(counts == 0)
    if empties.size == 0:
        return labels
    stolen: list[int] = []
    for k in empties:
        own = np.einsum("ij,ij->i", X - centers[labels], X - centers[labels])
        eligible = counts[labels] > 1
        if stolen:
            eligible[stolen] = False
        if not eligible.any():
            break
        own[~eligible] = -np.inf
        j = int(own.argmax())
        counts[labels[j]] -= 1
        labels[j] = k
        counts[k] = 1
        centers[k] = X[j]
        stolen.append(j)
    return labels


def lloyd(points: np.ndarray, n_clusters: int, seed: int,
          max_iter: int = MAX_LLOYD_ITER) -> LloydResult:
    """Lloyd iterations from a seeded random-instance initialization.

    Stops at an assignment fixpoint or after ``max_iter`` iterations. The
    recorded objective (within-cluster sum of squares against the centers
    current at assignment time) is non-increasing across iterations.
    """
    X = np.asarray(points, dtype=float)
    n = X.shape[0]
    if not 1 <= n_clusters <= n:
        raise ValueError(f"need 1 <= n_clusters <= {n}, got {n_clusters}")
    rng = np.random.default_rng(seed)
    centers = X[rng.choice(n, size=n_clusters, replace=False)].copy()
    labels = np.full(n, -1, dtype=np.int64)
    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _squared_distances(X, centers)
        new_labels = d2.argmin(axis=1).astype(np.int64)
        new_labels = _repair_empty(X, new_labels, centers, n_clusters)
        diff = X - centers[new_labels]
        trace.append(float(np.einsum("ij,ij->", diff, diff)))
        if np.array_equal(new_labels, labels):
            converged = True
            break
        labels = new_labels
        for k in range(n_clusters):
            members = labels == k
            if members.any():
                centers[k] = X[members].mean(axis=0)
    return LloydResult(labels, centers, trace, converged, it)


def run_kmeans(dataset: Dataset, n_clusters: int, seed: int) -> Clustering:
    """K-means clustering; every instance assigned, exactly K non-empty clusters."""
    if n_clusters > dataset.n:
        raise ValueError(
            f"n_clusters={n_clusters} exceeds dataset size {dataset.n}"
        )
    res = lloyd(dataset.instances, n_clusters, seed)
    if not res.converged:
        logger.warning(
            "kmeans K=%d seed=%d stopped at the %d-iteration cap",
            n_clusters, seed, MAX_LLOYD_ITER,
        )
    prov = Provenance.make("kmeans", seed=seed, K=n_clusters)
    return Clustering(res.labels, prov)


# ---------------------------------------------------------------------------
# DBSCAN
# ---------------------------------------------------------------------------

def run_dbscan(dataset: Dataset, eps: float, min_pts: int, *,
               dists: np.ndarray | None = None) -> Clustering:
    """Density-based clustering.

    A point is core iff at least ``min_pts`` points (itself included) lie
    within ``eps``. Clusters are grown from core points in instance order, so
    a border point reachable from several clusters joins the one discovered
    first (the lowest cluster id). Unreached points are labeled NOISE.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if min_pts < 2:
        raise ValueError("min_pts must be at least 2")
    X = dataset.instances
    n = X.shape[0]
    D = dists if dists is not None else squareform(pdist(X))
    adj = D <= eps
    core = adj.sum(axis=1) >= min_pts
    labels = np.full(n, NOISE, dtype=np.int64)
    cid = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cid
        frontier = [i]
        while frontier:
            j = frontier.pop()
            reached = np.flatnonzero(adj[j] & (labels == NOISE))
            labels[reached] = cid
            frontier.extend(reached[core[reached]].tolist())
        cid += 1
    prov = Provenance.make("dbscan", eps=float(eps), min_pts=int(min_pts))
    return Clustering(labels, prov)


# ---------------------------------------------------------------------------
# Spectral clustering
# ---------------------------------------------------------------------------

def knn_affinity(X: np.ndarray, k: int, dists: np.ndarray | None = None) -> np.ndarray:
    """Unit-weight kNN graph symmetrized by union (edge if either lists the other)."""
    n = X.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < {n}, got {k}")
    D = (dists if dists is not None else squareform(pdist(X))).copy()
    np.fill_diagonal(D, np.inf)
    idx = np.argsort(D, axis=1, kind="stable")[:, :k]
    W = np.zeros((n, n))
    W[np.arange(n)[:, None], idx] = 1.0
    return np.maximum(W, W.T)


def gaussian_affinity(X: np.ndarray, sigma: float,
                      dists: np.ndarray | None = None) -> np.ndarray:
    """Full Gaussian affinity exp(-d^2 / (2 sigma^2)) with zero diagonal."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    D = dists if dists is not None else squareform(pdist(X))
    W = np.exp(-(D * D) / (2.0 * sigma * sigma))
    np.fill_diagonal(W, 0.0)
    return W


def spectral_embedding(X: np.ndarray, graph: tuple[str, float], n_vectors: int,
                       dists: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues/eigenvectors (smallest first) of the symmetric normalized
    Laplacian of the given affinity graph, truncated to ``n_vectors`` columns.

    The full spectrum is computed with a dense symmetric eigensolver, so the
    returned prefix does not depend on ``n_vectors``; sweeping K over one
    graph can therefore share a single decomposition.
    """
    kind, value = graph
    if kind == "knn":
        W = knn_affinity(X, int(value), dists)
    elif kind == "gaussian":
        W = gaussian_affinity(X, float(value), dists)
    else:
        raise ValueError(f"unknown graph kind {kind!r}")
    deg = W.sum(axis=1)
    connected = int(np.count_nonzero(deg > 0))
    if connected < n_vectors:
        raise SpectralDegenerateError(
            f"graph has {connected} non-isolated vertices, need {n_vectors}"
        )
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = deg[nz] ** -0.5
    lap = np.eye(X.shape[0]) - W * inv_sqrt[:, None] * inv_sqrt[None, :]
    try:
        vals, vecs = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise SpectralDegenerateError(f"eigendecomposition failed: {exc}") from exc
    return vals[:n_vectors], vecs[:, :n_vectors]


def row_normalize(U: np.ndarray) -> np.ndarray:
    """Scale each row to unit norm; rows that are (numerically) zero stay zero."""
    norms = np.linalg.norm(U, axis=1)
    out = np.zeros_like(U)
    keep = norms > _ZERO_ROW_TOL
    out[keep] = U[keep] / norms[keep, None]
    return out


def run_spectral(dataset: Dataset, n_clusters: int, graph: tuple[str, float],
                 seed: int, *, dists: np.ndarray | None = None,
                 embed_cache: dict | None = None) -> Clustering:
    """Normalized spectral clustering on a kNN or Gaussian affinity graph.

    ``graph`` is ``("knn", k)`` or ``("gaussian", sigma)``. The row-normalized
    K-vector embedding is clustered with the seeded K-means engine. Raises
    :class:`SpectralDegenerateError` when the graph cannot support K vectors;
    the ensemble sweep skips and records such configurations.
    """
    n = dataset.n
    if not 2 <= n_clusters <= n:
        raise ValueError(f"need 2 <= n_clusters <= {n}, got {n_clusters}")
    key = (graph[0], graph[1])
    cached = embed_cache.get(key) if embed_cache is not None else None
    if cached is not None and cached[1].shape[1] >= n_clusters:
        vecs = cached[1]
    else:
        want = n_clusters
        if embed_cache is not None:
            want = min(max(n_clusters, embed_cache.get("max_k", n_clusters)), n)
        try:
            vals, vecs = spectral_embedding(dataset.instances, graph, want, dists)
        except SpectralDegenerateError:
            if want == n_clusters:
                raise
            # Graph too sparse for the sweep's full width; this configuration
            # only needs K vectors, so retry at exactly that.
            vals, vecs = spectral_embedding(dataset.instances, graph,
                                            n_clusters, dists)
        if embed_cache is not None:
            embed_cache[key] = (vals, vecs)
    U = row_normalize(vecs[:, :n_clusters])
    res = lloyd(U, n_clusters, seed)
    kind, value = graph
    param = {"k": int(value)} if kind == "knn" else {"sigma": float(value)}
    prov = Provenance.make("spectral", seed=seed, K=n_clusters, graph=kind, **param)
    return Clustering(res.labels, prov)


# ---------------------------------------------------------------------------
# Grid sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperGrid:
    """Hyperparameter grid for the three engines.

    Continuous ranges are (lo, hi, count) and expand to ``count`` evenly
    spaced values including both endpoints. DBSCAN eps bounds of None resolve
    to the dataset's min/max pairwise distance at generation time. Defaults
    produce 180 K-means + 400 DBSCAN + 351 spectral = 931 configurations.
    """

    kmeans_k: tuple[int, ...] = tuple(range(2, 11))
    kmeans_seeds: int = 20
    dbscan_eps: tuple[float | None, float | None, int] = (None, None, 20)
    dbscan_min_pts: tuple[int, ...] = tuple(range(2, 22))
    spectral_k: tuple[int, ...] = tuple(range(2, 11))
    spectral_knn: tuple[int, ...] = tuple(range(2, 21))
    spectral_sigma: tuple[float, float, int] = (0.01, 5.0, 20)

    def __post_init__(self):
        if not (self.kmeans_k and self.dbscan_min_pts and self.spectral_k
                and self.spectral_knn):
            raise ValueError("all grid ranges must be non-empty")
        if self.kmeans_seeds < 1 or self.dbscan_eps[2] < 1 or self.spectral_sigma[2] < 1:
            raise ValueError("counts must be at least 1")

    def size(self) -> int:
        return (
            len(self.kmeans_k) * self.kmeans_seeds
            + self.dbscan_eps[2] * len(self.dbscan_min_pts)
            + len(self.spectral_k) * (len(self.spectral_knn) + self.spectral_sigma[2])
        )

    def to_dict(self) -> dict:
        return {
            "kmeans_k": list(self.kmeans_k),
            "kmeans_seeds": self.kmeans_seeds,
            "dbscan_eps": list(self.dbscan_eps),
            "dbscan_min_pts": list(self.dbscan_min_pts),
            "spectral_k": list(self.spectral_k),
            "spectral_knn": list(self.spectral_knn),
            "spectral_sigma": list(self.spectral_sigma),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperGrid":
        base = cls()
        kwargs = {}
        for name in ("kmeans_k", "dbscan_min_pts", "spectral_k", "spectral_knn"):
            if name in d:
                kwargs[name] = tuple(int(v) for v in d[name])
        if "kmeans_seeds" in d:
            kwargs["kmeans_seeds"] = int(d["kmeans_seeds"])
        if "dbscan_eps" in d:
            lo, hi, cnt = d["dbscan_eps"]
            kwargs["dbscan_eps"] = (
                None if lo is None else float(lo),
                None if hi is None else float(hi),
                int(cnt),
            )
        if "spectral_sigma" in d:
            lo, hi, cnt = d["spectral_sigma"]
            kwargs["spectral_sigma"] = (float(lo), float(hi), int(cnt))
        return replace(base, **kwargs)

    def grid_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


def config_seed(algorithm: str, **params) -> int:
    """Stable 32-bit seed derived from a configuration (used by spectral)."""
    payload = json.dumps({"algorithm": algorithm, **params}, sort_keys=True)
    return int.from_bytes(hashlib.sha256(payload.encode()).digest()[:4], "big")


def expand_grid(dataset: Dataset, grid: HyperGrid) -> list[Provenance]:
    """Materialize the ordered configuration list: K-means, DBSCAN, spectral."""
    provs: list[Provenance] = []
    for k in grid.kmeans_k:
        for seed in range(grid.kmeans_seeds):
            provs.append(Provenance.make("kmeans", seed=seed, K=int(k)))
    eps_lo, eps_hi, eps_count = grid.dbscan_eps
    if eps_lo is None or eps_hi is None:
        stats = distance_stats(dataset)
        eps_lo = stats.min_d if eps_lo is None else eps_lo
        eps_hi = stats.max_d if eps_hi is None else eps_hi
    for eps in np.linspace(eps_lo, eps_hi, eps_count):
        for mp in grid.dbscan_min_pts:
            provs.append(Provenance.make("dbscan", eps=float(eps), min_pts=int(mp)))
    for k in grid.spectral_k:
        for knn in grid.spectral_knn:
            seed = config_seed("spectral", K=int(k), graph="knn", k=int(knn))
            provs.append(Provenance.make(
                "spectral", seed=seed, K=int(k), graph="knn", k=int(knn)))
    for k in grid.spectral_k:
        for sigma in np.linspace(*grid.spectral_sigma):
            seed = config_seed("spectral", K=int(k), graph="gaussian",
                               sigma=float(sigma))
            provs.append(Provenance.make(
                "spectral", seed=seed, K=int(k), graph="gaussian",
                sigma=float(sigma)))
    return provs


def rerun(dataset: Dataset, prov: Provenance) -> Clustering:
    """Re-run the engine identified by a provenance record."""
    if prov.algorithm == "kmeans":
        return run_kmeans(dataset, prov.param("K"), prov.seed)
    if prov.algorithm == "dbscan":
        return run_dbscan(dataset, prov.param("eps"), prov.param("min_pts"))
    if prov.algorithm == "spectral":
        kind = prov.param("graph")
        value = prov.param("k") if kind == "knn" else prov.param("sigma")
        return run_spectral(dataset, prov.param("K"), (kind, value), prov.seed)
    raise ValueError(f"unknown algorithm {prov.algorithm!r}")


def dataset_hash(dataset: Dataset) -> str:
    h = hashlib.sha256()
    h.update(str(dataset.instances.shape).encode())
    h.update(dataset.instances.tobytes())
    return h.hexdigest()[:16]


@dataclass(eq=False)
class ClusteringEnsemble:
    """The ordered clustering set C with one positive weight per clustering."""

    clusterings: tuple[Clustering, ...]
    weights: np.ndarray
    dataset_name: str = ""
    dataset_hash: str = ""
    skipped: tuple[tuple[Provenance, str], ...] = ()
    _assignments: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.clusterings = tuple(self.clusterings)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (len(self.clusterings),):
            raise ValueError("one weight per clustering required")
        if len(w) and not (w > 0).all():
            raise ValueError("weights must be strictly positive")
        self.weights = w

    def __len__(self) -> int:
        return len(self.clusterings)

    def assignment_matrix(self) -> np.ndarray:
        """(|C|, n) matrix of cluster labels, built once and cached."""
        if self._assignments is None:
            self._assignments = np.vstack(
                [c.assignment for c in self.clusterings]
            )
            self._assignments.setflags(write=False)
        return self._assignments

    def restrict(self, algorithm: str) -> "ClusteringEnsemble":
        """Sub-ensemble of one algorithm's clusterings, weights reset uniform."""
        kept = tuple(c for c in self.clusterings
                     if c.provenance.algorithm == algorithm)
        if not kept:
            raise ValueError(f"no {algorithm!r} clusterings in ensemble")
        return ClusteringEnsemble(
            clusterings=kept,
            weights=np.full(len(kept), 1.0 / len(kept)),
            dataset_name=self.dataset_name,
            dataset_hash=self.dataset_hash,
        )

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset_name,
            "dataset_hash": self.dataset_hash,
            "clusterings": [
                {**c.provenance.as_dict(), "assignment": c.assignment.tolist()}
                for c in self.clusterings
            ],
            "skipped": [
                {**prov.as_dict(), "reason": reason}
                for prov, reason in self.skipped
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ClusteringEnsemble":
        clusterings = tuple(
            Clustering(np.asarray(entry["assignment"], dtype=np.int64),
                       Provenance.from_dict(entry))
            for entry in d["clusterings"]
        )
        skipped = tuple(
            (Provenance.from_dict(entry), entry.get("reason", ""))
            for entry in d.get("skipped", ())
        )
        n = len(clusterings)
        return cls(
            clusterings=clusterings,
            weights=np.full(n, 1.0 / n) if n else np.empty(0),
            dataset_name=d.get("dataset", ""),
            dataset_hash=d.get("dataset_hash", ""),
            skipped=skipped,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ClusteringEnsemble":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def _run_block(dataset: Dataset, provs: list[Provenance],
               spectral_max_k: int) -> list[tuple[Provenance, np.ndarray | None, str]]:
    """Run a contiguous slice of configurations with shared distance matrix
    and per-graph spectral embeddings."""
    needs_dists = any(p.algorithm in ("dbscan", "spectral") for p in provs)
    dists = squareform(pdist(dataset.instances)) if needs_dists else None
    cache: dict = {"max_k": spectral_max_k}
    out: list[tuple[Provenance, np.ndarray | None, str]] = []
    for prov in provs:
        try:
            if prov.algorithm == "kmeans":
                c = run_kmeans(dataset, prov.param("K"), prov.seed)
            elif prov.algorithm == "dbscan":
                c = run_dbscan(dataset, prov.param("eps"), prov.param("min_pts"),
                               dists=dists)
            else:
                kind = prov.param("graph")
                value = prov.param("k") if kind == "knn" else prov.param("sigma")
                c = run_spectral(dataset, prov.param("K"), (kind, value),
                                 prov.seed, dists=dists, embed_cache=cache)
            out.append((prov, c.assignment, ""))
        except SpectralDegenerateError as exc:
            out.append((prov, None, str(exc)))
    return out


def generate_ensemble(dataset: Dataset, grid: HyperGrid | None = None,
                      workers: int = 1) -> ClusteringEnsemble:
    """Sweep the grid over the dataset and assemble the clustering ensemble.

    Configuration order is deterministic (K-means block, then DBSCAN, then
    spectral, each in grid order) and results do not depend on the worker
    count. Degenerate spectral configurations are skipped and recorded.
    """
    grid = grid or HyperGrid()
    provs = expand_grid(dataset, grid)
    max_k = max(grid.spectral_k)
    if workers <= 1 or len(provs) < 2 * workers:
        raw = _run_block(dataset, provs, max_k)
    else:
        bounds = np.linspace(0, len(provs), workers + 1).astype(int)
        chunks = [provs[bounds[i]:bounds[i + 1]] for i in range(workers)]
        raw = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_block, [dataset] * workers, chunks,
                                 [max_k] * workers):
                raw.extend(part)
    clusterings: list[Clustering] = []
    skipped: list[tuple[Provenance, str]] = []
    for prov, assignment, reason in raw:
        if assignment is None:
            skipped.append((prov, reason))
        else:
            clusterings.append(Clustering(assignment, prov))
    if skipped:
        logger.info("skipped %d degenerate spectral configurations", len(skipped))
    n = len(clusterings)
    return ClusteringEnsemble(
        clusterings=tuple(clusterings),
        weights=np.full(n, 1.0 / n) if n else np.empty(0),
        dataset_name=dataset.name,
        dataset_hash=dataset_hash(dataset),
        skipped=tuple(skipped),
    )
