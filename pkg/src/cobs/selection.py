"""Selecting a clustering from an ensemble: batch constraint-satisfaction
argmax, the uncertainty-driven active query loop with multiplicative weight
updates, and the silhouette / fewest-violations baselines."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .constraints import ConstraintSet, Kind, satisfaction_score
from .data import Dataset
from .engines import NOISE, Clustering, ClusteringEnsemble


class PendingQueryError(RuntimeError):
    """A query is outstanding (or an answer arrived for no pending query)."""


class BudgetExhaustedError(RuntimeError):
    pass


class PoolExhaustedError(RuntimeError):
    pass


def satisfaction_scores(ensemble: ClusteringEnsemble,
                        cs: ConstraintSet) -> np.ndarray:
    """Satisfaction score of every clustering, vectorized over the ensemble."""
    A = ensemble.assignment_matrix()
    ml_i, ml_j, cl_i, cl_j = cs.pair_arrays()
    ml_same = (A[:, ml_i] == A[:, ml_j]) & (A[:, ml_i] != NOISE)
    cl_same = (A[:, cl_i] == A[:, cl_j]) & (A[:, cl_i] != NOISE)
    return ml_same.sum(axis=1) + cl_i.size - cl_same.sum(axis=1)


def cobs_select(ensemble: ClusteringEnsemble, cs: ConstraintSet,
                seed: int) -> Clustering:
    """Return the clustering satisfying the most constraints; ties are broken
    uniformly at random among the maximizers (seeded)."""
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    scores = satisfaction_scores(ensemble, cs)
    ties = np.flatnonzero(scores == scores.max())
    pick = ties[np.random.default_rng(seed).integers(ties.size)]
    return ensemble.clusterings[int(pick)]


def weighted_agreement(ensemble: ClusteringEnsemble,
                       pair: tuple[int, int]) -> float:
    """Absolute difference between the total weight voting "same cluster" and
    the total weight voting "different cluster" for the pair."""
    i, j = pair
    A = ensemble.assignment_matrix()
    same = (A[:, i] == A[:, j]) & (A[:, i] != NOISE)
    w = ensemble.weights
    return float(abs(w[same].sum() - w[~same].sum()))


@dataclass(frozen=True)
class ActiveConfig:
    """Parameters of one active query session."""

    budget: int
    m: float = 2.0
    sample_size: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.budget < 0:
            raise ValueError("budget must be non-negative")
        if self.m <= 0:
            raise ValueError("weight update factor must be positive")
        if self.sample_size < 1:
            raise ValueError("sample_size must be at least 1")


class ActiveSession:
    """State of one active constraint-selection run.

    A pool P of candidate pairs is sampled once at construction. Each step
    queries the pool pair the weighted ensemble disagrees on most, then
    multiplies the weight of every clustering that predicted the answer
    correctly by m and divides the others by m. Strictly serial: one pending
    query at a time.
    """

    def __init__(self, ensemble: ClusteringEnsemble, config: ActiveConfig,
                 candidate_idx: np.ndarray | None = None):
        if len(ensemble) == 0:
            raise ValueError("empty ensemble")
        self.ensemble = ensemble
        self.config = config
        n = ensemble.clusterings[0].n
        cand = (np.arange(n) if candidate_idx is None
                else np.unique(np.asarray(candidate_idx, dtype=np.int64)))
        if cand.size < 2:
            raise ValueError("need at least 2 candidate instances")
        total = cand.size * (cand.size - 1) // 2
        take = min(config.sample_size, total)
        rng = np.random.default_rng(config.seed)
        chosen = np.sort(rng.choice(total, size=take, replace=False))
        iu, ju = np.triu_indices(cand.size, k=1)
        self.pool_i = cand[iu[chosen]]
        self.pool_j = cand[ju[chosen]]
        A = ensemble.assignment_matrix()
        same = (A[:, self.pool_i] == A[:, self.pool_j]) & (A[:, self.pool_i] != NOISE)
        # +1 where a clustering puts the pair together, -1 where apart
        self._votes = np.where(same, 1.0, -1.0)
        self._active = np.ones(take, dtype=bool)
        self.weights = np.full(len(ensemble), 1.0 / len(ensemble))
        self.queried = ConstraintSet()
        self.u = 0
        self.pending: tuple[int, int] | None = None
        self.log: list[tuple[tuple[int, int], Kind]] = []

    @property
    def budget(self) -> int:
        return self.config.budget

    def pool_size(self) -> int:
        return int(self._active.sum())

    def next_query(self) -> tuple[int, int]:
        """Pick the pool pair with the lowest weighted agreement.

        Exact agreement ties break to the lowest (i, j) pair. Weights are
        normalized by their maximum before the vote sum, which keeps the
        argmin invariant under rescaling of all weights and the magnitudes
        bounded over long sessions.
        """
        if self.pending is not None:
            raise PendingQueryError(f"query {self.pending} awaiting an answer")
        if self.u >= self.budget:
            raise BudgetExhaustedError(f"budget {self.budget} exhausted")
        if not self._active.any():
            raise PoolExhaustedError("candidate pool exhausted")
        scaled = self.weights / self.weights.max()
        agreement = np.abs(scaled @ self._votes)
        agreement[~self._active] = np.inf
        ties = np.flatnonzero(agreement == agreement.min())
        col = min(ties, key=lambda t: (self.pool_i[t], self.pool_j[t]))
        self.pending = (int(self.pool_i[col]), int(self.pool_j[col]))
        self._pending_col = int(col)
        return self.pending

    def answer(self, pair: tuple[int, int], kind: Kind) -> None:
        """Record the oracle's answer for the pending pair and update weights."""
        if self.pending is None:
            raise PendingQueryError("no query pending")
        if tuple(pair) != self.pending:
            raise PendingQueryError(
                f"answer for {tuple(pair)} but pending query is {self.pending}")
        kind = Kind(kind)
        same = self._votes[:, self._pending_col] > 0
        correct = same if kind is Kind.MUST_LINK else ~same
        self.weights[correct] *= self.config.m
        self.weights[~correct] /= self.config.m
        self.queried.add(pair[0], pair[1], kind)
        self.log.append((self.pending, kind))
        self._active[self._pending_col] = False
        self.u += 1
        self.pending = None

    def result(self) -> Clustering:
        """The highest-weight clustering.

        Weight ties break by satisfaction score over the queried constraints,
        then by a seeded uniform pick among the remaining maximizers (the
        batch selection tie rule). Before any query has been answered the
        first clustering by ensemble index is returned. The pick is a pure
        function of the session state, so replays and repeated calls agree.
        """
        ties = np.flatnonzero(self.weights == self.weights.max())
        if ties.size > 1 and len(self.queried):
            scores = np.asarray([
                satisfaction_score(self.ensemble.clusterings[int(t)], self.queried)
                for t in ties
            ])
            ties = ties[scores == scores.max()]
            if ties.size > 1:
                rng = np.random.default_rng([self.config.seed, self.u])
                return self.ensemble.clusterings[int(ties[rng.integers(ties.size)])]
        return self.ensemble.clusterings[int(ties[0])]

    def top_weighted(self, count: int = 5) -> list[tuple[Clustering, float]]:
        """Clusterings with the largest weights, as (clustering, weight share)."""
        order = np.argsort(-self.weights, kind="stable")[:count]
        total = self.weights.sum()
        return [(self.ensemble.clusterings[int(i)], float(self.weights[i] / total))
                for i in order]

    def replay_log(self, log) -> None:
        """Re-apply a recorded answer log, verifying the query sequence."""
        for pair, kind in log:
            got = self.next_query()
            if got != tuple(pair):
                raise PendingQueryError(
                    f"replay diverged: expected query {tuple(pair)}, got {got}")
            self.answer(got, Kind(kind))


def run_active_session(ensemble: ClusteringEnsemble, config: ActiveConfig,
                       oracle, candidate_idx: np.ndarray | None = None
                       ) -> ActiveSession:
    """Drive a full session against an oracle until budget or pool runs out."""
    session = ActiveSession(ensemble, config, candidate_idx)
    while session.u < session.budget and session.pool_size() > 0:
        i, j = session.next_query()
        session.answer((i, j), oracle.answer(i, j))
    return session


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def silhouette_values(dists: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    """Per-instance silhouette coefficients from a precomputed distance matrix.

    NOISE points count as singleton clusters; instances in singleton clusters
    contribute 0.
    """
    labels = assignment.copy()
    noise = labels == NOISE
    if noise.any():
        fresh = labels.max() + 1 + np.arange(noise.sum())
        labels[noise] = fresh
    ids, inv = np.unique(labels, return_inverse=True)
    k = ids.size
    n = labels.size
    member = np.zeros((n, k))
    member[np.arange(n), inv] = 1.0
    sizes = member.sum(axis=0)
    sums = dists @ member
    s = np.zeros(n)
    own = inv
    own_size = sizes[own]
    multi = own_size > 1
    a = np.zeros(n)
    a[multi] = sums[multi, own[multi]] / (own_size[multi] - 1)
    mean_to = sums / sizes[None, :]
    mean_to[np.arange(n), own] = np.inf
    b = mean_to.min(axis=1)
    denom = np.maximum(a, b)
    valid = multi & (denom > 0)
    s[valid] = (b[valid] - a[valid]) / denom[valid]
    return s


def _silhouette_eligible(clustering: Clustering) -> bool:
    non_noise = clustering.assignment[clustering.assignment != NOISE]
    if non_noise.size == 0:
        return False
    _, counts = np.unique(non_noise, return_counts=True)
    return int((counts >= 2).sum()) >= 2


def silhouette_select(dataset: Dataset, clusterings) -> Clustering:
    """Return the clustering with the highest mean silhouette coefficient.

    Clusterings without at least two non-singleton clusters are skipped;
    raises if every candidate is skipped. Used as the unsupervised K-means
    baseline.
    """
    clusterings = list(clusterings)
    dists = squareform(pdist(dataset.instances))
    best: Clustering | None = None
    best_value = -np.inf
    for c in clusterings:
        if not _silhouette_eligible(c):
            continue
        value = float(silhouette_values(dists, c.assignment).mean())
        if value > best_value:
            best, best_value = c, value
    if best is None:
        raise ValueError("no clustering admits a silhouette score")
    return best


def numsat_select(clusterings, cs: ConstraintSet) -> Clustering:
    """Fewest-violations selection over one algorithm's sweep: maximize the
    satisfaction score, break ties by fewest clusters, then lowest index."""
    clusterings = list(clusterings)
    if not clusterings:
        raise ValueError("empty candidate list")
    scores = np.asarray([satisfaction_score(c, cs) for c in clusterings])
    ties = np.flatnonzero(scores == scores.max())
    pick = min(ties, key=lambda t: (clusterings[int(t)].n_clusters, int(t)))
    return clusterings[int(pick)]
