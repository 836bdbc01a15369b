"""Pairwise must-link / cannot-link constraints, the simulated class-label
oracle, random constraint generation, and satisfaction scoring."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import SupervisionSplit
from .engines import NOISE, Clustering


class Kind(str, enum.Enum):
    MUST_LINK = "must_link"
    CANNOT_LINK = "cannot_link"


@dataclass(frozen=True)
class Constraint:
    """One answered pair, stored canonically with i < j."""

    i: int
    j: int
    kind: Kind

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("a constraint needs two distinct instances")
        if self.i < 0 or self.j < 0:
            raise ValueError("negative instance index")
        if self.i > self.j:
            lo, hi = self.j, self.i
            object.__setattr__(self, "i", lo)
            object.__setattr__(self, "j", hi)
        object.__setattr__(self, "kind", Kind(self.kind))

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)


class ConstraintSet:
    """Disjoint sets of canonical must-link and cannot-link pairs."""

    def __init__(self, constraints=()):
        self._ml: set[tuple[int, int]] = set()
        self._cl: set[tuple[int, int]] = set()
        for c in constraints:
            self.add(c.i, c.j, c.kind)

    @property
    def ml(self) -> frozenset:
        return frozenset(self._ml)

    @property
    def cl(self) -> frozenset:
        return frozenset(self._cl)

    def add(self, i: int, j: int, kind: Kind) -> None:
        c = Constraint(i, j, kind)
        other = self._cl if c.kind is Kind.MUST_LINK else self._ml
        if c.pair in other:
            raise ValueError(f"pair {c.pair} already constrained with the other kind")
        (self._ml if c.kind is Kind.MUST_LINK else self._cl).add(c.pair)

    def __len__(self) -> int:
        return len(self._ml) + len(self._cl)

    def __iter__(self):
        for i, j in sorted(self._ml):
            yield Constraint(i, j, Kind.MUST_LINK)
        for i, j in sorted(self._cl):
            yield Constraint(i, j, Kind.CANNOT_LINK)

    def __contains__(self, pair: tuple[int, int]) -> bool:
        p = (min(pair), max(pair))
        return p in self._ml or p in self._cl

    def instances(self) -> np.ndarray:
        """Sorted indices of every instance touched by some constraint."""
        touched = {i for p in self._ml | self._cl for i in p}
        return np.asarray(sorted(touched), dtype=np.int64)

    def pair_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(ml_i, ml_j, cl_i, cl_j) index arrays in sorted pair order."""
        ml = sorted(self._ml)
        cl = sorted(self._cl)
        ml_a = np.asarray(ml, dtype=np.int64).reshape(-1, 2)
        cl_a = np.asarray(cl, dtype=np.int64).reshape(-1, 2)
        return ml_a[:, 0], ml_a[:, 1], cl_a[:, 0], cl_a[:, 1]

    def to_json_list(self) -> list[dict]:
        return [{"i": c.i, "j": c.j, "kind": c.kind.value} for c in self]

    @classmethod
    def from_json_list(cls, items) -> "ConstraintSet":
        cs = cls()
        for item in items:
            cs.add(int(item["i"]), int(item["j"]), Kind(item["kind"]))
        return cs


class SimulatedOracle:
    """Answers pair queries from class labels: same class means must-link.

    Answers are a pure function of the labels, so repeated queries for the
    same pair always agree; every answer is logged.
    """

    def __init__(self, labels):
        self._labels = np.asarray(labels)
        self.answered: dict[tuple[int, int], Kind] = {}

    def answer(self, i: int, j: int) -> Kind:
        if i == j:
            raise ValueError("cannot query an instance against itself")
        pair = (min(i, j), max(i, j))
        kind = (Kind.MUST_LINK if self._labels[pair[0]] == self._labels[pair[1]]
                else Kind.CANNOT_LINK)
        self.answered[pair] = kind
        return kind


def generate_random_constraints(split: SupervisionSplit, oracle, count: int,
                                seed: int) -> ConstraintSet:
    """Draw ``count`` distinct pairs uniformly (without replacement) from the
    supervision set and label each with the oracle."""
    if count < 0:
        raise ValueError("count must be non-negative")
    sup = split.supervision_idx
    if sup.size < 2:
        raise ValueError("supervision set needs at least 2 instances")
    total = sup.size * (sup.size - 1) // 2
    if count > total:
        raise ValueError(f"only {total} distinct pairs available, asked for {count}")
    cs = ConstraintSet()
    if count == 0:
        return cs
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=count, replace=False)
    iu, ju = np.triu_indices(sup.size, k=1)
    for t in chosen:
        i, j = int(sup[iu[t]]), int(sup[ju[t]])
        cs.add(i, j, oracle.answer(i, j))
    return cs


def pairs_same_cluster(assignment: np.ndarray, idx_a: np.ndarray,
                       idx_b: np.ndarray) -> np.ndarray:
    """Whether each pair shares a cluster; NOISE points share with nobody."""
    a = assignment[idx_a]
    return (a == assignment[idx_b]) & (a != NOISE)


def satisfaction_score(clustering: Clustering, cs: ConstraintSet) -> int:
    """Number of must-link pairs co-clustered plus cannot-link pairs separated.

    NOISE instances count as singleton clusters: they co-cluster with nothing,
    including other NOISE instances.
    """
    ml_i, ml_j, cl_i, cl_j = cs.pair_arrays()
    a = clustering.assignment
    ml_ok = pairs_same_cluster(a, ml_i, ml_j).sum()
    cl_ok = cl_i.size - pairs_same_cluster(a, cl_i, cl_j).sum()
    return int(ml_ok + cl_ok)
