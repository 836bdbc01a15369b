"""Adjusted Rand Index, the constraint-free evaluation protocol, and the
repeated-run experiment harness with result tables."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constraints import SimulatedOracle, generate_random_constraints, satisfaction_score
from .data import Dataset, split_supervision
from .engines import NOISE, Clustering, ClusteringEnsemble, Provenance
from .selection import ActiveConfig, cobs_select, run_active_session


class ExperimentError(RuntimeError):
    """A repetition violated a harness invariant."""


def _as_label_vector(x) -> np.ndarray:
    if isinstance(x, Clustering):
        return x.assignment
    return np.asarray(x)


def _noise_to_singletons(v: np.ndarray) -> np.ndarray:
    """Give every NOISE entry its own fresh label (integer vectors only)."""
    if not np.issubdtype(v.dtype, np.integer):
        return v
    noise = v == NOISE
    if not noise.any():
        return v
    out = v.copy()
    out[noise] = out.max(initial=0) + 1 + np.arange(noise.sum())
    return out


def adjusted_rand_index(a, b, eval_idx=None) -> float:
    """Pair-counting ARI between two labelings, restricted to ``eval_idx``.

    NOISE entries (in integer labelings) are treated as singleton clusters.
    Computed in exact integer arithmetic with a single final division; 1.0
    for identical partitions, about 0 for independent random ones. The
    measure is symmetric and invariant to relabeling either side.
    """
    av = _as_label_vector(a)
    bv = _as_label_vector(b)
    if av.shape != bv.shape:
        raise ValueError("labelings must have equal length")
    if eval_idx is not None:
        idx = np.asarray(eval_idx, dtype=np.int64)
        av, bv = av[idx], bv[idx]
    n = av.size
    if n < 2:
        raise ValueError("need at least 2 instances to compare")
    av = _noise_to_singletons(av)
    bv = _noise_to_singletons(bv)
    _, inv_a = np.unique(av, return_inverse=True)
    _, inv_b = np.unique(bv, return_inverse=True)
    nb = inv_b.max() + 1
    _, cell_counts = np.unique(inv_a * nb + inv_b, return_counts=True)
    sum_cells = sum(math.comb(int(c), 2) for c in cell_counts)
    sum_a = sum(math.comb(int(c), 2) for c in np.bincount(inv_a))
    sum_b = sum(math.comb(int(c), 2) for c in np.bincount(inv_b))
    total = math.comb(n, 2)
    num = 2 * (total * sum_cells - sum_a * sum_b)
    den = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        # both sides all singletons or both a single cluster: identical
        return 1.0
    return num / den


def evaluate_selected(selected: Clustering, dataset: Dataset,
                      cs) -> float:
    """ARI of the selected clustering against the class labels, over exactly
    the instances that appear in no constraint."""
    if dataset.labels is None:
        raise ValueError("dataset has no labels to evaluate against")
    constrained = cs.instances()
    eval_idx = np.setdiff1d(np.arange(dataset.n), constrained)
    if eval_idx.size < 2:
        raise ValueError("fewer than 2 constraint-free instances")
    return adjusted_rand_index(selected.assignment, dataset.labels, eval_idx)


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark: a dataset, a sweep of constraint counts, repetitions."""

    dataset: str
    constraint_counts: tuple[int, ...]
    repetitions: int = 25
    mode: str = "batch-random"
    active: ActiveConfig | None = None
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "constraint_counts",
                           tuple(int(c) for c in self.constraint_counts))
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        counts = self.constraint_counts
        if any(c < 0 for c in counts) or list(counts) != sorted(set(counts)):
            raise ValueError("constraint counts must be non-negative and increasing")
        if self.mode not in ("batch-random", "active"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "active" and self.active is None:
            object.__setattr__(self, "active", ActiveConfig(budget=0))


@dataclass(frozen=True)
class RunRecord:
    c: int
    rep: int
    ari: float
    provenance: Provenance
    seeds: tuple[int, int, int, int]


@dataclass(frozen=True)
class ResultRow:
    dataset: str
    method: str
    c: int
    mean_ari: float
    std_ari: float
    runs: tuple[RunRecord, ...]

    @property
    def histogram(self) -> dict[str, int]:
        hist: dict[str, int] = {}
        for r in self.runs:
            hist[r.provenance.algorithm] = hist.get(r.provenance.algorithm, 0) + 1
        return hist


@dataclass(frozen=True)
class ResultTable:
    rows: tuple[ResultRow, ...]

    def to_json_dict(self) -> dict:
        return {"rows": [
            {
                "dataset": r.dataset,
                "method": r.method,
                "c": r.c,
                "mean_ari": r.mean_ari,
                "std_ari": r.std_ari,
                "histogram": r.histogram,
                "runs": [
                    {"rep": run.rep, "ari": run.ari,
                     "provenance": run.provenance.as_dict(),
                     "seeds": list(run.seeds)}
                    for run in r.runs
                ],
            }
            for r in self.rows
        ]}

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["dataset", "method", "c", "mean_ari", "std_ari",
                         "histogram"])
        for r in self.rows:
            hist = "/".join(f"{k}:{v}" for k, v in sorted(r.histogram.items()))
            writer.writerow([r.dataset, r.method, r.c,
                             f"{r.mean_ari:.6f}", f"{r.std_ari:.6f}", hist])
        return buf.getvalue()

    def save(self, directory) -> None:
        from pathlib import Path
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "results.json").write_text(json.dumps(self.to_json_dict(), indent=2))
        (d / "results.csv").write_text(self.to_csv_text())


def _run_seeds(master_seed: int, c: int, rep: int) -> tuple[int, int, int, int]:
    """Split / constraint / tie / pool seeds for one repetition, derived from
    the master seed by counter so any run can be replayed in isolation."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(c, rep))
    return tuple(int(s) for s in ss.generate_state(4))


def _one_run(dataset: Dataset, ensemble: ClusteringEnsemble,
             spec: ExperimentSpec, c: int, rep: int) -> RunRecord:
    seeds = _run_seeds(spec.master_seed, c, rep)
    split_seed, constraint_seed, tie_seed, pool_seed = seeds
    split = split_supervision(dataset, split_seed)
    oracle = SimulatedOracle(dataset.labels)
    if spec.mode == "batch-random":
        cs = generate_random_constraints(split, oracle, c, constraint_seed)
        selected = cobs_select(ensemble, cs, tie_seed)
        best = max(satisfaction_score(cl, cs) for cl in ensemble.clusterings)
        got = satisfaction_score(selected, cs)
        if got != best:
            raise ExperimentError(
                f"run c={c} rep={rep}: selected score {got} below maximum {best}")
    else:
        config = replace(spec.active, budget=c, seed=pool_seed)
        session = run_active_session(ensemble, config, oracle,
                                     candidate_idx=split.supervision_idx)
        selected = session.result()
        cs = session.queried
    ari = evaluate_selected(selected, dataset, cs)
    return RunRecord(c=c, rep=rep, ari=ari, provenance=selected.provenance,
                     seeds=seeds)


_worker_ctx: tuple | None = None


def _init_worker(dataset, ensemble, spec):
    global _worker_ctx
    _worker_ctx = (dataset, ensemble, spec)


def _worker_run(task):
    c, rep = task
    return _one_run(*_worker_ctx, c, rep)


def run_experiment(spec: ExperimentSpec, dataset: Dataset,
                   ensemble: ClusteringEnsemble, workers: int = 1) -> ResultTable:
    """Run the repeated protocol: per repetition a fresh 70/30 split, fresh
    constraints (random or actively queried), selection, then ARI on the
    constraint-free instances. Fully reproducible from the master seed and
    independent of the worker count.
    """
    if dataset.labels is None:
        raise ValueError("experiments need a labeled dataset")
    method = "cobs-random" if spec.mode == "batch-random" else "cobs-active"
    tasks = [(c, rep) for c in spec.constraint_counts
             for rep in range(spec.repetitions)]
    if workers <= 1:
        records = [_one_run(dataset, ensemble, spec, c, rep) for c, rep in tasks]
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker,
            initargs=(dataset, ensemble, spec),
        ) as pool:
            records = list(pool.map(_worker_run, tasks))
    rows = []
    for c in spec.constraint_counts:
        runs = tuple(r for r in records if r.c == c)
        aris = np.asarray([r.ari for r in runs])
        std = float(aris.std(ddof=1)) if aris.size > 1 else 0.0
        rows.append(ResultRow(
            dataset=spec.dataset, method=method, c=c,
            mean_ari=float(aris.mean()), std_ari=std, runs=runs,
        ))
    return ResultTable(rows=tuple(rows))
