"""Dataset loading, cleaning, min-max normalization and the supervision split."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist

#: Cell contents treated as a missing value (the whole row is dropped).
MISSING_TOKENS = {"", "?", "NA", "NaN", "nan"}


class DatasetError(ValueError):
    """Raised for unreadable or malformed dataset files."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """A numeric instance matrix with optional class labels.

    ``instances`` is an (n, f) float array. Values are raw as loaded;
    :func:`normalize` rescales every feature to [0, 1]. ``labels``, when
    present, holds one class identifier per row. Instances and labels are
    read-only after construction so datasets can be shared across workers.
    """

    instances: np.ndarray
    labels: np.ndarray | None = None
    name: str = "dataset"
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        inst = np.ascontiguousarray(np.asarray(self.instances, dtype=float))
        if inst.ndim != 2:
            raise DatasetError("instances must be a 2-D matrix")
        inst.setflags(write=False)
        object.__setattr__(self, "instances", inst)
        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (inst.shape[0],):
                raise DatasetError(
                    f"labels length {lab.shape} does not match {inst.shape[0]} rows"
                )
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)
        if not self.feature_names:
            names = tuple(f"f{j}" for j in range(inst.shape[1]))
            object.__setattr__(self, "feature_names", names)
        elif len(self.feature_names) != inst.shape[1]:
            raise DatasetError("feature_names length does not match feature count")

    @property
    def n(self) -> int:
        return self.instances.shape[0]

    @property
    def n_features(self) -> int:
        return self.instances.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            return 0
        return int(np.unique(self.labels).size)


@dataclass(frozen=True)
class DistanceStats:
    """Smallest nonzero and largest pairwise Euclidean distance."""

    min_d: float
    max_d: float

    def __post_init__(self):
        if not 0 <= self.min_d <= self.max_d:
            raise ValueError(f"invalid distance stats ({self.min_d}, {self.max_d})")


@dataclass(frozen=True)
class SupervisionSplit:
    """70/30 index partition; constraints are drawn from the 70% side."""

    supervision_idx: np.ndarray
    leftout_idx: np.ndarray
    seed: int

    def __post_init__(self):
        sup = np.sort(np.asarray(self.supervision_idx, dtype=np.int64))
        out = np.sort(np.asarray(self.leftout_idx, dtype=np.int64))
        if np.intersect1d(sup, out).size:
            raise ValueError("supervision and left-out sets overlap")
        sup.setflags(write=False)
        out.setflags(write=False)
        object.__setattr__(self, "supervision_idx", sup)
        object.__setattr__(self, "leftout_idx", out)


def _parse_cell(cell: str, row: int, col: int) -> float | None:
    """Parse one feature cell; None marks a missing value."""
    token = cell.strip()
    if token in MISSING_TOKENS:
        return None
    try:
        return float(token)
    except ValueError:
        raise DatasetError(
            f"non-numeric value {token!r} at row {row}, column {col}"
        ) from None


def _looks_like_header(cells: list[str], label_idx: int | None) -> bool:
    for col, cell in enumerate(cells):
        if col == label_idx:
            continue
        token = cell.strip()
        if token in MISSING_TOKENS:
            continue
        try:
            float(token)
        except ValueError:
            return True
    return False


def parse_dataset(text: str, label_column: str | int | None = None,
                  name: str = "dataset") -> Dataset:
    """Parse CSV text into a cleaned :class:`Dataset`.

    Rows containing a missing value (empty cell or ``?``) are dropped, then
    exact duplicate feature rows are dropped (first occurrence kept). The
    label column may be named (requires a header row) or given by index.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if any(c.strip() for c in r)]
    if not rows:
        raise DatasetError("empty dataset")

    width = len(rows[0])
    label_idx: int | None
    if isinstance(label_column, str):
        header = [c.strip() for c in rows[0]]
        if label_column not in header:
            raise DatasetError(f"label column {label_column!r} absent")
        label_idx = header.index(label_column)
        data_rows, names_row = rows[1:], header
    else:
        label_idx = None
        if label_column is not None:
            label_idx = int(label_column)
            if not -width <= label_idx < width:
                raise DatasetError(f"label column index {label_column} out of range")
            label_idx %= width
        if _looks_like_header(rows[0], label_idx):
            data_rows, names_row = rows[1:], [c.strip() for c in rows[0]]
        else:
            data_rows, names_row = rows, None
    if not data_rows:
        raise DatasetError("empty dataset")

    features: list[list[float]] = []
    labels: list[str] = []
    seen: set[bytes] = set()
    for r, cells in enumerate(data_rows):
        if len(cells) != width:
            raise DatasetError(
                f"row {r} has {len(cells)} cells, expected {width}"
            )
        row_vals: list[float] = []
        missing = False
        for col, cell in enumerate(cells):
            if col == label_idx:
                if cell.strip() in MISSING_TOKENS:
                    missing = True
                continue
            value = _parse_cell(cell, r, col)
            if value is None:
                missing = True
            else:
                row_vals.append(value)
        if missing:
            continue
        key = np.asarray(row_vals, dtype=float).tobytes()
        if key in seen:
            continue
        seen.add(key)
        features.append(row_vals)
        if label_idx is not None:
            labels.append(cells[label_idx].strip())

    if not features:
        raise DatasetError("empty dataset")

    feature_names: tuple[str, ...] = ()
    if names_row is not None:
        feature_names = tuple(
            nm for col, nm in enumerate(names_row) if col != label_idx
        )
    return Dataset(
        instances=np.asarray(features, dtype=float),
        labels=np.asarray(labels) if label_idx is not None else None,
        name=name,
        feature_names=feature_names,
    )


def load_dataset(source: str | Path, label_column: str | int | None = None,
                 name: str | None = None) -> Dataset:
    """Load a delimited numeric table from ``source`` (see :func:`parse_dataset`)."""
    path = Path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"unreadable file {path}: {exc}") from exc
    return parse_dataset(text, label_column, name=name or path.stem)


def normalize(dataset: Dataset) -> Dataset:
    """Rescale every feature to [0, 1]; constant features map to all zeros."""
    if dataset.n == 0:
        raise DatasetError("empty dataset")
    X = dataset.instances
    mins = X.min(axis=0)
    span = X.max(axis=0) - mins
    safe = np.where(span == 0, 1.0, span)
    return Dataset(
        instances=(X - mins) / safe,
        labels=dataset.labels,
        name=dataset.name,
        feature_names=dataset.feature_names,
    )


def distance_stats(dataset: Dataset) -> DistanceStats:
    """Min (nonzero) and max pairwise Euclidean distance over all row pairs."""
    if dataset.n < 2:
        raise ValueError("distance stats need at least 2 instances")
    d = pdist(dataset.instances)
    nonzero = d[d > 0]
    if nonzero.size == 0:
        raise ValueError("all pairwise distances are zero")
    return DistanceStats(min_d=float(nonzero.min()), max_d=float(d.max()))


def split_supervision(dataset: Dataset, seed: int) -> SupervisionSplit:
    """Seeded uniform 70/30 row partition (70% rounded half-up)."""
    if dataset.labels is None:
        raise ValueError("cannot split an unlabeled dataset")
    n = dataset.n
    n_sup = int(math.floor(0.7 * n + 0.5))
    perm = np.random.default_rng(seed).permutation(n)
    return SupervisionSplit(
        supervision_idx=perm[:n_sup],
        leftout_idx=perm[n_sup:],
        seed=seed,
    )
