from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import settings

from cobs import Dataset, generate_ensemble, load_dataset, normalize

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


def blob_matrix(n_per=30, sigma=0.02, seed=0, n_features=3):
    """Tight Gaussian blobs centered on the unit-simplex corners."""
    rng = np.random.default_rng(seed)
    centers = np.eye(n_features)[:3]
    X = np.vstack([rng.normal(c, sigma, size=(n_per, n_features)) for c in centers])
    labels = np.repeat([f"c{i}" for i in range(3)], n_per)
    return X, labels


def blobs_csv_text(n_per=30, sigma=0.02, seed=0) -> str:
    X, labels = blob_matrix(n_per, sigma, seed)
    buf = io.StringIO()
    buf.write("x0,x1,x2,label\n")
    for row, lab in zip(X, labels):
        buf.write(",".join(f"{v:.6f}" for v in row) + f",{lab}\n")
    return buf.getvalue()


@pytest.fixture(scope="session")
def blobs_dataset() -> Dataset:
    X, labels = blob_matrix()
    return normalize(Dataset(X, labels, name="blobs3"))


@pytest.fixture(scope="session")
def blobs_ensemble(blobs_dataset):
    return generate_ensemble(blobs_dataset)


def _iris_csv_text() -> str:
    """A 150-row iris file containing exactly 3 duplicate rows (147 distinct).

    Built from sklearn's iris copy; two rows are overwritten with copies of a
    same-class neighbor so the file matches the canonical shape in which
    duplicate removal leaves 147 instances.
    """
    from sklearn.datasets import load_iris

    data = load_iris()
    X = data.data.copy()
    y = data.target.copy()
    distinct = len(np.unique(X, axis=0))
    for col in (34, 37):
        if distinct <= 147:
            break
        X[col] = X[col - 1]
        y[col] = y[col - 1]
        distinct = len(np.unique(X, axis=0))
    assert distinct == 147, distinct
    names = [n.replace(" (cm)", "").replace(" ", "_") for n in data.feature_names]
    buf = io.StringIO()
    buf.write(",".join(names) + ",class\n")
    for row, lab in zip(X, y):
        buf.write(",".join(f"{v}" for v in row) + f",{data.target_names[lab]}\n")
    return buf.getvalue()


def _wine_csv_text() -> str:
    from sklearn.datasets import load_wine

    data = load_wine()
    names = [n.replace("/", "_") for n in data.feature_names]
    buf = io.StringIO()
    buf.write(",".join(names) + ",class\n")
    for row, lab in zip(data.data, data.target):
        buf.write(",".join(f"{v}" for v in row) + f",class_{lab}\n")
    return buf.getvalue()


@pytest.fixture(scope="session")
def iris_csv_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "iris.csv"
    path.write_text(_iris_csv_text())
    return path


@pytest.fixture(scope="session")
def wine_csv_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "wine.csv"
    path.write_text(_wine_csv_text())
    return path


@pytest.fixture(scope="session")
def iris_dataset(iris_csv_path) -> Dataset:
    return normalize(load_dataset(iris_csv_path, label_column="class"))


@pytest.fixture(scope="session")
def wine_dataset(wine_csv_path) -> Dataset:
    return normalize(load_dataset(wine_csv_path, label_column="class"))


@pytest.fixture(scope="session")
def iris_ensemble(iris_dataset):
    return generate_ensemble(iris_dataset)


@pytest.fixture(scope="session")
def wine_ensemble(wine_dataset):
    return generate_ensemble(wine_dataset)
