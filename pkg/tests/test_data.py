import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cobs import (
    Dataset,
    DatasetError,
    distance_stats,
    load_dataset,
    normalize,
    parse_dataset,
    split_supervision,
)

from .oracles import brute_min_max_distance


# -- loading ----------------------------------------------------------------

def test_load_iris_drops_duplicates(iris_csv_path):
    d = load_dataset(iris_csv_path, label_column="class")
    assert d.n == 147
    assert d.n_features == 4
    assert d.n_classes == 3


def test_load_empty_file_errors(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DatasetError, match="empty dataset"):
        load_dataset(path)


def test_header_only_file_errors():
    with pytest.raises(DatasetError, match="empty dataset"):
        parse_dataset("a,b,c\n", label_column="c")


def test_missing_value_row_dropped():
    text = "1,2\n3,4\n5,6\n7,\n9,10\n"
    d = parse_dataset(text)
    assert d.n == 4
    assert d.instances[:, 0].tolist() == [1, 3, 5, 9]


def test_question_mark_is_missing():
    d = parse_dataset("1,2\n?,4\n5,6\n")
    assert d.n == 2


def test_non_numeric_cell_errors():
    with pytest.raises(DatasetError, match="non-numeric"):
        parse_dataset("1,2\nfoo,4\n")


def test_label_column_by_index():
    d = parse_dataset("1,2,a\n3,4,b\n", label_column=2)
    assert d.n_features == 2
    assert d.labels.tolist() == ["a", "b"]


def test_label_column_absent():
    with pytest.raises(DatasetError, match="absent"):
        parse_dataset("a,b\n1,2\n", label_column="c")


def test_duplicate_rows_keep_first_label():
    text = "x,y,label\n1,2,first\n1,2,second\n3,4,other\n"
    d = parse_dataset(text, label_column="label")
    assert d.n == 2
    assert d.labels.tolist() == ["first", "other"]


def test_row_order_preserved():
    d = parse_dataset("5,1\n3,2\n4,9\n")
    assert d.instances[:, 0].tolist() == [5, 3, 4]


def test_ragged_row_errors():
    with pytest.raises(DatasetError, match="cells"):
        parse_dataset("1,2\n3\n")


# -- normalization -----------------------------------------------------------

def test_normalize_affine_endpoints():
    d = normalize(Dataset(np.array([[2.0], [4.0], [6.0]])))
    assert d.instances[:, 0].tolist() == [0.0, 0.5, 1.0]


def test_normalize_constant_column():
    d = normalize(Dataset(np.array([[3.0, 1.0], [3.0, 2.0], [3.0, 3.0]])))
    assert d.instances[:, 0].tolist() == [0.0, 0.0, 0.0]


def test_normalize_identity_on_unit_column():
    d = normalize(Dataset(np.array([[0.0], [1.0]])))
    assert d.instances[:, 0].tolist() == [0.0, 1.0]


@given(hnp.arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)),
                  elements=st.floats(-1e6, 1e6, allow_nan=False)))
def test_normalize_idempotent_and_bounded(X):
    once = normalize(Dataset(X))
    twice = normalize(once)
    assert np.array_equal(once.instances, twice.instances)
    assert once.instances.min() >= 0.0
    assert once.instances.max() <= 1.0


def test_normalize_preserves_labels():
    d = normalize(Dataset(np.array([[1.0], [2.0]]), np.array(["a", "b"])))
    assert d.labels.tolist() == ["a", "b"]


# -- distance stats ------------------------------------------------------------

def test_distance_stats_single_pair():
    d = Dataset(np.array([[0.0, 0.0], [1.0, 1.0]]))
    stats = distance_stats(d)
    assert stats.min_d == stats.max_d == pytest.approx(np.sqrt(2))


def test_distance_stats_collinear():
    d = Dataset(np.array([[0.0], [0.5], [1.0]]))
    stats = distance_stats(d)
    assert stats.min_d == pytest.approx(0.5)
    assert stats.max_d == pytest.approx(1.0)


def test_distance_stats_matches_brute_force(iris_dataset):
    stats = distance_stats(iris_dataset)
    lo, hi = brute_min_max_distance(iris_dataset.instances)
    assert abs(stats.min_d - lo) <= 1e-12 * lo
    assert abs(stats.max_d - hi) <= 1e-12 * hi


def test_distance_stats_excludes_zero():
    # distinct raw rows that collide after normalization
    d = Dataset(np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]))
    stats = distance_stats(d)
    assert stats.min_d == pytest.approx(1.0)


def test_distance_stats_needs_two_rows():
    with pytest.raises(ValueError):
        distance_stats(Dataset(np.array([[1.0]])))


# -- supervision split --------------------------------------------------------

def _labeled(n):
    return Dataset(np.arange(n, dtype=float).reshape(-1, 1),
                   np.array(["x"] * n))


def test_split_sizes_ten():
    split = split_supervision(_labeled(10), seed=1)
    assert split.supervision_idx.size == 7
    assert split.leftout_idx.size == 3


def test_split_sizes_iris(iris_dataset):
    split = split_supervision(iris_dataset, seed=0)
    assert split.supervision_idx.size == 103
    assert split.leftout_idx.size == 44


def test_split_deterministic():
    a = split_supervision(_labeled(20), seed=9)
    b = split_supervision(_labeled(20), seed=9)
    assert np.array_equal(a.supervision_idx, b.supervision_idx)
    assert np.array_equal(a.leftout_idx, b.leftout_idx)


def test_split_requires_labels():
    with pytest.raises(ValueError, match="unlabeled"):
        split_supervision(Dataset(np.zeros((4, 1))), seed=0)


@given(st.integers(2, 200), st.integers(0, 2**32 - 1))
def test_split_partitions_indices(n, seed):
    split = split_supervision(_labeled(n), seed=seed)
    merged = np.concatenate([split.supervision_idx, split.leftout_idx])
    assert np.array_equal(np.sort(merged), np.arange(n))
    assert split.supervision_idx.size == int(np.floor(0.7 * n + 0.5))
