import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randomlab.dataset import (
    Adjacency,
    DataError,
    ExperimentData,
    Schema,
    load_csv,
    load_edges,
    neighborhood_treatment,
    write_csv,
    write_edges,
)


def test_rejects_non_binary_treatment():
    with pytest.raises(DataError, match="non-binary treatment"):
        ExperimentData([1.0, 2.0, 3.0], [0, 2, 1], np.zeros((3, 1)))


def test_rejects_length_mismatch_and_nan():
    with pytest.raises(DataError):
        ExperimentData([1.0, 2.0], [0, 1, 1], np.zeros((3, 1)))
    with pytest.raises(DataError):
        ExperimentData([1.0, np.nan, 3.0], [0, 1, 1], np.zeros((3, 1)))


def test_arrays_are_read_only(small_data):
    with pytest.raises(ValueError):
        small_data.outcomes[0] = 1.0


def test_adjacency_validation():
    with pytest.raises(DataError, match="self-loop"):
        Adjacency(3, [(1, 1)])
    with pytest.raises(DataError, match="out of range"):
        Adjacency(3, [(0, 3)])


def test_exposure_counts_treated_neighbours():
    adj = Adjacency(4, [(0, 1), (0, 2), (2, 3)])
    z = np.array([0, 1, 1, 0])
    assert adj.exposure(z).tolist() == [2, 0, 0, 1]
    assert neighborhood_treatment(adj, z).tolist() == [1, 0, 0, 1]


def test_cluster_adjacency_is_block_diagonal():
    ids = np.array([0, 0, 1, 1, 1, 2, 2])
    A = Adjacency.from_clusters(ids).dense()
    expected = (ids[:, None] == ids[None, :]).astype(int) - np.eye(ids.size, dtype=int)
    assert np.array_equal(A, expected)


def test_csv_round_trip_is_exact(tmp_path, small_data):
    path = tmp_path / "d.csv"
    schema = write_csv(small_data, path)
    back = load_csv(path, schema)
    assert back.equals(small_data)


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("y,z,x\n1,0,a\n")
    with pytest.raises(DataError, match="non-numeric"):
        load_csv(p, Schema("y", "z", ("x",)))
    with pytest.raises(DataError, match="missing column"):
        load_csv(p, Schema("y", "t", ("x",)))
    p.write_text("y,z\n1,3\n2,0\n")
    with pytest.raises(DataError, match="non-binary treatment"):
        load_csv(p, Schema("y", "z"))
    p.write_text("")
    with pytest.raises(DataError, match="empty"):
        load_csv(p, Schema("y", "z"))


def test_edge_file_round_trip_with_one_based_index(tmp_path):
    adj = Adjacency(5, [(0, 4), (1, 2)])
    path = tmp_path / "e.csv"
    write_edges(adj, path, index_base=1)
    assert load_edges(path, 5, index_base=1) == adj


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_exposure_matches_dense_product(n, seed):
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.3]
    adj = Adjacency(n, pairs)
    z = rng.integers(0, 2, n)
    assert np.array_equal(adj.exposure(z), adj.dense() @ z)
