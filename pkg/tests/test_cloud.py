import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entop import (
    CostSpec,
    DimensionMismatchError,
    EmptyDataError,
    PointCloud,
    read_csv_table,
    squared_euclidean,
    squared_torus,
)


def test_uniform_weights():
    pc = PointCloud.uniform(np.zeros((7, 2)))
    assert pc.n == 7 and pc.d == 2
    np.testing.assert_allclose(pc.weights, 1 / 7, atol=1e-15)


def test_weights_must_sum_to_one():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((3, 1)), np.array([0.5, 0.5, 0.5]))
    with pytest.raises(ValueError):
        PointCloud(np.zeros((2, 1)), np.array([-0.2, 1.2]))


def test_point_weight_count_mismatch():
    with pytest.raises((ValueError, DimensionMismatchError)):
        PointCloud(np.zeros((3, 1)), np.array([0.5, 0.5]))


def test_empty_cloud_rejected():
    with pytest.raises((ValueError, EmptyDataError)):
        PointCloud.uniform(np.zeros((0, 2)))


@given(
    st.integers(min_value=1, max_value=8),
    st.integers(min_value=1, max_value=3),
    st.sampled_from(["sqeuclidean", "sqtorus"]),
    st.integers(min_value=0, max_value=2**31 - 1),
)
@settings(max_examples=40, deadline=None)
def test_cost_axioms(n, d, kind, seed):
    # symmetry, zero diagonal, non-negativity on random probe clouds
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, d))
    spec = CostSpec(kind=kind)
    C = spec.pairwise(X, X)
    assert np.all(C >= 0)
    np.testing.assert_allclose(C, C.T, atol=1e-14)
    assert np.all(np.abs(np.diag(C)) == 0)


def test_torus_cost_wraps():
    spec = CostSpec(kind="sqtorus")
    C = spec.pairwise(np.array([[0.05]]), np.array([[0.95]]))
    np.testing.assert_allclose(C[0, 0], 0.1**2, atol=1e-14)
    # brute-force wrap oracle on random pairs
    rng = np.random.default_rng(3)
    X, Z = rng.uniform(0, 1, (20, 2)), rng.uniform(0, 1, (15, 2))
    C = spec.pairwise(X, Z)
    shifts = np.array([-1.0, 0.0, 1.0])
    expect = np.zeros_like(C)
    for a in range(20):
        for b in range(15):
            total = 0.0
            for ax in range(2):
                dx = X[a, ax] - Z[b, ax] + shifts
                total += np.min(dx**2)
            expect[a, b] = total
    np.testing.assert_allclose(C, expect, atol=1e-12)


def test_torus_cost_custom_periods():
    spec = CostSpec(kind="sqtorus", periods=(2.0, 0.5))
    C = spec.pairwise(np.array([[1.9, 0.45]]), np.array([[0.1, 0.05]]))
    np.testing.assert_allclose(C[0, 0], 0.2**2 + 0.1**2, atol=1e-12)
    with pytest.raises(DimensionMismatchError):
        spec.pairwise(np.zeros((2, 3)), np.zeros((2, 3)))


def test_cost_kind_validation():
    with pytest.raises(ValueError):
        CostSpec(kind="manhattan")
    with pytest.raises(ValueError):
        CostSpec(kind="sqtorus", periods=(1.0, -1.0))


def test_cost_factories():
    assert squared_euclidean().kind == "sqeuclidean"
    t = squared_torus((2.0,))
    assert t.kind == "sqtorus" and t.periods == (2.0,)


def test_cloud_csv_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    pc = PointCloud.uniform(rng.normal(size=(9, 3)))
    path = tmp_path / "cloud.csv"
    pc.to_csv(path)
    back = PointCloud.from_csv(path)
    np.testing.assert_array_equal(back.points, pc.points)
    np.testing.assert_allclose(back.weights, pc.weights, atol=1e-15)


def test_cloud_csv_weight_column(tmp_path):
    w = np.array([0.2, 0.3, 0.5])
    pc = PointCloud(np.arange(3, dtype=float)[:, None], w)
    path = tmp_path / "wc.csv"
    pc.to_csv(path, include_weights=True)
    back = PointCloud.from_csv(path)
    np.testing.assert_allclose(back.weights, w, atol=1e-15)


def test_read_csv_table_headerless(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("1.0,2.0\n3.0,4.0\n")
    names, table = read_csv_table(path)
    assert names is None
    np.testing.assert_array_equal(table, [[1, 2], [3, 4]])


def test_read_csv_table_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(EmptyDataError):
        read_csv_table(empty)
    bad = tmp_path / "b.csv"
    bad.write_text("a,b\n1.0,oops\n")
    with pytest.raises(ValueError):
        read_csv_table(bad)
