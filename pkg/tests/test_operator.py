"""Operator assembly: mass preservation, the two-point closed form, dense
vs lazy agreement, and the CSV/trajectory ingestion paths."""

import numpy as np
import pytest

from entop import (
    CostSpec,
    DimensionMismatchError,
    EmptyDataError,
    PointCloud,
    SolverOptions,
    TransitionData,
    apply,
    apply_adjoint,
    build_operator,
    operator_kernel_evaluate,
    sample_torus_shift,
    top_eigenpairs,
    TorusShiftSpec,
)
from _util import two_point_sigma

SQE = CostSpec()
TORUS = CostSpec(kind="sqtorus")


def identity_two_point():
    pts = np.array([[0.0], [1.0]])
    return TransitionData.from_arrays(pts, pts)


def test_two_point_identity_dense_matrix():
    # G I G with G the 2x2 blur; eigenvalues {1, (1-2s)^2}
    op = build_operator(identity_two_point(), SQE, 0.1, variant="stationary")
    s = two_point_sigma(0.1)
    G = np.array([[2 * (1 - s), 2 * s], [2 * s, 2 * (1 - s)]])
    # each blur factor acts on value vectors with weight 1/N = 1/2
    expect = (G / 2.0) @ np.eye(2) @ (G / 2.0)
    np.testing.assert_allclose(op.dense_matrix(), expect, atol=1e-9)
    vals = np.linalg.eigvals(op.dense_matrix())
    np.testing.assert_allclose(
        sorted(vals.real, reverse=True), [1.0, (1 - 2 * s) ** 2], atol=1e-9
    )


def test_mass_preservation():
    rng = np.random.default_rng(0)
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (80, 2)), rng.uniform(0, 1, (80, 2))
    )
    for variant in ("stationary", "nonstationary"):
        op = build_operator(data, SQE, 0.3, variant=variant)
        out = apply(op, np.ones(80))
        np.testing.assert_allclose(out, 1.0, atol=1e-8)
        assert np.all(op.dense_matrix() >= 0)


def test_subdominant_mode_on_torus():
    data = sample_torus_shift(TorusShiftSpec(shifts=(0.2,), sigma=0.01), 1000, 3)
    op = build_operator(data, TORUS, 0.01)
    lam = np.linalg.eigvals(op.dense_matrix())
    lam = lam[np.argsort(-np.abs(lam))]
    assert 0.5 < abs(lam[1]) < 1.0


def test_basis_indicator_consistency():
    rng = np.random.default_rng(1)
    n = 30
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (n, 1)), rng.uniform(0, 1, (n, 1))
    )
    op = build_operator(data, SQE, 0.2)
    M = op.dense_matrix()
    i = 7
    u = np.zeros(n)
    u[i] = np.sqrt(n)
    np.testing.assert_allclose(apply(op, u), M[:, i] * np.sqrt(n), atol=1e-10)


def test_lazy_dense_agreement():
    rng = np.random.default_rng(2)
    n = 500
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (n, 2)), rng.uniform(0, 1, (n, 2))
    )
    dense = build_operator(data, SQE, 0.4, representation="dense")
    lazy = build_operator(data, SQE, 0.4, representation="lazy")
    u = rng.normal(size=n)
    np.testing.assert_allclose(apply(lazy, u), apply(dense, u), atol=1e-10)
    v = rng.normal(size=n)
    np.testing.assert_allclose(
        apply_adjoint(lazy, v), apply_adjoint(dense, v), atol=1e-10
    )


def test_adjoint_is_weighted_transpose():
    rng = np.random.default_rng(3)
    n = 40
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (n, 1)), rng.uniform(0, 1, (n, 1))
    )
    op = build_operator(data, SQE, 0.3, variant="nonstationary")
    u, v = rng.normal(size=n), rng.normal(size=n)
    # <T u, v>_out == <u, T* v>_in with uniform 1/n weights on both sides
    lhs = np.dot(apply(op, u), v) / n
    rhs = np.dot(u, apply_adjoint(op, v)) / n
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_kernel_evaluate_matches_matrix():
    rng = np.random.default_rng(4)
    n = 25
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (n, 1)), rng.uniform(0, 1, (n, 1))
    )
    op = build_operator(data, SQE, 0.25, variant="nonstationary")
    M = op.dense_matrix()
    # value-basis matrix entry is the kernel at the sample pair over N
    i, j = 11, 17
    t = operator_kernel_evaluate(op, data.x.points[i], data.y.points[j])
    np.testing.assert_allclose(t / n, M[j, i], atol=1e-10)


def test_two_point_kernel_hand_expansion():
    eps = 0.1
    s = two_point_sigma(eps)
    op = build_operator(identity_two_point(), SQE, eps, variant="nonstationary")
    # t(0,0) = sum_i w_i k1(0, x_i) k2(y_i, 0), both kernels the 2x2 blur
    expect = 0.5 * (2 * (1 - s)) ** 2 + 0.5 * (2 * s) ** 2
    got = operator_kernel_evaluate(op, np.array([0.0]), np.array([0.0]))
    np.testing.assert_allclose(got, expect, atol=1e-9)


def test_epsilon_to_infinity_degeneracy():
    rng = np.random.default_rng(5)
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (60, 2)), rng.uniform(0, 1, (60, 2))
    )
    diam_sq = 2.0  # unit square upper bound
    op = build_operator(data, SQE, 1e6 * diam_sq)
    lam = np.sort(np.abs(np.linalg.eigvals(op.dense_matrix())))[::-1]
    np.testing.assert_allclose(lam[0], 1.0, atol=1e-8)
    assert lam[1] < 0.01


def test_duplicate_pairs_share_eigenfunction_values():
    rng = np.random.default_rng(6)
    n = 50
    X, Y = rng.uniform(0, 1, (n, 1)), rng.uniform(0, 1, (n, 1))
    Xd = np.vstack([X, X[12:13]])
    Yd = np.vstack([Y, Y[12:13]])
    op = build_operator(TransitionData.from_arrays(Xd, Yd), SQE, 0.2)
    M = op.dense_matrix()
    # duplicated samples produce identical rows and columns
    np.testing.assert_allclose(M[12], M[n], atol=1e-12)
    np.testing.assert_allclose(M[:, 12], M[:, n], atol=1e-12)
    spec = top_eigenpairs(op, k=4, method="dense")
    for u in spec.functions:
        assert abs(u[12] - u[n]) <= 1e-8 * max(1.0, np.abs(u).max())


def test_spectral_radius_bound():
    rng = np.random.default_rng(7)
    for trial in range(5):
        n = int(rng.integers(20, 120))
        data = TransitionData.from_arrays(
            rng.uniform(0, 1, (n, 2)), rng.uniform(0, 1, (n, 2))
        )
        op = build_operator(data, SQE, 0.5)
        lam = np.abs(np.linalg.eigvals(op.dense_matrix()))
        assert lam.max() <= 1 + 1e-6


def test_variant_and_representation_validation():
    data = identity_two_point()
    with pytest.raises(ValueError):
        build_operator(data, SQE, 0.1, variant="bogus")
    with pytest.raises(ValueError):
        build_operator(data, SQE, 0.1, representation="sparse")


def test_apply_dimension_mismatch():
    op = build_operator(identity_two_point(), SQE, 0.1)
    with pytest.raises(DimensionMismatchError):
        apply(op, np.ones(3))


def test_transition_data_validation():
    with pytest.raises(DimensionMismatchError):
        TransitionData.from_arrays(np.zeros((3, 1)), np.zeros((4, 1)))
    with pytest.raises(DimensionMismatchError):
        TransitionData.from_arrays(np.zeros((3, 1)), np.zeros((3, 2)))
    with pytest.raises(DimensionMismatchError):
        TransitionData.from_arrays(
            np.zeros((3, 1)), np.zeros((3, 1)), labels={"a": np.zeros(2)}
        )
    with pytest.raises(ValueError):
        TransitionData(
            PointCloud(np.zeros((2, 1)), np.array([0.7, 0.3])),
            PointCloud.uniform(np.zeros((2, 1))),
        )


def test_trajectory_extraction():
    z = np.arange(10.0)
    data = TransitionData.from_trajectory(z, t0=1, stride=2, lag=3)
    np.testing.assert_array_equal(data.x.points[:, 0], [1, 3, 5])
    np.testing.assert_array_equal(data.y.points[:, 0], [4, 6, 8])
    assert data.meta == {"t0": 1, "stride": 2, "lag": 3}
    with pytest.raises(EmptyDataError):
        TransitionData.from_trajectory(np.zeros(2), lag=5)
    with pytest.raises(ValueError):
        TransitionData.from_trajectory(z, stride=0)


def test_transition_csv_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (12, 2)),
        rng.uniform(0, 1, (12, 2)),
        labels={"angle": rng.uniform(0, 1, 12)},
    )
    path = tmp_path / "pairs.csv"
    data.to_csv(path)
    back = TransitionData.from_csv(path)
    np.testing.assert_array_equal(back.x.points, data.x.points)
    np.testing.assert_array_equal(back.y.points, data.y.points)
    np.testing.assert_array_equal(back.labels["angle"], data.labels["angle"])


def test_transition_csv_headerless_even_split(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("0.0,0.5,1.0,1.5\n2.0,2.5,3.0,3.5\n")
    data = TransitionData.from_csv(path)
    assert data.d == 2
    np.testing.assert_array_equal(data.x.points, [[0.0, 0.5], [2.0, 2.5]])
    np.testing.assert_array_equal(data.y.points, [[1.0, 1.5], [3.0, 3.5]])


def test_warm_start_build():
    rng = np.random.default_rng(9)
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (60, 1)), rng.uniform(0, 1, (60, 1))
    )
    coarse = build_operator(data, SQE, 0.3)
    warm = build_operator(data, SQE, 0.1, init=coarse)
    cold = build_operator(data, SQE, 0.1)
    np.testing.assert_allclose(warm.dense_matrix(), cold.dense_matrix(), atol=1e-6)


def test_build_default_tolerance_is_tight():
    rng = np.random.default_rng(10)
    data = TransitionData.from_arrays(
        rng.uniform(0, 1, (100, 1)), rng.uniform(0, 1, (100, 1))
    )
    op = build_operator(data, SQE, 0.2)
    assert np.abs(apply(op, np.ones(100)) - 1.0).max() < 1e-8
    # a looser explicit tolerance is honored
    loose = build_operator(data, SQE, 0.2, opts=SolverOptions(tol=1e-4))
    assert loose.options.tol == 1e-4
