"""Solver-level checks: closed forms, an independent dense oracle, and the
structural invariants of the dual potentials."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entop import (
    AllocationRefusedError,
    CostSpec,
    DualPotentials,
    EntropicKernel,
    InvalidEpsilonError,
    NonConvergenceError,
    PointCloud,
    SolverOptions,
    kernel_evaluate,
    kernel_matrix,
    solve_self_transport,
    solve_sinkhorn,
)
from _util import dense_sinkhorn_plan, plan_from_duals, two_point_sigma

TWO_POINTS = PointCloud.uniform(np.array([[0.0], [1.0]]))
SQE = CostSpec()


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.5])
def test_two_point_closed_form(eps):
    duals = solve_self_transport(TWO_POINTS, SQE, eps, SolverOptions(tol=1e-12))
    s = two_point_sigma(eps)
    K = kernel_matrix(duals)
    expect = np.array([[2 * (1 - s), 2 * s], [2 * s, 2 * (1 - s)]])
    np.testing.assert_allclose(K, expect, atol=1e-10)
    assert duals.symmetric
    np.testing.assert_array_equal(duals.alpha, duals.beta)


def test_single_point_identity():
    one = PointCloud.uniform(np.array([[0.3]]))
    duals = solve_self_transport(one, SQE, 0.7)
    np.testing.assert_allclose(duals.alpha, 0.0, atol=1e-12)
    np.testing.assert_allclose(kernel_matrix(duals), [[1.0]], atol=1e-12)


def test_oracle_equivalence_16_points():
    # same plan as an independent plain-exponential Sinkhorn run
    pts = PointCloud.uniform(np.linspace(0, 1, 16)[:, None])
    duals = solve_sinkhorn(pts, pts, SQE, 0.05, SolverOptions(tol=1e-10))
    res = duals.residuals
    assert max(res.source_l1, res.target_l1) < 1e-6
    C = SQE.pairwise(pts.points, pts.points)
    oracle = dense_sinkhorn_plan(C, pts.weights, pts.weights, 0.05)
    np.testing.assert_allclose(plan_from_duals(duals), oracle, atol=1e-8)


@pytest.mark.parametrize("eps", [0.01, 0.1, 1.0])
def test_oracle_equivalence_random_cloud(eps):
    rng = np.random.default_rng(42)
    src = PointCloud.uniform(rng.uniform(0, 1, (24, 2)))
    tgt = PointCloud.uniform(rng.uniform(0, 1, (19, 2)))
    duals = solve_sinkhorn(src, tgt, SQE, eps, SolverOptions(tol=1e-10))
    C = SQE.pairwise(src.points, tgt.points)
    oracle = dense_sinkhorn_plan(C, src.weights, tgt.weights, eps)
    np.testing.assert_allclose(plan_from_duals(duals), oracle, atol=1e-8)


def test_product_measure_limit():
    rng = np.random.default_rng(1)
    cloud = PointCloud.uniform(rng.uniform(0, 1, (30, 2)))
    duals = solve_self_transport(cloud, SQE, 1e6)
    K = kernel_matrix(duals)
    np.testing.assert_allclose(K, 1.0, atol=1e-3)


def test_flat_potential_on_torus_grid():
    # equispaced samples have exact translation symmetry, so the symmetric
    # potential must be constant up to solver precision
    grid = PointCloud.uniform((np.arange(200) / 200)[:, None])
    duals = solve_self_transport(grid, CostSpec(kind="sqtorus"), 0.05)
    spread = duals.alpha.max() - duals.alpha.min()
    assert spread < 0.02 * 0.05


def test_potential_spread_shrinks_with_n():
    # random-sample analogue of the flat-potential limit; the range is a
    # noisy order statistic, so compare seed-averaged means
    def mean_spread(n):
        spreads = []
        for s in range(6):
            rng = np.random.default_rng(s)
            cloud = PointCloud.uniform(rng.uniform(0, 1, (n, 1)))
            duals = solve_self_transport(cloud, CostSpec(kind="sqtorus"), 0.05)
            spreads.append(duals.alpha.max() - duals.alpha.min())
        return np.mean(spreads)

    assert mean_spread(800) < 0.8 * mean_spread(200)


def test_marginal_feasibility_and_symmetry():
    rng = np.random.default_rng(7)
    cloud = PointCloud.uniform(rng.uniform(0, 1, (40, 2)))
    duals = solve_self_transport(cloud, SQE, 0.3, SolverOptions(tol=1e-10))
    K = kernel_matrix(duals)
    np.testing.assert_allclose(K, K.T, atol=1e-10)
    np.testing.assert_allclose(cloud.weights @ K, 1.0, atol=1e-8)
    np.testing.assert_allclose(K @ cloud.weights, 1.0, atol=1e-8)
    assert np.all(K > 0)


def test_gauge_invariance():
    rng = np.random.default_rng(11)
    src = PointCloud.uniform(rng.uniform(0, 1, (12, 1)))
    tgt = PointCloud.uniform(rng.uniform(0, 1, (10, 1)))
    duals = solve_sinkhorn(src, tgt, SQE, 0.2)
    K = kernel_matrix(duals)
    shifted = DualPotentials(
        alpha=duals.alpha + 1.7,
        beta=duals.beta - 1.7,
        epsilon=duals.epsilon,
        cost=duals.cost,
        source=duals.source,
        target=duals.target,
        symmetric=False,
        residuals=duals.residuals,
        iterations=duals.iterations,
    )
    K2 = kernel_matrix(shifted)
    np.testing.assert_allclose(K2, K, rtol=1e-12)


def test_gauge_fixed_means():
    rng = np.random.default_rng(13)
    src = PointCloud.uniform(rng.uniform(0, 1, (15, 2)))
    tgt = PointCloud.uniform(rng.uniform(0, 1, (9, 2)))
    duals = solve_sinkhorn(src, tgt, SQE, 0.4)
    assert abs(src.weights @ duals.alpha - tgt.weights @ duals.beta) < 1e-9


def test_warm_start_matches_cold():
    rng = np.random.default_rng(17)
    cloud = PointCloud.uniform(rng.uniform(0, 1, (50, 1)))
    opts = SolverOptions(tol=1e-10)
    warm_base = solve_self_transport(cloud, SQE, 0.2, opts)
    warm = solve_self_transport(cloud, SQE, 0.1, opts, init=warm_base)
    cold = solve_self_transport(cloud, SQE, 0.1, opts)
    np.testing.assert_allclose(
        kernel_matrix(warm), kernel_matrix(cold), atol=1e-6
    )


def test_kernel_evaluate_consistency():
    duals = solve_self_transport(TWO_POINTS, SQE, 0.1, SolverOptions(tol=1e-12))
    K = kernel_matrix(duals)
    s = two_point_sigma(0.1)
    # in-sample pairs reproduce matrix entries
    for i, x in enumerate([0.0, 1.0]):
        for j, z in enumerate([0.0, 1.0]):
            v = kernel_evaluate(duals, np.array([x]), np.array([z]))
            np.testing.assert_allclose(v, K[j, i], atol=1e-12)
    np.testing.assert_allclose(
        kernel_evaluate(duals, np.array([0.0]), np.array([1.0])), 2 * s, atol=1e-9
    )


def test_kernel_evaluate_midpoint_hand_formula():
    # alpha(0.5) = -eps log(sum_j w_j exp((beta_j - c(0.5, x_j)) / eps))
    eps = 0.1
    duals = solve_self_transport(TWO_POINTS, SQE, eps, SolverOptions(tol=1e-12))
    beta = duals.beta
    terms = np.log(0.5) + (beta - 0.25) / eps
    alpha_mid = -eps * np.logaddexp(terms[0], terms[1])
    expect = np.exp((alpha_mid + beta[1] - 0.25) / eps)
    got = kernel_evaluate(duals, np.array([0.5]), np.array([1.0]))
    np.testing.assert_allclose(got, expect, rtol=1e-12)


def test_dimension_mismatch():
    duals = solve_self_transport(TWO_POINTS, SQE, 0.1)
    with pytest.raises(Exception):
        kernel_evaluate(duals, np.array([0.0, 0.0]), np.array([1.0]))


def test_invalid_epsilon():
    with pytest.raises(InvalidEpsilonError):
        solve_self_transport(TWO_POINTS, SQE, 0.0)
    with pytest.raises(InvalidEpsilonError):
        solve_sinkhorn(TWO_POINTS, TWO_POINTS, SQE, -1.0)


def test_nonconvergence_reports_residual():
    rng = np.random.default_rng(23)
    cloud = PointCloud.uniform(rng.normal(size=(64, 2)))
    with pytest.raises(NonConvergenceError) as exc:
        solve_self_transport(cloud, SQE, 0.05, SolverOptions(max_iter=8))
    assert exc.value.iterations == 8
    assert exc.value.residual > 0


def test_allocation_refused():
    rng = np.random.default_rng(29)
    cloud = PointCloud.uniform(rng.uniform(0, 1, (64, 1)))
    duals = solve_self_transport(cloud, SQE, 0.5)
    with pytest.raises(AllocationRefusedError):
        kernel_matrix(duals, dense_threshold=32)


def test_solver_options_json_round_trip():
    opts = SolverOptions(epsilon=0.25, max_iter=500, tol=1e-9)
    back = SolverOptions.from_json(opts.to_json())
    assert back == opts
    with pytest.raises(Exception):
        SolverOptions.from_json('{"epsilon": 0.1, "bogus": 3}')


def test_query_extension_matches_stored_potentials():
    rng = np.random.default_rng(31)
    cloud = PointCloud.uniform(rng.uniform(0, 1, (25, 1)))
    duals = solve_self_transport(cloud, SQE, 0.2, SolverOptions(tol=1e-11))
    kern = EntropicKernel(duals)
    ext = kern.potential_source_at(cloud.points)
    # in-sample queries reproduce the stored alpha up to the residual scale
    np.testing.assert_allclose(ext, duals.alpha, atol=1e-8)


@given(
    st.integers(min_value=2, max_value=12),
    st.floats(min_value=0.1, max_value=2.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
@settings(max_examples=25, deadline=None)
def test_marginals_property(n, eps, seed):
    rng = np.random.default_rng(seed)
    src = PointCloud.uniform(rng.uniform(0, 1, (n, 1)))
    tgt = PointCloud.uniform(rng.uniform(0, 1, (max(2, n - 1), 1)))
    duals = solve_sinkhorn(src, tgt, SQE, eps)
    K = kernel_matrix(duals)  # K[j, i] = k(x_i, z_j)
    np.testing.assert_allclose(K @ src.weights, 1.0, atol=1e-5)
    np.testing.assert_allclose(tgt.weights @ K, 1.0, atol=1e-5)
