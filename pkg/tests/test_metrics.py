"""Kernel distances, slope fits, phase statistics, report CSV."""

import math

import numpy as np
import pytest

from entop import (
    CostSpec,
    KernelDistanceReport,
    SmallEigenvalueError,
    TorusShiftSpec,
    aggregate_reports,
    build_operator,
    circular_correlation,
    convergence_study,
    dimension_study,
    empirical_population_distance,
    fit_loglog_slope,
    fourier_mode_match,
    l2_distance_grid,
    l2_distance_mc,
    phase_of_subdominant,
    population_kernel_torus,
    read_report_csv,
    sample_torus_shift,
    t_vs_regularized_distance,
    top_eigenpairs,
    true_kernel_torus,
    write_report_csv,
)

TORUS = CostSpec(kind="sqtorus")
SIGMA5 = TorusShiftSpec(shifts=(0.2,), sigma=0.05)


def uniform_pair_sampler(rng, m):
    return rng.uniform(0.0, 1.0, m), rng.uniform(0.0, 1.0, m)


def test_grid_distance_trivials():
    one = lambda X, Y: np.ones_like(X)
    zero = lambda X, Y: np.zeros_like(X)
    assert l2_distance_grid(one, one) == 0.0
    assert l2_distance_grid(one, zero) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        l2_distance_grid(one, zero, resolution=32)


def test_proxy_resolution_converged():
    spec = TorusShiftSpec(shifts=(0.2,), sigma=0.02)
    va = t_vs_regularized_distance(spec, 0.03, resolution=512).value
    vb = t_vs_regularized_distance(spec, 0.03, resolution=1024).value
    assert abs(va - vb) < 1e-3


def test_regularization_bias_decreases_with_epsilon():
    vals = [
        t_vs_regularized_distance(SIGMA5, eps, resolution=256).value
        for eps in (0.1, 0.03, 0.01, 0.003)
    ]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_mc_distance_trivials():
    one = lambda X, Y: np.ones_like(X)
    value, se = l2_distance_mc(one, one, uniform_pair_sampler, m=2000)
    assert value == 0.0 and se == 0.0
    with pytest.raises(ValueError):
        l2_distance_mc(one, one, uniform_pair_sampler, m=500)


def test_mc_agrees_with_grid_quadrature():
    proxy = population_kernel_torus(SIGMA5, 0.1)
    f = lambda X, Y: true_kernel_torus(SIGMA5, X, Y)
    grid_value = l2_distance_grid(f, proxy, resolution=512)
    mc_value, se = l2_distance_mc(f, proxy, uniform_pair_sampler, m=100_000, seed=0)
    assert abs(mc_value - grid_value) <= 3.0 * se


def test_mc_unbiased_across_seeds():
    proxy = population_kernel_torus(SIGMA5, 0.1)
    f = lambda X, Y: true_kernel_torus(SIGMA5, X, Y)
    grid_value = l2_distance_grid(f, proxy, resolution=512)
    vals = [
        l2_distance_mc(f, proxy, uniform_pair_sampler, m=20_000, seed=s)[0]
        for s in range(50)
    ]
    se_mean = np.std(vals, ddof=1) / np.sqrt(len(vals))
    assert abs(np.mean(vals) - grid_value) <= 2.0 * se_mean


def test_empirical_distance_report_fields():
    rep = empirical_population_distance(SIGMA5, 0.1, 200, seed=0, n_mc=2000)
    assert rep.pair == "t_eps_vs_t_eps_N"
    assert rep.method == "mc"
    assert rep.n == 200 and rep.d == 1
    assert rep.value > 0 and rep.stderr > 0


def test_convergence_study_short_grid():
    rows, fit = convergence_study(
        SIGMA5, 0.1, ns=[100, 200], n_seeds=2, n_mc=2000, base_seed=0
    )
    assert fit is None
    assert [r.n for r in rows] == [100, 200]
    assert all(r.seed_count == 2 for r in rows)
    with pytest.raises(ValueError):
        convergence_study(SIGMA5, 0.1, ns=[])


def test_fit_loglog_slope_exact_power_law():
    ns = np.array([100, 200, 400, 800, 1600])
    fit = fit_loglog_slope(ns, 3.0 * ns**-0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.ci_low <= -0.5 <= fit.ci_high
    assert fit.stderr < 1e-12
    with pytest.raises(ValueError):
        fit_loglog_slope([10, 20], [1.0, 0.5])
    with pytest.raises(ValueError):
        fit_loglog_slope([10, 20, 40], [1.0, -0.5, 0.2])


def test_dimension_study_fields():
    rows = dimension_study(SIGMA5, 0.1, n=100, dims=(1, 2), n_seeds=2, n_mc=2000)
    assert [r.d for r in rows] == [1, 2]
    assert all(r.n == 100 and r.value > 0 for r in rows)


def test_aggregate_reports():
    base = dict(pair="t_eps_vs_t_eps_N", epsilon=0.1, sigma=0.05, n=100, d=1)
    rows = [KernelDistanceReport(value=v, **base) for v in (1.0, 1.2, 0.8)]
    agg = aggregate_reports(rows)
    assert agg.value == pytest.approx(1.0)
    assert agg.stderr == pytest.approx(np.std([1.0, 1.2, 0.8], ddof=1) / math.sqrt(3))
    assert agg.seed_count == 3
    solo = aggregate_reports(rows[:1])
    assert math.isnan(solo.stderr)
    with pytest.raises(ValueError):
        aggregate_reports([])
    other = KernelDistanceReport(value=1.0, pair="t_vs_t_eps", epsilon=0.1,
                                 sigma=0.05, n=100, d=1)
    with pytest.raises(ValueError):
        aggregate_reports([rows[0], other])


def test_phase_identity_dynamics_zero():
    pts = np.array([[0.0], [1.0]])
    from entop import TransitionData

    op = build_operator(TransitionData.from_arrays(pts, pts), CostSpec(), 0.1)
    spec = top_eigenpairs(op, k=2)
    assert phase_of_subdominant(spec) == 0.0


def test_phase_of_shift_dynamics():
    data = sample_torus_shift(TorusShiftSpec(shifts=(0.2,), sigma=0.01), 600, 0)
    spec = top_eigenpairs(build_operator(data, TORUS, 0.05), k=3)
    phase = phase_of_subdominant(spec)
    assert abs(phase / (2.0 * np.pi) - 0.2) < 0.02


def test_phase_per_lag_matches_lag_one():
    lag1 = sample_torus_shift(TorusShiftSpec(shifts=(0.2,), sigma=0.01), 600, 0)
    spec1 = top_eigenpairs(build_operator(lag1, TORUS, 0.05), k=3)
    # two composed steps: shift doubles, per-step noise adds in variance
    lag2 = sample_torus_shift(TorusShiftSpec(shifts=(0.4,), sigma=0.014), 600, 1)
    spec2 = top_eigenpairs(build_operator(lag2, TORUS, 0.05), k=3)
    p1 = phase_of_subdominant(spec1, lag=1)
    p2 = phase_of_subdominant(spec2, lag=2)
    assert abs(p2 - p1) < 0.05


def test_phase_floor_and_validation():
    data = sample_torus_shift(TorusShiftSpec(shifts=(0.2,), sigma=0.05), 200, 0)
    spec = top_eigenpairs(build_operator(data, TORUS, 1e6), k=3)
    with pytest.raises(SmallEigenvalueError):
        phase_of_subdominant(spec)
    with pytest.raises(ValueError):
        phase_of_subdominant(spec, lag=0)


def test_fourier_mode_match_pure_modes():
    rng = np.random.default_rng(2)
    xs = rng.uniform(0.0, 1.0, 600)
    u = np.exp(2j * np.pi * xs)
    assert fourier_mode_match(u, xs, 1) == pytest.approx(1.0, abs=1e-10)
    assert fourier_mode_match(np.conj(u), xs, 1) == pytest.approx(1.0, abs=1e-10)
    assert fourier_mode_match(1.7j * u, xs, 1) == pytest.approx(1.0, abs=1e-10)
    assert fourier_mode_match(u, xs, 2) < 0.05
    assert fourier_mode_match(np.ones(600), xs, 0) == pytest.approx(1.0, abs=1e-12)


def test_fourier_mode_match_validation():
    xs = np.linspace(0.0, 1.0, 8, endpoint=False)
    with pytest.raises(ValueError):
        fourier_mode_match(np.ones(7), xs, 1)
    with pytest.raises(ValueError):
        fourier_mode_match(np.zeros(8), xs, 1)
    with pytest.raises(ValueError):
        fourier_mode_match(np.ones(8), xs, -1)


def test_fourier_mode_match_on_estimated_eigenfunction():
    data = sample_torus_shift(TorusShiftSpec(shifts=(0.2,), sigma=0.01), 800, 3)
    spec = top_eigenpairs(build_operator(data, TORUS, 0.02), k=3)
    xs = data.x.points[:, 0]
    assert fourier_mode_match(spec.functions[1], xs, 1) > 0.9
    assert fourier_mode_match(spec.functions[1], xs, 2) < 0.1


def test_circular_correlation_extremes():
    rng = np.random.default_rng(4)
    a = rng.uniform(0.0, 2.0 * np.pi, 300)
    assert circular_correlation(a, a + 1.3) == pytest.approx(1.0, abs=1e-12)
    assert circular_correlation(a, -a + 0.4) == pytest.approx(-1.0, abs=1e-12)
    b = rng.uniform(0.0, 2.0 * np.pi, 300)
    assert abs(circular_correlation(a, b)) < 0.2
    assert circular_correlation(a, np.full(300, 0.7)) == 0.0


def test_circular_correlation_brute_force_oracle():
    rng = np.random.default_rng(9)
    a = rng.uniform(0.0, 2.0 * np.pi, 60)
    b = np.mod(a + 0.3 * rng.standard_normal(60), 2.0 * np.pi)
    num = 0.0
    da = 0.0
    db = 0.0
    for i in range(60):
        for j in range(60):
            num += np.sin(a[i] - a[j]) * np.sin(b[i] - b[j])
            da += np.sin(a[i] - a[j]) ** 2
            db += np.sin(b[i] - b[j]) ** 2
    oracle = num / np.sqrt(da * db)
    assert circular_correlation(a, b) == pytest.approx(oracle, abs=1e-12)


def test_circular_correlation_validation():
    with pytest.raises(ValueError):
        circular_correlation([0.1], [0.2])
    with pytest.raises(ValueError):
        circular_correlation([0.1, 0.2], [0.2])


def test_report_csv_round_trip(tmp_path):
    rows = [
        KernelDistanceReport("t_vs_t_eps", 0.1, 0.05, 0, 1, 1.234, method="grid"),
        KernelDistanceReport("t_eps_vs_t_eps_N", 0.1, 0.05, 400, 2, 0.456,
                             stderr=0.01, seed_count=20, method="mc"),
    ]
    path = tmp_path / "report.csv"
    write_report_csv(rows, path)
    back = read_report_csv(path)
    assert len(back) == 2
    assert back[1] == rows[1]
    first = back[0]
    assert (first.pair, first.value, first.method) == ("t_vs_t_eps", 1.234, "grid")
    assert math.isnan(first.stderr)

    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    with pytest.raises(ValueError):
        read_report_csv(bad)
