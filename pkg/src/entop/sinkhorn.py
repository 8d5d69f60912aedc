"""Log-domain Sinkhorn solvers and entropic transport kernels.

This module computes dual potentials ``(alpha, beta)`` of the entropically
regularized optimal transport problem between two weighted point clouds, for
a ground cost ``c`` and regularization strength ``epsilon``:

.. math::

    \\alpha_i = -\\varepsilon \\log \\sum_j v_j
        \\exp\\big((\\beta_j - c(x_i, z_j)) / \\varepsilon\\big),
    \\qquad
    \\beta_j = -\\varepsilon \\log \\sum_i w_i
        \\exp\\big((\\alpha_i - c(x_i, z_j)) / \\varepsilon\\big).

The associated entropic kernel

.. math::

    k(x, z) = \\exp\\big((\\alpha(x) + \\beta(z) - c(x, z)) / \\varepsilon\\big)

has unit integrals against either cloud's measure, which is the property all
downstream operator constructions rely on. All iterations run in the log
domain (soft-min with max subtraction), so small ``epsilon`` values do not
underflow. Dual potentials are only determined up to an additive shift
``(alpha + t, beta - t)``; the returned pair is gauge-fixed so that the
weighted means of ``alpha`` and ``beta`` coincide.

For a cloud transported to itself there is a unique symmetric solution
``alpha == beta``; :func:`solve_self_transport` finds it by the averaging
iteration ``alpha <- (alpha + S(alpha)) / 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .cloud import CostSpec, PointCloud
from .errors import (
    AllocationRefusedError,
    DimensionMismatchError,
    InvalidEpsilonError,
    NonConvergenceError,
)

__all__ = [
    "SolverOptions",
    "MarginalResiduals",
    "DualPotentials",
    "EntropicKernel",
    "solve_sinkhorn",
    "solve_self_transport",
    "kernel_evaluate",
    "kernel_matrix",
]

# Entry budget for materializing cost matrices and for query chunking.
_CHUNK_ENTRIES = 1 << 24

# Intermediate epsilon-scaling stages only need to hand over a decent warm
# start; the final stage enforces the requested tolerance.
_STAGE_TOL = 1e-3


@dataclass
class SolverOptions:
    """Knobs shared by the Sinkhorn solvers.

    Parameters
    ----------
    epsilon : float, optional
        Regularization strength. Solver entry points take epsilon as an
        explicit argument; this field exists so a full solver configuration
        can round-trip through JSON.
    max_iter : int
        Total iteration budget across all epsilon-scaling stages.
    tol : float
        Convergence tolerance on the marginal residuals: both the weighted
        L1 deviation and the largest per-point relative deviation of the
        kernel marginals from 1 must fall below it.
    scaling_factor : float
        Geometric factor of the epsilon-scaling schedule, which starts at
        the squared cloud diameter (a cheap upper bound on the cost) and
        multiplies by this factor until the target epsilon is reached. Set
        to 1 to disable scaling.
    dense_threshold : int
        Largest cloud size for which dense kernel matrices may be
        materialized; beyond it only lazy evaluation is allowed.
    """

    epsilon: float = None
    max_iter: int = 10000
    tol: float = 1e-6
    scaling_factor: float = 0.5
    dense_threshold: int = 20000

    def __post_init__(self):
        if self.epsilon is not None:
            _check_epsilon(self.epsilon)
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not (0 < self.tol < 1):
            raise ValueError("tol must lie in (0, 1)")
        if not (0 < self.scaling_factor <= 1):
            raise ValueError("scaling_factor must lie in (0, 1]")
        if self.dense_threshold < 1:
            raise ValueError("dense_threshold must be positive")

    @classmethod
    def from_json(cls, doc) -> "SolverOptions":
        """Build options from a JSON document (dict, JSON string, or path).

        Unknown keys are rejected.
        """
        if isinstance(doc, (str, bytes)):
            text = str(doc)
            if text.lstrip().startswith("{"):
                doc = json.loads(text)
            else:
                with open(text) as fh:
                    doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValueError("solver options document must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown solver option keys: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class MarginalResiduals(NamedTuple):
    """Deviations of the kernel marginals from 1 for a returned dual pair.

    ``source`` entries measure ``sum_j v_j k_ij - 1`` over source points,
    ``target`` entries measure ``sum_i w_i k_ij - 1`` over target points;
    ``*_l1`` are weighted L1 means, ``*_max`` worst cases.
    """

    source_l1: float
    source_max: float
    target_l1: float
    target_max: float

    @property
    def worst(self) -> float:
        return max(self)


@dataclass
class DualPotentials:
    """Converged dual potentials of an entropic transport problem."""

    source: PointCloud
    target: PointCloud
    cost: CostSpec
    epsilon: float
    alpha: np.ndarray
    beta: np.ndarray
    residuals: MarginalResiduals
    iterations: int
    symmetric: bool = False

    @property
    def kernel(self) -> "EntropicKernel":
        return EntropicKernel(self)


def _check_epsilon(epsilon):
    if not np.isscalar(epsilon) or not np.isfinite(epsilon) or epsilon <= 0:
        raise InvalidEpsilonError(f"epsilon must be a positive finite number, got {epsilon!r}")


def _check_dims(a: PointCloud, b: PointCloud):
    if a.d != b.d:
        raise DimensionMismatchError(
            f"source dimension {a.d} differs from target dimension {b.d}"
        )


def _schedule(eps_target: float, eps_start: float, factor: float) -> list:
    if factor >= 1.0 or eps_start <= eps_target:
        return [eps_target]
    stages = []
    e = eps_start
    while e > eps_target * (1.0 + 1e-12):
        stages.append(e)
        e *= factor
    stages.append(eps_target)
    return stages


def _softmin(C_rows, phi, logw, eps):
    """-eps * log sum_j w_j exp((phi_j - C_ij)/eps), rows of C given."""
    return -eps * logsumexp((phi[None, :] - C_rows) / eps + logw[None, :], axis=1)


def _softmin_lazy(cost, X, Z, phi, logw, eps, out=None):
    n = X.shape[0]
    res = np.empty(n) if out is None else out
    step = max(1, _CHUNK_ENTRIES // max(1, Z.shape[0]))
    for start in range(0, n, step):
        stop = min(n, start + step)
        C = cost.pairwise(X[start:stop], Z)
        res[start:stop] = _softmin(C, phi, logw, eps)
    return res


class _Problem:
    """Precomputed views of one transport problem (cost rows, log-weights)."""

    def __init__(self, source: PointCloud, target: PointCloud, cost: CostSpec):
        self.source = source
        self.target = target
        self.cost = cost
        with np.errstate(divide="ignore"):
            self.logw = np.log(source.weights)
            self.logv = np.log(target.weights)
        if source.n * target.n <= _CHUNK_ENTRIES:
            self.C = cost.pairwise(source.points, target.points)
        else:
            self.C = None

    def update_alpha(self, beta, eps):
        """Potential over source points making the source marginal exact."""
        if self.C is not None:
            return _softmin(self.C, beta, self.logv, eps)
        return _softmin_lazy(
            self.cost, self.source.points, self.target.points, beta, self.logv, eps
        )

    def update_beta(self, alpha, eps):
        """Potential over target points making the target marginal exact."""
        if self.C is not None:
            return _softmin(self.C.T, alpha, self.logw, eps)
        return _softmin_lazy(
            self.cost, self.target.points, self.source.points, alpha, self.logw, eps
        )


def _residual_stats(ratio_log, weights, eps):
    """L1/max deviation of marginals exp(ratio_log/eps) from 1."""
    # clip keeps expm1 finite far from convergence; any dev this large
    # fails every sane tolerance anyway
    dev = np.abs(np.expm1(np.minimum(ratio_log / eps, 500.0)))
    return float(np.dot(weights, dev)), float(dev.max())


def solve_sinkhorn(
    source: PointCloud,
    target: PointCloud,
    cost: CostSpec,
    epsilon: float,
    opts: SolverOptions = None,
    init=None,
) -> DualPotentials:
    """Solve the entropic transport problem between two clouds.

    Parameters
    ----------
    source, target : PointCloud
        Weighted clouds; dimensions must agree.
    cost : CostSpec
        Ground cost.
    epsilon : float
        Regularization strength (> 0).
    opts : SolverOptions, optional
    init : DualPotentials or (alpha, beta) pair, optional
        Warm start. When given, epsilon scaling is skipped and the
        iteration starts from these potentials.

    Returns
    -------
    DualPotentials
        Gauge-fixed so the weighted means of alpha and beta agree. The
        iteration ends on a target-side update, so the target marginal of
        the returned kernel is exact to rounding; the source marginal is
        verified against the tolerance before returning.

    Raises
    ------
    NonConvergenceError
        If the iteration budget is exhausted before the tolerance is met.
    """
    _check_epsilon(epsilon)
    _check_dims(source, target)
    opts = opts or SolverOptions()
    prob = _Problem(source, target, cost)

    if init is not None:
        alpha, beta = _init_pair(init, source.n, target.n)
        stages = [float(epsilon)]
    else:
        alpha = np.zeros(source.n)
        beta = np.zeros(target.n)
        eps0 = cost.max_cost_bound(source.points, target.points)
        stages = _schedule(float(epsilon), eps0, opts.scaling_factor)

    total_iters = 0
    err = np.inf
    for si, eps in enumerate(stages):
        final = si == len(stages) - 1
        stage_tol = opts.tol if final else max(opts.tol, _STAGE_TOL)
        while True:
            if total_iters >= opts.max_iter:
                raise NonConvergenceError(total_iters, err)
            total_iters += 1
            alpha = prob.update_alpha(beta, eps)
            beta_new = prob.update_beta(alpha, eps)
            # residual of the target marginal for (alpha, beta) comes free
            # from the beta update; after assigning beta_new it is exact.
            t_l1, t_max = _residual_stats(beta - beta_new, target.weights, eps)
            beta = beta_new
            err = max(t_l1, t_max)
            if err < stage_tol:
                if not final:
                    break
                # verify the source marginal of the pair actually returned
                alpha_check = prob.update_alpha(beta, eps)
                s_l1, s_max = _residual_stats(alpha - alpha_check, source.weights, eps)
                if max(s_l1, s_max) < opts.tol:
                    resid = MarginalResiduals(s_l1, s_max, 0.0, 0.0)
                    alpha, beta = _gauge_fix(alpha, beta, source.weights, target.weights)
                    return DualPotentials(
                        source, target, cost, float(epsilon),
                        alpha, beta, resid, total_iters,
                    )
                alpha = alpha_check  # reuse the verification pass
                beta = prob.update_beta(alpha, eps)
                total_iters += 1

    raise NonConvergenceError(total_iters, err)  # pragma: no cover


def solve_self_transport(
    cloud: PointCloud,
    cost: CostSpec,
    epsilon: float,
    opts: SolverOptions = None,
    init=None,
) -> DualPotentials:
    """Solve the transport of a cloud to itself, returning symmetric duals.

    The unique fixed point with ``alpha == beta`` is found by the damped
    iteration ``alpha <- (alpha + S(alpha)) / 2`` where ``S`` is the
    soft-min update. If the averaging stalls within its budget, one
    asymmetric solve is run and symmetrized by shifting (any asymmetric
    solution has ``beta = alpha - t``), after which averaging resumes.
    """
    _check_epsilon(epsilon)
    opts = opts or SolverOptions()
    prob = _Problem(cloud, cloud, cost)

    if init is not None:
        alpha = _init_symmetric(init, cloud.n)
        stages = [float(epsilon)]
    else:
        alpha = np.zeros(cloud.n)
        eps0 = cost.max_cost_bound(cloud.points, cloud.points)
        stages = _schedule(float(epsilon), eps0, opts.scaling_factor)

    total_iters = 0
    err = np.inf
    tried_fallback = False
    for si, eps in enumerate(stages):
        final = si == len(stages) - 1
        stage_tol = opts.tol if final else max(opts.tol, _STAGE_TOL)
        while True:
            if total_iters >= opts.max_iter:
                raise NonConvergenceError(total_iters, err)
            total_iters += 1
            s = prob.update_alpha(alpha, eps)
            l1, mx = _residual_stats(alpha - s, cloud.weights, eps)
            err = max(l1, mx)
            if err < stage_tol:
                if final:
                    resid = MarginalResiduals(l1, mx, l1, mx)
                    return DualPotentials(
                        cloud, cloud, cost, float(epsilon),
                        alpha.copy(), alpha.copy(), resid, total_iters,
                        symmetric=True,
                    )
                break
            if final and not tried_fallback and total_iters >= opts.max_iter // 2:
                # shift-symmetrization fallback via one asymmetric solve
                tried_fallback = True
                budget = max(1, opts.max_iter - total_iters - 10)
                asym = solve_sinkhorn(
                    cloud, cloud, cost, eps,
                    SolverOptions(
                        max_iter=budget, tol=opts.tol,
                        scaling_factor=1.0,
                        dense_threshold=opts.dense_threshold,
                    ),
                    init=(alpha, alpha),
                )
                total_iters += asym.iterations
                alpha = 0.5 * (asym.alpha + asym.beta)
                continue
            alpha = 0.5 * (alpha + s)

    raise NonConvergenceError(total_iters, err)  # pragma: no cover


def _init_pair(init, n_source, n_target):
    if isinstance(init, DualPotentials):
        alpha, beta = init.alpha, init.beta
    else:
        alpha, beta = init
    alpha = np.asarray(alpha, dtype=np.float64).copy()
    beta = np.asarray(beta, dtype=np.float64).copy()
    if alpha.shape != (n_source,) or beta.shape != (n_target,):
        raise DimensionMismatchError(
            f"warm-start potentials have shapes {alpha.shape}/{beta.shape}, "
            f"expected ({n_source},)/({n_target},)"
        )
    return alpha, beta


def _init_symmetric(init, n):
    if isinstance(init, DualPotentials):
        arr = 0.5 * (init.alpha + init.beta)
    else:
        arr = np.asarray(init, dtype=np.float64)
    arr = np.asarray(arr, dtype=np.float64).copy()
    if arr.shape != (n,):
        raise DimensionMismatchError(
            f"warm-start potential has shape {arr.shape}, expected ({n},)"
        )
    return arr


def _gauge_fix(alpha, beta, w, v):
    shift = 0.5 * (np.dot(w, alpha) - np.dot(v, beta))
    return alpha - shift, beta + shift


class EntropicKernel:
    """Evaluation of the entropic kernel attached to converged duals.

    The kernel is defined for arbitrary points, not just the samples: the
    potential at a new point is obtained from the same soft-min formula
    over the opposite cloud. Queries that coincide bitwise with a stored
    sample reproduce the stored potential exactly.
    """

    def __init__(self, duals: DualPotentials):
        self.duals = duals
        self._src_index = None
        self._tgt_index = None

    @property
    def epsilon(self) -> float:
        return self.duals.epsilon

    def matrix(self, dense_threshold: int = None) -> np.ndarray:
        """Dense kernel matrix ``M[j, i] = k(x_i, z_j)``.

        Row index runs over target points (outputs), column index over
        source points (inputs). Raises :class:`AllocationRefusedError`
        when either cloud exceeds the dense threshold.
        """
        d = self.duals
        limit = dense_threshold if dense_threshold is not None else 20000
        if max(d.source.n, d.target.n) > limit:
            raise AllocationRefusedError(d.target.n, d.source.n, limit)
        C = d.cost.pairwise(d.source.points, d.target.points)
        logk = (d.alpha[:, None] + d.beta[None, :] - C) / d.epsilon
        return np.exp(logk).T

    # -- potential extension -------------------------------------------------

    def potential_source_at(self, X) -> np.ndarray:
        """alpha(x) for arbitrary query points (soft-min over the target)."""
        d = self.duals
        X = self._check_queries(X)
        with np.errstate(divide="ignore"):
            logv = np.log(d.target.weights)
        vals = _softmin_lazy(d.cost, X, d.target.points, d.beta, logv, d.epsilon)
        return self._restore_stored(X, vals, side="source")

    def potential_target_at(self, Z) -> np.ndarray:
        """beta(z) for arbitrary query points (soft-min over the source)."""
        d = self.duals
        Z = self._check_queries(Z)
        with np.errstate(divide="ignore"):
            logw = np.log(d.source.weights)
        vals = _softmin_lazy(d.cost, Z, d.source.points, d.alpha, logw, d.epsilon)
        return self._restore_stored(Z, vals, side="target")

    # -- kernel evaluation ----------------------------------------------------

    def evaluate(self, x, z) -> float:
        """Kernel value ``k(x, z)`` at one (source-side, target-side) pair."""
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        z = np.asarray(z, dtype=np.float64).reshape(1, -1)
        a = self.potential_source_at(x)[0]
        b = self.potential_target_at(z)[0]
        c = self.duals.cost.pairwise(x, z)[0, 0]
        return float(np.exp((a + b - c) / self.duals.epsilon))

    def eval_source_queries(self, X) -> np.ndarray:
        """Matrix ``k(X[m], z_j)`` of shape (len(X), n_target)."""
        d = self.duals
        X = self._check_queries(X)
        a = self.potential_source_at(X)
        C = d.cost.pairwise(X, d.target.points)
        return np.exp((a[:, None] + d.beta[None, :] - C) / d.epsilon)

    def eval_target_queries(self, Z) -> np.ndarray:
        """Matrix ``k(x_i, Z[m])`` of shape (n_source, len(Z))."""
        d = self.duals
        Z = self._check_queries(Z)
        b = self.potential_target_at(Z)
        C = d.cost.pairwise(d.source.points, Z)
        return np.exp((d.alpha[:, None] + b[None, :] - C) / d.epsilon)

    # -- helpers ---------------------------------------------------------------

    def _check_queries(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[1] != self.duals.source.d:
            raise DimensionMismatchError(
                f"query points have shape {X.shape}, expected (m, {self.duals.source.d})"
            )
        return X

    def _index(self, side: str) -> dict:
        if side == "source":
            if self._src_index is None:
                pts = self.duals.source.points
                vals = self.duals.alpha
                self._src_index = {
                    pts[i].tobytes(): vals[i] for i in range(pts.shape[0])
                }
            return self._src_index
        if self._tgt_index is None:
            pts = self.duals.target.points
            vals = self.duals.beta
            self._tgt_index = {
                pts[i].tobytes(): vals[i] for i in range(pts.shape[0])
            }
        return self._tgt_index

    def _restore_stored(self, X, vals, side: str) -> np.ndarray:
        index = self._index(side)
        for m in range(X.shape[0]):
            hit = index.get(np.ascontiguousarray(X[m]).tobytes())
            if hit is not None:
                vals[m] = hit
        return vals


def kernel_evaluate(duals: DualPotentials, x, z) -> float:
    """Kernel value at one pair; see :meth:`EntropicKernel.evaluate`."""
    return EntropicKernel(duals).evaluate(x, z)


def kernel_matrix(duals: DualPotentials, dense_threshold: int = None) -> np.ndarray:
    """Dense kernel matrix; see :meth:`EntropicKernel.matrix`."""
    return EntropicKernel(duals).matrix(dense_threshold)
