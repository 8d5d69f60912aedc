"""Ulam's method baseline, exact 1-D transport, and a closed-form
benchmark contrasting single- and double-sided blurring.

Ulam's method discretizes the state space into equal hyper-cubes of side
``h`` and estimates cell-to-cell transition rates by counting. It is
the classical mesh-based alternative to the mesh-free regularized
operator built in :mod:`entop.operator`.

The benchmark system is ``X ~ U[0,1]``, ``Y ~ (delta_0 + delta_1)/2``
independently of ``X``, with squared Euclidean cost. Its exact
regularized kernel is constant 1, while the singly-blurred empirical
kernel alternates between ``2(1-s)`` and ``2s`` with

.. math::

    s = \\frac{1}{1 + e^{1/\\varepsilon}},

so its L2 deviation from 1 equals ``|1 - 2s|`` for every sample size.
The double-blurred estimator has no such floor; its error decays with N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cloud import CostSpec, PointCloud
from .errors import DimensionMismatchError, EmptyDataError
from .operator import TransitionData, TransferOperatorEstimate, build_operator

__all__ = [
    "BoxPartition",
    "UlamOperator",
    "build_ulam",
    "QuantileAssignment",
    "ot_1d_quantile",
    "CounterexampleResult",
    "single_blur_counterexample",
    "single_blur_error_mc",
    "double_blur_error",
    "sample_two_point_system",
]


class BoxPartition:
    """Uniform hyper-cube partition restricted to occupied cells.

    The grid has side length ``h`` and is anchored at the coordinate-wise
    minimum of the points it was built from, so the same data always
    produces the same cells. Only cells containing at least one of the
    construction points get an index.
    """

    def __init__(self, points: np.ndarray, h: float):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise EmptyDataError("partition needs a nonempty (n, d) point array")
        if h <= 0:
            raise ValueError("box side must be positive")
        self.h = float(h)
        self.origin = points.min(axis=0)
        self.d = points.shape[1]
        keys = self._keys(points)
        self._index: dict = {}
        for key in keys:
            if key not in self._index:
                self._index[key] = len(self._index)

    def _keys(self, points):
        idx = np.floor((points - self.origin[None, :]) / self.h).astype(np.int64)
        return [tuple(row) for row in idx]

    @property
    def n_cells(self) -> int:
        return len(self._index)

    def assign(self, points) -> np.ndarray:
        """Cell index per point; -1 for points in cells never seen at
        construction time."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if points.shape[1] != self.d:
            raise DimensionMismatchError(
                f"points have dimension {points.shape[1]}, partition has {self.d}"
            )
        return np.array([self._index.get(k, -1) for k in self._keys(points)])

    def centers(self) -> np.ndarray:
        """Cell centers in index order, shape (n_cells, d)."""
        out = np.empty((self.n_cells, self.d))
        for key, i in self._index.items():
            out[i] = self.origin + (np.asarray(key) + 0.5) * self.h
        return out


@dataclass
class UlamOperator:
    """Cell-level transition matrix estimated by counting.

    ``matrix[a, b]`` is the fraction of pairs starting in cell ``a`` that
    land in cell ``b``. Rows of cells that contain output points only
    are zero (no transition starts there), so the matrix is generally
    sub-stochastic; rows with data are stochastic to fp accuracy.
    """

    matrix: np.ndarray
    partition: BoxPartition
    row_counts: np.ndarray
    cell_centers: np.ndarray = field(init=False)

    def __post_init__(self):
        self.cell_centers = self.partition.centers()

    @property
    def n_cells(self) -> int:
        return self.matrix.shape[0]

    def dense_matrix(self) -> np.ndarray:
        return self.matrix

    def apply(self, u) -> np.ndarray:
        return self.matrix @ np.asarray(u)


def build_ulam(data: TransitionData, h: float) -> UlamOperator:
    """Estimate the cell transition matrix of ``data`` on a grid of side
    ``h``.

    The partition covers the occupied cells of inputs and outputs
    together, so the matrix is square and eigenvalues are well defined
    even when mass flows into regions never visited by an input point.
    """
    if data.n == 0:
        raise EmptyDataError("no transition pairs")
    part = BoxPartition(np.vstack([data.x.points, data.y.points]), h)
    ix = part.assign(data.x.points)
    iy = part.assign(data.y.points)
    n = part.n_cells
    counts = np.zeros((n, n))
    np.add.at(counts, (ix, iy), 1.0)
    row = counts.sum(axis=1)
    matrix = np.divide(counts, row[:, None], out=np.zeros_like(counts), where=row[:, None] > 0)
    return UlamOperator(matrix=matrix, partition=part, row_counts=row)


@dataclass(frozen=True)
class QuantileAssignment:
    """Monotone assignment of N sorted samples to the N uniform quantile
    intervals of [lo, hi].

    ``intervals[j]`` is the interval transported onto original sample
    ``j``; ``order`` sorts the samples increasingly (stable under ties).
    The induced plan density w.r.t. (uniform x sample) measure equals N
    on each interval, 0 elsewhere.
    """

    positions: np.ndarray
    order: np.ndarray
    intervals: np.ndarray
    lo: float
    hi: float

    @property
    def n(self) -> int:
        return self.positions.size

    def kernel(self, x) -> np.ndarray:
        """Plan density at query points: out[m, j] = N if x[m] lies in
        the interval of sample j, else 0. Intervals are treated as
        half-open on the right."""
        x = np.asarray(x, dtype=np.float64).ravel()
        width = (self.hi - self.lo) / self.n
        pos = np.clip(((x - self.lo) / width).astype(np.int64), 0, self.n - 1)
        inside = (x >= self.lo) & (x < self.hi)
        out = np.zeros((x.size, self.n))
        rows = np.nonzero(inside)[0]
        out[rows, self.order[pos[rows]]] = self.n
        return out


def ot_1d_quantile(source, lo: float = 0.0, hi: float = 1.0) -> QuantileAssignment:
    """Exact (unregularized) transport of the uniform measure on
    ``[lo, hi]`` onto N equally weighted 1-D samples.

    One-dimensional transport with convex cost sorts: the q-th quantile
    of the source goes to the q-th quantile of the samples, so sample
    ``(i)`` in increasing order receives the interval
    ``(lo + (i-1)/N * (hi-lo), lo + i/N * (hi-lo))``.
    """
    if isinstance(source, PointCloud):
        if source.d != 1:
            raise DimensionMismatchError("quantile transport requires 1-D points")
        pts = source.points[:, 0]
    else:
        pts = np.asarray(source, dtype=np.float64)
        if pts.ndim == 2 and pts.shape[1] == 1:
            pts = pts[:, 0]
        if pts.ndim != 1:
            raise DimensionMismatchError("quantile transport requires 1-D points")
    if pts.size == 0:
        raise EmptyDataError("no source points")
    if hi <= lo:
        raise ValueError("need hi > lo")
    n = pts.size
    order = np.argsort(pts, kind="stable")
    edges = lo + (hi - lo) * np.arange(n + 1) / n
    intervals_sorted = np.column_stack([edges[:-1], edges[1:]])
    intervals = np.empty_like(intervals_sorted)
    intervals[order] = intervals_sorted
    return QuantileAssignment(
        positions=pts.copy(), order=order, intervals=intervals, lo=lo, hi=hi
    )


def sample_two_point_system(n: int, seed=None) -> TransitionData:
    """Draw ``n`` pairs of the benchmark system: inputs uniform on
    [0, 1], outputs a fair coin on {0, 1}, independent of the input."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=n)
    y = rng.integers(0, 2, size=n).astype(np.float64)
    return TransitionData.from_arrays(x[:, None], y[:, None])


@dataclass(frozen=True)
class CounterexampleResult:
    n: int
    epsilon: float
    sigma_const: float
    l2_error: float


def single_blur_counterexample(n: int, epsilon: float, seed=None) -> CounterexampleResult:
    """L2 error of the singly-blurred empirical kernel on the benchmark
    system, computed exactly from its piecewise-constant form.

    The kernel equals ``2(1-s)`` on the event "y matches the sample
    owning x's quantile interval" and ``2s`` otherwise; each case carries
    probability 1/2 under the product measure regardless of the drawn
    samples, so the squared error integrates to ``(1-2s)^2``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    s = 1.0 / (1.0 + np.exp(1.0 / epsilon))
    data = sample_two_point_system(n, seed)
    assignment = ot_1d_quantile(data.x.points[:, 0])
    # Integrate (kernel - 1)^2 over interval x atom cells. The loop mass
    # is data-independent (every interval has mass 1/n, the two atoms
    # mass 1/2 each) but is carried out explicitly over the drawn pairs.
    widths = assignment.intervals[:, 1] - assignment.intervals[:, 0]
    per_x = 0.5 * (2.0 * (1.0 - s) - 1.0) ** 2 + 0.5 * (2.0 * s - 1.0) ** 2
    sq = float(widths.sum() * per_x)
    return CounterexampleResult(
        n=n, epsilon=float(epsilon), sigma_const=float(s), l2_error=float(np.sqrt(sq))
    )


def single_blur_error_mc(n: int, epsilon: float, n_mc: int = 200_000, seed=0) -> float:
    """Monte-Carlo estimate of the same L2 error, used to validate the
    closed form. Draws fresh system samples, then integrates
    ``(kernel - 1)^2`` over product-measure draws."""
    rng = np.random.default_rng(seed)
    s = 1.0 / (1.0 + np.exp(1.0 / epsilon))
    data = sample_two_point_system(n, rng)
    assignment = ot_1d_quantile(data.x.points[:, 0])
    y_of_sample = data.y.points[:, 0]
    xq = rng.uniform(0.0, 1.0, size=n_mc)
    yq = rng.integers(0, 2, size=n_mc).astype(np.float64)
    owner = assignment.order[np.clip((xq * n).astype(np.int64), 0, n - 1)]
    matched = y_of_sample[owner] == yq
    vals = np.where(matched, 2.0 * (1.0 - s), 2.0 * s)
    return float(np.sqrt(np.mean((vals - 1.0) ** 2)))


def double_blur_error(
    n: int,
    epsilon: float,
    n_mc: int = 20_000,
    seed=0,
    op: TransferOperatorEstimate | None = None,
) -> float:
    """Monte-Carlo L2 distance between the doubly-blurred empirical
    kernel and the exact regularized kernel (constant 1) on the
    benchmark system.

    The y-marginal has two atoms, so only the x-integral is sampled.
    Pass ``op`` to reuse an already built operator for the same system.
    """
    rng = np.random.default_rng(seed)
    if op is None:
        data = sample_two_point_system(n, rng)
        op = build_operator(data, CostSpec(), epsilon, variant="nonstationary")
    xq = rng.uniform(0.0, 1.0, size=n_mc)[:, None]
    grid = op.kernel_grid(xq, np.array([[0.0], [1.0]]))
    sq = 0.5 * ((grid - 1.0) ** 2).sum(axis=1)
    return float(np.sqrt(sq.mean()))
