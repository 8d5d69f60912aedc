"""Weighted point clouds and ground costs.

A :class:`PointCloud` is a finite set of points in ``R^d`` carrying strictly
positive probability weights; a :class:`CostSpec` names the ground cost used
between clouds. Only two costs are supported: squared Euclidean distance and
squared torus (per-axis periodic) distance.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, EmptyDataError

__all__ = [
    "PointCloud",
    "CostSpec",
    "squared_euclidean",
    "squared_torus",
]

_WEIGHT_SUM_TOL = 1e-12


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise DimensionMismatchError(
            f"points must be a (N, d) array, got shape {pts.shape}"
        )
    if pts.shape[0] == 0:
        raise EmptyDataError("point cloud has no points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points contain non-finite values")
    return pts


@dataclass(frozen=True)
class PointCloud:
    """Points with probability weights.

    Parameters
    ----------
    points : ndarray of shape (n, d)
        Point coordinates. A 1-D array is promoted to a single column.
    weights : ndarray of shape (n,)
        Nonnegative weights summing to 1 (within 1e-12). Use
        :meth:`uniform` for the common equal-weight case.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points)
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != pts.shape[0]:
            raise DimensionMismatchError(
                f"weights shape {w.shape} does not match {pts.shape[0]} points"
            )
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be nonnegative and finite")
        if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        pts = pts.copy()
        w = w.copy()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    @classmethod
    def uniform(cls, points) -> "PointCloud":
        """Cloud with equal weights 1/n."""
        pts = _as_points(points)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @classmethod
    def from_csv(cls, path) -> "PointCloud":
        """Read a cloud from CSV: one row per point, d numeric columns.

        A header row is optional. If present and it contains a column named
        ``w``, that column is taken as the weights; otherwise weights are
        uniform.
        """
        names, table = read_csv_table(path)
        if names is not None and "w" in names:
            wi = names.index("w")
            keep = [j for j in range(table.shape[1]) if j != wi]
            w = table[:, wi]
            s = w.sum()
            if s <= 0:
                raise ValueError(f"weight column in {path} does not sum to a positive value")
            return cls(table[:, keep], w / s)
        return cls.uniform(table)

    def to_csv(self, path, include_weights: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            names = [f"x{j}" for j in range(self.d)]
            if include_weights:
                names.append("w")
            writer.writerow(names)
            for i in range(self.n):
                row = [repr(float(v)) for v in self.points[i]]
                if include_weights:
                    row.append(repr(float(self.weights[i])))
                writer.writerow(row)


def read_csv_table(path):
    """Read a numeric CSV table, returning ``(header_names_or_None, array)``.

    The first row is treated as a header iff any of its fields fails to parse
    as a float.
    """
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(f.strip() for f in row)]
    if not rows:
        raise EmptyDataError(f"{path} contains no data rows")
    names = None
    first = rows[0]
    try:
        [float(f) for f in first]
    except ValueError:
        names = [f.strip() for f in first]
        rows = rows[1:]
    if not rows:
        raise EmptyDataError(f"{path} contains a header but no data rows")
    try:
        table = np.array([[float(f) for f in row] for row in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path} contains non-numeric data: {exc}") from None
    if names is not None and len(names) != table.shape[1]:
        raise ValueError(f"{path}: header names {len(names)} vs {table.shape[1]} columns")
    return names, table


@dataclass(frozen=True)
class CostSpec:
    """Ground cost specification.

    ``kind`` is ``"sqeuclidean"`` or ``"sqtorus"``. For the torus cost,
    ``periods`` holds the period of each axis (default 1 per axis); the cost
    is the sum over axes of the squared wrapped distance
    ``min(|dx|, p - |dx|)^2``.
    """

    kind: str = "sqeuclidean"
    periods: tuple = field(default=None)

    def __post_init__(self):
        if self.kind not in ("sqeuclidean", "sqtorus"):
            raise ValueError(f"unknown cost kind {self.kind!r}")
        if self.periods is not None:
            p = tuple(float(v) for v in self.periods)
            if any(v <= 0 for v in p):
                raise ValueError("periods must be positive")
            object.__setattr__(self, "periods", p)

    def _periods_for(self, d: int) -> np.ndarray:
        if self.periods is None:
            return np.ones(d)
        if len(self.periods) != d:
            raise DimensionMismatchError(
                f"cost has {len(self.periods)} periods but points have dimension {d}"
            )
        return np.asarray(self.periods)

    def pairwise(self, X, Z) -> np.ndarray:
        """Dense cost matrix ``C[i, j] = c(X[i], Z[j])``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if X.shape[1] != Z.shape[1]:
            raise DimensionMismatchError(
                f"point dimensions differ: {X.shape[1]} vs {Z.shape[1]}"
            )
        if self.kind == "sqeuclidean":
            return cdist(X, Z, metric="sqeuclidean")
        p = self._periods_for(X.shape[1])
        delta = np.abs(X[:, None, :] - Z[None, :, :])
        delta = np.mod(delta, p)
        delta = np.minimum(delta, p - delta)
        return np.einsum("ijk,ijk->ij", delta, delta)

    def max_cost_bound(self, X, Z) -> float:
        """Cheap upper bound on the largest pairwise cost (used to start
        epsilon scaling)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
        if self.kind == "sqtorus":
            p = self._periods_for(X.shape[1])
            return float(np.sum((p / 2.0) ** 2))
        lo = np.minimum(X.min(axis=0), Z.min(axis=0))
        hi = np.maximum(X.max(axis=0), Z.max(axis=0))
        return float(np.sum((hi - lo) ** 2))


def squared_euclidean() -> CostSpec:
    """Squared Euclidean ground cost."""
    return CostSpec(kind="sqeuclidean")


def squared_torus(periods=None) -> CostSpec:
    """Squared wrapped (torus) ground cost with the given axis periods."""
    return CostSpec(kind="sqtorus", periods=periods)
