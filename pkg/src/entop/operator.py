"""Empirical transfer operators assembled from transition pairs.

Given sampled transitions ``(x_i, y_i)`` the empirical pairing operator (the
map taking values at the ``x_i`` to the same values at the paired ``y_i``) is
composed with entropic blurs on one or both sides:

* ``variant="stationary"``: blur on the input cloud, then transport the
  output cloud back onto the input cloud, giving an endomorphism of
  functions on the ``x`` samples (eigenvalues are meaningful);
* ``variant="nonstationary"``: blur on the input cloud and on the output
  cloud, giving a map from functions on the ``x`` samples to functions on
  the ``y`` samples (singular values are meaningful).

Operators act on vectors of function VALUES at the samples. The value-space
matrix of a blur with kernel ``k`` is ``M[j, i] = w_i k(x_i, z_j)``; rows sum
to 1 by the kernel marginal identity, so constants are preserved. The middle
pairing operator is never materialized; it is an index alignment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator

from .cloud import PointCloud, CostSpec, read_csv_table
from .errors import (
    AllocationRefusedError,
    DimensionMismatchError,
    EmptyDataError,
)
from .sinkhorn import (
    DualPotentials,
    EntropicKernel,
    SolverOptions,
    solve_self_transport,
    solve_sinkhorn,
)

__all__ = [
    "TransitionData",
    "TransferOperatorEstimate",
    "build_operator",
    "apply",
    "apply_adjoint",
    "operator_kernel_evaluate",
]

# Above this many samples the dense operator matrix is not cached and all
# applications run through chunked kernel blocks.
DENSE_CUTOFF = 5000

_BLOCK_ENTRIES = 1 << 24

# Tolerance used for operator builds when the caller does not pass options:
# tight enough that mass preservation holds at the 1e-8 invariant level.
_BUILD_TOL = 1e-10


@dataclass(frozen=True)
class TransitionData:
    """Paired samples ``(x_i, y_i)`` of one transition step.

    Both clouds carry uniform weights 1/N and are index-aligned: row ``i``
    of ``x`` maps to row ``i`` of ``y``. Optional per-sample labels (for
    example latent angles of a synthetic system) ride along for later
    plotting and are ignored by the numerics. ``meta`` records how the
    pairs were extracted from a trajectory ({t0, stride, lag}) when that
    applies.
    """

    x: PointCloud
    y: PointCloud
    labels: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.n != self.y.n:
            raise DimensionMismatchError(
                f"{self.x.n} input points vs {self.y.n} output points"
            )
        if self.x.d != self.y.d:
            raise DimensionMismatchError(
                f"input dimension {self.x.d} vs output dimension {self.y.d}"
            )
        uniform = np.full(self.x.n, 1.0 / self.x.n)
        if not (
            np.allclose(self.x.weights, uniform, atol=1e-12)
            and np.allclose(self.y.weights, uniform, atol=1e-12)
        ):
            raise ValueError("transition clouds must carry uniform weights")
        for name, col in self.labels.items():
            if len(col) != self.x.n:
                raise DimensionMismatchError(
                    f"label {name!r} has {len(col)} entries for {self.x.n} pairs"
                )

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def d(self) -> int:
        return self.x.d

    @classmethod
    def from_arrays(cls, X, Y, labels=None, meta=None) -> "TransitionData":
        return cls(
            PointCloud.uniform(X),
            PointCloud.uniform(Y),
            dict(labels or {}),
            dict(meta or {}),
        )

    @classmethod
    def from_trajectory(cls, trajectory, t0: int = 0, stride: int = 1, lag: int = 1) -> "TransitionData":
        """Extract pairs ``(z[t0 + stride*i], z[t0 + stride*i + lag])``."""
        Z = np.asarray(trajectory, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z[:, None]
        if t0 < 0 or stride < 1 or lag < 1:
            raise ValueError("need t0 >= 0, stride >= 1, lag >= 1")
        idx = np.arange(t0, Z.shape[0] - lag, stride)
        if idx.size == 0:
            raise EmptyDataError("trajectory too short for the requested extraction")
        return cls.from_arrays(
            Z[idx], Z[idx + lag], meta={"t0": t0, "stride": stride, "lag": lag}
        )

    @classmethod
    def from_csv(cls, path) -> "TransitionData":
        """Read pairs from CSV with columns ``x0..x{d-1}, y0..y{d-1}`` plus
        optional trailing label columns (by header name). A headerless file
        with an even number of columns is split in half."""
        names, table = read_csv_table(path)
        if names is None:
            if table.shape[1] % 2 != 0:
                raise ValueError(
                    f"{path}: headerless transition CSV needs an even column count"
                )
            d = table.shape[1] // 2
            return cls.from_arrays(table[:, :d], table[:, d:])
        xcols = [i for i, s in enumerate(names) if s.startswith("x")]
        ycols = [i for i, s in enumerate(names) if s.startswith("y")]
        if not xcols or len(xcols) != len(ycols):
            raise ValueError(f"{path}: expected matching x*/y* column groups, got {names}")
        rest = [i for i in range(len(names)) if i not in xcols and i not in ycols]
        labels = {names[i]: table[:, i].copy() for i in rest}
        return cls.from_arrays(table[:, xcols], table[:, ycols], labels=labels)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            head = [f"x{j}" for j in range(self.d)] + [f"y{j}" for j in range(self.d)]
            head += list(self.labels)
            writer.writerow(head)
            label_cols = [np.asarray(v) for v in self.labels.values()]
            for i in range(self.n):
                row = [repr(float(v)) for v in self.points_row(i)]
                row += [repr(float(c[i])) for c in label_cols]
                writer.writerow(row)

    def points_row(self, i: int) -> np.ndarray:
        return np.concatenate([self.x.points[i], self.y.points[i]])


def _blur_forward(kernel: EntropicKernel, vec: np.ndarray) -> np.ndarray:
    """out_j = sum_i w_i k(x_i, z_j) vec_i over the kernel's target points."""
    d = kernel.duals
    w = d.source.weights
    out = np.zeros(d.target.n, dtype=np.result_type(vec, np.float64))
    step = max(1, _BLOCK_ENTRIES // max(1, d.source.n))
    scaled = w * vec
    for start in range(0, d.target.n, step):
        stop = min(d.target.n, start + step)
        C = d.cost.pairwise(d.source.points, d.target.points[start:stop])
        logk = (d.alpha[:, None] + d.beta[None, start:stop] - C) / d.epsilon
        out[start:stop] = np.exp(logk).T @ scaled
    return out


def _blur_backward(kernel: EntropicKernel, vec: np.ndarray) -> np.ndarray:
    """out_i = sum_j v_j k(x_i, z_j) vec_j over the kernel's source points."""
    d = kernel.duals
    v = d.target.weights
    out = np.zeros(d.source.n, dtype=np.result_type(vec, np.float64))
    step = max(1, _BLOCK_ENTRIES // max(1, d.target.n))
    scaled = v * vec
    for start in range(0, d.source.n, step):
        stop = min(d.source.n, start + step)
        C = d.cost.pairwise(d.source.points[start:stop], d.target.points)
        logk = (d.alpha[start:stop, None] + d.beta[None, :] - C) / d.epsilon
        out[start:stop] = np.exp(logk) @ scaled
    return out


def _blur_matrix(kernel: EntropicKernel) -> np.ndarray:
    """Value-space matrix M[j, i] = w_i k(x_i, z_j) (rows sum to 1)."""
    K = kernel.matrix()  # (n_target, n_source), entry [j, i] = k(x_i, z_j)
    return K * kernel.duals.source.weights[None, :]


class TransferOperatorEstimate:
    """Entropically blurred empirical transfer operator.

    Attributes
    ----------
    variant : str
        ``"stationary"`` or ``"nonstationary"``.
    first_blur : EntropicKernel
        Self-transport kernel of the input cloud.
    second_blur : EntropicKernel
        Transport kernel from the output cloud to the input cloud
        (stationary) or the output cloud's self-transport (nonstationary).
    representation : str
        ``"dense"`` (matrix cached on demand) or ``"lazy"`` (all
        applications through chunked kernel blocks).
    """

    def __init__(self, data, cost, epsilon, variant, first_blur, second_blur,
                 representation, options):
        self.data = data
        self.cost = cost
        self.epsilon = float(epsilon)
        self.variant = variant
        self.first_blur = first_blur
        self.second_blur = second_blur
        self.representation = representation
        self.options = options
        self._dense = None

    # -- structure -------------------------------------------------------------

    @property
    def n(self) -> int:
        return self.data.x.n

    @property
    def shape(self) -> tuple:
        return (self.n, self.n)

    @property
    def is_endomorphism(self) -> bool:
        return self.variant == "stationary"

    @property
    def source_cloud(self) -> PointCloud:
        return self.data.x

    @property
    def output_cloud(self) -> PointCloud:
        return self.data.x if self.variant == "stationary" else self.data.y

    @property
    def pair_weights(self) -> np.ndarray:
        return self.data.x.weights

    # -- application -----------------------------------------------------------

    def apply(self, u) -> np.ndarray:
        """Apply the operator to function values at the input samples."""
        u = self._check_vector(u)
        if self.representation == "dense":
            return self.dense_matrix() @ u
        p = _blur_forward(self.first_blur, u)
        # pairing: values at x_i become values at y_i, an index alignment
        return _blur_forward(self.second_blur, p)

    def apply_adjoint(self, v) -> np.ndarray:
        """Apply the adjoint (with respect to the weighted L2 products) to
        function values at the output samples."""
        v = self._check_vector(v)
        if self.representation == "dense":
            return self.dense_matrix().T @ v  # uniform pair weights both sides
        p = _blur_backward(self.second_blur, v)
        return _blur_backward(self.first_blur, p)

    def __matmul__(self, u):
        return self.apply(u)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(
            shape=self.shape,
            matvec=self.apply,
            rmatvec=self.apply_adjoint,
            dtype=np.float64,
        )

    def dense_matrix(self) -> np.ndarray:
        """Materialized value-space matrix (output rows, input columns)."""
        if self._dense is None:
            if self.representation != "dense":
                raise AllocationRefusedError(self.n, self.n, DENSE_CUTOFF)
            A = _blur_matrix(self.first_blur)
            B = _blur_matrix(self.second_blur)
            self._dense = B @ A
        return self._dense

    # -- kernel ------------------------------------------------------------------

    def kernel_values(self, X, Y) -> np.ndarray:
        """Composite kernel ``t(X[m], Y[m])`` evaluated at aligned query
        pairs (input-side point, output-side point)."""
        A, B = self._query_blocks(X, Y)
        if A.shape[0] != B.shape[1]:
            raise DimensionMismatchError(
                f"{A.shape[0]} input queries vs {B.shape[1]} output queries"
            )
        return np.einsum("mi,im->m", A * self.pair_weights[None, :], B)

    def kernel_grid(self, X, Y) -> np.ndarray:
        """Composite kernel on the product grid: entry [a, b] is the kernel
        at (X[a], Y[b])."""
        A, B = self._query_blocks(X, Y)
        return (A * self.pair_weights[None, :]) @ B

    def _query_blocks(self, X, Y):
        # t(x, y) = sum_i w_i k1(x, x_i) k2(y_i, y): queries enter the first
        # blur on its source side and the second blur on its target side.
        A = self.first_blur.eval_source_queries(X)
        B = self.second_blur.eval_target_queries(Y)
        return A, B

    def mass_error(self) -> float:
        """Worst-case deviation of (operator @ 1) from 1."""
        ones = np.ones(self.n)
        return float(np.abs(self.apply(ones) - 1.0).max())

    def _check_vector(self, u) -> np.ndarray:
        u = np.asarray(u)
        if u.shape != (self.n,):
            raise DimensionMismatchError(
                f"vector has shape {u.shape}, operator expects ({self.n},)"
            )
        return u


def build_operator(
    data: TransitionData,
    cost: CostSpec,
    epsilon: float,
    variant: str = "stationary",
    opts: SolverOptions = None,
    representation: str = "auto",
    init=None,
) -> TransferOperatorEstimate:
    """Assemble the blurred empirical operator for the given transitions.

    Parameters
    ----------
    data : TransitionData
    cost : CostSpec
    epsilon : float
        Blur strength used for every constituent transport problem.
    variant : str
        ``"stationary"`` (endomorphism on the input samples; eigenvalues
        and singular values available) or ``"nonstationary"`` (map onto
        the output samples; singular values only).
    opts : SolverOptions, optional
        Defaults to a tight tolerance (1e-10) so that mass preservation
        holds at the 1e-8 level.
    representation : str
        ``"auto"`` (dense up to 5000 samples), ``"dense"``, or ``"lazy"``.
    init : TransferOperatorEstimate or (DualPotentials, DualPotentials), optional
        Warm start from a previous build (typically at a nearby epsilon).
    """
    if variant not in ("stationary", "nonstationary"):
        raise ValueError(f"unknown variant {variant!r}")
    if representation not in ("auto", "dense", "lazy"):
        raise ValueError(f"unknown representation {representation!r}")
    opts = opts or SolverOptions(tol=_BUILD_TOL)

    init_first = init_second = None
    if init is not None:
        if isinstance(init, TransferOperatorEstimate):
            init_first = init.first_blur.duals
            init_second = init.second_blur.duals
        else:
            init_first, init_second = init

    first = solve_self_transport(data.x, cost, epsilon, opts, init=init_first)
    if variant == "stationary":
        second = solve_sinkhorn(data.y, data.x, cost, epsilon, opts, init=init_second)
    else:
        second = solve_self_transport(data.y, cost, epsilon, opts, init=init_second)

    if representation == "auto":
        representation = "dense" if data.n <= DENSE_CUTOFF else "lazy"
    return TransferOperatorEstimate(
        data, cost, epsilon, variant,
        EntropicKernel(first), EntropicKernel(second),
        representation, opts,
    )


def apply(op: TransferOperatorEstimate, u) -> np.ndarray:
    """Functional form of :meth:`TransferOperatorEstimate.apply`."""
    return op.apply(u)


def apply_adjoint(op: TransferOperatorEstimate, v) -> np.ndarray:
    """Functional form of :meth:`TransferOperatorEstimate.apply_adjoint`."""
    return op.apply_adjoint(v)


def operator_kernel_evaluate(op: TransferOperatorEstimate, x, y) -> float:
    """Composite kernel value at one (input point, output point) pair."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    return float(op.kernel_values(x, y)[0])
