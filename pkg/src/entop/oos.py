"""Out-of-sample extension of eigenfunctions and spectral embeddings.

An eigenpair ``(lambda, u)`` of the operator estimate extends to arbitrary
points through the operator's composite kernel: the extension is
``(1/lambda) (T u)(x)``, which agrees with ``u`` on the samples and is as
smooth as the kernel. Evaluating at a new point costs one soft-min over the
stored cloud (the dual potential at the query) plus one kernel row; batch
evaluation shares that kernel row across all requested eigenfunctions.

Dividing by tiny eigenvalues amplifies estimation noise, so extensions are
refused below a modulus floor. Queries far outside the sampled region are
flagged: the kernel row then concentrates its mass on a handful of samples
and the extension degenerates to a nearest-sample lookup.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, SmallEigenvalueError
from .operator import TransferOperatorEstimate, _blur_backward, _blur_forward
from .spectral import Spectrum

__all__ = [
    "ExtendedFunction",
    "extend_eigenfunction",
    "extend_embedding",
    "EIGENVALUE_FLOOR",
    "CONFIDENCE_MASS_SHARE",
]

EIGENVALUE_FLOOR = 1e-3

# A query is flagged when a single sample carries more than this share of
# the kernel row's (unit) mass.
CONFIDENCE_MASS_SHARE = 0.5


class ExtendedFunction:
    """Callable extension of one eigenfunction (or singular function).

    ``direction="forward"`` evaluates ``(1/lambda) (T u)`` at output-space
    query points; ``direction="adjoint"`` evaluates ``(1/lambda) (T* v)``
    at input-space query points. For the stationary variant both live on
    the input samples' space.
    """

    def __init__(self, op: TransferOperatorEstimate, values, eigenvalue,
                 direction: str = "forward",
                 eigenvalue_floor: float = EIGENVALUE_FLOOR):
        if direction not in ("forward", "adjoint"):
            raise ValueError(f"unknown direction {direction!r}")
        eigenvalue = complex(eigenvalue)
        if eigenvalue == 0:
            raise SmallEigenvalueError(eigenvalue, eigenvalue_floor)
        if abs(eigenvalue) < eigenvalue_floor:
            raise SmallEigenvalueError(eigenvalue, eigenvalue_floor)
        values = np.asarray(values)
        if values.shape != (op.n,):
            raise DimensionMismatchError(
                f"function values have shape {values.shape}, expected ({op.n},)"
            )
        self.op = op
        self.eigenvalue = eigenvalue
        self.direction = direction
        self.values = values
        if direction == "forward":
            # (T u)(x) = sum_i w_i k2(y_i, x) (A u)_i with A the first blur
            p = _blur_forward(op.first_blur, values)
            self._coeff = op.second_blur.duals.source.weights * p
        else:
            p = _blur_backward(op.second_blur, values)
            self._coeff = op.first_blur.duals.target.weights * p

    def _kernel_block(self, X) -> np.ndarray:
        if self.direction == "forward":
            return self.op.second_blur.eval_target_queries(X)  # (n, m)
        return self.op.first_blur.eval_source_queries(X).T  # (n, m)

    def __call__(self, X) -> np.ndarray:
        return self.evaluate(X)[0]

    def evaluate(self, X) -> tuple:
        """Extension values and low-confidence flags at query points.

        Returns
        -------
        values : ndarray of shape (m,)
            Complex extension values (real input functions of real
            eigenvalues give real values up to rounding).
        flagged : ndarray of bool
            True where the kernel mass at the query concentrates on a
            single sample beyond the confidence threshold (far outlier).
        """
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        K = self._kernel_block(X)
        w = (
            self.op.second_blur.duals.source.weights
            if self.direction == "forward"
            else self.op.first_blur.duals.target.weights
        )
        mass = K * w[:, None]  # columns sum to 1 by the marginal identity
        flagged = mass.max(axis=0) > CONFIDENCE_MASS_SHARE
        vals = (self._coeff @ K) / self.eigenvalue
        return vals, flagged


def extend_eigenfunction(
    op: TransferOperatorEstimate,
    values,
    eigenvalue,
    X=None,
    eigenvalue_floor: float = EIGENVALUE_FLOOR,
    direction: str = "forward",
):
    """Extend one eigenfunction beyond the samples.

    Parameters
    ----------
    op : TransferOperatorEstimate
    values : array of function values at the samples
    eigenvalue : complex
        Must have modulus at least ``eigenvalue_floor``; zero is refused
        outright.
    X : array, optional
        When given, return the extension values at these points directly;
        otherwise return the callable :class:`ExtendedFunction`.
    """
    ext = ExtendedFunction(op, values, eigenvalue, direction, eigenvalue_floor)
    if X is None:
        return ext
    return ext(X)


def extend_embedding(
    op: TransferOperatorEstimate,
    spectrum: Spectrum,
    indices,
    X,
    eigenvalue_floor: float = EIGENVALUE_FLOOR,
) -> tuple:
    """Extend spectral-embedding coordinates to new points.

    The kernel row at each query is computed once and shared across all
    selected modes. For singular spectra the input-space (right) functions
    are extended through the adjoint direction using the left functions.

    Returns
    -------
    coords : ndarray of shape (m, 2 * len(indices))
        Re/Im column pair per selected mode.
    flagged : ndarray of bool, shape (m,)
        Far-outlier flags (kernel mass concentration).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    idx = [int(i) for i in indices]
    if not idx:
        raise ValueError("no indices selected")

    exts = []
    for i in idx:
        lam, _ = spectrum.mode(i)
        if spectrum.kind == "singular":
            fn = spectrum.left_functions[i - 1]
            exts.append(ExtendedFunction(op, fn, lam, "adjoint", eigenvalue_floor))
        else:
            fn = spectrum.functions[i - 1]
            exts.append(ExtendedFunction(op, fn, lam, "forward", eigenvalue_floor))

    K = exts[0]._kernel_block(X)
    w = (
        op.second_blur.duals.source.weights
        if exts[0].direction == "forward"
        else op.first_blur.duals.target.weights
    )
    flagged = (K * w[:, None]).max(axis=0) > CONFIDENCE_MASS_SHARE
    cols = []
    for ext in exts:
        vals = (ext._coeff @ K) / ext.eigenvalue
        cols.append(np.real(vals))
        cols.append(np.imag(vals))
    return np.column_stack(cols), flagged
