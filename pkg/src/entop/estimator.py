"""Scikit-learn style front end.

:class:`EntropicTransferOperator` wraps the solve / assemble / decompose
pipeline behind the familiar ``fit`` / ``transform`` pair: ``fit`` takes
aligned input and output samples and estimates the regularized transfer
operator together with its dominant spectrum, ``transform`` maps new
points into the spectral embedding through the out-of-sample extension.
The functional API underneath (:mod:`entop.operator`,
:mod:`entop.spectral`, :mod:`entop.oos`) remains the primary surface for
anything beyond this workflow.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_mode_indices, check_pair_arrays, check_positive
from .cloud import CostSpec
from .operator import TransitionData, build_operator
from .oos import extend_embedding
from .sinkhorn import SolverOptions
from .spectral import spectral_embedding, top_eigenpairs, top_singular_triples

__all__ = ["EntropicTransferOperator"]


class EntropicTransferOperator(BaseEstimator):
    """Entropy-regularized transfer operator estimator.

    Parameters
    ----------
    epsilon : float, default=0.1
        Entropic regularization; sets the blur length scale sqrt(eps).
    variant : {"stationary", "nonstationary"}, default="stationary"
        Stationary maps output samples back onto input samples so the
        operator has an eigendecomposition; nonstationary keeps separate
        input/output spaces and uses singular triples instead.
    cost : {"sqeuclidean", "sqtorus"}, default="sqeuclidean"
        Ground cost. The torus cost wraps each axis with period from
        ``periods`` (default 1).
    periods : tuple or None
        Axis periods for the torus cost; ignored for Euclidean.
    n_modes : int, default=10
        Number of dominant eigenpairs (or singular triples) extracted.
    embed_indices : tuple of int, default=(2,)
        1-based mode indices placed in the embedding; each contributes a
        (real, imaginary) column pair. Index 1 is the trivial mode.
    tol : float or None
        Marginal tolerance for the underlying solver; None uses the
        operator-assembly default.
    max_iter : int or None
        Iteration budget per solve; None uses the solver default.
    seed : int, default=0
        Seeds the iterative eigensolver start vector.

    Attributes
    ----------
    operator_ : TransferOperatorEstimate
    spectrum_ : Spectrum
    embedding_ : ndarray of shape (n_samples, 2 * len(embed_indices))
        In-sample embedding coordinates.
    n_features_in_ : int
    """

    def __init__(
        self,
        epsilon: float = 0.1,
        variant: str = "stationary",
        cost: str = "sqeuclidean",
        periods=None,
        n_modes: int = 10,
        embed_indices=(2,),
        tol=None,
        max_iter=None,
        seed: int = 0,
    ):
        self.epsilon = epsilon
        self.variant = variant
        self.cost = cost
        self.periods = periods
        self.n_modes = n_modes
        self.embed_indices = embed_indices
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed

    def _options(self):
        kwargs = {}
        if self.tol is not None:
            kwargs["tol"] = check_positive("tol", self.tol)
        if self.max_iter is not None:
            kwargs["max_iter"] = int(self.max_iter)
        return SolverOptions(**kwargs) if kwargs else None

    def fit(self, X, Y):
        """Estimate the operator from aligned samples (x_i, y_i)."""
        X, Y = check_pair_arrays(X, Y)
        check_positive("epsilon", self.epsilon)
        indices = check_mode_indices(self.embed_indices)
        k = int(self.n_modes)
        if k < max(indices):
            raise ValueError(
                f"n_modes={k} cannot cover embed index {max(indices)}"
            )
        cost = CostSpec(kind=self.cost, periods=self.periods)
        data = TransitionData.from_arrays(X, Y)
        self.operator_ = build_operator(
            data, cost, float(self.epsilon), variant=self.variant, opts=self._options()
        )
        if self.variant == "stationary":
            self.spectrum_ = top_eigenpairs(self.operator_, k=k, seed=self.seed)
        else:
            self.spectrum_ = top_singular_triples(self.operator_, k=k, seed=self.seed)
        self.embedding_ = spectral_embedding(self.spectrum_, indices)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Embed new points via the out-of-sample extension."""
        check_is_fitted(self, "operator_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fitted with {self.n_features_in_}"
            )
        coords, _ = extend_embedding(
            self.operator_, self.spectrum_, check_mode_indices(self.embed_indices), X
        )
        return coords

    def fit_transform(self, X, Y):
        """Fit and return the in-sample embedding coordinates."""
        return self.fit(X, Y).embedding_

    @property
    def eigenvalues_(self) -> np.ndarray:
        check_is_fitted(self, "spectrum_")
        return self.spectrum_.values
