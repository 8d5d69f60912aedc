"""fit/transform front end around the operator pipeline."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from entop import (
    DimensionMismatchError,
    EmbeddedRingSpec,
    EntropicTransferOperator,
    TorusShiftSpec,
    circular_correlation,
    sample_embedded_ring,
    sample_torus_shift,
)


def torus_arrays(n=400, seed=0, sigma=0.02):
    data = sample_torus_shift(TorusShiftSpec(shifts=(0.2,), sigma=sigma), n, seed)
    return data.x.points, data.y.points


def test_params_round_trip_and_clone():
    est = EntropicTransferOperator(epsilon=0.05, cost="sqtorus", n_modes=6,
                                   embed_indices=(2, 3), seed=4)
    params = est.get_params()
    assert params["epsilon"] == 0.05
    assert params["embed_indices"] == (2, 3)
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(epsilon=0.2)
    assert est.epsilon == 0.2
    assert twin.epsilon == 0.05


def test_fit_shapes_and_eigenvalues():
    X, Y = torus_arrays()
    est = EntropicTransferOperator(epsilon=0.05, cost="sqtorus",
                                   n_modes=5, embed_indices=(2, 3))
    out = est.fit(X, Y)
    assert out is est
    assert est.embedding_.shape == (400, 4)
    assert est.n_features_in_ == 1
    assert abs(est.eigenvalues_[0] - 1.0) < 1e-6
    assert np.all(np.abs(est.eigenvalues_) <= 1.0 + 1e-6)


def test_transform_on_training_points_matches_embedding():
    X, Y = torus_arrays()
    est = EntropicTransferOperator(epsilon=0.05, cost="sqtorus").fit(X, Y)
    np.testing.assert_allclose(est.transform(X), est.embedding_, atol=1e-8)


def test_fit_transform_equals_fit_then_embedding():
    X, Y = torus_arrays(n=200, seed=3)
    a = EntropicTransferOperator(epsilon=0.05, cost="sqtorus").fit_transform(X, Y)
    b = EntropicTransferOperator(epsilon=0.05, cost="sqtorus").fit(X, Y).embedding_
    np.testing.assert_array_equal(a, b)


def test_ring_embedding_tracks_latent_angle():
    spec = EmbeddedRingSpec(d=2, sigma=0.05)
    data = sample_embedded_ring(spec, 500, 0)
    X, Y = data.x.points, data.y.points
    est = EntropicTransferOperator(epsilon=0.05, n_modes=3).fit(X, Y)
    emb_angle = np.arctan2(est.embedding_[:, 1], est.embedding_[:, 0])
    latent = 2.0 * np.pi * data.labels["angle"]
    assert abs(circular_correlation(emb_angle, latent)) > 0.9

    fresh = sample_embedded_ring(spec, 300, 1)
    coords = est.transform(fresh.x.points)
    oos_angle = np.arctan2(coords[:, 1], coords[:, 0])
    oos_latent = 2.0 * np.pi * fresh.labels["angle"]
    assert abs(circular_correlation(oos_angle, oos_latent)) > 0.9


def test_nonstationary_variant_uses_singular_triples():
    X, Y = torus_arrays(n=300, seed=5)
    est = EntropicTransferOperator(epsilon=0.05, cost="sqtorus",
                                   variant="nonstationary", n_modes=4).fit(X, Y)
    vals = est.eigenvalues_
    assert np.all(np.isreal(vals)) and np.all(vals.real >= 0)
    assert abs(vals[0] - 1.0) < 1e-6
    assert est.spectrum_.kind == "singular"
    np.testing.assert_allclose(est.transform(X), est.embedding_, atol=1e-8)


def test_unfitted_access_raises():
    est = EntropicTransferOperator()
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((3, 1)))
    with pytest.raises(NotFittedError):
        est.eigenvalues_


def test_validation_errors():
    X, Y = torus_arrays(n=60)
    with pytest.raises(DimensionMismatchError):
        EntropicTransferOperator().fit(X[:50], Y)
    with pytest.raises(DimensionMismatchError):
        EntropicTransferOperator().fit(X, np.hstack([Y, Y]))
    with pytest.raises(ValueError):
        EntropicTransferOperator(epsilon=0.0).fit(X, Y)
    with pytest.raises(ValueError):
        EntropicTransferOperator(n_modes=2, embed_indices=(2, 3)).fit(X, Y)
    with pytest.raises(ValueError):
        EntropicTransferOperator(embed_indices=()).fit(X, Y)
    with pytest.raises(ValueError):
        EntropicTransferOperator(embed_indices=(0,)).fit(X, Y)
    est = EntropicTransferOperator(epsilon=0.1, cost="sqtorus").fit(X, Y)
    with pytest.raises(ValueError):
        est.transform(np.zeros((3, 2)))
