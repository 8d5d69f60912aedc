"""Synthetic dynamical systems with known ground truth.

Two families are provided.

Torus shift-and-blur: states live on the flat torus ``[0, 1)^d``. The
first coordinate follows

.. math::

    X \\sim \\mathcal{U}[0, 1), \\qquad
    Y \\mid X = x \\;\\sim\\; \\sum_m w_m \\,
        \\widetilde{\\mathcal{N}}(x + a_m, \\sigma^2),

where :math:`\\widetilde{\\mathcal{N}}` is the wrapped Gaussian (a plain
Gaussian pushed through ``u -> u mod 1``). Any remaining coordinates of
``X`` and ``Y`` are independent uniforms, so the dynamics act on the
first coordinate only.

Embedded noisy ring: the deterministic shift ``x -> x + 1/5`` on the
1-torus is embedded into ``R^d`` through a randomly distorted circle

.. math::

    \\mathrm{Emb}(x) = R\\bigl(f_d(\\cos 2\\pi x, \\sin 2\\pi x)
        + (\\tau^2 F_1(x), \\tau^2 F_2(x), \\tau F_3(x), \\dots,
           \\tau F_d(x))\\bigr),

with :math:`F_n` random combinations of the first 10 Fourier modes
(coefficients ``A/k``, ``B/k`` with ``A, B`` standard normal), ``R`` a
seeded random rotation, and isotropic Gaussian noise of scale ``sigma``
added after embedding. The latent angles are carried along as labels
for evaluation; estimators never see them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operator import TransitionData

__all__ = [
    "TorusShiftSpec",
    "EmbeddedRingSpec",
    "sample_torus_shift",
    "true_kernel_torus",
    "sample_embedded_ring",
    "simulate_torus_walk",
    "wrapped_gaussian_density",
]

# Number of periods kept in the wrapped-Gaussian series. For sigma <= 1
# the tail beyond 10 periods is below 1e-20, far under any tolerance
# used here.
WRAP_TERMS = 10


@dataclass(frozen=True)
class TorusShiftSpec:
    """Shift-and-blur system on the torus.

    ``shifts`` and ``weights`` describe the mixture of wrapped Gaussians
    centred at ``x + shift_m``; ``sigma`` is the common std. ``d`` adds
    independent uniform coordinates beyond the first.
    """

    shifts: tuple = (0.2,)
    sigma: float = 0.01
    weights: tuple = None
    d: int = 1

    def __post_init__(self):
        shifts = tuple(float(s) for s in self.shifts)
        if not shifts:
            raise ValueError("need at least one shift")
        if any(not (0.0 <= s < 1.0) for s in shifts):
            raise ValueError("shifts must lie in [0, 1)")
        object.__setattr__(self, "shifts", shifts)
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.weights is None:
            w = tuple(1.0 / len(shifts) for _ in shifts)
        else:
            w = tuple(float(v) for v in self.weights)
            if len(w) != len(shifts):
                raise ValueError("weights and shifts must have equal length")
            if any(v < 0 for v in w):
                raise ValueError("weights must be nonnegative")
            total = sum(w)
            if abs(total - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")
        object.__setattr__(self, "weights", w)
        if int(self.d) < 1:
            raise ValueError("d must be >= 1")
        object.__setattr__(self, "d", int(self.d))


def sample_torus_shift(spec: TorusShiftSpec, n: int, seed=None) -> TransitionData:
    """Draw ``n`` transition pairs from a :class:`TorusShiftSpec`."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(0.0, 1.0, size=n)
    shifts = np.asarray(spec.shifts)
    if len(shifts) == 1:
        offset = shifts[0]
    else:
        offset = shifts[rng.choice(len(shifts), size=n, p=np.asarray(spec.weights))]
    y1 = x1 + offset
    if spec.sigma > 0:
        y1 = y1 + spec.sigma * rng.standard_normal(n)
    y1 = np.mod(y1, 1.0)
    if spec.d == 1:
        x, y = x1[:, None], y1[:, None]
    else:
        extra_x = rng.uniform(0.0, 1.0, size=(n, spec.d - 1))
        extra_y = rng.uniform(0.0, 1.0, size=(n, spec.d - 1))
        x = np.column_stack([x1, extra_x])
        y = np.column_stack([y1, extra_y])
    return TransitionData.from_arrays(
        x, y, meta={"system": "torus_shift", "sigma": spec.sigma, "seed": seed}
    )


def wrapped_gaussian_density(u, sigma: float) -> np.ndarray:
    """Density of the wrapped Gaussian on ``[0, 1)`` at offsets ``u``.

    Truncated series over ``|k| <= WRAP_TERMS`` periods; exact to well
    below 1e-15 for sigma <= 1.
    """
    if sigma <= 0:
        raise ValueError("density requires sigma > 0")
    u = np.asarray(u, dtype=np.float64)
    ks = np.arange(-WRAP_TERMS, WRAP_TERMS + 1)
    z = (u[..., None] + ks) / sigma
    dens = np.exp(-0.5 * z * z).sum(axis=-1) / (sigma * np.sqrt(2.0 * np.pi))
    return dens


def true_kernel_torus(spec: TorusShiftSpec, x, y) -> np.ndarray:
    """Analytic transition density t(x, y) of the torus system.

    The value is the conditional density of ``Y = y`` given ``X = x``
    with respect to the uniform measure, i.e. the integral kernel of the
    exact transfer operator. Only the driving coordinate is involved;
    for ``d > 1`` pass the first coordinates (the remaining ones
    contribute a constant factor 1 by independence).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(np.broadcast(x, y).shape)
    for shift, w in zip(spec.shifts, spec.weights):
        out = out + w * wrapped_gaussian_density(y - x - shift, spec.sigma)
    return out


def simulate_torus_walk(
    n_steps: int, shift: float = 0.05, sigma: float = 0.02, seed=None, d: int = 1
) -> np.ndarray:
    """Trajectory of the rotating random walk ``z_{t+1} = z_t + shift +
    sigma * N(0,1) mod 1`` on the torus, shape ``(n_steps, d)``.

    Only the first coordinate moves; extra coordinates perform an
    independent driftless walk with the same noise, so lagged pairs of
    the trajectory feed the usual estimators.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = np.random.default_rng(seed)
    steps = sigma * rng.standard_normal((n_steps - 1, d)) if n_steps > 1 else np.zeros((0, d))
    steps[:, 0] += shift
    z = np.vstack([rng.uniform(0.0, 1.0, size=(1, d)), steps]).cumsum(axis=0)
    return np.mod(z, 1.0)


@dataclass(frozen=True)
class EmbeddedRingSpec:
    """Distorted, rotated circle in ``R^d`` driven by a 1/5 torus shift.

    All randomness in the embedding itself (Fourier coefficients and the
    rotation) is derived from ``seed``, so a spec value pins down one
    concrete map. ``sigma`` is the ambient Gaussian noise added after
    embedding.
    """

    d: int = 2
    sigma: float = 0.05
    tau: float = 0.2
    shift: float = 0.2
    n_modes: int = 10
    seed: int = 0
    coeff_a: np.ndarray = field(init=False, repr=False, compare=False)
    coeff_b: np.ndarray = field(init=False, repr=False, compare=False)
    rotation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("ambient dimension must be >= 2")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        rng = np.random.default_rng(self.seed)
        a = rng.standard_normal((self.d, self.n_modes))
        b = rng.standard_normal((self.d, self.n_modes))
        rot = _random_rotation(self.d, rng)
        for name, arr in (("coeff_a", a), ("coeff_b", b), ("rotation", rot)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def perturbations(self, angles) -> np.ndarray:
        """Evaluate the Fourier distortions F_n at the given angles.

        Returns shape ``(len(angles), d)``.
        """
        t = np.asarray(angles, dtype=np.float64).ravel()
        k = np.arange(1, self.n_modes + 1)
        phase = 2.0 * np.pi * t[:, None] * k[None, :]
        cos_part = np.cos(phase) / k
        sin_part = np.sin(phase) / k
        return cos_part @ self.coeff_a.T + sin_part @ self.coeff_b.T

    def embed(self, angles) -> np.ndarray:
        """Map latent angles to ambient points, shape ``(len(angles), d)``."""
        t = np.asarray(angles, dtype=np.float64).ravel()
        base = np.zeros((t.size, self.d))
        base[:, 0] = np.cos(2.0 * np.pi * t)
        base[:, 1] = np.sin(2.0 * np.pi * t)
        damp = np.full(self.d, self.tau)
        damp[:2] = self.tau**2
        pts = base + damp[None, :] * self.perturbations(t)
        return pts @ self.rotation.T


def _random_rotation(d: int, rng) -> np.ndarray:
    # QR of a Gaussian matrix gives a Haar-distributed orthogonal factor
    # once the sign ambiguity of R's diagonal is fixed; flip one column
    # if needed to land in SO(d).
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diag(r))[None, :]
    if np.linalg.det(q) < 0:
        q[:, -1] = -q[:, -1]
    return q


def sample_embedded_ring(spec: EmbeddedRingSpec, n: int, seed=None) -> TransitionData:
    """Draw ``n`` pairs from the embedded ring system.

    The latent angle of each ``x`` sample travels in ``labels["angle"]``
    (the ``y`` angle is that plus the shift, mod 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    ang_x = rng.uniform(0.0, 1.0, size=n)
    ang_y = np.mod(ang_x + spec.shift, 1.0)
    x = spec.embed(ang_x)
    y = spec.embed(ang_y)
    if spec.sigma > 0:
        x = x + spec.sigma * rng.standard_normal((n, spec.d))
        y = y + spec.sigma * rng.standard_normal((n, spec.d))
    return TransitionData.from_arrays(
        x,
        y,
        labels={"angle": ang_x},
        meta={"system": "embedded_ring", "sigma": spec.sigma, "seed": seed},
    )
