"""Dominant eigenpairs, singular triples, sweeps, and spectral embeddings.

Eigenvalue problems are solved either densely (small systems, exact oracle)
or with the implicitly restarted Arnoldi iteration from ARPACK on a
matrix-free operator view; singular triples use the corresponding Lanczos
bidiagonalization. Eigenfunction vectors hold function VALUES at the input
samples and are normalized to unit norm in the weighted L2 space of the
input cloud. Ordering is by decreasing modulus, with the member of a
conjugate pair carrying nonnegative imaginary part listed first.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, svds

from .cloud import CostSpec
from .errors import EigensolverError
from .operator import TransferOperatorEstimate, TransitionData, build_operator
from .sinkhorn import SolverOptions

__all__ = [
    "Spectrum",
    "SweepEntry",
    "SweepResult",
    "top_eigenpairs",
    "top_singular_triples",
    "sweep",
    "spectral_embedding",
]

# Eigenvectors whose mass sits on fewer than this fraction of the samples
# are flagged as likely discretization artifacts.
SPURIOUS_SUPPORT_FRACTION = 0.005

_RESIDUAL_TOL = 1e-8


@dataclass
class Spectrum:
    """Dominant part of an operator spectrum or singular structure.

    ``values`` are sorted by decreasing modulus (ties: nonnegative
    imaginary part first). ``functions[i]`` holds the values of the i-th
    eigenfunction (or right singular function) at the input samples, unit
    norm in L2 of the input cloud; for singular spectra ``left_functions``
    holds the left functions on the output samples.
    """

    kind: str
    values: np.ndarray
    n: int
    epsilon: float = None
    functions: np.ndarray = None
    left_functions: np.ndarray = None
    residuals: np.ndarray = None
    spurious: np.ndarray = None
    weights: np.ndarray = None

    @property
    def k(self) -> int:
        return len(self.values)

    def mode(self, index: int) -> tuple:
        """(eigenvalue, function values) of the 1-based mode ``index``."""
        if not 1 <= index <= self.k:
            raise IndexError(f"mode index {index} outside 1..{self.k}")
        return self.values[index - 1], self.functions[index - 1]

    def to_json(self) -> dict:
        doc = {
            "schema": 1,
            "kind": self.kind,
            "epsilon": self.epsilon,
            "N": int(self.n),
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.values],
            "residuals": [float(r) for r in (self.residuals if self.residuals is not None else [])],
        }
        if self.spurious is not None:
            doc["spurious"] = [bool(b) for b in self.spurious]
        return doc

    @classmethod
    def from_json(cls, doc) -> "Spectrum":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        vals = np.array([complex(re, im) for re, im in doc["eigenvalues"]])
        resid = np.asarray(doc.get("residuals", []), dtype=float)
        spur = doc.get("spurious")
        return cls(
            kind=doc.get("kind", "eigen"),
            values=vals,
            n=int(doc["N"]),
            epsilon=doc.get("epsilon"),
            residuals=resid if resid.size else None,
            spurious=np.asarray(spur, dtype=bool) if spur is not None else None,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "Spectrum":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


class _OpView:
    """Uniform access to anything spectrum extraction can run on."""

    def __init__(self, op):
        if isinstance(op, np.ndarray):
            if op.ndim != 2 or op.shape[0] != op.shape[1]:
                raise ValueError("matrix input must be square")
            n = op.shape[0]
            self.n_in = self.n_out = n
            self.w_in = np.full(n, 1.0 / n)
            self.w_out = self.w_in
            self.dense = op
            self.matvec = lambda u: op @ u
            self.rmatvec = lambda v: op.T @ v
            self.endomorphism = True
            self.epsilon = None
        elif isinstance(op, TransferOperatorEstimate):
            self.n_in = self.n_out = op.n
            self.w_in = op.source_cloud.weights
            self.w_out = op.output_cloud.weights
            self.dense = op.dense_matrix() if op.representation == "dense" else None
            self.matvec = op.apply
            self.rmatvec = op.apply_adjoint
            self.endomorphism = op.is_endomorphism
            self.epsilon = op.epsilon
        else:
            # duck-typed operators (e.g. the box-partition baseline)
            M = op.dense_matrix()
            n = M.shape[0]
            self.n_in = self.n_out = n
            self.w_in = np.full(n, 1.0 / n)
            self.w_out = self.w_in
            self.dense = M
            self.matvec = lambda u: M @ u
            self.rmatvec = lambda v: M.T @ v
            self.endomorphism = bool(getattr(op, "is_endomorphism", True))
            self.epsilon = getattr(op, "epsilon", None)

def _sort_order(values: np.ndarray) -> np.ndarray:
    # primary: decreasing modulus; tie-break: nonnegative imaginary part
    # first (conjugate pairs have bit-identical moduli).
    return np.lexsort((-values.imag, -np.abs(values)))


def _conjugate_closed(values: np.ndarray) -> bool:
    for lam in values:
        if lam.imag != 0.0:
            gap = np.min(np.abs(values - np.conj(lam)))
            if gap > 1e-12 * max(1.0, abs(lam)):
                return False
    return True


def _closure_cut(values_sorted: np.ndarray, k: int) -> int:
    """Cut index >= k that does not split a conjugate pair.

    Real operator matrices carry conjugate-closed spectra, so when the
    plain top-k cut lands between the two members of a pair the partner
    sits immediately after it; extending the cut restores closure.  If
    no extension closes the set (partner not among the computed values)
    the cut shrinks instead, dropping the orphan.
    """
    m = len(values_sorted)
    cut = min(k, m)
    while cut < m and not _conjugate_closed(values_sorted[:cut]):
        cut += 1
    while cut > 0 and not _conjugate_closed(values_sorted[:cut]):
        cut -= 1
    return cut


def _support_fraction(u: np.ndarray, w: np.ndarray) -> float:
    m = w * np.abs(u) ** 2
    total = m.sum()
    if total <= 0:
        return 0.0
    m = m / total
    return float(1.0 / (len(u) * np.sum(m**2)))


def _l2_norm(u: np.ndarray, w: np.ndarray) -> float:
    return float(np.sqrt(np.real(np.vdot(u * w, u))))


def top_eigenpairs(
    op,
    k: int = 10,
    seed: int = 0,
    ncv: int = None,
    maxiter: int = 300,
    residual_tol: float = _RESIDUAL_TOL,
    method: str = "auto",
) -> Spectrum:
    """Dominant eigenpairs of an endomorphic operator.

    Parameters
    ----------
    op : TransferOperatorEstimate, ndarray, or duck-typed operator
        Must map the input sample space to itself (stationary variant).
    k : int
        Number of eigenpairs requested (capped at the dimension).
    seed : int
        Seeds the Arnoldi start vector; fixed seeds give reproducible runs.
    ncv, maxiter
        Arnoldi subspace size (default ``max(2k+10, 40)``) and restart cap.
    residual_tol : float
        Largest acceptable ``||op u - lambda u||`` per returned pair.
    method : str
        ``"auto"``, ``"dense"``, or ``"iterative"``.

    Raises
    ------
    EigensolverError
        On iterative-solver failure or residuals above ``residual_tol``.
    """
    view = _OpView(op)
    if not view.endomorphism:
        raise ValueError(
            "eigendecomposition requires an endomorphism; "
            "use top_singular_triples for the nonstationary variant"
        )
    n = view.n_in
    k = min(k, n)
    if method not in ("auto", "dense", "iterative"):
        raise ValueError(f"unknown method {method!r}")
    use_dense = method == "dense" or (
        method == "auto" and (view.dense is not None and (n <= 600 or k >= n - 2))
    )
    if method == "iterative" and k >= n - 1:
        use_dense = True  # ARPACK requires k < n - 1

    if use_dense or (k >= n - 1):
        M = view.dense if view.dense is not None else _materialize(view)
        vals, vecs = np.linalg.eig(M)
        order = _sort_order(vals)
        order = order[: _closure_cut(vals[order], k)]
        vals, vecs = vals[order], vecs[:, order]
    else:
        lin = LinearOperator((n, n), matvec=view.matvec, dtype=np.float64)
        v0 = np.random.default_rng(seed).standard_normal(n)
        # one spare pair so a conjugate pair split by the top-k cut can
        # be repaired without a second solve
        k_arp = min(k + 1, n - 2)
        ncv_eff = min(n, max(ncv if ncv is not None else max(2 * k + 10, 40), k_arp + 2))
        try:
            vals, vecs = eigs(lin, k=k_arp, which="LM", v0=v0, ncv=ncv_eff, maxiter=maxiter)
        except ArpackNoConvergence as exc:
            raise EigensolverError(f"Arnoldi iteration did not converge: {exc}") from exc
        order = _sort_order(vals)
        order = order[: _closure_cut(vals[order], k)]
        vals, vecs = vals[order], vecs[:, order]

    return _finalize_eigen(view, vals, vecs, residual_tol)


def _materialize(view: _OpView) -> np.ndarray:
    eye = np.eye(view.n_in)
    return np.column_stack([view.matvec(eye[:, j]) for j in range(view.n_in)])


def _finalize_eigen(view, vals, vecs, residual_tol) -> Spectrum:
    n = view.n_in
    k = len(vals)
    funcs = np.empty((k, n), dtype=complex)
    residuals = np.empty(k)
    spurious = np.empty(k, dtype=bool)
    for i in range(k):
        u = vecs[:, i]
        norm = _l2_norm(u, view.w_in)
        u = u / norm
        r = view.matvec(u) - vals[i] * u
        residuals[i] = _l2_norm(r, view.w_in)
        funcs[i] = u
        spurious[i] = _support_fraction(u, view.w_in) < SPURIOUS_SUPPORT_FRACTION
    worst = residuals.max() if k else 0.0
    if worst > residual_tol:
        raise EigensolverError(
            f"eigenpair residual {worst:.3e} exceeds {residual_tol:.1e}",
            residuals=residuals,
        )
    return Spectrum(
        kind="eigen",
        values=vals,
        n=n,
        epsilon=view.epsilon,
        functions=funcs,
        residuals=residuals,
        spurious=spurious,
        weights=view.w_in,
    )


def top_singular_triples(
    op,
    k: int = 10,
    seed: int = 0,
    maxiter: int = None,
    residual_tol: float = _RESIDUAL_TOL,
    method: str = "auto",
) -> Spectrum:
    """Dominant singular triples ``(sigma, right, left)`` of an operator.

    Works for both variants; singular vectors are orthonormal in the
    weighted L2 spaces of the input / output clouds. The leading triple of
    a mass-preserving operator is ``sigma_1 = 1`` with constant functions.
    """
    view = _OpView(op)
    n_in, n_out = view.n_in, view.n_out
    k = min(k, n_in, n_out)
    # singular problem in the orthonormal-basis scaling: S = D_out M D_in^{-1}
    din = np.sqrt(view.w_in)
    dout = np.sqrt(view.w_out)

    def smatvec(u):
        return dout * view.matvec(u / din)

    def srmatvec(v):
        return view.rmatvec(dout * v) / din

    use_dense = method == "dense" or (
        method == "auto" and view.dense is not None and (min(n_in, n_out) <= 600 or k >= min(n_in, n_out))
    )
    if use_dense or k >= min(n_in, n_out):
        M = view.dense if view.dense is not None else _materialize(view)
        S = (dout[:, None] * M) / din[None, :]
        U, s, Vh = np.linalg.svd(S)
        s, U, Vh = s[:k], U[:, :k], Vh[:k]
    else:
        lin = LinearOperator((n_out, n_in), matvec=smatvec, rmatvec=srmatvec, dtype=np.float64)
        v0 = np.random.default_rng(seed).standard_normal(min(n_in, n_out))
        try:
            U, s, Vh = svds(lin, k=k, v0=v0, maxiter=maxiter, which="LM")
        except ArpackNoConvergence as exc:  # pragma: no cover - rare
            raise EigensolverError(f"Lanczos iteration did not converge: {exc}") from exc
        order = np.argsort(-s)
        s, U, Vh = s[order], U[:, order], Vh[order]

    funcs = np.empty((k, n_in), dtype=complex)
    lefts = np.empty((k, n_out), dtype=complex)
    residuals = np.empty(k)
    spurious = np.empty(k, dtype=bool)
    for i in range(k):
        right = Vh[i] / din
        left = U[:, i] / dout
        right = right / _l2_norm(right, view.w_in)
        left = left / _l2_norm(left, view.w_out)
        r1 = view.matvec(np.real(right)) - s[i] * left
        r2 = view.rmatvec(np.real(left)) - s[i] * right
        residuals[i] = max(_l2_norm(r1, view.w_out), _l2_norm(r2, view.w_in))
        funcs[i] = right
        lefts[i] = left
        spurious[i] = _support_fraction(right, view.w_in) < SPURIOUS_SUPPORT_FRACTION
    worst = residuals.max() if k else 0.0
    if worst > residual_tol:
        raise EigensolverError(
            f"singular-triple residual {worst:.3e} exceeds {residual_tol:.1e}",
            residuals=residuals,
        )
    return Spectrum(
        kind="singular",
        values=s.astype(complex),
        n=n_in,
        epsilon=view.epsilon,
        functions=funcs,
        left_functions=lefts,
        residuals=residuals,
        spurious=spurious,
        weights=view.w_in,
    )


@dataclass
class SweepEntry:
    epsilon: float
    spectrum: Spectrum = None
    error: str = None
    seconds: float = 0.0


@dataclass
class SweepResult:
    """Spectra across a decreasing epsilon grid with shared warm starts."""

    variant: str
    entries: list = field(default_factory=list)

    @property
    def epsilons(self) -> list:
        return [e.epsilon for e in self.entries]

    def spectra(self) -> dict:
        return {e.epsilon: e.spectrum for e in self.entries if e.spectrum is not None}


def sweep(
    data: TransitionData,
    cost: CostSpec,
    epsilons,
    k: int = 10,
    variant: str = "stationary",
    opts: SolverOptions = None,
    seed: int = 0,
) -> SweepResult:
    """Extract spectra over an epsilon grid, largest epsilon first.

    Consecutive solves warm-start from the previous grid point (the
    epsilon-scaling idea applied across the grid). Failures are recorded
    per entry and do not abort the remaining grid.
    """
    eps_sorted = sorted({float(e) for e in epsilons}, reverse=True)
    result = SweepResult(variant=variant)
    prev_op = None
    for eps in eps_sorted:
        t_start = time.perf_counter()
        try:
            op = build_operator(
                data, cost, eps, variant=variant, opts=opts, init=prev_op
            )
            if variant == "stationary":
                spec = top_eigenpairs(op, k=k, seed=seed)
            else:
                spec = top_singular_triples(op, k=k, seed=seed)
            prev_op = op
            result.entries.append(
                SweepEntry(eps, spectrum=spec, seconds=time.perf_counter() - t_start)
            )
        except Exception as exc:  # record and continue with the next epsilon
            result.entries.append(
                SweepEntry(eps, error=f"{type(exc).__name__}: {exc}",
                           seconds=time.perf_counter() - t_start)
            )
    return result


def spectral_embedding(spectrum: Spectrum, indices) -> np.ndarray:
    """Per-sample coordinates (Re, Im per selected mode).

    ``indices`` are 1-based mode numbers into the sorted spectrum
    (``1`` is the dominant mode, whose column pair is constant for a
    mass-preserving operator). Returns an array of shape
    ``(n, 2 * len(indices))``.
    """
    if spectrum.functions is None:
        raise ValueError("spectrum carries no eigenfunction values")
    idx = list(indices)
    if not idx:
        raise ValueError("no indices selected")
    cols = []
    for i in idx:
        _, u = spectrum.mode(int(i))
        cols.append(np.real(u))
        cols.append(np.imag(u))
    return np.column_stack(cols)
