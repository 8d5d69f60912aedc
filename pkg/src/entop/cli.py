"""Command-line interface.

Seven subcommands cover the standard workflows:

``sweep``
    Operator spectra over an epsilon grid (warm-started, largest first).
``embed``
    Spectral-embedding coordinates of the fitted samples at one epsilon.
``extend``
    Evaluate a saved spectrum's embedding at new points (out of sample).
``converge``
    Kernel-distance studies on the torus family: empirical-vs-population
    error over sample counts, optional bias rows and dimension rows.
``compare-ulam``
    Blurred-operator vs histogram (Ulam) spectra on the noisy ring.
``counterexample``
    Single-blur lower bound vs double-blur convergence on the two-point
    system.
``synth``
    Draw transition pairs from a built-in system and write them to CSV.

Configuration comes from ``--config file.json`` (schema documented in
:mod:`entop.config`), from command-line flags, or both; a flag given
explicitly overrides the file value. Every run writes ``artifact.json``
into the output directory with the resolved config, an input hash,
output paths, and timings.

Exit codes: 0 success; 2 configuration error (bad JSON, unknown keys,
inconsistent values); 3 solver or eigensolver failure, with partial
results still written; 4 unreadable or malformed input files.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .baselines import build_ulam, double_blur_error, single_blur_counterexample
from .cloud import CostSpec, read_csv_table
from .config import ExperimentConfig, RunArtifact, sha256_bytes, sha256_file
from .errors import (
    ConfigError,
    EigensolverError,
    EntopError,
    NonConvergenceError,
)
from .metrics import (
    convergence_study,
    dimension_study,
    fit_loglog_slope,
    t_vs_regularized_distance,
    write_report_csv,
)
from .oos import extend_embedding
from .operator import TransitionData, build_operator
from .sinkhorn import SolverOptions
from .spectral import (
    Spectrum,
    spectral_embedding,
    sweep,
    top_eigenpairs,
    top_singular_triples,
)
from .synth import (
    EmbeddedRingSpec,
    TorusShiftSpec,
    sample_embedded_ring,
    sample_torus_shift,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

# values-over-values precedence: defaults < config file < explicit flags
_SENTINEL = argparse.SUPPRESS


class _InputError(EntopError):
    """A required input file is missing or malformed."""


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=_SENTINEL, help="JSON config file")
    p.add_argument("--seed", type=int, default=_SENTINEL, help="override the run seed")
    p.add_argument(
        "--threads",
        type=int,
        default=_SENTINEL,
        help="cap BLAS/LAPACK threads (reproducible timings)",
    )
    p.add_argument(
        "--out-dir", default=_SENTINEL, help="output directory (default: current)"
    )


def _add_system_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", choices=["torus", "ring"], default=_SENTINEL)
    p.add_argument("--n", type=int, default=_SENTINEL, help="sample count")
    p.add_argument("--d", type=int, default=_SENTINEL, help="state dimension")
    p.add_argument("--sigma", type=float, default=_SENTINEL, help="noise level")
    p.add_argument("--shifts", type=_float_list, default=_SENTINEL)
    p.add_argument("--weights", type=_float_list, default=_SENTINEL)
    p.add_argument("--tau", type=float, default=_SENTINEL, help="ring waviness")
    p.add_argument("--ring-seed", type=int, default=_SENTINEL, dest="ring_seed")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=_SENTINEL)
    p.add_argument("--max-iter", type=int, default=_SENTINEL, dest="max_iter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entop",
        description="Blurred transfer operators from sampled transitions.",
    )
    _add_common(parser)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("sweep", help="spectra over an epsilon grid")
    _add_common(p)
    p.add_argument("--data", default=_SENTINEL, help="transition CSV")
    _add_system_flags(p)
    p.add_argument("--epsilons", type=_float_list, default=_SENTINEL)
    p.add_argument("--k", type=int, default=_SENTINEL, help="modes per spectrum")
    p.add_argument(
        "--variant", choices=["stationary", "nonstationary"], default=_SENTINEL
    )
    p.add_argument("--cost", choices=["sqeuclidean", "sqtorus"], default=_SENTINEL)
    p.add_argument("--periods", type=_float_list, default=_SENTINEL)
    _add_solver_flags(p)

    p = sub.add_parser("embed", help="embedding coordinates at one epsilon")
    _add_common(p)
    p.add_argument("--data", default=_SENTINEL)
    _add_system_flags(p)
    p.add_argument("--epsilon", type=float, default=_SENTINEL)
    p.add_argument("--k", type=int, default=_SENTINEL)
    p.add_argument("--indices", type=_int_list, default=_SENTINEL)
    p.add_argument(
        "--variant", choices=["stationary", "nonstationary"], default=_SENTINEL
    )
    p.add_argument("--cost", choices=["sqeuclidean", "sqtorus"], default=_SENTINEL)
    p.add_argument("--periods", type=_float_list, default=_SENTINEL)
    _add_solver_flags(p)

    p = sub.add_parser("extend", help="evaluate a saved embedding at new points")
    _add_common(p)
    p.add_argument("--spectrum", default=_SENTINEL, help="spectrum JSON")
    p.add_argument("--data", default=_SENTINEL, help="fitted transition CSV")
    p.add_argument("--new-points", default=_SENTINEL, dest="new_points")
    p.add_argument("--indices", type=_int_list, default=_SENTINEL)
    p.add_argument("--k", type=int, default=_SENTINEL)
    p.add_argument("--cost", choices=["sqeuclidean", "sqtorus"], default=_SENTINEL)
    p.add_argument("--periods", type=_float_list, default=_SENTINEL)
    _add_solver_flags(p)

    p = sub.add_parser("converge", help="kernel-distance studies on the torus")
    _add_common(p)
    p.add_argument("--epsilons", type=_float_list, default=_SENTINEL)
    p.add_argument("--ns", type=_int_list, default=_SENTINEL)
    p.add_argument("--sigma", type=float, default=_SENTINEL)
    p.add_argument("--shifts", type=_float_list, default=_SENTINEL)
    p.add_argument("--weights", type=_float_list, default=_SENTINEL)
    p.add_argument("--dims", type=_int_list, default=_SENTINEL)
    p.add_argument("--dims-n", type=int, default=_SENTINEL, dest="dims_n")
    p.add_argument("--n-seeds", type=int, default=_SENTINEL, dest="n_seeds")
    p.add_argument("--n-mc", type=int, default=_SENTINEL, dest="n_mc")
    p.add_argument("--resolution", type=int, default=_SENTINEL)
    p.add_argument(
        "--bias-rows",
        action=argparse.BooleanOptionalAction,
        default=_SENTINEL,
        dest="bias_rows",
    )

    p = sub.add_parser("compare-ulam", help="blurred vs histogram spectra on the ring")
    _add_common(p)
    p.add_argument("--d", type=int, default=_SENTINEL)
    p.add_argument("--sigma", type=float, default=_SENTINEL)
    p.add_argument("--tau", type=float, default=_SENTINEL)
    p.add_argument("--n", type=int, default=_SENTINEL)
    p.add_argument("--epsilons", type=_float_list, default=_SENTINEL)
    p.add_argument("--k", type=int, default=_SENTINEL)
    p.add_argument("--ring-seed", type=int, default=_SENTINEL, dest="ring_seed")

    p = sub.add_parser("counterexample", help="single- vs double-blur convergence")
    _add_common(p)
    p.add_argument("--ns", type=_int_list, default=_SENTINEL)
    p.add_argument("--epsilon", type=float, default=_SENTINEL)
    p.add_argument("--n-mc", type=int, default=_SENTINEL, dest="n_mc")
    p.add_argument(
        "--double",
        action=argparse.BooleanOptionalAction,
        default=_SENTINEL,
        dest="double",
    )

    p = sub.add_parser("synth", help="sample a built-in system to CSV")
    _add_common(p)
    p.add_argument("--system", choices=["torus", "ring"], default=_SENTINEL)
    p.add_argument("--n", type=int, default=_SENTINEL)
    p.add_argument("--d", type=int, default=_SENTINEL)
    p.add_argument("--sigma", type=float, default=_SENTINEL)
    p.add_argument("--shifts", type=_float_list, default=_SENTINEL)
    p.add_argument("--weights", type=_float_list, default=_SENTINEL)
    p.add_argument("--tau", type=float, default=_SENTINEL)
    p.add_argument("--ring-seed", type=int, default=_SENTINEL, dest="ring_seed")
    p.add_argument("--out", default=_SENTINEL, help="output CSV path")

    return parser


# flags merged into the nested system dict for sweep/embed
_SYSTEM_FLAGS = ("d", "sigma", "shifts", "weights", "tau", "ring_seed")
# flags that are plain params, per command
_PARAM_FLAGS = {
    "sweep": ("data", "n", "epsilons", "k", "variant", "cost", "periods",
              "tol", "max_iter"),
    "embed": ("data", "n", "epsilon", "k", "indices", "variant", "cost",
              "periods", "tol", "max_iter"),
    "extend": ("spectrum", "data", "new_points", "indices", "k", "cost",
               "periods", "tol", "max_iter"),
    "converge": ("epsilons", "ns", "sigma", "shifts", "weights", "dims",
                 "dims_n", "n_seeds", "n_mc", "resolution", "bias_rows"),
    "compare-ulam": ("d", "sigma", "tau", "n", "epsilons", "k", "ring_seed"),
    "counterexample": ("ns", "epsilon", "n_mc", "double"),
    "synth": ("system", "n", "d", "sigma", "shifts", "weights", "tau",
              "ring_seed", "out"),
}


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge config file and explicit flags into a validated config."""
    given = vars(args)
    base = None
    if "config" in given:
        base = ExperimentConfig.from_json(given["config"])
    command = given.get("command") or (base.command if base else None)
    if command is None:
        raise ConfigError("no command given (pass a subcommand or --config)")
    if base is not None and base.command != command:
        raise ConfigError(
            f"config file is for {base.command!r} but the command line says"
            f" {command!r}"
        )
    params = dict(base.params) if base else {}

    for key in _PARAM_FLAGS[command]:
        if key in given:
            params[key] = given[key]
    if command in ("sweep", "embed"):
        system = dict(params.get("system") or {})
        if "system" in given:
            system["kind"] = given["system"]
        for key in _SYSTEM_FLAGS:
            if key in given:
                system[key] = given[key]
        if system:
            params["system"] = system
    if "seed" in given and "seed" in _param_defaults(command):
        params["seed"] = given["seed"]
    return ExperimentConfig(command=command, params=params)


def _param_defaults(command: str) -> dict:
    from .config import _PARAM_TABLE

    return _PARAM_TABLE[command][1]


def _solver_opts(cfg: ExperimentConfig) -> SolverOptions:
    tol = cfg.get("tol")
    max_iter = cfg.get("max_iter")
    if tol is None and max_iter is None:
        return None
    kw = {"tol": float(tol) if tol is not None else 1e-10}
    if max_iter is not None:
        kw["max_iter"] = int(max_iter)
    return SolverOptions(**kw)


def _system_spec(system: dict):
    """Build a sampling spec from a validated system dict."""
    kind = system.get("kind")
    if kind == "torus":
        kw = {}
        if system.get("shifts") is not None:
            kw["shifts"] = tuple(float(v) for v in system["shifts"])
        if system.get("sigma") is not None:
            kw["sigma"] = float(system["sigma"])
        if system.get("weights") is not None:
            kw["weights"] = tuple(float(v) for v in system["weights"])
        if system.get("d") is not None:
            kw["d"] = int(system["d"])
        return TorusShiftSpec(**kw)
    if kind == "ring":
        kw = {}
        if system.get("d") is not None:
            kw["d"] = int(system["d"])
        if system.get("sigma") is not None:
            kw["sigma"] = float(system["sigma"])
        if system.get("tau") is not None:
            kw["tau"] = float(system["tau"])
        if system.get("ring_seed") is not None:
            kw["seed"] = int(system["ring_seed"])
        return EmbeddedRingSpec(**kw)
    raise ConfigError(f"unknown system kind {kind!r} (expected 'torus' or 'ring')")


def _hash_data(data: TransitionData) -> str:
    chunks = [np.ascontiguousarray(data.x.points).tobytes(),
              np.ascontiguousarray(data.y.points).tobytes()]
    return sha256_bytes(*chunks)


def _load_dataset(cfg: ExperimentConfig):
    """Resolve the (data, cost, input hash) triple for sweep/embed.

    Exactly one of ``data`` (a CSV path) and ``system`` (a generator
    dict) must be set. The default ground cost is the wrapped torus cost
    for torus systems and squared Euclidean otherwise.
    """
    path = cfg.get("data")
    system = cfg.get("system")
    if (path is None) == (system is None):
        raise ConfigError("exactly one of 'data' and 'system' is required")
    periods = cfg.get("periods")
    cost_kind = cfg.get("cost")
    if path is not None:
        try:
            data = TransitionData.from_csv(path)
            digest = sha256_file(path)
        except OSError as exc:
            raise _InputError(f"cannot read data file: {exc}") from exc
        except ValueError as exc:
            raise _InputError(f"malformed data file {path}: {exc}") from exc
        cost = CostSpec(kind=cost_kind or "sqeuclidean", periods=periods)
        return data, cost, digest
    spec = _system_spec(system)
    n = int(cfg.get("n"))
    seed = cfg.get("seed")
    if isinstance(spec, TorusShiftSpec):
        data = sample_torus_shift(spec, n, seed)
        default_cost = "sqtorus"
    else:
        data = sample_embedded_ring(spec, n, seed)
        default_cost = "sqeuclidean"
    cost = CostSpec(kind=cost_kind or default_cost, periods=periods)
    return data, cost, _hash_data(data)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt_eps(eps: float) -> str:
    return f"{eps:g}"


def _cmd_sweep(cfg: ExperimentConfig, out: Path):
    data, cost, digest = _load_dataset(cfg)
    epsilons = cfg.get("epsilons")
    if not epsilons:
        raise ConfigError("empty epsilon grid")
    result = sweep(
        data,
        cost,
        epsilons,
        k=int(cfg.get("k")),
        variant=cfg.get("variant"),
        opts=_solver_opts(cfg),
        seed=int(cfg.get("seed")),
    )
    outputs, timings, failed = {}, {}, []
    for entry in result.entries:
        tag = f"eps{_fmt_eps(entry.epsilon)}"
        timings[tag] = entry.seconds
        if entry.error is not None:
            failed.append({"epsilon": entry.epsilon, "error": entry.error})
            continue
        name = f"spectrum_{tag}.json"
        entry.spectrum.save(out / name)
        outputs[tag] = name
    summary = {"failed": failed, "n": data.n, "dim": data.d}
    code = EXIT_SOLVER if failed else EXIT_OK
    return digest, outputs, timings, summary, code


def _decompose(op, kind_variant: str, k: int, seed: int) -> Spectrum:
    if kind_variant == "stationary":
        return top_eigenpairs(op, k=k, seed=seed)
    return top_singular_triples(op, k=k, seed=seed)


def _embedding_rows(points, coords, labels, extra_cols=()):
    header = [f"x{j + 1}" for j in range(points.shape[1])]
    n_modes = coords.shape[1] // 2
    for m in range(n_modes):
        header += [f"mode{m + 1}_re", f"mode{m + 1}_im"]
    for name, _ in extra_cols:
        header.append(name)
    for name in labels:
        header.append(name)
    body = np.column_stack(
        [points, coords]
        + [np.asarray(vals, dtype=np.float64)[:, None] for _, vals in extra_cols]
        + [np.asarray(labels[name], dtype=np.float64)[:, None] for name in labels]
    )
    rows = [[repr(float(v)) for v in row] for row in body]
    return header, rows


def _cmd_embed(cfg: ExperimentConfig, out: Path):
    data, cost, digest = _load_dataset(cfg)
    epsilon = float(cfg.get("epsilon"))
    indices = [int(i) for i in cfg.get("indices")]
    if not indices:
        raise ConfigError("empty mode index list")
    k = max(int(cfg.get("k")), max(indices))
    variant = cfg.get("variant")
    t0 = time.perf_counter()
    op = build_operator(data, cost, epsilon, variant=variant, opts=_solver_opts(cfg))
    t1 = time.perf_counter()
    spectrum = _decompose(op, variant, k, int(cfg.get("seed")))
    t2 = time.perf_counter()
    coords = spectral_embedding(spectrum, indices)

    spectrum.save(out / "spectrum.json")
    header, rows = _embedding_rows(data.x.points, coords, data.labels)
    _write_rows(out / "embedding.csv", header, rows)
    outputs = {"spectrum": "spectrum.json", "embedding": "embedding.csv"}
    timings = {"build": t1 - t0, "decompose": t2 - t1}
    summary = {
        "n": data.n,
        "dim": data.d,
        "moduli": [float(abs(v)) for v in spectrum.values],
    }
    return digest, outputs, timings, summary, EXIT_OK


def _cmd_extend(cfg: ExperimentConfig, out: Path):
    try:
        spectrum = Spectrum.load(cfg.get("spectrum"))
    except OSError as exc:
        raise _InputError(f"cannot read spectrum file: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise _InputError(f"malformed spectrum file: {exc}") from exc
    try:
        data = TransitionData.from_csv(cfg.get("data"))
        new_points = read_csv_table(cfg.get("new_points"))[1]
    except OSError as exc:
        raise _InputError(f"cannot read input file: {exc}") from exc
    except ValueError as exc:
        raise _InputError(f"malformed input file: {exc}") from exc
    digest = sha256_file(cfg.get("data"))

    if spectrum.epsilon is None:
        raise ConfigError("spectrum file does not record its epsilon")
    if spectrum.n != data.n:
        raise ConfigError(
            f"spectrum was fitted on {spectrum.n} samples but the data file"
            f" has {data.n}"
        )
    indices = [int(i) for i in cfg.get("indices")]
    if not indices:
        raise ConfigError("empty mode index list")
    if max(indices) > spectrum.k:
        raise ConfigError(
            f"mode index {max(indices)} exceeds the {spectrum.k} stored modes"
        )
    cost = CostSpec(kind=cfg.get("cost"), periods=cfg.get("periods"))
    variant = "stationary" if spectrum.kind == "eigen" else "nonstationary"
    k = int(cfg.get("k") or spectrum.k)

    t0 = time.perf_counter()
    op = build_operator(
        data, cost, spectrum.epsilon, variant=variant, opts=_solver_opts(cfg)
    )
    recomputed = _decompose(op, variant, k, int(cfg.get("seed")))
    t1 = time.perf_counter()
    shared = min(recomputed.k, spectrum.k, max(indices))
    drift = float(
        np.max(np.abs(recomputed.values[:shared] - spectrum.values[:shared]))
    )
    if drift > 1e-6:
        raise ConfigError(
            "spectrum file does not match the data/cost/epsilon supplied:"
            f" eigenvalue drift {drift:.2e} on the leading {shared} modes"
        )
    coords, flagged = extend_embedding(op, recomputed, indices, new_points)
    t2 = time.perf_counter()

    header, rows = _embedding_rows(
        new_points, coords, {}, extra_cols=[("flagged", flagged.astype(np.float64))]
    )
    _write_rows(out / "extension.csv", header, rows)
    outputs = {"extension": "extension.csv"}
    timings = {"rebuild": t1 - t0, "extend": t2 - t1}
    summary = {
        "n_new": int(new_points.shape[0]),
        "eigenvalue_drift": drift,
        "flagged": int(flagged.sum()),
    }
    return digest, outputs, timings, summary, EXIT_OK


def _cmd_converge(cfg: ExperimentConfig, out: Path):
    epsilons = cfg.get("epsilons")
    ns = cfg.get("ns")
    if not epsilons or not ns:
        raise ConfigError("converge needs nonempty 'epsilons' and 'ns'")
    weights = cfg.get("weights")
    spec = TorusShiftSpec(
        shifts=tuple(float(v) for v in cfg.get("shifts")),
        sigma=float(cfg.get("sigma")),
        weights=tuple(float(v) for v in weights) if weights is not None else None,
    )
    n_seeds = int(cfg.get("n_seeds"))
    n_mc = int(cfg.get("n_mc"))
    seed = int(cfg.get("seed"))
    resolution = int(cfg.get("resolution"))

    rows, timings, summary = [], {}, {}
    for eps in epsilons:
        eps = float(eps)
        tag = f"eps{_fmt_eps(eps)}"
        t0 = time.perf_counter()
        if cfg.get("bias_rows"):
            rows.append(t_vs_regularized_distance(spec, eps, resolution=resolution))
        study_rows, fit = convergence_study(
            spec, eps, ns, n_seeds=n_seeds, n_mc=n_mc, base_seed=seed
        )
        rows.extend(study_rows)
        if fit is not None:
            summary[f"slope_{tag}"] = {
                "slope": fit.slope,
                "ci": [fit.ci_low, fit.ci_high],
                "stderr": fit.stderr,
            }
        timings[tag] = time.perf_counter() - t0
    dims = cfg.get("dims")
    if dims:
        eps0 = float(epsilons[0])
        t0 = time.perf_counter()
        # dimension rows are computed at the first epsilon of the grid
        dim_rows = dimension_study(
            spec,
            eps0,
            int(cfg.get("dims_n")),
            dims=[int(v) for v in dims],
            n_seeds=n_seeds,
            n_mc=n_mc,
            base_seed=seed,
        )
        rows.extend(dim_rows)
        summary["dimension_means"] = {
            str(r.d): r.value for r in dim_rows
        }
        timings["dims"] = time.perf_counter() - t0
    write_report_csv(rows, out / "metrics.csv")
    outputs = {"metrics": "metrics.csv"}
    return None, outputs, timings, summary, EXIT_OK


def _cmd_compare_ulam(cfg: ExperimentConfig, out: Path):
    spec = EmbeddedRingSpec(
        d=int(cfg.get("d")),
        sigma=float(cfg.get("sigma")),
        tau=float(cfg.get("tau")),
        seed=int(cfg.get("ring_seed")),
    )
    n = int(cfg.get("n"))
    seed = int(cfg.get("seed"))
    k = int(cfg.get("k"))
    epsilons = cfg.get("epsilons")
    if epsilons is None:
        epsilons = list(np.linspace(0.01, 0.1, 10))
    epsilons = sorted({float(e) for e in epsilons}, reverse=True)
    if not epsilons:
        raise ConfigError("empty epsilon grid")
    data = sample_embedded_ring(spec, n, seed)
    digest = _hash_data(data)

    timings, failed, rows = {}, [], []
    header = ["method", "d", "sigma", "n", "epsilon", "h", "mode",
              "re", "im", "modulus", "phase"]

    result = sweep(data, CostSpec(), epsilons, k=k, variant="stationary", seed=seed)
    for entry in result.entries:
        tag = f"blur_eps{_fmt_eps(entry.epsilon)}"
        timings[tag] = entry.seconds
        if entry.error is not None:
            failed.append({"epsilon": entry.epsilon, "error": entry.error})
            continue
        for m, lam in enumerate(entry.spectrum.values, start=1):
            rows.append(
                ["blur", spec.d, spec.sigma, n, entry.epsilon, "",
                 m, lam.real, lam.imag, abs(lam), float(np.angle(lam))]
            )

    for eps in epsilons:
        h = 2.0 * float(np.sqrt(eps))
        tag = f"ulam_eps{_fmt_eps(eps)}"
        t0 = time.perf_counter()
        try:
            ulam = build_ulam(data, h)
            # dense path: histogram operators are small and often defective
            uspec = top_eigenpairs(ulam, k=k, seed=seed, method="dense")
        except (EigensolverError, NonConvergenceError) as exc:
            failed.append({"epsilon": eps, "error": f"{type(exc).__name__}: {exc}"})
            timings[tag] = time.perf_counter() - t0
            continue
        timings[tag] = time.perf_counter() - t0
        for m, lam in enumerate(uspec.values, start=1):
            rows.append(
                ["ulam", spec.d, spec.sigma, n, eps, h,
                 m, lam.real, lam.imag, abs(lam), float(np.angle(lam))]
            )

    _write_rows(out / "eigenvalues.csv", header, rows)
    outputs = {"eigenvalues": "eigenvalues.csv"}
    summary = {"failed": failed, "n": n, "d": spec.d}
    code = EXIT_SOLVER if failed else EXIT_OK
    return digest, outputs, timings, summary, code


def _cmd_counterexample(cfg: ExperimentConfig, out: Path):
    ns = [int(v) for v in cfg.get("ns")]
    if not ns:
        raise ConfigError("empty sample-count grid")
    epsilon = float(cfg.get("epsilon"))
    n_mc = int(cfg.get("n_mc"))
    seed = int(cfg.get("seed"))
    do_double = bool(cfg.get("double"))

    rows = []
    singles, doubles = [], []
    t0 = time.perf_counter()
    for i, n in enumerate(ns):
        res = single_blur_counterexample(n, epsilon, seed=(seed, i))
        singles.append(res.l2_error)
        rows.append(["single", n, epsilon, res.l2_error, res.sigma_const])
        if do_double:
            val = double_blur_error(n, epsilon, n_mc=n_mc, seed=(seed, i, 1))
            doubles.append(val)
            rows.append(["double", n, epsilon, val, ""])
    elapsed = time.perf_counter() - t0

    _write_rows(out / "counterexample.csv",
                ["kind", "n", "epsilon", "value", "sigma_const"], rows)
    singles = np.asarray(singles)
    summary = {
        "single_mean": float(singles.mean()),
        "single_cv": float(singles.std() / singles.mean()),
    }
    if do_double and len(ns) >= 3:
        fit = fit_loglog_slope(ns, doubles)
        summary["double_slope"] = {
            "slope": fit.slope,
            "ci": [fit.ci_low, fit.ci_high],
        }
    outputs = {"counterexample": "counterexample.csv"}
    return None, outputs, {"total": elapsed}, summary, EXIT_OK


def _cmd_synth(cfg: ExperimentConfig, out: Path):
    system = {
        "kind": cfg.get("system"),
        "d": cfg.get("d"),
        "sigma": cfg.get("sigma"),
        "shifts": cfg.get("shifts"),
        "weights": cfg.get("weights"),
        "tau": cfg.get("tau"),
        "ring_seed": cfg.get("ring_seed"),
    }
    spec = _system_spec(system)
    n = int(cfg.get("n"))
    seed = int(cfg.get("seed"))
    t0 = time.perf_counter()
    if isinstance(spec, TorusShiftSpec):
        data = sample_torus_shift(spec, n, seed)
    else:
        data = sample_embedded_ring(spec, n, seed)
    out_name = cfg.get("out")
    path = out / out_name
    data.to_csv(path)
    elapsed = time.perf_counter() - t0
    outputs = {"data": out_name}
    summary = {"n": data.n, "dim": data.d, "sha256": sha256_file(path)}
    return None, outputs, {"total": elapsed}, summary, EXIT_OK


_COMMANDS = {
    "sweep": _cmd_sweep,
    "embed": _cmd_embed,
    "extend": _cmd_extend,
    "converge": _cmd_converge,
    "compare-ulam": _cmd_compare_ulam,
    "counterexample": _cmd_counterexample,
    "synth": _cmd_synth,
}


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    given = vars(args)

    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(given.get("out_dir") or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO

    digest, outputs, timings, summary, code = None, {}, {}, {}, EXIT_OK
    try:
        with _thread_limit(given.get("threads")):
            digest, outputs, timings, summary, code = _COMMANDS[cfg.command](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NonConvergenceError, EigensolverError) as exc:
        # partial outputs stay on disk; record the failure in the artifact
        summary = {"error": f"{type(exc).__name__}: {exc}"}
        code = EXIT_SOLVER
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO

    artifact = RunArtifact(
        command=cfg.command,
        config=cfg.to_mapping(),
        input_sha256=digest,
        outputs=outputs,
        timings=timings,
        summary=summary,
    )
    try:
        artifact.write(out / "artifact.json")
    except OSError as exc:
        print(f"error: cannot write artifact: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
