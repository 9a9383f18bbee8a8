"""Reproducible Monte Carlo ensembles of fractional Wishart spectra.

Replica ``r`` draws its matrix fBm from ``child_seed(seed, r)``, so each
replica is a pure function of the configuration and its index. Workers only
change where replicas run: results are gathered in replica order and reduced
with fixed numpy reductions, so summaries do not depend on the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis
from .errors import ConfigurationError, PreconditionError, SummaryFormatError
from .fbm import CHOLESKY_MAX_STEPS, METHODS, TimeGrid
from .matrix_process import SOLVERS, sample_matrix_fbm, spectrum_path, wishart_path
from .rng import child_seed
from .spectra import drift_integral

FORMATS = ("json", "csv")
DISTANCE_COLUMNS = ("time", "ks_mean", "ks_se", "w1_mean", "w1_se")
MAX_REPLICAS = 1 << 32


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines an ensemble.

    ``offsets`` is an optional deterministic ``N(0)`` (``p`` rows of ``n``).
    ``lags`` are the structure-function lags in grid steps; the structure
    function is reported when ``replicas >= 100`` and the lags fit the grid.
    """

    n: int
    p: int
    H: float
    T: float = 1.0
    m: int = 128
    replicas: int = 100
    seed: int = 0
    fbm_method: str = "circulant"
    scale: bool = True
    offsets: Optional[tuple] = None
    solver: str = "lapack"
    lags: tuple = (2, 4, 8, 16, 32)

    def __post_init__(self):
        if self.offsets is not None:
            object.__setattr__(self, "offsets", tuple(tuple(float(v) for v in row) for row in self.offsets))
        object.__setattr__(self, "lags", tuple(int(k) for k in self.lags))

    @property
    def c(self) -> float:
        return self.p / self.n

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.m)

    def validate(self) -> "SimConfig":
        """Reject invalid or oversized configurations before any work starts."""
        problems = []
        for name in ("n", "p", "m", "replicas"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                problems.append(f"{name} must be a positive integer, got {v!r}")
        if not 0.0 < self.H < 1.0:
            problems.append(f"H must lie in (0, 1), got {self.H}")
        if not self.T > 0:
            problems.append(f"T must be positive, got {self.T}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            problems.append(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.replicas > MAX_REPLICAS:
            problems.append(f"at most {MAX_REPLICAS} replicas")
        if self.fbm_method not in METHODS:
            problems.append(f"fbm_method must be one of {METHODS}")
        elif self.fbm_method == "cholesky" and self.m > CHOLESKY_MAX_STEPS:
            problems.append(f"cholesky sampler needs m <= {CHOLESKY_MAX_STEPS}; use circulant")
        elif self.fbm_method == "circulant" and self.m & (self.m - 1):
            problems.append("circulant sampler needs m to be a power of two")
        if self.solver not in SOLVERS:
            problems.append(f"solver must be one of {SOLVERS}")
        if self.offsets is not None and (
            len(self.offsets) != self.p or any(len(row) != self.n for row in self.offsets)
        ):
            problems.append(f"offsets must be {self.p} rows of {self.n} values")
        if problems:
            raise ConfigurationError("; ".join(problems))
        return self

    @property
    def structure_enabled(self) -> bool:
        lags = self.lags
        return (
            self.replicas >= 100 and len(lags) >= 2 and min(lags) >= 1
            and max(lags) >= 10 * min(lags) and max(lags) <= self.m
        )


@dataclass
class EnsembleSummary:
    """Reduced statistics of one ensemble; see :func:`run_ensemble`.

    ``wall_clock`` is informational and excluded from comparison and
    persistence, so summaries of identical configurations compare equal.
    """

    config: SimConfig
    distances: dict
    gaps: Optional[dict]
    structure: Optional[dict]
    mean_drift: Optional[dict]
    seeds: list
    trace_error: float
    wall_clock: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "wall_clock"}
        out["config"] = asdict(self.config)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSummary":
        cfg = dict(d["config"])
        cfg["lags"] = tuple(cfg["lags"])
        return cls(
            config=SimConfig(**cfg),
            distances=d["distances"],
            gaps=d["gaps"],
            structure=d["structure"],
            mean_drift=d["mean_drift"],
            seeds=d["seeds"],
            trace_error=d["trace_error"],
        )


def _replica(cfg: SimConfig, r: int) -> dict:
    grid = cfg.grid
    M = sample_matrix_fbm(cfg.p, cfg.n, grid, cfg.H, child_seed(cfg.seed, r), cfg.fbm_method, cfg.offsets)
    X = wishart_path(M, cfg.scale)
    S = spectrum_path(M, cfg.scale, cfg.solver)
    lam = S.eigenvalues
    trace = np.einsum("jii->j", X)
    trace_err = float(np.max(np.abs(lam.sum(axis=1) - trace) / np.maximum(np.abs(trace), np.finfo(float).tiny)))

    spectral = lam[1:] if cfg.scale else lam[1:] / cfg.n
    atoms = spectral[:, ::-1]
    scales = grid.times[1:] ** (2.0 * cfg.H)
    out = {
        "ks": analysis.ks_batch(atoms, cfg.c, scales),
        "w1": analysis.w1_batch(atoms, cfg.c, scales),
        "trace_error": trace_err,
    }
    if cfg.n >= 2:
        g = analysis.gap_stats(S)
        out["gap"] = (g.global_min, g.time, g.index, g.ties)
    if cfg.structure_enabled:
        out["incr"] = analysis.increment_moments(lam, cfg.lags)[0]
    if cfg.p >= cfg.n:
        try:
            out["drift"] = (drift_integral(S, cfg.H, cfg.m), lam[-1])
        except PreconditionError:
            out["drift"] = None
    return out


def _replica_star(args):
    return _replica(*args)


def _replica_spectra(args) -> np.ndarray:
    cfg, r, idx = args
    M = sample_matrix_fbm(cfg.p, cfg.n, cfg.grid, cfg.H, child_seed(cfg.seed, r), cfg.fbm_method, cfg.offsets)
    return spectrum_path(M, cfg.scale, cfg.solver).eigenvalues[idx]


def _map_replicas(fn, jobs: list, workers: int, progress=None) -> list:
    """Apply ``fn`` to every job, returning results in job order."""
    if workers < 1:
        raise ConfigurationError("workers must be at least 1")
    results = []
    if workers == 1:
        for job in jobs:
            results.append(fn(job))
            if progress:
                progress(len(results))
        return results
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for res in pool.map(fn, jobs, chunksize=chunk):
            results.append(res)
            if progress:
                progress(len(results))
    return results


def sample_spectra(cfg: SimConfig, times, workers: int = 1, progress=None) -> np.ndarray:
    """Descending spectra of every replica at the given grid times, shape ``(replicas, len(times), n)``."""
    cfg.validate()
    idx = [cfg.grid.index_of(t) for t in times]
    jobs = [(cfg, r, idx) for r in range(cfg.replicas)]
    return np.stack(_map_replicas(_replica_spectra, jobs, workers, progress))


def _se(x: np.ndarray) -> np.ndarray:
    if x.shape[0] < 2:
        return np.zeros(x.shape[1:])
    return x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])


def _floats(a) -> list:
    return [float(v) for v in np.asarray(a).ravel()]


def run_ensemble(cfg: SimConfig, workers: int = 1, progress=None) -> EnsembleSummary:
    """Simulate ``cfg.replicas`` independent replicas and reduce their statistics.

    ``progress``, if given, is called with the number of finished replicas.
    """
    cfg.validate()
    start = time.perf_counter()
    jobs = [(cfg, r) for r in range(cfg.replicas)]
    results = _map_replicas(_replica_star, jobs, workers, progress)

    ks = np.stack([res["ks"] for res in results])
    w1 = np.stack([res["w1"] for res in results])
    distances = {
        "c": cfg.c,
        "time": _floats(cfg.grid.times[1:]),
        "ks_mean": _floats(ks.mean(axis=0)),
        "ks_se": _floats(_se(ks)),
        "w1_mean": _floats(w1.mean(axis=0)),
        "w1_se": _floats(_se(w1)),
    }

    gaps = None
    if cfg.n >= 2:
        g = [res["gap"] for res in results]
        gaps = {
            "min_gap": [float(v[0]) for v in g],
            "time": [float(v[1]) for v in g],
            "index": [int(v[2]) for v in g],
            "ties": int(sum(v[3] for v in g)),
            "all_positive": bool(all(v[0] > 0 for v in g)),
        }

    structure = None
    if cfg.structure_enabled:
        values = np.stack([res["incr"] for res in results]).mean(axis=0)
        try:
            fit = analysis.structure_from_values(cfg.lags, values, cfg.grid.dt)
            structure = {
                "lags": _floats(fit.lags),
                "values": _floats(fit.values),
                "slope": fit.slope,
                "intercept": fit.intercept,
            }
        except ValueError:
            structure = None

    mean_drift = None
    drifts = [res.get("drift") for res in results]
    if drifts and all(d is not None for d in drifts):
        Q = np.stack([d[0] for d in drifts])
        L = np.stack([d[1] for d in drifts])
        lam0 = _initial_spectrum(cfg)
        se = _se(L - Q)
        predicted = lam0 + Q.mean(axis=0)
        observed = L.mean(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, (observed - predicted) / se, 0.0)
        mean_drift = {
            "time": cfg.T,
            "initial": _floats(lam0),
            "predicted": _floats(predicted),
            "observed": _floats(observed),
            "standard_error": _floats(se),
            "z": _floats(z),
        }

    return EnsembleSummary(
        config=cfg,
        distances=distances,
        gaps=gaps,
        structure=structure,
        mean_drift=mean_drift,
        seeds=[child_seed(cfg.seed, r) for r in range(cfg.replicas)],
        trace_error=float(max(res["trace_error"] for res in results)),
        wall_clock=time.perf_counter() - start,
    )


def _initial_spectrum(cfg: SimConfig) -> np.ndarray:
    if cfg.offsets is None:
        return np.zeros(cfg.n)
    N0 = np.asarray(cfg.offsets)
    X0 = N0.T @ N0
    if cfg.scale:
        X0 = X0 / cfg.n
    return -np.sort(-np.linalg.eigvalsh(X0))


def _check_format(fmt: str) -> str:
    if fmt not in FORMATS:
        raise ConfigurationError(f"format must be one of {FORMATS}, got {fmt!r}")
    return fmt


def dumps(summary: EnsembleSummary, fmt: str = "json") -> str:
    """Serialise a summary; ``csv`` gives the per-time distance table only."""
    if _check_format(fmt) == "json":
        # repr of a float is its shortest exact decimal form
        return json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n"
    return distance_table_csv(summary.distances)


def distance_table_csv(distances: dict) -> str:
    lines = [",".join(DISTANCE_COLUMNS)]
    for row in zip(*(distances[c] for c in DISTANCE_COLUMNS)):
        lines.append(",".join("%.17g" % v for v in row))
    return "\n".join(lines) + "\n"


def persist(summary: EnsembleSummary, path, fmt: str = "json") -> Path:
    path = Path(path)
    text = dumps(summary, fmt)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write summary to {path}: {exc.strerror or exc}") from exc
    return path


def load(path, fmt: Optional[str] = None):
    """Read a persisted summary.

    JSON gives back an :class:`EnsembleSummary`; CSV gives the distance table
    as a dict of columns.
    """
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    _check_format(fmt)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read summary from {path}: {exc.strerror or exc}") from exc
    if fmt == "csv":
        return parse_distance_csv(text, path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SummaryFormatError(path, exc.msg, line=exc.lineno) from exc
    if not isinstance(data, dict):
        raise SummaryFormatError(path, "top level must be an object")
    for key in ("config", "distances", "gaps", "structure", "mean_drift", "seeds", "trace_error"):
        if key not in data:
            raise SummaryFormatError(path, "missing field", field=key)
    try:
        return EnsembleSummary.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise SummaryFormatError(path, str(exc), field="config") from exc


def parse_distance_csv(text: str, path="<string>") -> dict:
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != DISTANCE_COLUMNS:
        raise SummaryFormatError(path, f"header must be {','.join(DISTANCE_COLUMNS)}", line=1)
    out = {c: [] for c in DISTANCE_COLUMNS}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(DISTANCE_COLUMNS):
            raise SummaryFormatError(path, f"expected {len(DISTANCE_COLUMNS)} fields, got {len(row)}", line=lineno)
        for name, cell in zip(DISTANCE_COLUMNS, row):
            try:
                out[name].append(float(cell))
            except ValueError:
                raise SummaryFormatError(path, f"not a number: {cell!r}", line=lineno, field=name) from None
    return out
