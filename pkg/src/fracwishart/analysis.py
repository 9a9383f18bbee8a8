"""Distances to the limit law and other statistics of simulated spectra."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DomainError, PreconditionError, UsageError
from .fbm import check_hurst
from .limit_law import DilatedMP
from .matrix_process import SpectrumPath

#: Gaps below this are dropped from inverse-moment estimates (and counted).
GAP_FLOOR = 1e-12


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform point measure on ``atoms`` (kept in ascending order)."""

    atoms: np.ndarray

    @property
    def n(self) -> int:
        return self.atoms.size

    def integrate(self, f: Callable) -> float:
        return float(np.mean(f(self.atoms)))

    def mean(self) -> float:
        return float(np.mean(self.atoms))

    def cdf(self, x):
        out = np.searchsorted(self.atoms, np.asarray(x, dtype=float), side="right") / self.n
        return out if np.ndim(out) else float(out)


def empirical_measure(eigs) -> EmpiricalMeasure:
    atoms = np.sort(np.asarray(eigs, dtype=float).ravel())
    if atoms.size == 0:
        raise UsageError("empirical measure needs at least one atom")
    if not np.all(np.isfinite(atoms)):
        raise DomainError("atoms must be finite")
    return EmpiricalMeasure(atoms=atoms)


Target = Union[DilatedMP, EmpiricalMeasure]


def _unit_law(c: float) -> DilatedMP:
    return DilatedMP(c, 0.5, 1.0)


@lru_cache(maxsize=64)
def _unit_quantiles(c: float, n: int) -> np.ndarray:
    """Quantiles of the undilated law at levels ``k / n``, ``k = 0..n``."""
    q = _unit_quantile_levels(n)
    out = _unit_law(c).quantile(q)
    out.setflags(write=False)
    return out


def _unit_quantile_levels(n: int) -> np.ndarray:
    return np.arange(n + 1) / n


def ks_batch(sorted_atoms: np.ndarray, c: float, scales: np.ndarray) -> np.ndarray:
    """KS distance of each row of ``sorted_atoms`` to the law with rate ``c`` dilated by ``scales``.

    Both CDFs are compared at every atom and at zero, on the value and on the
    left limit, which is where the supremum is attained.
    """
    x = np.atleast_2d(sorted_atoms)
    scales = np.asarray(scales, dtype=float).reshape(-1)
    if np.any(scales <= 0):
        raise DomainError("use ks_distance for the point mass at t = 0")
    k, n = x.shape
    law = _unit_law(c)
    pts = np.concatenate([x, np.zeros((k, 1))], axis=1)
    emp_right = np.stack([np.searchsorted(row, p, side="right") for row, p in zip(x, pts)]) / n
    emp_left = np.stack([np.searchsorted(row, p, side="left") for row, p in zip(x, pts)]) / n
    with np.errstate(over="ignore"):
        law_right = law.cdf(pts / scales[:, None])
    law_left = law_right - np.where(pts == 0.0, law.atom, 0.0)
    dist = np.maximum(np.abs(emp_right - law_right), np.abs(emp_left - law_left))
    return dist.max(axis=1)


def w1_batch(sorted_atoms: np.ndarray, c: float, scales: np.ndarray) -> np.ndarray:
    """Exact ``int |F_emp - F_law| dx`` for each row; ``scales`` as in :func:`ks_batch`.

    On each interval where the empirical CDF equals ``k / n`` the integrand
    changes sign only at the law's ``k / n`` quantile, and the law's CDF has
    the closed-form antiderivative ``x F(x) - int_{y <= x} y dmu``.
    """
    x = np.atleast_2d(sorted_atoms)
    tau = np.asarray(scales, dtype=float).reshape(-1)[:, None]
    if np.any(tau <= 0):
        raise DomainError("use wasserstein1 for the point mass at t = 0")
    n = x.shape[1]
    law = _unit_law(c)

    def phi(v):
        # dilated antiderivative: v F1(v / tau) - tau PM1(v / tau), zero for v <= 0
        vp = np.maximum(v, 0.0)
        with np.errstate(over="ignore"):
            u = vp / tau
        return vp * law.cdf(u) - tau * law.partial_moment(u)

    hi = tau * law.edges[1]
    lower = np.concatenate([np.minimum(x[:, :1], 0.0), x], axis=1)
    upper = np.concatenate([x, np.maximum(x[:, -1:], hi)], axis=1)
    level = _unit_quantile_levels(n)[None, :]
    star = np.clip(tau * _unit_quantiles(c, n)[None, :], lower, upper)
    phi_lo, phi_star, phi_hi = phi(lower), phi(star), phi(upper)
    cell = (
        level * (star - lower) - (phi_star - phi_lo)
        + (phi_hi - phi_star) - level * (upper - star)
    )
    return cell.sum(axis=1)


def ks_distance(emp: EmpiricalMeasure, law: Target) -> float:
    """Sup distance between CDFs, atoms (including the law's atom at 0) accounted for."""
    if isinstance(law, EmpiricalMeasure):
        return float(stats.ks_2samp(emp.atoms, law.atoms).statistic)
    if law.scale == 0:
        # point mass at 0 (also when t^2H underflows): compare at each atom and just below it
        right = np.abs(emp.cdf(emp.atoms) - (emp.atoms >= 0))
        left = np.abs(np.arange(emp.n) / emp.n - (emp.atoms > 0))
        zero = abs(emp.cdf(0.0) - 1.0)
        return float(max(right.max(), left.max(), zero))
    return float(ks_batch(emp.atoms, law.c, np.array([law.scale]))[0])


def wasserstein1(emp: EmpiricalMeasure, law: Target) -> float:
    """``int_0^1 |F_emp^{-1}(q) - F_law^{-1}(q)| dq``, evaluated exactly cell by cell."""
    if isinstance(law, EmpiricalMeasure):
        return float(stats.wasserstein_distance(emp.atoms, law.atoms))
    if law.scale == 0:
        return float(np.mean(np.abs(emp.atoms)))
    return float(w1_batch(emp.atoms, law.c, np.array([law.scale]))[0])


@dataclass(frozen=True)
class GapStats:
    """Smallest spacing of consecutive ordered eigenvalues, per time and overall (t > 0)."""

    per_time: np.ndarray
    global_min: float
    time_index: int
    time: float
    index: int
    ties: int

    @property
    def has_tie(self) -> bool:
        return self.ties > 0


def gap_stats(S: SpectrumPath) -> GapStats:
    """Gap statistics of one spectrum path; ``index`` is the pair ``(index, index + 1)``.

    For ``p < n`` only the ``p`` leading eigenvalues can separate, so the
    identically zero tail is excluded.
    """
    lam = S.eigenvalues
    n = lam.shape[1]
    if n < 2:
        raise UsageError("gap statistics need n >= 2")
    gaps = lam[:, :-1] - lam[:, 1:]
    if S.p < n:
        gaps = gaps[:, : S.p]
    per_time = gaps.min(axis=1)
    pos = gaps[1:] if gaps.shape[0] > 1 else gaps
    j, i = np.unravel_index(int(np.argmin(pos)), pos.shape)
    j = j + 1 if gaps.shape[0] > 1 else j
    return GapStats(
        per_time=per_time,
        global_min=float(gaps[j, i]),
        time_index=int(j),
        time=float(S.grid.times[j]),
        index=int(i),
        ties=int(np.count_nonzero(pos <= 0.0)),
    )


@dataclass(frozen=True)
class StructureFunction:
    lags: np.ndarray
    values: np.ndarray
    slope: float
    intercept: float


def _as_array(ensemble) -> np.ndarray:
    if isinstance(ensemble, np.ndarray):
        arr = ensemble
    else:
        ensemble = list(ensemble)
        if ensemble and isinstance(ensemble[0], SpectrumPath):
            arr = np.stack([s.eigenvalues for s in ensemble])
        else:
            arr = np.asarray(ensemble, dtype=float)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise UsageError("expected spectra of shape (replicas, m + 1, n)")
    return arr


def increment_moments(lam: np.ndarray, lags: Sequence[int]) -> np.ndarray:
    """Per-path ``mean_t ((1/n) sum_i |lam_i(t + k) - lam_i(t)|)^4`` for each lag ``k`` (in steps)."""
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 2:
        lam = lam[None]
    out = np.empty(lam.shape[:1] + (len(lags),))
    for j, k in enumerate(lags):
        d = np.abs(lam[:, k:, :] - lam[:, :-k, :]).mean(axis=2)
        out[:, j] = np.mean(d**4, axis=1)
    return out


def _check_lags(lags, m: int) -> list[int]:
    lags = [int(k) for k in lags]
    if len(lags) < 2 or min(lags) < 1:
        raise UsageError("need at least two positive lags")
    if max(lags) < 10 * min(lags):
        raise UsageError("lags must span at least one decade")
    if max(lags) > m:
        raise UsageError(f"lag {max(lags)} exceeds the grid ({m} steps)")
    return sorted(set(lags))


def fit_loglog(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope), float(intercept)


def structure_function(ensemble, lags: Sequence[int], dt: float = None, min_replicas: int = 100) -> StructureFunction:
    """Structure function of eigenvalue increments and its log-log slope.

    ``ensemble`` is a sequence of :class:`SpectrumPath` or an array of shape
    ``(replicas, m + 1, n)``; ``lags`` are in grid steps. All pairs of grid
    points at each lag are pooled.
    """
    if dt is None:
        members = list(ensemble) if not isinstance(ensemble, np.ndarray) else []
        dt = members[0].grid.dt if members and isinstance(members[0], SpectrumPath) else 1.0
    lam = _as_array(ensemble)
    if lam.shape[0] < min_replicas:
        raise UsageError(f"structure function needs at least {min_replicas} replicas, got {lam.shape[0]}")
    lags = _check_lags(lags, lam.shape[1] - 1)
    values = increment_moments(lam, lags).mean(axis=0)
    return structure_from_values(lags, values, dt)


def structure_from_values(lags: Sequence[int], values, dt: float) -> StructureFunction:
    values = np.asarray(values, dtype=float)
    if not np.all(values > 0):
        raise DomainError("structure function is degenerate (zero increments); log-log fit undefined")
    tau = np.asarray(lags, dtype=float) * dt
    slope, intercept = fit_loglog(tau, values)
    return StructureFunction(lags=tau, values=values, slope=slope, intercept=intercept)


@dataclass(frozen=True)
class InverseMomentFit:
    r: float
    times: np.ndarray
    estimates: np.ndarray
    standard_errors: np.ndarray
    slope: float
    intercept: float
    truncated: int


def inverse_moment_scaling(r: float, times: Sequence[float], ensembles: Sequence) -> InverseMomentFit:
    """Fit ``log E|lam_1(s) - lam_2(s)|^(-r)`` against ``log s``.

    ``ensembles[j]`` holds draws of the spectrum at ``times[j]``, shape
    ``(draws, n)`` in descending order.
    """
    r = float(r)
    if not 0 < r < 2:
        raise PreconditionError(f"inverse moment needs 0 < r < 2, got {r}")
    if len(times) != len(ensembles) or len(times) < 2:
        raise UsageError("need one ensemble per time and at least two times")
    est, se, dropped = [], [], 0
    for draws in ensembles:
        draws = np.asarray(draws, dtype=float)
        if draws.ndim != 2 or draws.shape[1] < 2:
            raise UsageError("inverse moment needs n >= 2")
        gap = draws[:, 0] - draws[:, 1]
        keep = gap >= GAP_FLOOR
        dropped += int(np.count_nonzero(~keep))
        v = gap[keep] ** (-r)
        est.append(v.mean())
        se.append(v.std(ddof=1) / np.sqrt(v.size))
    times = np.asarray(times, dtype=float)
    est = np.asarray(est)
    slope, intercept = fit_loglog(times, est)
    return InverseMomentFit(
        r=r, times=times, estimates=est, standard_errors=np.asarray(se),
        slope=slope, intercept=intercept, truncated=dropped,
    )


def joint_logdensity(lam, s: float, H: float, p: int) -> float:
    """Unnormalised log joint density of the ordered eigenvalues of ``X(s)``.

    ``sum_j [(p-n-1)/2 log l_j - l_j / (2 s^2H)] - p n H log s + sum_{j<k} log(l_j - l_k)``.
    """
    H = check_hurst(H)
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    if lam.ndim != 1 or n == 0:
        raise UsageError("expected a non-empty spectrum")
    if p < n:
        raise DomainError(f"the density exists for p >= n, got p={p}, n={n}")
    if not s > 0:
        raise DomainError("time must be positive")
    if not np.all(lam > 0) or not np.all(lam[:-1] > lam[1:]):
        raise DomainError("eigenvalues must be positive and strictly descending")
    diff = lam[:, None] - lam[None, :]
    vdm = np.sum(np.log(diff[np.triu_indices(n, 1)]))
    body = np.sum(0.5 * (p - n - 1) * np.log(lam) - lam / (2.0 * s ** (2.0 * H)))
    return float(body - p * n * H * np.log(s) + vdm)
