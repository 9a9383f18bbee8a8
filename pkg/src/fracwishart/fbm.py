"""Exact sampling of fractional Brownian motion on uniform time grids.

Two samplers are provided:

* ``"cholesky"`` factors the covariance of ``(b(t_1), ..., b(t_m))``. It is
  exact for any grid size and serves as the reference.
* ``"circulant"`` embeds the increment autocovariance in a circulant matrix of
  size ``2m`` and diagonalises it with the FFT (Davies-Harte). It needs ``m``
  to be a power of two.

Both consume standard normals from :mod:`fracwishart.rng`, so a path is a
deterministic function of ``(grid, H, seed, method, stream)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import rng
from .errors import CirculantEmbeddingError, DomainError, UsageError

METHODS = ("cholesky", "circulant")

#: Relative tolerance below which negative circulant eigenvalues are clipped.
CIRCULANT_EPS = 1e-10

#: Largest grid the Cholesky sampler accepts (its factor is stored densely).
CHOLESKY_MAX_STEPS = 4096


def check_hurst(H: float, long_memory: bool = False) -> float:
    """Validate a Hurst parameter; ``long_memory=True`` restricts to (1/2, 1)."""
    H = float(H)
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst parameter must lie in (0, 1), got {H}")
    if long_memory and not 0.5 < H < 1.0:
        raise DomainError(f"this check assumes H in (1/2, 1), got {H}")
    return H


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k T / m`` for ``k = 0..m``."""

    T: float
    m: int

    def __post_init__(self):
        if not self.T > 0:
            raise DomainError(f"horizon T must be positive, got {self.T}")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"number of steps m must be a positive integer, got {self.m}")
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "m", int(self.m))

    @property
    def dt(self) -> float:
        return self.T / self.m

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.dt

    def index_of(self, t: float) -> int:
        """Index ``k`` with ``t_k == t`` (up to 1e-9 relative); raises otherwise."""
        k = int(round(t / self.dt))
        if k < 0 or k > self.m or abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise UsageError(f"time {t} is not a point of the grid {self}")
        return k


@dataclass(frozen=True)
class FbmPath:
    grid: TimeGrid
    values: np.ndarray
    hurst: float


def fbm_covariance(s, t, H: float):
    """Covariance ``E[b(s) b(t)] = (t^2H + s^2H - |t-s|^2H) / 2``."""
    H = check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fBm covariance is defined for non-negative times only")
    two_h = 2.0 * H
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def increment_autocov(k, dt: float, H: float):
    """Autocovariance at lag ``k`` of increments of spacing ``dt``."""
    H = check_hurst(H)
    k = np.abs(np.asarray(k, dtype=float))
    if not dt > 0:
        raise DomainError(f"spacing must be positive, got {dt}")
    two_h = 2.0 * H
    out = 0.5 * dt**two_h * (
        np.abs(k + 1.0) ** two_h - 2.0 * k**two_h + np.abs(k - 1.0) ** two_h
    )
    return out if out.ndim else float(out)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=32)
def cholesky_factor(grid: TimeGrid, H: float) -> np.ndarray:
    """Lower Cholesky factor of the covariance of ``b`` at ``t_1..t_m``."""
    if grid.m > CHOLESKY_MAX_STEPS:
        raise UsageError(
            f"Cholesky sampler supports m <= {CHOLESKY_MAX_STEPS}; use 'circulant'"
        )
    times = grid.times[1:]
    cov = fbm_covariance(times[:, None], times[None, :], H)
    return _readonly(np.linalg.cholesky(cov))


@lru_cache(maxsize=32)
def circulant_sqrt_eigenvalues(grid: TimeGrid, H: float) -> np.ndarray:
    """Square roots of the ``m + 1`` distinct eigenvalues of the 2m embedding."""
    m = grid.m
    if m & (m - 1):
        raise UsageError(f"circulant sampler requires m to be a power of two, got {m}")
    lags = np.arange(m + 1)
    gamma = increment_autocov(lags, grid.dt, H)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.rfft(row).real
    floor = -CIRCULANT_EPS * eig.max()
    if eig.min() < floor:
        raise CirculantEmbeddingError(
            f"circulant embedding eigenvalue {eig.min():.3e} below {floor:.3e} "
            f"(H={H}, m={m}); use the cholesky sampler"
        )
    return _readonly(np.sqrt(np.clip(eig, 0.0, None)))


def normals_per_path(m: int, method: str) -> int:
    """Number of standard normals one path consumes."""
    if method == "cholesky":
        return m
    if method == "circulant":
        return 2 * m
    raise UsageError(f"unknown fBm method {method!r}; expected one of {METHODS}")


def paths_from_normals(grid: TimeGrid, H: float, z: np.ndarray, method: str) -> np.ndarray:
    """Map standard normals of shape ``(count, normals_per_path)`` to fBm paths.

    Returns an array of shape ``(count, m + 1)`` whose first column is zero.
    """
    H = check_hurst(H)
    m = grid.m
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != normals_per_path(m, method):
        raise UsageError("normal block has the wrong length for this grid and method")
    out = np.zeros(z.shape[:-1] + (m + 1,))
    if method == "cholesky":
        out[..., 1:] = z @ cholesky_factor(grid, H).T
        return out

    n = 2 * m
    sqrt_eig = circulant_sqrt_eigenvalues(grid, H)
    spec = np.empty(z.shape[:-1] + (m + 1,), dtype=complex)
    spec[..., 0] = z[..., 0]
    spec[..., m] = z[..., 1]
    spec[..., 1:m] = (z[..., 2 : m + 1] + 1j * z[..., m + 1 :]) / np.sqrt(2.0)
    spec *= sqrt_eig * np.sqrt(n)
    increments = np.fft.irfft(spec, n=n, axis=-1)[..., :m]
    out[..., 1:] = np.cumsum(increments, axis=-1)
    return out


def sample_fbm_paths(
    grid: TimeGrid, H: float, seed: int, count: int, method: str = "circulant", stream: int = 0
) -> np.ndarray:
    """``count`` independent paths drawn from one random stream, shape ``(count, m + 1)``.

    Path ``j`` uses the ``j``-th consecutive block of normals in the stream.
    """
    width = normals_per_path(grid.m, method)
    z = rng.normals(seed, stream, count * width).reshape(count, width)
    return paths_from_normals(grid, H, z, method)


def sample_fbm(
    grid: TimeGrid, H: float, seed: int, method: str = "circulant", stream: int = 0
) -> FbmPath:
    """One fBm path on ``grid``; row 0 of :func:`sample_fbm_paths` (up to BLAS round-off for ``cholesky``)."""
    values = sample_fbm_paths(grid, H, seed, 1, method, stream)[0]
    return FbmPath(grid=grid, values=values, hurst=float(H))
