"""Matrix fractional Brownian motion, fractional Wishart snapshots and ordered spectra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import rng
from .errors import DomainError, UsageError
from .fbm import TimeGrid, check_hurst, normals_per_path, paths_from_normals
from .jacobi import jacobi_eigh

SOLVERS = ("jacobi", "lapack")

#: Gaps below this trigger a warning that a crossing may be under-resolved.
GAP_WARNING = 1e-12


@dataclass(frozen=True)
class MatrixFbmPath:
    """A ``p x n`` array of independent fBm paths.

    ``values[k, h, j]`` is entry ``(k, h)`` at time ``t_j``.
    """

    grid: TimeGrid
    values: np.ndarray
    hurst: float

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def at(self, j: int) -> np.ndarray:
        """The matrix ``N(t_j)``."""
        return self.values[:, :, j]

    def snapshots(self) -> np.ndarray:
        """All matrices ``N(t_j)`` stacked along the first axis, shape ``(m + 1, p, n)``."""
        return np.moveaxis(self.values, -1, 0)


@dataclass(frozen=True)
class WishartSnapshot:
    X: np.ndarray
    scaled: bool


@dataclass(frozen=True)
class EigenDecomposition:
    """Descending eigenvalues and matching sign-normalised orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class SpectrumPath:
    """Row ``j`` of ``eigenvalues`` holds the descending spectrum at ``t_j``."""

    grid: TimeGrid
    eigenvalues: np.ndarray
    scaled: bool
    p: int
    frames: Optional[tuple] = None

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[1]


def sample_matrix_fbm(
    p: int,
    n: int,
    grid: TimeGrid,
    H: float,
    seed: int,
    method: str = "circulant",
    offset=None,
) -> MatrixFbmPath:
    """Draw a ``p x n`` matrix fBm from the random stream keyed by ``seed``.

    Entry ``(k, h)`` is path ``k * n + h`` of the stream. A deterministic
    ``offset`` matrix, if given, is added at every time (so ``N(0) = offset``).
    """
    H = check_hurst(H)
    if p < 1 or n < 1:
        raise DomainError("matrix dimensions must be positive")
    width = normals_per_path(grid.m, method)
    z = rng.normals(seed, 0, p * n * width).reshape(p, n, width)
    values = paths_from_normals(grid, H, z, method)
    if offset is not None:
        offset = np.asarray(offset, dtype=float)
        if offset.shape != (p, n):
            raise UsageError(f"offset must have shape {(p, n)}, got {offset.shape}")
        values = values + offset[:, :, None]
    return MatrixFbmPath(grid=grid, values=values, hurst=H)


def build_wishart(N, scaled: bool = False) -> WishartSnapshot:
    """``X = N^T N``, divided by ``n`` when ``scaled``."""
    N = np.atleast_2d(np.asarray(N, dtype=float))
    X = N.T @ N
    if scaled:
        X = X / N.shape[1]
    return WishartSnapshot(X=X, scaled=scaled)


def _normalise_signs(V: np.ndarray) -> np.ndarray:
    # argmax returns the first maximiser, so ties go to the smallest row index
    idx = np.argmax(np.abs(V), axis=-2)
    pivot = np.take_along_axis(V, idx[..., None, :], axis=-2)
    return V * np.where(pivot < 0, -1.0, 1.0)


def eigh_sorted(X, solver: str = "jacobi") -> EigenDecomposition:
    """Eigen-decomposition with descending eigenvalues.

    Each eigenvector column is flipped so that its largest-magnitude entry is
    positive, which makes the output deterministic.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DomainError("expected a square matrix")
    if not np.all(np.isfinite(X)):
        raise DomainError("matrix has non-finite entries")
    X = 0.5 * (X + X.T)
    if solver == "jacobi":
        w, V = jacobi_eigh(X)
    elif solver == "lapack":
        w, V = np.linalg.eigh(X)
    else:
        raise UsageError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=_normalise_signs(V[:, order]))


def eigvals_sorted(X, solver: str = "lapack") -> np.ndarray:
    """Descending eigenvalues of a stack of symmetric matrices ``(..., n, n)``."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise DomainError("matrix has non-finite entries")
    X = 0.5 * (X + np.swapaxes(X, -1, -2))
    if solver == "jacobi":
        w, _ = jacobi_eigh(X, vectors=False)
    elif solver == "lapack":
        w = np.linalg.eigvalsh(X)
    else:
        raise UsageError(f"unknown solver {solver!r}; expected one of {SOLVERS}")
    return -np.sort(-w, axis=-1)


def wishart_path(M: MatrixFbmPath, scaled: bool = False) -> np.ndarray:
    """Stack of ``X(t_j)``, shape ``(m + 1, n, n)``."""
    N = M.snapshots()
    X = np.swapaxes(N, -1, -2) @ N
    if scaled:
        X = X / M.n
    return X


def spectrum_path(
    M: MatrixFbmPath, scaled: bool = False, solver: str = "lapack", frames: bool = False
) -> SpectrumPath:
    """Ordered eigenvalue trajectories of ``X = N^T N`` (or ``X / n``).

    Eigenvalues are matched across time by sorting. A warning is emitted when
    a gap below ``GAP_WARNING`` appears at a positive time, since a crossing
    could then be hidden between grid points.
    """
    X = wishart_path(M, scaled)
    if frames:
        decomps = tuple(eigh_sorted(x, solver) for x in X)
        lam = np.stack([d.eigenvalues for d in decomps])
    else:
        decomps = None
        lam = eigvals_sorted(X, solver)
    if M.n > 1:
        # for p < n the trailing n - p eigenvalues vanish identically
        gaps = (lam[1:, :-1] - lam[1:, 1:])[:, : M.p]
        if gaps.size and gaps.min() < GAP_WARNING:
            warnings.warn(
                f"eigenvalue gap {gaps.min():.3e} below {GAP_WARNING:g}; "
                "sorting may hide a crossing",
                RuntimeWarning,
                stacklevel=2,
            )
    return SpectrumPath(grid=M.grid, eigenvalues=lam, scaled=scaled, p=M.p, frames=decomps)


def spectra_from_stack(lams: Sequence[SpectrumPath]) -> np.ndarray:
    """Stack the eigenvalue arrays of several paths, shape ``(replicas, m + 1, n)``."""
    if not lams:
        raise UsageError("empty ensemble")
    grid = lams[0].grid
    if any(s.grid != grid for s in lams):
        raise UsageError("ensemble members must share a grid")
    return np.stack([s.eigenvalues for s in lams])
