"""Derivatives of Wishart eigenvalues with respect to the entries of ``N``.

For ``X = N^T N = U diag(lam) U^T`` with a simple spectrum, eigenvalue ``i``
is a smooth function ``Phi_i`` of the ``p x n`` entries of ``N``. This module
evaluates its gradient, the diagonal of its Hessian, the closed-form trace of
that Hessian, and the drift of the eigenvalue equation driven by fBm.

Eigenvalue indices are 0-based and refer to the descending order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError, UsageError
from .fbm import check_hurst
from .matrix_process import EigenDecomposition, SpectrumPath, build_wishart, eigh_sorted

#: Relative gap (to the largest eigenvalue) below which a spectrum counts as degenerate.
SIMPLE_SPECTRUM_RTOL = 1e-8


@dataclass(frozen=True)
class EigGradient:
    index: int
    grad: np.ndarray


@dataclass(frozen=True)
class DriftVector:
    values: np.ndarray
    p: int
    H: float
    s: float


@dataclass(frozen=True)
class MeanDriftComparison:
    """Monte Carlo mean of ``lam_i(t)`` against the drift-only prediction."""

    time: float
    initial: np.ndarray
    predicted: np.ndarray
    observed: np.ndarray
    standard_error: np.ndarray

    @property
    def z_scores(self) -> np.ndarray:
        return (self.observed - self.predicted) / self.standard_error


def _check_simple(lam: np.ndarray) -> None:
    if lam.size < 2:
        return
    gaps = lam[:-1] - lam[1:]
    j = int(np.argmin(gaps))
    if not gaps[j] > SIMPLE_SPECTRUM_RTOL * abs(lam[0]):
        raise PreconditionError(
            f"eigenvalues {j} and {j + 1} collide (gap {gaps[j]:.3e}); "
            "derivatives require a simple spectrum"
        )


def _decompose(N, solver: str) -> tuple[np.ndarray, EigenDecomposition]:
    N = np.atleast_2d(np.asarray(N, dtype=float))
    dec = eigh_sorted(build_wishart(N).X, solver)
    _check_simple(dec.eigenvalues)
    return N, dec


def _check_index(i: int, n: int) -> int:
    if not 0 <= i < n:
        raise UsageError(f"eigenvalue index {i} out of range for n={n}")
    return int(i)


def interaction(lam) -> np.ndarray:
    """``sum_{j != i} (lam_i + lam_j) / (lam_i - lam_j)`` for every ``i``.

    Works on the last axis, so a path of spectra ``(m + 1, n)`` is accepted.
    """
    lam = np.asarray(lam, dtype=float)
    diff = lam[..., :, None] - lam[..., None, :]
    total = lam[..., :, None] + lam[..., None, :]
    n = lam.shape[-1]
    off = ~np.eye(n, dtype=bool)
    if np.any(diff[..., off] == 0.0):
        raise PreconditionError("tied eigenvalues: the interaction term is undefined")
    ratio = np.where(off, total / np.where(off, diff, 1.0), 0.0)
    return ratio.sum(axis=-1)


def eig_gradient(N, i: int, solver: str = "jacobi") -> EigGradient:
    """Gradient of eigenvalue ``i`` of ``N^T N`` with respect to ``N``.

    ``grad[k, h] = 2 U[h, i] * sum_r U[r, i] N[k, r]``.
    """
    N, dec = _decompose(N, solver)
    i = _check_index(i, N.shape[1])
    u = dec.eigenvectors[:, i]
    return EigGradient(index=i, grad=2.0 * np.outer(N @ u, u))


def eig_hessian_diag(N, i: int, solver: str = "jacobi") -> np.ndarray:
    """All diagonal second derivatives of eigenvalue ``i``, as a ``p x n`` array."""
    N, dec = _decompose(N, solver)
    n = N.shape[1]
    i = _check_index(i, n)
    lam, U = dec.eigenvalues, dec.eigenvectors
    W = N @ U  # W[k, j] = sum_l U[l, j] N[k, l]
    out = 2.0 * np.broadcast_to(U[:, i] ** 2, N.shape).copy()
    for j in range(n):
        if j == i:
            continue
        cross = U[None, :, i] * W[:, j, None] + U[None, :, j] * W[:, i, None]
        out += 2.0 * cross**2 / (lam[i] - lam[j])
    return out


def eig_second_diag(N, i: int, k: int, h: int, solver: str = "jacobi") -> float:
    """Second derivative of eigenvalue ``i`` with respect to ``N[k, h]``."""
    hess = eig_hessian_diag(N, i, solver)
    if not (0 <= k < hess.shape[0] and 0 <= h < hess.shape[1]):
        raise UsageError(f"entry ({k}, {h}) out of range for shape {hess.shape}")
    return float(hess[k, h])


def second_derivative_sum(N, i: int, solver: str = "jacobi") -> float:
    """Trace of the Hessian of eigenvalue ``i``: ``2 (p + sum_{j!=i} (l_i+l_j)/(l_i-l_j))``."""
    N, dec = _decompose(N, solver)
    i = _check_index(i, N.shape[1])
    return float(2.0 * (N.shape[0] + interaction(dec.eigenvalues)[i]))


def drift(lam, p: int, H: float, s: float) -> DriftVector:
    """Drift ``2H (p + sum_{j!=i} (l_i+l_j)/(l_i-l_j)) s^(2H-1)`` of each eigenvalue."""
    H = check_hurst(H)
    if not s > 0:
        raise DomainError(f"drift is defined for s > 0, got {s}")
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1:
        raise UsageError("expected a single spectrum")
    if lam.size > 1 and not np.all(lam[:-1] > lam[1:]):
        raise PreconditionError("eigenvalues must be strictly descending")
    values = 2.0 * H * (p + interaction(lam)) * s ** (2.0 * H - 1.0)
    return DriftVector(values=values, p=int(p), H=H, s=float(s))


def drift_integral(path: SpectrumPath, H: float, k: int) -> np.ndarray:
    """Integral of the drift over ``[0, t_k]`` along one spectrum path.

    Cell ``[t_j, t_{j+1}]`` averages the endpoint drifts against the exact
    weight ``t_{j+1}^{2H} - t_j^{2H}`` of ``2H s^(2H-1)``; the first cell uses
    the right endpoint only, since the drift is undefined at a tied start.
    """
    lam = path.eigenvalues[1 : k + 1]
    if lam.shape[1] > 1 and not np.all(lam[:, :-1] > lam[:, 1:]):
        raise PreconditionError("spectrum path has tied eigenvalues at a positive time")
    core = path.p + interaction(lam)
    if path.scaled:
        core = core / path.n
    w = path.grid.times[: k + 1] ** (2.0 * H)
    total = w[1] * core[0]
    if k > 1:
        dw = np.diff(w[1:])
        total = total + np.sum(0.5 * dw[:, None] * (core[:-1] + core[1:]), axis=0)
    return total


def _ensemble_quadrature(ensemble: Sequence[SpectrumPath], H: float, t: float):
    if not ensemble:
        raise UsageError("empty ensemble")
    grid = ensemble[0].grid
    if any(e.grid != grid for e in ensemble):
        raise UsageError("ensemble members must share a grid")
    k = grid.index_of(t)
    if k == 0:
        raise UsageError("mean drift requires t > 0")
    Q = np.stack([drift_integral(e, H, k) for e in ensemble])
    L = np.stack([e.eigenvalues[k] for e in ensemble])
    return Q, L


def mean_drift_integral(lambda0, p: int, H: float, ensemble: Sequence[SpectrumPath], t: float):
    """Predicted ``E lam_i(t)``: ``lam_i(0)`` plus the ensemble-mean drift integral.

    The stochastic integral in the eigenvalue equation has mean zero, so the
    drift alone predicts the mean.
    """
    H = check_hurst(H)
    if any(e.p != p for e in ensemble):
        raise UsageError("ensemble was simulated with a different p")
    Q, _ = _ensemble_quadrature(ensemble, H, t)
    return np.asarray(lambda0, dtype=float) + Q.mean(axis=0)


def mean_drift_comparison(ensemble: Sequence[SpectrumPath], H: float, t: float) -> MeanDriftComparison:
    """Compare the Monte Carlo mean of ``lam(t)`` with :func:`mean_drift_integral`.

    The standard error is that of the per-path difference between ``lam_i(t)``
    and its drift integral, whose expectation is ``lam_i(0)``.
    """
    H = check_hurst(H)
    Q, L = _ensemble_quadrature(ensemble, H, t)
    lam0 = ensemble[0].eigenvalues[0]
    resid = L - Q
    se = resid.std(axis=0, ddof=1) / np.sqrt(len(ensemble))
    return MeanDriftComparison(
        time=float(t),
        initial=lam0.copy(),
        predicted=lam0 + Q.mean(axis=0),
        observed=L.mean(axis=0),
        standard_error=se,
    )
