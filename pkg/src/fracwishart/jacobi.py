"""Cyclic Jacobi eigenvalue iteration for stacks of real symmetric matrices.

Rotations are scheduled in round-robin order: each of the ``n - 1`` steps of
a sweep applies ``n // 2`` rotations on disjoint index pairs, which commute
and can be applied to the whole stack with a few array operations.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def round_robin_pairs(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Disjoint pair schedule covering every ``p < q`` exactly once per sweep."""
    players = list(range(n + (n % 2)))
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a < n and b < n:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            rounds.append((np.array(ps), np.array(qs)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(A: np.ndarray) -> np.ndarray:
    off = A * (1.0 - np.eye(A.shape[-1]))
    return np.sqrt(np.sum(off * off, axis=(1, 2)))


def jacobi_eigh(X, tol: float = 1e-14, max_sweeps: int = 64, vectors: bool = True):
    """Eigen-decompose symmetric matrices by cyclic Jacobi rotations.

    Parameters
    ----------
    X : array_like, shape (..., n, n)
        Symmetric input; it is symmetrised as ``(X + X^T) / 2``.
    tol : float
        Stop once the off-diagonal Frobenius mass is at most ``tol * ||X||_F``.
    max_sweeps : int
        Raise :class:`NumericalError` if convergence takes longer.
    vectors : bool
        Accumulate eigenvectors.

    Returns
    -------
    w : ndarray, shape (..., n)
        Eigenvalues in no particular order.
    V : ndarray, shape (..., n, n) or None
        Orthogonal matrix whose column ``i`` pairs with ``w[..., i]``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-1] != X.shape[-2]:
        raise ValueError("expected a stack of square matrices")
    lead = X.shape[:-2]
    n = X.shape[-1]
    A = X.reshape((-1, n, n))
    A = 0.5 * (A + np.swapaxes(A, 1, 2))
    batch = A.shape[0]
    V = np.broadcast_to(np.eye(n), (batch, n, n)).copy() if vectors else None
    target = tol * np.sqrt(np.sum(A * A, axis=(1, 2)))
    rounds = round_robin_pairs(n)

    for _ in range(max_sweeps):
        if np.all(_off_norm(A) <= target):
            break
        for P, Q in rounds:
            apq = A[:, P, Q]
            app = A[:, P, P]
            aqq = A[:, Q, Q]
            abs_apq = 100.0 * np.abs(apq)
            negligible = (np.abs(app) + abs_apq == np.abs(app)) & (
                np.abs(aqq) + abs_apq == np.abs(aqq)
            )
            with np.errstate(divide="ignore", invalid="ignore"):
                theta = (aqq - app) / (2.0 * apq)
                t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(negligible, 0.0, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            new_pp = app - t * apq
            new_qq = aqq + t * apq

            cr, sr = c[:, :, None], s[:, :, None]
            rp, rq = A[:, P, :], A[:, Q, :]
            A[:, P, :] = cr * rp - sr * rq
            A[:, Q, :] = sr * rp + cr * rq
            cc, sc = c[:, None, :], s[:, None, :]
            cp, cq = A[:, :, P], A[:, :, Q]
            A[:, :, P] = cc * cp - sc * cq
            A[:, :, Q] = sc * cp + cc * cq
            A[:, P, P] = new_pp
            A[:, Q, Q] = new_qq
            A[:, P, Q] = 0.0
            A[:, Q, P] = 0.0
            if vectors:
                vp, vq = V[:, :, P], V[:, :, Q]
                V[:, :, P] = cc * vp - sc * vq
                V[:, :, Q] = sc * vp + cc * vq
    excess = _off_norm(A) - target
    if np.any(excess > 0):
        worst = float(np.max(excess))
        raise NumericalError(
            f"Jacobi iteration did not converge in {max_sweeps} sweeps (excess {worst:.3e})"
        )

    w = np.einsum("bii->bi", A).copy().reshape(lead + (n,))
    if vectors:
        return w, V.reshape(lead + (n, n))
    return w, None
