"""Verification routines shared by the command line and the test suite.

Each function returns a plain ``dict`` report with a list of named checks,
each carrying its measured value, threshold and verdict.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import analysis, rng
from .limit_law import cauchy_transform, cauchy_transform_quad, cst_residual, pde_residual
from .mc_harness import SimConfig, run_ensemble, sample_spectra
from .spectra import eig_gradient, eig_hessian_diag, second_derivative_sum

PDE_C = (0.5, 1.0, 2.0)
PDE_H = (0.55, 0.75, 0.9)
PDE_T = (0.5, 1.0, 2.0)
PDE_Z = (0.5 + 0.8j, 1 + 1j, 2 + 0.5j, -1 + 1j, 3 + 2j, 0.1 + 0.3j, 5 + 0.2j, 2j)

TRANSFORM_C = (0.25, 0.5, 1.0, 2.0, 4.0)
TRANSFORM_H = (0.55, 0.75, 0.9)
TRANSFORM_T = (0.5, 1.0, 2.0)


def check(name: str, value: float, threshold: float, passed: bool = None) -> dict:
    value = float(value)
    if passed is None:
        passed = value <= threshold
    return {"name": name, "value": value, "threshold": float(threshold), "passed": bool(passed)}


def report(command: str, checks: list, **data) -> dict:
    return {
        "command": command,
        "status": "pass" if all(c["passed"] for c in checks) else "fail",
        "checks": checks,
        **data,
    }


def transform_grid_z(count: int = 20) -> np.ndarray:
    """Fixed upper half-plane points mixing near-support and far-field locations."""
    k = np.arange(count)
    return (-1.0 + 7.0 * k / (count - 1)) + 1j * (0.05 + 3.0 * ((k * 7) % count) / count)


def random_matrix(seed: int, trial: int, n_max: int = 6, p_max: int = 8) -> np.ndarray:
    """An O(1)-scaled ``p x n`` matrix with ``2 <= n <= n_max`` and ``n <= p <= p_max``."""
    u = rng.uniforms(seed, 2 * trial, 2)
    n = 2 + int(u[0] * (n_max - 1))
    p = n + int(u[1] * (p_max - n + 1))
    return rng.normals(seed, 2 * trial + 1, p * n).reshape(p, n)


def _eigs(N: np.ndarray) -> np.ndarray:
    return -np.sort(-np.linalg.eigvalsh(N.T @ N))


def gradient_errors(N: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Max-norm relative error of each eigenvalue gradient against central differences."""
    p, n = N.shape
    fd = np.empty((n, p, n))
    for k in range(p):
        for l in range(n):
            E = np.zeros_like(N)
            E[k, l] = h
            fd[:, k, l] = (_eigs(N + E) - _eigs(N - E)) / (2 * h)
    errs = []
    for i in range(n):
        g = eig_gradient(N, i).grad
        errs.append(np.abs(g - fd[i]).max() / np.abs(g).max())
    return np.asarray(errs)


def hessian_errors(N: np.ndarray, h: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Relative error of the entry sum against the trace formula, and absolute
    error of the diagonal against second-order differences, per eigenvalue."""
    p, n = N.shape
    fd = np.empty((n, p, n))
    base = _eigs(N)
    for k in range(p):
        for l in range(n):
            E = np.zeros_like(N)
            E[k, l] = h
            fd[:, k, l] = (_eigs(N + E) - 2 * base + _eigs(N - E)) / h**2
    sum_err, fd_err = [], []
    for i in range(n):
        hess = eig_hessian_diag(N, i)
        closed = second_derivative_sum(N, i)
        sum_err.append(abs(hess.sum() - closed) / abs(closed))
        fd_err.append(np.abs(hess - fd[i]).max())
    return np.asarray(sum_err), np.asarray(fd_err)


def verify_gradients(
    trials: int = 20, hessian_trials: int = 100, seed: int = 7,
    tol: float = 1e-6, sum_tol: float = 1e-9, fd_tol: float = 1e-3,
) -> dict:
    grad = [gradient_errors(random_matrix(seed, j)).max() for j in range(trials)]
    sums, fds = [], []
    for j in range(hessian_trials):
        s, f = hessian_errors(random_matrix(seed, trials + j))
        sums.append(s.max())
        fds.append(f.max())
    results = []
    if grad:
        results.append(check("gradient_max_relative_error", max(grad), tol))
    if sums:
        results.append(check("hessian_sum_max_relative_error", max(sums), sum_tol))
        results.append(check("hessian_fd_max_abs_error", max(fds), fd_tol))
    return report(
        "verify-gradients",
        results,
        trials=trials,
        hessian_trials=hessian_trials,
        rows=[{"trial": j, "gradient_error": float(e)} for j, e in enumerate(grad)],
    )


def verify_transform(tol: float = 1e-8) -> dict:
    rows = []
    for c in TRANSFORM_C:
        for H in TRANSFORM_H:
            for t in TRANSFORM_T:
                z = transform_grid_z()
                closed = cauchy_transform(c, H, t, z)
                quad = np.array([cauchy_transform_quad(c, H, t, zz) for zz in z])
                rows.append({"c": c, "H": H, "t": t, "max_abs_error": float(np.abs(closed - quad).max())})
    worst = max(r["max_abs_error"] for r in rows)
    return report("verify-transform", [check("transform_vs_quadrature", worst, tol)], rows=rows)


def verify_pde(h: float = 1e-4, tol: float = 1e-5) -> dict:
    rows = []
    for c in PDE_C:
        for H in PDE_H:
            for t in PDE_T:
                for z in PDE_Z:
                    r = pde_residual(c, H, t, z, h, h)
                    rows.append({"c": c, "H": H, "t": t, "z_re": z.real, "z_im": z.imag, "residual": abs(r)})
    worst = max(r["residual"] for r in rows)
    return report("verify-pde", [check("pde_max_residual", worst, tol)], rows=rows)


def verify_cst(
    c: Sequence[float] = (2.0,), H: Sequence[float] = (0.8,),
    t: Sequence[float] = (0.5, 1.0), z: Sequence[complex] = (1j, 1 + 1j), tol: float = 1e-4,
) -> dict:
    rows = []
    for cc in c:
        for hh in H:
            for tt in t:
                for zz in z:
                    r = cst_residual(cc, hh, tt, complex(zz))
                    rows.append({"c": cc, "H": hh, "t": tt, "z_re": complex(zz).real,
                                 "z_im": complex(zz).imag, "residual": abs(r)})
    worst = max(r["residual"] for r in rows)
    return report("verify-cst", [check("cst_max_residual", worst, tol)], rows=rows)


def self_similarity_ks(n: int, p: int, H: float, t: float, replicas: int, seed: int, workers: int = 1) -> float:
    """Two-sample KS between pooled eigenvalues of ``X(t)`` and ``t^2H X(1)``.

    The two samples come from independent ensembles with master seeds
    ``seed`` and ``seed + 1``.
    """
    def at(time: float, master: int) -> np.ndarray:
        cfg = SimConfig(n=n, p=p, H=H, T=time, m=1, replicas=replicas, seed=master, fbm_method="cholesky")
        return sample_spectra(cfg, [time], workers)[:, 0, :]

    emp_t = analysis.empirical_measure(at(t, seed))
    emp_1 = analysis.empirical_measure(t ** (2 * H) * at(1.0, seed + 1))
    return analysis.ks_distance(emp_t, emp_1)


def verify_limit(
    cfg: SimConfig, times: Sequence[float], ks_max: float = 0.06,
    compare_n: int = 25, compare_replicas: int = 20, workers: int = 1,
) -> tuple[dict, object]:
    """Mean KS to the dilated law at the requested grid times, and its decrease in ``n``."""
    big = run_ensemble(cfg, workers)
    idx = [cfg.grid.index_of(t) - 1 for t in times]
    ks_big = [big.distances["ks_mean"][i] for i in idx]
    checks = [check(f"ks_mean_t={t:g}", v, ks_max) for t, v in zip(times, ks_big)]
    rows = [{"time": float(t), "ks_mean": v, "ks_se": big.distances["ks_se"][i],
             "w1_mean": big.distances["w1_mean"][i]} for t, v, i in zip(times, ks_big, idx)]
    if compare_n:
        small_cfg = SimConfig(
            n=compare_n, p=max(1, round(cfg.c * compare_n)), H=cfg.H, T=cfg.T, m=cfg.m,
            replicas=compare_replicas, seed=cfg.seed, fbm_method=cfg.fbm_method,
            scale=cfg.scale, solver=cfg.solver, lags=cfg.lags,
        )
        small = run_ensemble(small_cfg, workers)
        ks_small = [small.distances["ks_mean"][i] for i in idx]
        for row, v in zip(rows, ks_small):
            row[f"ks_mean_n{compare_n}"] = v
        checks.append(check(
            f"ks_decreases_from_n{compare_n}", float(np.mean(ks_big)), float(np.mean(ks_small)),
            passed=all(b < s for b, s in zip(ks_big, ks_small)),
        ))
    return report("verify-limit", checks, c=cfg.c, rows=rows), big
