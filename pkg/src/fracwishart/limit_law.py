"""Free Poisson (Marchenko-Pastur) law under time dilation, with its Cauchy transform.

``DilatedMP(c, H, t)`` is the image of the free Poisson law with rate ``c``
under ``x -> t^(2H) x``: a density on ``[a tau, b tau]`` with
``a, b = (1 -+ sqrt c)^2`` and ``tau = t^(2H)``, plus an atom of mass
``1 - c`` at zero when ``c < 1``.

The Cauchy transform uses the convention ``G(z) = int mu(dx) / (x - z)``,
so ``Im G > 0`` on the upper half-plane and ``G(z) ~ -1/z`` at infinity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import rng
from .errors import DomainError, NumericalError, UsageError
from .fbm import check_hurst

#: Absolute tolerance of the adaptive quadratures against the law.
QUAD_TOL = 1e-10


def mp_edges(c: float) -> tuple[float, float]:
    """Support edges ``((1 - sqrt c)^2, (1 + sqrt c)^2)`` of the free Poisson density."""
    if not c > 0:
        raise DomainError(f"ratio c must be positive, got {c}")
    r = np.sqrt(c)
    return (1.0 - r) ** 2, (1.0 + r) ** 2


def mp_density(c: float, x):
    """Density of the continuous part of the free Poisson law with rate ``c``."""
    a, b = mp_edges(c)
    x = np.asarray(x, dtype=float)
    inside = (x > a) & (x < b)
    xs = np.where(inside, x, 0.5 * (a + b))
    out = np.where(inside, np.sqrt((xs - a) * (b - xs)) / (2.0 * np.pi * xs), 0.0)
    return out if out.ndim else float(out)


def _primitive(x, a: float, b: float):
    """Antiderivative of ``sqrt((x-a)(b-x)) / x`` on ``[a, b]`` (atan2 form, exact at the edges)."""
    R = np.sqrt(np.clip((x - a) * (b - x), 0.0, None))
    out = R + 0.5 * (a + b) * np.arctan2(2.0 * x - a - b, 2.0 * R)
    if a > 0:
        rab = np.sqrt(a * b)
        out = out - rab * np.arctan2((a + b) * x - 2.0 * a * b, 2.0 * rab * R)
    return out


def _primitive_moment(x, a: float, b: float):
    """Antiderivative of ``sqrt((x-a)(b-x))`` on ``[a, b]``."""
    R = np.sqrt(np.clip((x - a) * (b - x), 0.0, None))
    return 0.25 * (2.0 * x - a - b) * R + 0.125 * (b - a) ** 2 * np.arctan2(2.0 * x - a - b, 2.0 * R)


@dataclass(frozen=True)
class DilatedMP:
    """The free Poisson law with rate ``c`` dilated by ``t^(2H)``."""

    c: float
    H: float
    t: float

    def __post_init__(self):
        mp_edges(self.c)
        check_hurst(self.H)
        if not self.t >= 0:
            raise DomainError(f"time must be non-negative, got {self.t}")
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "H", float(self.H))
        object.__setattr__(self, "t", float(self.t))

    @property
    def scale(self) -> float:
        return self.t ** (2.0 * self.H)

    @property
    def edges(self) -> tuple[float, float]:
        a, b = mp_edges(self.c)
        return a * self.scale, b * self.scale

    @property
    def atom(self) -> float:
        """Mass at zero; the whole law is a point mass when ``t = 0``."""
        if self.t == 0:
            return 1.0
        return max(0.0, 1.0 - self.c)

    @property
    def continuous_mass(self) -> float:
        return 1.0 - self.atom

    def _require_positive_time(self, what: str) -> None:
        if self.t == 0:
            raise DomainError(f"{what} is undefined at t = 0 (the law is a point mass)")

    def density(self, x):
        """Density of the continuous part (the atom is not encoded)."""
        self._require_positive_time("density")
        tau = self.scale
        return mp_density(self.c, np.asarray(x, dtype=float) / tau) / tau

    def cdf(self, x):
        """Right-continuous distribution function, atom included."""
        x = np.asarray(x, dtype=float)
        if self.t == 0:
            out = np.where(x >= 0, 1.0, 0.0)
            return out if out.ndim else float(out)
        a, b = mp_edges(self.c)
        u = np.clip(x / self.scale, a, b)
        cont = (_primitive(u, a, b) - _primitive(a, a, b)) / (2.0 * np.pi)
        cont = np.clip(cont, 0.0, self.continuous_mass)
        out = np.where(x >= 0, self.atom, 0.0) + np.where(x > a * self.scale, cont, 0.0)
        out = np.minimum(out, 1.0)
        return out if out.ndim else float(out)

    def partial_moment(self, x):
        """``int_{y <= x} y mu(dy)``."""
        x = np.asarray(x, dtype=float)
        if self.t == 0:
            out = np.zeros_like(x)
            return out if out.ndim else float(out)
        a, b = mp_edges(self.c)
        u = np.clip(x / self.scale, a, b)
        out = self.scale * (_primitive_moment(u, a, b) - _primitive_moment(a, a, b)) / (2.0 * np.pi)
        return out if out.ndim else float(out)

    def quantile(self, q, tol: float = 1e-10):
        """Left-continuous generalized inverse of :meth:`cdf`, by bisection."""
        q = np.asarray(q, dtype=float)
        if np.any((q < 0) | (q > 1)) or np.any(np.isnan(q)):
            raise DomainError("quantile levels must lie in [0, 1]")
        if self.t == 0:
            out = np.zeros_like(q)
            return out if out.ndim else float(out)
        lo_edge, hi_edge = self.edges
        lo = np.full(q.shape, lo_edge)
        hi = np.full(q.shape, hi_edge)
        steps = int(np.ceil(np.log2(max(hi_edge - lo_edge, tol) / tol))) + 1
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < q
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = np.where(q <= self.atom, 0.0, hi)
        return out if out.ndim else float(out)

    def integrate(self, f: Callable, complex_valued: bool = False, tol: float = QUAD_TOL):
        """``int f dmu`` by adaptive quadrature, atom included.

        The continuous part is integrated in ``theta`` with
        ``x = lo + (hi - lo) sin^2(theta)``, which removes the square-root
        behaviour at both edges.
        """
        if self.t == 0:
            return f(0.0)
        lo, hi = self.edges
        width = hi - lo
        tau = self.scale

        def integrand(theta):
            s, co = np.sin(theta), np.cos(theta)
            x = lo + width * s * s
            # density(x) dx = width^2 sin^2 cos^2 / (pi x tau) dtheta
            return f(x) * width * width * s * s * co * co / (np.pi * x * tau)

        val, err = _quad(integrand, 0.0, 0.5 * np.pi, tol, complex_valued)
        if err > 10 * tol:
            raise NumericalError(f"quadrature error estimate {err:.2e} exceeds {10 * tol:.1e}")
        if self.atom:
            val = val + self.atom * f(0.0)
        return val

    def moment(self, k: int):
        """``k``-th moment by quadrature (the atom contributes only for ``k = 0``)."""
        if k < 0 or int(k) != k:
            raise DomainError("moment order must be a non-negative integer")
        if k == 0:
            return 1.0
        if self.t == 0:
            return 0.0
        return float(self.integrate(lambda x: x**k))

    def sample(self, seed: int, count: int, stream: int = 0) -> np.ndarray:
        """Inverse-CDF draws from the counter-based uniform stream."""
        return self.quantile(rng.uniforms(seed, stream, count))


def _quad(f, lo: float, hi: float, tol: float, complex_valued: bool):
    """QUADPACK on a real or complex integrand; returns ``(value, error estimate)``."""
    if not complex_valued:
        return quad(f, lo, hi, epsabs=tol, epsrel=0.0, limit=500)
    re, re_err = quad(lambda x: f(x).real, lo, hi, epsabs=tol, epsrel=0.0, limit=500)
    im, im_err = quad(lambda x: f(x).imag, lo, hi, epsabs=tol, epsrel=0.0, limit=500)
    return complex(re, im), re_err + im_err


def _check_upper(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise DomainError("the Cauchy transform is evaluated on the upper half-plane only")
    return z


def initial_transform(z):
    """Transform of the point mass at zero, ``-1/z``."""
    z = _check_upper(z)
    out = -1.0 / z
    return out if out.ndim else complex(out)


def cauchy_transform(c: float, H: float, t: float, z):
    """Closed-form ``G(z) = int mu_{c,H}(t)(dx) / (x - z)`` for ``Im z > 0``.

    With ``tau = t^(2H)`` and ``A = z + (1 - c) tau``,
    ``G = (-A + S) / (2 z tau)`` where ``S^2 = (z - (1+c) tau)^2 - 4 c tau^2``.
    The root is taken as ``sqrt(z - a tau) * sqrt(z - b tau)``, whose cut is the
    support; the other root is used if that branch ever fails ``Im G > 0``.
    Evaluated as ``-2 / (A + S)``, which is stable for large ``|z|`` and as
    ``tau -> 0``.
    """
    a, b = mp_edges(c)
    H = check_hurst(H)
    if not t > 0:
        raise DomainError("t must be positive; use initial_transform for t = 0")
    z = _check_upper(z)
    tau = t ** (2.0 * H)
    A = z + (1.0 - c) * tau
    S = np.sqrt(z - a * tau) * np.sqrt(z - b * tau)
    G = -2.0 / (A + S)
    bad = G.imag <= 0
    if np.any(bad):
        G = np.where(bad, -2.0 / (A - S), G)
    return G if G.ndim else complex(G)


def cauchy_transform_quad(c: float, H: float, t: float, z, tol: float = QUAD_TOL) -> complex:
    """``G(z)`` by direct quadrature of the law; an independent check of the closed form."""
    z = complex(_check_upper(z))
    law = DilatedMP(c, H, t)
    return complex(law.integrate(lambda x: 1.0 / (x - z), complex_valued=True, tol=tol))


def pde_residual(c: float, H: float, t: float, z, h_t: float = 1e-4, h_z: float = 1e-4) -> complex:
    """Residual of ``dG/dt = 2H [G^2 + (1 - c + 2 z G) dG/dz] t^(2H-1)``.

    Derivatives of the closed form are taken by central differences.
    """
    z = complex(z)
    if not t - h_t > 0:
        raise UsageError("time stencil leaves t > 0")
    if not z.imag > 2.0 * h_z:
        raise UsageError("space stencil leaves the upper half-plane")
    G = cauchy_transform(c, H, t, z)
    dG_dt = (cauchy_transform(c, H, t + h_t, z) - cauchy_transform(c, H, t - h_t, z)) / (2.0 * h_t)
    dG_dz = (cauchy_transform(c, H, t, z + h_z) - cauchy_transform(c, H, t, z - h_z)) / (2.0 * h_z)
    rhs = 2.0 * H * (G * G + (1.0 - c + 2.0 * z * G) * dG_dz) * t ** (2.0 * H - 1.0)
    return complex(dG_dt - rhs)


def interaction_kernel(x, y, z):
    """``(1/(y-z)^2 - 1/(x-z)^2) (x+y)/(x-y)``, continuous across ``x = y``.

    Rewritten as ``(x+y)(x+y-2z) / ((x-z)^2 (y-z)^2)``, whose diagonal value
    is ``4x / (x-z)^3``.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    s = x + y
    return s * (s - 2.0 * z) / ((x - z) ** 2 * (y - z) ** 2)


def _gauss_nodes(law: DilatedMP, order: int):
    u, w = np.polynomial.legendre.leggauss(order)
    theta = 0.25 * np.pi * (u + 1.0)
    w = 0.25 * np.pi * w
    lo, hi = law.edges
    width = hi - lo
    s2 = np.sin(theta) ** 2
    x = lo + width * s2
    weight = w * width * width * s2 * (1.0 - s2) / (np.pi * x * law.scale)
    return x, weight


def _drift_functional(c: float, H: float, s: float, z: complex, tol: float) -> complex:
    """``<<K>>/2 - c <(x-z)^-2>`` against ``mu_{c,H}(s)``, refined until two orders agree."""
    law = DilatedMP(c, H, s)
    prev = None
    order = 24
    while order <= 1536:
        x, w = _gauss_nodes(law, order)
        kern = interaction_kernel(x[:, None], x[None, :], z)
        double = w @ kern @ w
        single = np.sum(w / (x - z) ** 2)
        if law.atom:
            double += 2.0 * law.atom * np.sum(w * interaction_kernel(x, 0.0, z))
            double += law.atom**2 * interaction_kernel(0.0, 0.0, z)
            single += law.atom / z**2
        val = 0.5 * double - c * single
        if prev is not None and abs(val - prev) <= tol:
            return complex(val)
        prev = val
        order *= 2
    raise NumericalError(f"inner quadrature did not reach {tol:g} at s={s}, z={z}")


def cst_residual(c: float, H: float, t: float, z, tol: float = 1e-5) -> complex:
    """Residual of the integral equation started from the point mass at zero.

    Returns ``G_t(z) + 1/z - int_0^t 2H s^(2H-1) (<<K>>_s / 2 - c <(x-z)^-2>_s) ds``
    where ``K`` is :func:`interaction_kernel` and the averages are against the
    closed-form law at time ``s``. The time integral is adaptive in
    ``u = s^(2H)``, which makes it regular at ``s = 0``. Inner integrals are
    Gauss-Legendre in the edge-regularising angle, with the order doubled until
    successive values agree to ``tol``.
    """
    H = check_hurst(H)
    z = complex(_check_upper(z))
    if not t > 0:
        raise DomainError("t must be positive")
    # at u = 0 the law is the point mass: <<K>> = K(0, 0) = 0 and <(x-z)^-2> = z^-2
    at_zero = -c / z**2

    def outer(u):
        if u <= 0.0:
            return at_zero
        return _drift_functional(c, H, u ** (0.5 / H), z, tol)

    val, err = _quad(outer, 0.0, t ** (2.0 * H), tol, complex_valued=True)
    if err > 10 * tol:
        raise NumericalError(f"outer quadrature error estimate {err:.2e} exceeds {10 * tol:.1e}")
    return complex(cauchy_transform(c, H, t, z) + 1.0 / z - val)
