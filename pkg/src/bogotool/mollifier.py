"""Radial C-infinity bump used by the Bogovskii formula and the cut-off functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import ConvergenceError

__all__ = ["Mollifier", "make_mollifier", "sphere_area"]

DEFAULT_RADIUS = 0.2  # ball of radius 1/5 sits inside (-1/4, 1/4)^n


def sphere_area(n):
    """Surface measure of the unit sphere S^{n-1}."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def _q(s, R):
    # exponent of the bump and its first two derivatives in s
    v = 1.0 - (s / R) ** 2
    q = -1.0 / v
    q1 = -2.0 * s / (R * R * v * v)
    q2 = -2.0 / (R * R * v * v) - 8.0 * s * s / (R**4 * v**3)
    return q, q1, q2


@dataclass(frozen=True)
class Mollifier:
    """rho(x) = c_norm * exp(-1 / (1 - |x|^2 / R^2)) for |x| < R, else 0.

    ``deriv_sup[k]`` holds sup |D^k rho| for k = 0..3 (operator norms for the
    Hessian, finite differences for k = 3).
    """

    n: int
    radius: float
    c_norm: float
    deriv_sup: tuple = field(default=())

    @property
    def hessian_sup(self):
        return self.deriv_sup[2]

    def profile(self, s):
        """Radial profile g(s) with rho(x) = g(|x|)."""
        s = np.abs(np.asarray(s, dtype=float))
        R = self.radius
        inside = s < R
        out = np.zeros_like(s)
        q, _, _ = _q(s[inside], R)
        out[inside] = self.c_norm * np.exp(q)
        return out

    def profile_derivatives(self, s):
        """g, g', g'' at s >= 0."""
        s = np.asarray(s, dtype=float)
        R = self.radius
        inside = s < R
        g = np.zeros_like(s)
        g1 = np.zeros_like(s)
        g2 = np.zeros_like(s)
        q, q1, q2 = _q(s[inside], R)
        e = self.c_norm * np.exp(q)
        g[inside] = e
        g1[inside] = e * q1
        g2[inside] = e * (q2 + q1 * q1)
        return g, g1, g2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.profile(np.linalg.norm(x, axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        s = np.linalg.norm(x, axis=-1)
        _, g1, _ = self.profile_derivatives(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = np.where(s > 0, g1 / s, 0.0)
        return fac[..., None] * x

    def scaled(self, lam, center=None):
        """rho_lambda(x) = lam^-n rho((x - center)/lam), still of unit mass."""
        center = np.zeros(self.n) if center is None else np.asarray(center, dtype=float)
        return ScaledMollifier(self, float(lam), center)


@dataclass(frozen=True)
class ScaledMollifier:
    base: Mollifier
    lam: float
    center: np.ndarray

    @property
    def radius(self):
        return self.base.radius * self.lam

    @property
    def amplitude(self):
        return self.base.c_norm * self.lam ** (-self.base.n)

    def __call__(self, x):
        return self.lam ** (-self.base.n) * self.base((np.asarray(x) - self.center) / self.lam)


def _unnormalised_mass(n, R):
    def integrand(s):
        return math.exp(-1.0 / (1.0 - (s / R) ** 2)) * s ** (n - 1)

    val, err = integrate.quad(integrand, 0.0, R, epsabs=0.0, epsrel=1e-13, limit=200)
    if not err <= 1e-11 * abs(val):
        raise ConvergenceError("normalisation quadrature did not converge", estimate=val, error=err)
    return sphere_area(n) * val


def _sup_abs(fun, R, num=20001):
    s = np.linspace(0.0, R, num, endpoint=False)
    vals = np.abs(fun(s))
    i = int(np.argmax(vals))
    lo, hi = s[max(i - 1, 0)], s[min(i + 1, num - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: -float(np.abs(fun(np.array([t])))[0]),
                                       bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-14 * R})
        return max(float(vals[i]), -float(res.fun))
    return float(vals[i])


def make_mollifier(n, radius=DEFAULT_RADIUS):
    c_norm = 1.0 / _unnormalised_mass(n, radius)
    m = Mollifier(n, radius, c_norm)
    g0 = _sup_abs(lambda s: m.profile_derivatives(s)[0], radius)
    g1 = _sup_abs(lambda s: m.profile_derivatives(s)[1], radius)
    g2 = _sup_abs(lambda s: m.profile_derivatives(s)[2], radius)
    if n > 1:
        # Hessian eigenvalues of a radial function: g'' (radial), g'/s (tangential)
        def tang(s):
            s = np.maximum(s, 1e-300)
            return m.profile_derivatives(s)[1] / s

        h2 = max(g2, _sup_abs(tang, radius))
    else:
        h2 = g2
    s = np.linspace(0.0, radius, 40001)
    g2v = m.profile_derivatives(s)[2]
    g3 = float(np.max(np.abs(np.gradient(g2v, s))))
    return Mollifier(n, radius, c_norm, (g0, g1, h2, g3))
