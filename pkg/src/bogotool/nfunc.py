"""N-function calculus for the power-type family phi_{p,delta}.

    phi(t) = int_0^t (delta + s)^(p-2) s ds

Everything here is vectorised over ``t``.  Closed forms are used for phi and
its shifts; quadrature is only used by the test-suite as an oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import ConvergenceError, DomainError, SingularityError

__all__ = [
    "NFunctionPD",
    "ShiftedNFunction",
    "ConjugateNFunction",
    "ModularReport",
    "YoungReport",
    "phi_eval",
    "phi_prime",
    "phi_second",
    "phi_second_times",
    "shifted_eval",
    "conjugate_eval",
    "conjugate_argmax",
    "delta2_estimate",
    "equivalence_ratios",
    "modular",
    "luxemburg_norm",
    "young_check",
]

_SERIES_CUTOFF = 0.5
_SERIES_TERMS = 80


def _nonneg(t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError(f"{name} must be nonnegative")
    return t


@dataclass(frozen=True)
class NFunctionPD:
    """The N-function phi_{p,delta}; call it like a function of t."""

    p: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.p > 1.0 or not np.isfinite(self.p):
            raise DomainError(f"p must lie in (1, inf), got {self.p}")
        if not self.delta >= 0.0 or not np.isfinite(self.delta):
            raise DomainError(f"delta must be >= 0, got {self.delta}")

    @property
    def label(self):
        return f"phi[p={self.p:g},delta={self.delta:g}]"

    @property
    def conjugate_exponent(self):
        return self.p / (self.p - 1.0)

    def __call__(self, t):
        return phi_eval(self, t)

    def derivative(self, t):
        return phi_prime(self, t)

    def second_derivative(self, t):
        return phi_second(self, t)

    def shifted(self, a):
        return ShiftedNFunction(self, a)

    def conjugate(self):
        return ConjugateNFunction(self)


@dataclass(frozen=True)
class ShiftedNFunction:
    """phi_a(t) = int_0^t phi'(a+s) s/(a+s) ds."""

    base: NFunctionPD
    a: float

    def __post_init__(self):
        if not self.a >= 0.0:
            raise DomainError(f"shift a must be >= 0, got {self.a}")

    @property
    def label(self):
        return f"{self.base.label}_shift[a={self.a:g}]"

    def collapsed(self):
        # for this family the shift only moves delta
        return NFunctionPD(self.base.p, self.base.delta + self.a)

    def __call__(self, t):
        return shifted_eval(self, t)

    def derivative(self, t):
        return phi_prime(self.collapsed(), t)


@dataclass(frozen=True)
class ConjugateNFunction:
    base: NFunctionPD

    @property
    def label(self):
        return f"{self.base.label}*"

    def __call__(self, s):
        return conjugate_eval(self.base, s)

    def derivative(self, s):
        return conjugate_argmax(self.base, s)


@dataclass(frozen=True)
class ModularReport:
    value: float
    grid_spacing: float
    function_id: str

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("modular value must be nonnegative")

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# pointwise evaluation


def _phi_closed(p, d, t):
    if d == 0.0:
        return t**p / p
    with np.errstate(over="ignore"):
        r = t / d
    out = np.empty_like(r)
    small = r < _SERIES_CUTOFF
    huge = r > 1e6
    if np.any(huge):
        # expanded form; no cancellation when t >> delta (and no overflow of t/delta)
        u = d + t[huge]
        out[huge] = u**p / p - d * u ** (p - 1.0) / (p - 1.0) + d**p * (1.0 / (p - 1.0) - 1.0 / p)
    if np.any(small):
        # d^p * int_0^r (1+u)^(p-2) u du, binomial series; the closed form
        # below cancels catastrophically for t << delta
        rs = r[small]
        coef = 1.0
        power = rs * rs
        acc = np.zeros_like(rs)
        for k in range(_SERIES_TERMS):
            acc += coef * power / (k + 2)
            coef *= (p - 2.0 - k) / (k + 1.0)
            if coef == 0.0:
                break
            power = power * rs
        out[small] = d**p * acc
    big = ~small & ~huge
    if np.any(big):
        lg = np.log1p(r[big])
        out[big] = d**p * (np.expm1(p * lg) / p - np.expm1((p - 1.0) * lg) / (p - 1.0))
    return out


def phi_eval(nf, t):
    """phi_{p,delta}(t) by closed form."""
    t = _nonneg(t)
    scalar = t.ndim == 0
    out = _phi_closed(nf.p, nf.delta, np.atleast_1d(t))
    return float(out[0]) if scalar else out


def phi_prime(nf, t):
    t = _nonneg(t)
    p, d = nf.p, nf.delta
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(t > 0, (d + t) ** (p - 2.0) * t, 0.0)
    return float(out) if out.ndim == 0 else out


def phi_second(nf, t):
    """phi''(t) = (delta+t)^(p-3) ((p-1) t + delta).

    Raises SingularityError at t = 0 when delta = 0 and p < 2; callers that
    need the product phi''(t) t^k should use :func:`phi_second_times`.
    """
    t = _nonneg(t)
    p, d = nf.p, nf.delta
    if d == 0.0 and np.any(t == 0):
        if p < 2.0:
            raise SingularityError("phi'' is unbounded at t=0 for delta=0, p<2")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (d + t) ** (p - 3.0) * ((p - 1.0) * t + d)
    if d == 0.0:
        out = np.where(t == 0, 1.0 if p == 2.0 else 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def phi_second_times(nf, t, s, power=2):
    """phi''(t) * s^power, continuously extended by zero where s = 0."""
    t = _nonneg(t)
    s = np.abs(np.asarray(s, dtype=float))
    p, d = nf.p, nf.delta
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (d + t) ** (p - 3.0) * ((p - 1.0) * t + d) * s**power
    out = np.where(s == 0, 0.0, val)
    return float(out) if out.ndim == 0 else out


def shifted_eval(sf, t):
    return phi_eval(sf.collapsed(), t)


# ---------------------------------------------------------------------------
# conjugate


def conjugate_argmax(nf, s, rtol=1e-10, max_iter=400):
    """Solve phi'(t) = s for t by bracketing + bisection (vectorised)."""
    s = _nonneg(s, "s")
    scalar = s.ndim == 0
    s = np.atleast_1d(s).astype(float)
    lo = np.zeros_like(s)
    hi = np.maximum(s, 1.0)
    for _ in range(2100):
        short = phi_prime(nf, hi) < s
        if not np.any(short):
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    else:
        raise ConvergenceError("could not bracket phi'(t) = s", s_max=float(s.max()))
    it = 0
    while True:
        width = hi - lo
        done = (width <= rtol * hi) | (s == 0)
        if np.all(done):
            break
        if it >= max_iter:
            raise ConvergenceError(
                "bisection for the conjugate did not converge",
                iterations=it,
                worst_relative_width=float(np.max(width / np.maximum(hi, 1e-300))),
            )
        mid = 0.5 * (lo + hi)
        up = phi_prime(nf, mid) < s
        lo = np.where(up & ~done, mid, lo)
        hi = np.where(~up & ~done, mid, hi)
        it += 1
    t = np.where(s == 0, 0.0, 0.5 * (lo + hi))
    return float(t[0]) if scalar else t


def conjugate_eval(nf, s):
    """psi*(s) = sup_t (s t - psi(t)) evaluated at the stationary point."""
    s = _nonneg(s, "s")
    t = conjugate_argmax(nf, s)
    out = np.maximum(s * t - phi_eval(nf, t), 0.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# growth constants


def delta2_estimate(nf, conjugate=False, t_min=1e-6, t_max=1e6, num=2001):
    """Sampled sup of psi(2t)/psi(t) on a log grid (a lower bound of Delta_2)."""
    psi = ConjugateNFunction(nf) if conjugate else nf
    t = np.logspace(np.log10(t_min), np.log10(t_max), num)
    return float(np.max(psi(2.0 * t) / psi(t)))


def equivalence_ratios(nf, t_min=1e-6, t_max=1e6, num=2001):
    """Ranges of phi''(t) t / phi'(t) and phi'(t) t / phi(t) over a log grid."""
    t = np.logspace(np.log10(t_min), np.log10(t_max), num)
    r1 = phi_second(nf, t) * t / phi_prime(nf, t)
    r2 = phi_prime(nf, t) * t / phi_eval(nf, t)
    return {
        "second_over_first": (float(r1.min()), float(r1.max())),
        "first_over_value": (float(r2.min()), float(r2.max())),
    }


# ---------------------------------------------------------------------------
# modulars and norms


def _magnitudes(field, cell_volume):
    if hasattr(field, "pointwise_norm"):
        return field.pointwise_norm(), field.grid.cell_volume, field.grid.spacing
    if cell_volume is None:
        raise ValueError("cell_volume is required for raw arrays")
    arr = np.abs(np.asarray(field, dtype=float))
    return arr, float(cell_volume), float(cell_volume)


def modular(psi, field, cell_volume=None):
    """Midpoint-rule modular sum psi(|field(x)|) h^n."""
    mags, vol, spacing = _magnitudes(field, cell_volume)
    if mags.size == 0:
        raise ValueError("empty field")
    value = float(np.sum(psi(mags)) * vol)
    return ModularReport(value=value, grid_spacing=spacing, function_id=getattr(psi, "label", repr(psi)))


def luxemburg_norm(psi, field, cell_volume=None, rtol=1e-8):
    """Smallest lambda with modular(field / lambda) <= 1, by bisection."""
    mags, vol, _ = _magnitudes(field, cell_volume)
    if mags.size == 0:
        raise ValueError("empty field")
    if not np.any(mags > 0):
        return 0.0

    def rho(lam):
        return float(np.sum(psi(mags / lam)) * vol)

    hi = float(mags.max()) * max(1.0, vol * mags.size)
    while rho(hi) > 1.0:
        hi *= 2.0
    lo = hi / 2.0
    while rho(lo) <= 1.0:
        hi = lo
        lo /= 2.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if rho(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Young inequalities


@dataclass
class YoungReport:
    eps: float
    c_eps_first: float
    c_eps_second: float
    violations_first: int
    violations_second: int
    samples: int

    @property
    def passed(self):
        return self.violations_first == 0 and self.violations_second == 0


def _young1_ratio(nf, eps, s, t):
    num = t * s - eps * phi_eval(nf, t)
    den = conjugate_eval(nf, s)
    return num, den


def _young2_ratio(nf, eps, s, t):
    num = t * phi_prime(nf, s) + phi_prime(nf, t) * s - eps * phi_eval(nf, t)
    den = phi_eval(nf, s)
    return num, den


def _oracle_sup(ratio, lo, hi, num=401, refine=6):
    """Dense log-grid sup of num/den over [lo,hi]^2, refined locally."""
    g = np.logspace(np.log10(lo), np.log10(hi), num)
    S, T = np.meshgrid(g, g, indexing="ij")
    n_, d_ = ratio(S.ravel(), T.ravel())
    vals = n_ / d_
    best = float(np.max(vals))
    llo, lhi = np.log(lo), np.log(hi)

    def neg(z):
        z = np.clip(z, llo, lhi)
        a, b = ratio(np.exp(z[:1]), np.exp(z[1:]))
        return -float(a[0] / b[0])

    for idx in np.argsort(vals)[::-1][:refine]:
        z0 = np.log([S.ravel()[idx], T.ravel()[idx]])
        res = optimize.minimize(neg, z0, method="L-BFGS-B", bounds=[(llo, lhi), (llo, lhi)])
        best = max(best, -float(res.fun))
    return best


def young_check(nf, eps, sample=None, box=(1e-3, 1e3), num_samples=10_000, seed=0, rtol=1e-9):
    """Compute c_eps for both Young inequalities and test them on a sample.

    c_eps is the dense-grid sup over ``box`` of the ratio that the inequality
    requires; the pass/fail verdict uses an independent log-uniform sample
    (or the ``sample`` of (s, t) pairs given by the caller).
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    lo, hi = box
    c1 = max(_oracle_sup(lambda s, t: _young1_ratio(nf, eps, s, t), lo, hi), 0.0)
    c2 = max(_oracle_sup(lambda s, t: _young2_ratio(nf, eps, s, t), lo, hi), 0.0)
    if sample is None:
        rng = np.random.default_rng(seed)
        st = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(num_samples, 2)))
    else:
        st = np.asarray(sample, dtype=float).reshape(-1, 2)
    s, t = st[:, 0], st[:, 1]
    lhs1 = t * s
    rhs1 = eps * phi_eval(nf, t) + c1 * conjugate_eval(nf, s)
    lhs2 = t * phi_prime(nf, s) + phi_prime(nf, t) * s
    rhs2 = eps * phi_eval(nf, t) + c2 * phi_eval(nf, s)
    v1 = int(np.sum(lhs1 > rhs1 * (1 + rtol)))
    v2 = int(np.sum(lhs2 > rhs2 * (1 + rtol)))
    return YoungReport(eps=eps, c_eps_first=c1, c_eps_second=c2,
                       violations_first=v1, violations_second=v2, samples=len(s))
