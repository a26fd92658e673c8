"""Power-law stress tensors S(P) = mu (delta + |P^sym|)^(p-2) P^sym and F(P).

Tensors are numpy arrays whose last two axes are n x n; every function is
batched over the leading axes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import grid as _grid
from .errors import DomainError
from .nfunc import NFunctionPD, phi_eval, phi_prime, phi_second_times

__all__ = [
    "StressModel",
    "HammerQuantities",
    "sym",
    "frob",
    "stress",
    "f_assoc",
    "stress_derivative",
    "calibrate",
    "hammer_quantities",
    "hammer_ratio_ranges",
    "hammer_seed_spread",
    "coercivity_ratio_ranges",
    "diffquot_equiv",
    "random_tensors",
    "random_pairs",
]


@dataclass(frozen=True)
class StressModel:
    nf: NFunctionPD
    mu: float = 1.0
    gamma0_est: float | None = None
    gamma1_est: float | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError("mu must be positive")

    @classmethod
    def power_law(cls, p, delta=0.0, mu=1.0):
        return cls(NFunctionPD(p, delta), mu)

    @property
    def p(self):
        return self.nf.p

    @property
    def delta(self):
        return self.nf.delta


def sym(P):
    P = np.asarray(P, dtype=float)
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def frob(P):
    return np.sqrt(np.sum(np.asarray(P) ** 2, axis=(-2, -1)))


def _scaled(P, d, expo):
    Ps = sym(P)
    a = frob(Ps)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(a > 0, (d + a) ** expo, 0.0)
    # explicit zero branch: P^sym = 0 must not produce 0 * inf
    return fac[..., None, None] * Ps


def stress(model, P):
    return model.mu * _scaled(P, model.delta, model.p - 2.0)


def f_assoc(model, P):
    return _scaled(P, model.delta, 0.5 * (model.p - 2.0))


def stress_derivative(model, P):
    """dS_ij / dP_kl as an array of shape (..., n, n, n, n); requires P^sym != 0."""
    Ps = sym(P)
    n = Ps.shape[-1]
    t = frob(Ps)
    if np.any(t == 0):
        raise DomainError("the derivative is only defined for P^sym != 0")
    p, d = model.p, model.delta
    eye = np.eye(n)
    symid = 0.5 * (np.einsum("ik,jl->ijkl", eye, eye) + np.einsum("il,jk->ijkl", eye, eye))
    a = (d + t) ** (p - 2.0)
    b = (p - 2.0) * (d + t) ** (p - 3.0) / t
    outer = np.einsum("...ij,...kl->...ijkl", Ps, Ps)
    return model.mu * (a[..., None, None, None, None] * symid + b[..., None, None, None, None] * outer)


def random_tensors(rng, num, n=2, scale=1.0):
    return rng.uniform(-scale, scale, size=(num, n, n))


def _unit_tensors(rng, num, n):
    u = rng.normal(size=(num, n, n))
    return u / np.sqrt(np.sum(u**2, axis=(1, 2)))[:, None, None]


def random_pairs(rng, num, n=2, scale=1.0):
    """Tensor pairs (P, Q) for sampling the equivalence ratios.

    |P| is log-uniform on scale * [1e-3, 1e4].  Half of the Q are independent
    of P (same magnitude law); the other half are Q = lam P + eta |P| U with
    lam = +-10^U(-2, 2), eta = 10^U(-4, -1) and U a random unit tensor.  The
    extreme ratios sit on the (anti)parallel set, which independent pairs
    almost never come close to.
    """
    P = _unit_tensors(rng, num, n) * (scale * 10 ** rng.uniform(-3, 4, num))[:, None, None]
    half = num // 2
    Q = np.empty_like(P)
    Q[:half] = _unit_tensors(rng, half, n) * (scale * 10 ** rng.uniform(-3, 4, half))[:, None, None]
    m = num - half
    lam = rng.choice([-1.0, 1.0], m) * 10 ** rng.uniform(-2, 2, m)
    eta = 10 ** rng.uniform(-4, -1, m)
    Q[half:] = lam[:, None, None] * P[half:] + (eta * frob(P[half:]))[:, None, None] * _unit_tensors(rng, m, n)
    return P, Q


def calibrate(model, num=10_000, n=2, seed=0):
    """Return a copy of ``model`` with sampled estimates of gamma_0 and gamma_1."""
    rng = np.random.default_rng(seed)
    P = random_tensors(rng, num, n)
    Q = random_tensors(rng, num, n)
    Ps = sym(P)
    keep = frob(Ps) > 0
    Ps, Qs = Ps[keep], sym(Q)[keep]
    dS = stress_derivative(model, Ps)
    t = frob(Ps)
    phi2 = phi_second_times(model.nf, t, np.ones_like(t), power=0)
    form = np.einsum("...ijkl,...ij,...kl->...", dS, Qs, Qs)
    g0 = float(np.min(form / (phi2 * frob(Qs) ** 2)))
    g1 = float(np.max(np.abs(dS).reshape(len(t), -1).max(axis=1) / phi2))
    return dataclasses.replace(model, gamma0_est=g0, gamma1_est=g1)


@dataclass(frozen=True)
class HammerQuantities:
    """The equivalent quantities of the (p, delta)-structure calculus.

    monotone:  (S(P)-S(Q)).(P-Q)
    f_gap:     |F(P)-F(Q)|^2
    shifted:   phi_{|P|}(|P-Q|)
    second:    phi''(|P|+|P-Q|) |P-Q|^2
    stress_gap and shifted_prime: |S(P)-S(Q)| and phi'_{|P|}(|P-Q|)
    """

    monotone: np.ndarray
    f_gap: np.ndarray
    shifted: np.ndarray
    second: np.ndarray
    stress_gap: np.ndarray
    shifted_prime: np.ndarray


def hammer_quantities(model, P, Q):
    Ps, Qs = sym(P), sym(Q)
    a = frob(Ps)
    diff = frob(Ps - Qs)
    dS = stress(model, Ps) - stress(model, Qs)
    shifted_nf = NFunctionPD(model.p, model.delta)
    monotone = np.sum(dS * (np.asarray(P) - np.asarray(Q)), axis=(-2, -1))
    f_gap = frob(f_assoc(model, Ps) - f_assoc(model, Qs)) ** 2
    # phi_a = phi_{p, delta + a} for this family
    d_shift = model.delta + a
    shifted = _phi_vec(model.p, d_shift, diff)
    second = phi_second_times(shifted_nf, a + diff, diff, power=2)
    stress_gap = frob(dS)
    with np.errstate(divide="ignore", invalid="ignore"):
        shifted_prime = np.where(diff > 0, (d_shift + diff) ** (model.p - 2.0) * diff, 0.0)
    return HammerQuantities(monotone, f_gap, shifted, second, stress_gap, shifted_prime)


def _phi_vec(p, deltas, t):
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), np.shape(t))
    out = np.empty(np.shape(t))
    flat_d, flat_t, flat_o = deltas.ravel(), np.asarray(t, dtype=float).ravel(), out.reshape(-1)
    for d in np.unique(flat_d):
        sel = flat_d == d
        flat_o[sel] = phi_eval(NFunctionPD(p, float(d)), flat_t[sel])
    return out


def _ratio_range(num, den):
    r = num / den
    return float(r.min()), float(r.max())


def hammer_ratio_ranges(model, num=10_000, n=2, seed=0):
    """Min/max of the ratios of each hammer quantity to the monotone one.

    Pairs come from :func:`random_pairs` with scale delta (0.01 when delta = 0),
    so the ranges do not depend on delta beyond that.
    """
    rng = np.random.default_rng(seed)
    P, Q = random_pairs(rng, num, n, model.delta if model.delta > 0 else 1e-2)
    hq = hammer_quantities(model, P, Q)
    keep = frob(sym(P) - sym(Q)) > 1e-12
    m = hq.monotone[keep]
    return {
        "f_gap/monotone": _ratio_range(hq.f_gap[keep], m),
        "shifted/monotone": _ratio_range(hq.shifted[keep], m),
        "second/monotone": _ratio_range(hq.second[keep], m),
        "stress_gap/shifted_prime": _ratio_range(hq.stress_gap[keep], hq.shifted_prime[keep]),
    }


def hammer_seed_spread(model, seeds=(0, 1, 2), num=10_000, n=2):
    """Ratio ranges for several seeds and the worst relative endpoint spread.

    The spread of an endpoint is max/min - 1 over the seeds; all endpoints
    are positive for a (p, delta)-structure.
    """
    runs = [hammer_ratio_ranges(model, num, n, seed) for seed in seeds]
    spread = 0.0
    for key in runs[0]:
        for end in (0, 1):
            vals = np.array([r[key][end] for r in runs])
            if not (np.all(np.isfinite(vals)) and np.all(vals > 0)):
                return runs, float("inf")
            spread = max(spread, float(vals.max() / vals.min() - 1.0))
    return runs, spread


def coercivity_ratio_ranges(model, num=10_000, n=2, seed=0):
    """Ranges of S(Q).Q / |F(Q)|^2 and S(Q).Q / phi(|Q^sym|)."""
    rng = np.random.default_rng(seed)
    Q = random_tensors(rng, num, n)
    Qs = sym(Q)
    keep = frob(Qs) > 1e-12
    Q, Qs = Q[keep], Qs[keep]
    sq = np.sum(stress(model, Q) * Q, axis=(-2, -1))
    fq = frob(f_assoc(model, Q)) ** 2
    pq = phi_eval(model.nf, frob(Qs))
    return {"SQ.Q/|F|^2": _ratio_range(sq, fq), "SQ.Q/phi": _ratio_range(sq, pq)}


def diffquot_equiv(model, Du, h, k, sign=1, floor=1e-300):
    """Pointwise ratio statistics of the difference-quotient equivalences.

    On the inner set (x +- h e_k on the grid) computes
      a = d S(Du) . d Du,  b = |d F(Du)|^2,
      c = (delta + |Du| + |Delta Du|)^(p-2) |d Du|^2,
      e = phi''(|Du| + |Delta Du|) |d Du|^2
    and returns min/max of a/b, a/c, a/e over points where all are nonzero.
    """
    if Du.rank != 2:
        raise DomainError("Du must be a tensor field")
    g = Du.grid
    m = _grid.steps_of(g, h)
    inner = _grid.inner_mask(g, k, m, sign)
    if not inner.any():
        raise DomainError("inner set is empty (h too large)")
    S = Du.with_values(stress(model, Du.values))
    F = Du.with_values(f_assoc(model, Du.values))
    dDu = _grid.diff_quot(Du, k, h, sign).values[inner]
    dS = _grid.diff_quot(S, k, h, sign).values[inner]
    dF = _grid.diff_quot(F, k, h, sign).values[inner]
    du_norm = frob(Du.values[inner])
    big_delta = h * frob(dDu)
    dd2 = frob(dDu) ** 2
    a = np.sum(dS * dDu, axis=(-2, -1))
    b = frob(dF) ** 2
    c = (model.delta + du_norm + big_delta) ** (model.p - 2.0) * dd2
    e = phi_second_times(model.nf, du_norm + big_delta, frob(dDu), power=2)
    ok = (a > floor) & (b > floor) & (c > floor) & (e > floor)
    out = {"points": int(ok.sum())}
    if ok.any():
        for name, num, den in (("a/b", a, b), ("a/c", a, c), ("a/e", a, e)):
            out[name] = _ratio_range(num[ok], den[ok])
    else:
        out.update({"a/b": (np.nan, np.nan), "a/c": (np.nan, np.nan), "a/e": (np.nan, np.nan)})
    out["max_abs"] = {"a": float(np.abs(a).max()), "b": float(b.max()), "c": float(c.max())}
    return out
