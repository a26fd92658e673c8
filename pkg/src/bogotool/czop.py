"""Singular integral kernels: condition checks, truncated operators, maximal
function, A_p constants and measured weighted / Orlicz operator bounds.

A kernel ``K(x, y)`` is evaluated on arrays of points with the coordinates on
the last axis.  ``N(x, z) = K(x, x - z)`` is the kernel in the variable
z = x - y that the homogeneity and cancellation conditions refer to.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage, signal

from . import _kernels
from .errors import DomainError
from .grid import UniformGrid, UniformGridField
from .mollifier import make_mollifier
from .nfunc import modular
from .whitney import Box, DomainOracle

__all__ = [
    "KernelDescriptor",
    "Weight",
    "builtin_kernel",
    "make_weight",
    "sk_check",
    "cz_check",
    "truncated_apply",
    "truncated_family",
    "pv_apply",
    "maximal_op",
    "ap_constant",
    "weighted_norm",
    "weighted_bound_ratio",
    "orlicz_bound_ratio",
    "bump_family",
]


@dataclass(frozen=True)
class KernelDescriptor:
    evaluate: Callable
    label: str
    n: int = 2
    kappa1_est: float | None = None
    kappa2_est: float | None = None
    validity_domain: DomainOracle | None = None
    translation_invariant: bool = False
    code: tuple | None = None  # (kind, component) for the compiled sums

    def __call__(self, x, y):
        return self.evaluate(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def N(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if self.translation_invariant:
            # K(x, x - z) = k(z); skip the x - (x - z) round trip
            return self.evaluate(z, np.zeros(z.shape[-1]))
        return self.evaluate(x, x - z)

    def with_constants(self, kappa1=None, kappa2=None):
        return dataclasses.replace(
            self,
            kappa1_est=self.kappa1_est if kappa1 is None else float(kappa1),
            kappa2_est=self.kappa2_est if kappa2 is None else float(kappa2),
        )


@dataclass(frozen=True)
class Weight:
    evaluate: Callable
    label: str

    def __call__(self, x):
        return self.evaluate(np.asarray(x, dtype=float))

    def on_grid(self, grid):
        w = np.broadcast_to(np.asarray(self(grid.coords()), dtype=float), grid.dims)
        if not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise DomainError(f"weight {self.label} must be positive and finite at all grid points")
        return w


def make_weight(spec, center=None):
    """Weights by name: ``const``, ``const:c`` or ``power:alpha`` (|x - center|^alpha)."""
    if isinstance(spec, Weight):
        return spec
    name, _, arg = str(spec).partition(":")
    if name == "const":
        c = float(arg) if arg else 1.0
        return Weight(lambda x: np.full(x.shape[:-1], c), f"const:{c:g}")
    if name == "power":
        alpha = float(arg)
        c = None if center is None else np.asarray(center, dtype=float)

        def ev(x):
            d = x if c is None else x - c
            with np.errstate(divide="ignore"):
                return np.linalg.norm(d, axis=-1) ** alpha

        return Weight(ev, f"power:{alpha:g}")
    raise DomainError(f"unknown weight {spec!r}")


# ---------------------------------------------------------------- kernels


def _diff(x, y):
    return np.asarray(x, dtype=float) - np.asarray(y, dtype=float)


def _builtin_eval(kind, comp):
    def ev(x, y):
        return _kernels.cz_kernel_np(kind, comp, _diff(x, y))

    return ev


def _jij_kernel(i, j, n, order=64):
    """Principal part of the derivative of the Bogovskii kernel on (-1/2, 1/2)^n.

    N(x, z) = delta_ij |z|^-n int rho(x + s theta) s^(n-1) ds
              + z_i |z|^-(n+1) int d_j rho(x + s theta) s^n ds,  theta = z/|z|,
    homogeneous of degree -n in z with zero mean over the sphere.
    """
    moll = make_mollifier(n)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    R = moll.radius

    def ev(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        z = x - y
        r = np.linalg.norm(z, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            th = z / r[..., None]
        b = np.sum(th * x, axis=-1)
        disc = b * b - (np.sum(x * x, axis=-1) - R * R)
        sq = np.sqrt(np.maximum(disc, 0.0))
        lo = np.maximum(-b - sq, 0.0)
        hi = np.maximum(-b + sq, lo)
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        s = mid[..., None] + half[..., None] * nodes
        pts = x[..., None, :] + s[..., None] * th[..., None, :]
        rho = moll(pts)
        drho = moll.gradient(pts)[..., j]
        I0 = np.sum(weights * rho * s ** (n - 1), axis=-1) * half
        I1 = np.sum(weights * drho * s**n, axis=-1) * half
        out = (float(i == j) * I0 + th[..., i] * I1) / r**n
        return np.where(r > 0, out, np.nan)

    return ev


def builtin_kernel(name, n=2):
    """Kernels by name.

    ``riesz-i``  (x_i - y_i)/|x - y|^(n+1)
    ``log-grad`` d_1 d_2 of the logarithmic potential, -z_1 z_2/(pi |z|^4), n = 2
    ``noncancel`` 1/|x - y|^n (homogeneous but without cancellation)
    ``bogovskii-jij-surrogate[:i,j]`` principal part of the Bogovskii kernel derivative
    ``zero``
    """
    m = re.fullmatch(r"riesz-(\d+)", name)
    if m:
        i = int(m.group(1)) - 1
        if not 0 <= i < n:
            raise DomainError(f"riesz index must be in 1..{n}")
        return KernelDescriptor(_builtin_eval(_kernels.RIESZ, i), name, n,
                                translation_invariant=True, code=(_kernels.RIESZ, i))
    if name == "log-grad":
        if n != 2:
            raise DomainError("log-grad is defined for n = 2")
        return KernelDescriptor(_builtin_eval(_kernels.LOG_GRAD, 0), name, n,
                                translation_invariant=True, code=(_kernels.LOG_GRAD, 0))
    if name == "noncancel":
        return KernelDescriptor(_builtin_eval(_kernels.NONCANCEL, 0), name, n,
                                translation_invariant=True, code=(_kernels.NONCANCEL, 0))
    if name.startswith("bogovskii-jij-surrogate"):
        _, _, arg = name.partition(":")
        i, j = (int(v) - 1 for v in arg.split(",")) if arg else (0, 0)
        if not (0 <= i < n and 0 <= j < n):
            raise DomainError("indices out of range")
        dom = Box((-0.5,) * n, (0.5,) * n)
        return KernelDescriptor(_jij_kernel(i, j, n), name, n, validity_domain=dom)
    if name == "zero":
        return KernelDescriptor(lambda x, y: np.zeros(np.broadcast_shapes(np.shape(x), np.shape(y))[:-1]),
                                name, n, translation_invariant=True)
    raise DomainError(f"unknown kernel {name!r}")


# ---------------------------------------------------------------- condition checks


@dataclass(frozen=True)
class SKReport:
    kappa1: float
    ratios: tuple  # max of each of the three standard-kernel ratios
    samples: int


def _domain_of(K, domain):
    if domain is not None:
        return domain
    if K.validity_domain is not None:
        return K.validity_domain
    return Box((0.0,) * K.n, (1.0,) * K.n)


def _uniform_in(domain, rng, num):
    lo, hi = (np.asarray(b, dtype=float) for b in domain.bounding_box)
    out = []
    got = 0
    while got < num:
        x = rng.uniform(lo, hi, size=(2 * num, lo.size))
        x = x[domain.contains(x)]
        out.append(x)
        got += len(x)
    return np.concatenate(out)[:num]


def _directions(rng, num, n):
    u = rng.normal(size=(num, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def sk_check(K, domain=None, num_triples=100_000, seed=0):
    """Estimate kappa_1 from random triples with 0 < |x - z| <= |x - y|/2."""
    domain = _domain_of(K, domain)
    n = domain.ndim
    rng = np.random.default_rng(seed)
    xs, ys, zs = [], [], []
    got = 0
    while got < num_triples:
        m = num_triples - got
        x = _uniform_in(domain, rng, m)
        y = _uniform_in(domain, rng, m)
        dxy = np.linalg.norm(x - y, axis=1)
        rad = 0.5 * dxy * rng.uniform(0.0, 1.0, m) ** (1.0 / n)
        z = x + rad[:, None] * _directions(rng, m, n)
        ok = (dxy > 0) & (rad > 0) & domain.contains(z)
        xs.append(x[ok]), ys.append(y[ok]), zs.append(z[ok])
        got += int(ok.sum())
    x, y, z = (np.concatenate(a)[:num_triples] for a in (xs, ys, zs))
    dxy = np.linalg.norm(x - y, axis=1)
    dxz = np.linalg.norm(x - z, axis=1)
    r1 = np.abs(K(x, y)) * dxy**n
    r2 = np.abs(K(x, y) - K(z, y)) * dxy ** (n + 1) / dxz
    r3 = np.abs(K(y, x) - K(y, z)) * dxy ** (n + 1) / dxz
    ratios = tuple(float(np.max(r)) for r in (r1, r2, r3))
    return SKReport(max(ratios), ratios, int(num_triples))


@dataclass(frozen=True)
class CZReport:
    homogeneity_dev: float
    mean_zero_dev: float
    kappa2: float
    mean_values: tuple = ()


def sphere_rule(n, order=512):
    """Nodes and weights on S^(n-1): trapezoid on S^1, Gauss x trapezoid on S^2."""
    if order < 8:
        raise DomainError("sphere quadrature order must be at least 8")
    if n == 2:
        t = 2 * math.pi * np.arange(order) / order
        return np.stack([np.cos(t), np.sin(t)], -1), np.full(order, 2 * math.pi / order)
    if n == 3:
        ct, wt = np.polynomial.legendre.leggauss(max(order // 2, 8))
        ph = 2 * math.pi * np.arange(order) / order
        C, P = np.meshgrid(ct, ph, indexing="ij")
        S = np.sqrt(1 - C**2)
        nodes = np.stack([S * np.cos(P), S * np.sin(P), C], -1).reshape(-1, 3)
        w = (wt[:, None] * np.full(order, 2 * math.pi / order)[None, :]).ravel()
        return nodes, w
    raise DomainError("sphere quadrature is available for n = 2, 3")


def cz_check(K, domain=None, order=512, num_x=64, num_homog=10_000, seed=0):
    """Homogeneity and cancellation deviations of N and the kappa_2 estimate."""
    domain = _domain_of(K, domain)
    n = domain.ndim
    nodes, w = sphere_rule(n, order)
    rng = np.random.default_rng(seed)
    x = _uniform_in(domain, rng, num_x)
    N = K.N(x[:, None, :], nodes[None, :, :])
    means = N @ w
    kappa2 = float(np.sqrt(np.max((N**2) @ w)))
    xh = _uniform_in(domain, rng, num_homog)
    zlen = np.exp(rng.uniform(math.log(0.05), math.log(0.5), num_homog))
    z = zlen[:, None] * _directions(rng, num_homog, n)
    alpha = np.exp(rng.uniform(math.log(0.1), math.log(10.0), num_homog))
    dev = np.abs(K.N(xh, alpha[:, None] * z) - alpha ** (-n) * K.N(xh, z)) * zlen**n
    return CZReport(float(np.max(dev)), float(np.max(np.abs(means))), kappa2,
                    tuple(float(v) for v in means))


# ---------------------------------------------------------------- truncated operators


def _fft_family(K, eps_list, fvals, grid):
    n, h, dims = grid.ndim, grid.spacing, grid.dims
    offs = np.stack(np.meshgrid(*(h * np.arange(-(d - 1), d) for d in dims), indexing="ij"), -1)
    r = np.linalg.norm(offs, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kv = np.nan_to_num(K(offs, np.zeros(n)), nan=0.0, posinf=0.0, neginf=0.0)
    sl = tuple(slice(d - 1, 2 * d - 1) for d in dims)
    out = np.empty((fvals.shape[0], len(eps_list)) + tuple(dims))
    for q, eps in enumerate(eps_list):
        kern = np.where(r > eps, kv, 0.0) * grid.cell_volume
        for b in range(fvals.shape[0]):
            out[b, q] = signal.fftconvolve(fvals[b], kern, mode="full")[sl]
    return out


def truncated_family(K, eps_list, fields, targets=None, method="auto", use_numba=None):
    """T_eps f for every eps and every field; array of shape (F, E) + out shape.

    ``method``: ``fft`` (translation-invariant kernels on the grid),
    ``direct`` (pair sum), or ``auto``.
    """
    fields = [fields] if isinstance(fields, UniformGridField) else list(fields)
    eps_list = np.atleast_1d(np.asarray(eps_list, dtype=float))
    if np.any(eps_list <= 0):
        raise DomainError("eps must be positive")
    grid = fields[0].grid
    fvals = np.stack([f.values for f in fields])
    if method == "auto":
        method = "fft" if (K.translation_invariant and targets is None) else "direct"
    if method == "fft":
        if targets is not None:
            raise DomainError("fft evaluation only returns grid values")
        return _fft_family(K, eps_list, fvals, grid)
    order = np.argsort(eps_list)
    src = grid.coords().reshape(-1, grid.ndim)
    tgt = src if targets is None else np.asarray(targets, dtype=float).reshape(-1, grid.ndim)
    flat = fvals.reshape(len(fields), -1)
    if K.code is not None:
        res = _kernels.cz_sum(tgt, src, flat, eps_list[order], K.code[0], K.code[1],
                              grid.cell_volume, use_numba)
    else:
        res = _kernels.generic_cz_sum(K.evaluate, tgt, src, flat, eps_list[order], grid.cell_volume)
    res = res[:, np.argsort(order)]
    shape = grid.dims if targets is None else np.shape(targets)[:-1]
    return res.reshape(res.shape[:2] + tuple(shape))


def truncated_apply(K, eps, f, targets=None, method="auto", use_numba=None):
    """T_eps f (x) = sum over cells with |x - y| > eps of f(y) K(x, y) h^n."""
    res = truncated_family(K, [eps], [f], targets, method, use_numba)[0, 0]
    return f.with_values(res) if targets is None else res


@dataclass(frozen=True)
class PVReport:
    eps: tuple
    l2_diffs: tuple
    maximal_truncation: UniformGridField


def pv_apply(K, f, eps_sequence, method="auto"):
    """T_{eps_min} f with Cauchy differences along a decreasing eps sequence."""
    eps = np.asarray(eps_sequence, dtype=float)
    if eps.ndim != 1 or eps.size < 1 or np.any(np.diff(eps) >= 0):
        raise DomainError("eps_sequence must be strictly decreasing")
    if eps[-1] < f.grid.spacing:
        raise DomainError("eps below the grid spacing")
    vals = truncated_family(K, eps, [f], method=method)[0]
    vol = f.grid.cell_volume
    diffs = tuple(float(np.sqrt(np.sum((vals[j + 1] - vals[j]) ** 2) * vol)) for j in range(len(eps) - 1))
    tstar = f.with_values(np.max(np.abs(vals), axis=0))
    return f.with_values(vals[-1]), PVReport(tuple(float(e) for e in eps), diffs, tstar)


# ---------------------------------------------------------------- ball families


def ball_radii(grid):
    """h/2 (the centre cell only), then h, 2h, 4h, ... up to the box diameter."""
    h = grid.spacing
    diam = h * math.sqrt(sum(d * d for d in grid.dims))
    radii = [0.5 * h]
    r = h
    while r <= diam:
        radii.append(r)
        r *= 2
    return radii


def _row_offsets(R, n):
    """Offsets in the first n-1 axes and half-widths along the last axis of a disc of radius R cells."""
    Ri = int(math.floor(R + 1e-12))
    for off in itertools.product(range(-Ri, Ri + 1), repeat=n - 1):
        rem = R * R - sum(o * o for o in off)
        if rem >= 0:
            yield off, int(math.floor(math.sqrt(rem) + 1e-12))


def _shifted(values, off, fill):
    """out[i] = values[i + off] on the first len(off) axes, ``fill`` outside."""
    out = np.full(values.shape, fill, dtype=float)
    if any(abs(o) >= d for o, d in zip(off, values.shape)):
        return out
    src, dst = [], []
    for o, d in zip(off, values.shape):
        src.append(slice(max(o, 0), d + min(o, 0)))
        dst.append(slice(max(-o, 0), d - max(o, 0)))
    out[tuple(dst)] = values[tuple(src)]
    return out


def _ball_sums(values, R):
    """Sums of ``values`` over the grid points within R cells of every grid point."""
    n = values.ndim
    last = values.shape[-1]
    cs = np.concatenate([np.zeros(values.shape[:-1] + (1,)), np.cumsum(values, axis=-1)], axis=-1)
    j = np.arange(last)
    total = np.zeros(values.shape)
    for off, w in _row_offsets(R, n):
        lo = np.clip(j - w, 0, last)
        hi = np.clip(j + w + 1, 0, last)
        seg = cs[..., hi] - cs[..., lo]
        total += _shifted(seg, off, 0.0)
    return total


def _disc_max(values, R):
    """max of ``values`` over grid points within R cells (a disc-footprint max filter)."""
    out = np.full(values.shape, -np.inf)
    for off, w in _row_offsets(R, values.ndim):
        row = ndimage.maximum_filter1d(values, 2 * w + 1, axis=-1, mode="constant", cval=-np.inf)
        np.maximum(out, _shifted(row, off, -np.inf), out=out)
    return out


def ball_averages(grid, values, r):
    """Cell-quadrature averages of ``values`` over in-grid cells of B(c, r) for every grid centre c."""
    R = r / grid.spacing
    return _ball_sums(values, R) / _ball_sums(np.ones(grid.dims), R)


def maximal_op(f, radii=None):
    """Non-centred maximal function over grid-centred balls (a lower bound of Mf)."""
    grid = f.grid
    a = np.abs(f.values) if f.rank == 0 else f.pointwise_norm()
    out = a.copy()  # the ball of radius h/2 holds only its centre
    for r in radii or ball_radii(grid):
        if r < grid.spacing:
            continue
        np.maximum(out, _disc_max(ball_averages(grid, a, r), r / grid.spacing), out=out)
    return f.with_values(out) if f.rank == 0 else UniformGridField(grid, out)


def ap_constant(omega, p, grid, radii=None):
    """max over grid-centred balls of (avg w)(avg w^(1-p'))^(p-1) (a lower bound of [w]_{A_p})."""
    if not p > 1:
        raise DomainError("p must exceed 1")
    w = make_weight(omega).on_grid(grid)
    w = w / np.max(w)  # the product is scale invariant; this makes constants exact
    pp = p / (p - 1)
    wd = w ** (1 - pp)
    best = 0.0
    for r in radii or ball_radii(grid):
        R = r / grid.spacing
        cnt = _ball_sums(np.ones(grid.dims), R)
        a1 = _ball_sums(w, R) / cnt
        a2 = _ball_sums(wd, R) / cnt
        best = max(best, float(np.max(a1 * a2 ** (p - 1))))
    return best


# ---------------------------------------------------------------- measured bounds


def weighted_norm(values, weight_vals, p, cell_volume):
    a = np.abs(values)
    if a.ndim > weight_vals.ndim:
        a = np.sqrt(np.sum(a**2, axis=tuple(range(weight_vals.ndim, a.ndim))))
    return float((np.sum(a**p * weight_vals) * cell_volume) ** (1.0 / p))


def bump_family(grid, count=20, seed=0):
    """Smooth bumps and modulated bumps of moderate scale inside the grid box."""
    rng = np.random.default_rng(seed)
    lo, hi = grid.lower, grid.upper
    L = float(np.min(hi - lo))
    x = grid.coords()
    out = []
    for k in range(count):
        c = lo + (hi - lo) * rng.uniform(0.35, 0.65, grid.ndim)
        sig = L * rng.uniform(0.15, 0.25)
        g = np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * sig**2))
        if k % 2:
            freq = rng.integers(0, 2, grid.ndim)
            freq[rng.integers(grid.ndim)] = 1
            phase = rng.uniform(0, 2 * math.pi)
            g = g * np.cos(2 * math.pi * np.sum(freq * (x - lo) / L, axis=-1) + phase)
        out.append(UniformGridField(grid, g))
    return out


@dataclass(frozen=True)
class BoundReport:
    eps: tuple
    ratios: np.ndarray  # (fields, eps)
    sup_per_eps: tuple
    sup: float
    sup_variation: float  # max/min over eps of the sup ratio
    max_variation: float  # max over fields of max/min over eps
    skipped: int


def _report(eps, ratios, skipped):
    if ratios.size == 0:
        return BoundReport(tuple(eps), ratios, (), 0.0, 1.0, 1.0, skipped)
    sup_e = ratios.max(axis=0)
    var_f = ratios.max(axis=1) / ratios.min(axis=1)
    return BoundReport(tuple(float(e) for e in eps), ratios, tuple(float(v) for v in sup_e),
                       float(sup_e.max()), float(sup_e.max() / sup_e.min()), float(var_f.max()), skipped)


DEFAULT_EPS = tuple(2.0**-k for k in range(3, 8))


def weighted_bound_ratio(K, p, omega, test_fields, eps_list=DEFAULT_EPS):
    """Ratios ||T_eps f||_{L^p_w} / ||f||_{L^p_w} over fields and eps."""
    grid = test_fields[0].grid
    w = make_weight(omega).on_grid(grid)
    vol = grid.cell_volume
    keep = [f for f in test_fields if weighted_norm(f.values, w, p, vol) > 0]
    if not keep:
        return _report(eps_list, np.zeros((0, len(eps_list))), len(test_fields))
    T = truncated_family(K, eps_list, keep)
    ratios = np.array([[weighted_norm(T[i, q], w, p, vol) / weighted_norm(f.values, w, p, vol)
                        for q in range(len(eps_list))] for i, f in enumerate(keep)])
    return _report(eps_list, ratios, len(test_fields) - len(keep))


def orlicz_bound_ratio(K, nf, test_fields, eps_list=DEFAULT_EPS, kappa=None):
    """Ratios rho_psi(T_eps f) / rho_psi((kappa_1 + kappa_2) f)."""
    if kappa is None:
        kappa = (K.kappa1_est, K.kappa2_est)
    if any(k is None for k in kappa):
        raise DomainError("kernel constants are unset; run sk_check and cz_check first")
    scale = float(sum(kappa))
    keep = [f for f in test_fields if float(modular(nf, f.with_values(scale * f.values))) > 0]
    if not keep:
        return _report(eps_list, np.zeros((0, len(eps_list))), len(test_fields))
    T = truncated_family(K, eps_list, keep)
    ratios = np.array([[float(modular(nf, f.with_values(T[i, q]))) / float(modular(nf, f.with_values(scale * f.values)))
                        for q in range(len(eps_list))] for i, f in enumerate(keep)])
    return _report(eps_list, ratios, len(test_fields) - len(keep))
