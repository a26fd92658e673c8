"""The Bogovskii operator on cubes and measured bounds for its gradient.

For f with zero mean on a cube Q,

    Bf(x) = int f(y) (x - y)/|x - y|^n int_{|x - y|}^inf rho_Q(y + xi (x - y)/|x - y|) xi^(n-1) dxi dy

solves div Bf = f with Bf = 0 on the boundary.  ``rho_Q`` is the mollifier
rescaled to the cube, lambda^-n rho((x - c)/lambda) with lambda the side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .czop import make_weight, weighted_norm
from .errors import DomainError, PreconditionError
from .grid import UniformGrid, UniformGridField, diff_quot, steps_of
from .mollifier import Mollifier, make_mollifier
from .nfunc import modular

__all__ = [
    "Cube",
    "BogovskiiSolution",
    "cube_grid",
    "bogovskii_apply",
    "bogovskii_apply_many",
    "bogovskii_eval",
    "divergence_residual",
    "grad_zero_ext",
    "gradient_bound_ratio",
    "diffquot_bound_ratio",
    "orlicz_bound_ratios",
    "second_difference_bound_check",
    "preset_family",
]

MEAN_RTOL = 1e-10


@dataclass(frozen=True)
class Cube:
    center: tuple
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        object.__setattr__(self, "side", float(self.side))
        if not self.side > 0:
            raise DomainError("cube side must be positive")

    @property
    def ndim(self):
        return len(self.center)

    @property
    def lower(self):
        return np.asarray(self.center) - 0.5 * self.side

    @property
    def upper(self):
        return np.asarray(self.center) + 0.5 * self.side

    def scaled(self, lam):
        return Cube(self.center, self.side * lam)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all((x > self.lower) & (x < self.upper), axis=-1)


def cube_grid(cube, N):
    """Cell-centred grid with N cells per axis on the cube."""
    return UniformGrid.cell_centered(cube.lower, cube.upper, N)


@dataclass(frozen=True)
class BogovskiiSolution:
    f: UniformGridField
    cube: Cube
    v: UniformGridField
    order: int
    mollifier: Mollifier

    @property
    def grid(self):
        return self.f.grid

    @property
    def N(self):
        return self.grid.dims[0]


def _check_grid(f, cube):
    g = f.grid
    if g.ndim != cube.ndim or len(set(g.dims)) != 1:
        raise DomainError("f must live on a cubic grid of the cube's dimension")
    if not (np.allclose(g.lower, cube.lower, atol=1e-12 * cube.side)
            and np.allclose(g.upper, cube.upper, atol=1e-12 * cube.side)):
        raise DomainError("the grid box must coincide with the cube")


def _mean_free(f, project_mean):
    vals = f.values
    total = float(np.sum(vals))
    scale = float(np.sum(np.abs(vals)))
    if abs(total) > MEAN_RTOL * scale:
        if not project_mean:
            raise PreconditionError(
                f"f must have zero mean on the cube (sum {total:.3e}, l1 {scale:.3e}); "
                "pass project_mean=True to subtract the average")
        return f.with_values(vals - vals.mean())
    return f


def _rho_params(cube, moll):
    return np.asarray(cube.center), moll.radius * cube.side, moll.c_norm * cube.side ** (-cube.ndim)


def bogovskii_apply_many(fields, cube, order=16, project_mean=False, mollifier=None, use_numba=None):
    """Apply B to several fields on the same cube grid with one pass over the pairs."""
    if order < 4:
        raise DomainError("inner quadrature order must be at least 4")
    fields = [_mean_free(f, project_mean) for f in fields]
    for f in fields:
        if f.rank != 0:
            raise DomainError("f must be a scalar field")
        _check_grid(f, cube)
    moll = mollifier or make_mollifier(cube.ndim)
    g = fields[0].grid
    pts = g.coords().reshape(-1, g.ndim)
    center, R, amp = _rho_params(cube, moll)
    fv = np.stack([f.values.ravel() for f in fields])
    out = _kernels.bogovskii_sum(pts, pts, fv, center, R, amp, order, g.cell_volume, use_numba)
    sols = []
    for f, o in zip(fields, out):
        v = UniformGridField(g, o.reshape(g.dims + (g.ndim,)))
        sols.append(BogovskiiSolution(f, cube, v, int(order), moll))
    return sols


def bogovskii_apply(f, cube, order=16, project_mean=False, mollifier=None, use_numba=None):
    return bogovskii_apply_many([f], cube, order, project_mean, mollifier, use_numba)[0]


def bogovskii_eval(f, cube, points, order=16, mollifier=None, use_numba=None):
    """Bf at arbitrary points (inside or outside the cube); shape points.shape."""
    _check_grid(f, cube)
    moll = mollifier or make_mollifier(cube.ndim)
    g = f.grid
    pts = np.asarray(points, dtype=float)
    src = g.coords().reshape(-1, g.ndim)
    center, R, amp = _rho_params(cube, moll)
    out = _kernels.bogovskii_sum(pts.reshape(-1, g.ndim), src, f.values.ravel(), center, R, amp,
                                 order, g.cell_volume, use_numba)[0]
    return out.reshape(pts.shape)


def grad_zero_ext(field):
    """Centred differences of a field that vanishes outside the grid box.

    Returns values of shape field.values.shape + (n,) with [..., j] = d_j.
    """
    g = field.grid
    return np.stack([_dzero(field.values, k, g.spacing) for k in range(g.ndim)], axis=-1)


def _dzero(values, k, h):
    pad = [(0, 0)] * values.ndim
    pad[k] = (1, 1)
    p = np.pad(values, pad)
    hi = [slice(None)] * values.ndim
    lo = [slice(None)] * values.ndim
    hi[k] = slice(2, None)
    lo[k] = slice(None, -2)
    return (p[tuple(hi)] - p[tuple(lo)]) / (2.0 * h)


def _grad(sol):
    return grad_zero_ext(sol.v)


def divergence_residual(sol):
    """(||div Bf - f||_2 / ||f||_2, max |div Bf - f|), with the exact zero ghost outside Q.

    When ||f||_2 = 0 the first entry is the absolute residual.
    """
    g = sol.grid
    v = sol.v.values
    div = sum(_dzero(v[..., k], k, g.spacing) for k in range(g.ndim))
    res = div - sol.f.values
    vol = g.cell_volume
    l2 = float(np.sqrt(np.sum(res**2) * vol))
    fl2 = float(np.sqrt(np.sum(sol.f.values**2) * vol))
    return (l2 / fl2 if fl2 > 0 else l2), float(np.max(np.abs(res)))


def _omega(sol, omega):
    if omega is None or omega == "const":
        return np.ones(sol.grid.dims)
    return make_weight(omega, center=sol.cube.center).on_grid(sol.grid)


def gradient_bound_ratio(sol, p=2.0, omega=None):
    """||grad Bf||_{L^p_w(Q)} / ||f||_{L^p_w(Q)}; ``omega`` is centred at the cube centre."""
    w = _omega(sol, omega)
    vol = sol.grid.cell_volume
    den = weighted_norm(sol.f.values, w, p, vol)
    if den == 0:
        raise PreconditionError("zero denominator")
    return weighted_norm(_grad(sol), w, p, vol) / den


def _dq_terms(sol, h, k, sign):
    g = sol.grid
    G = UniformGridField(g, _grad(sol))
    lhs = diff_quot(G, k, h, sign).values
    f = sol.f
    rhs = (np.abs(diff_quot(f, k, h, 1).values) + np.abs(diff_quot(f, k, h, -1).values)
           + np.abs(f.values) / sol.cube.side)
    return lhs, rhs


def diffquot_bound_ratio(sol, p=2.0, omega=None, h=None):
    """max over directions k and signs of ||d_{h,k} grad Bf||_{L^p_w} / || |d+f| + |d-f| + |f|/l(Q) ||_{L^p_w}."""
    g = sol.grid
    h = g.spacing if h is None else h
    steps_of(g, h)
    w = _omega(sol, omega)
    vol = g.cell_volume
    best = 0.0
    for k in range(g.ndim):
        for sign in (1, -1):
            lhs, rhs = _dq_terms(sol, h, k, sign)
            den = weighted_norm(rhs, w, p, vol)
            if den == 0:
                raise PreconditionError("zero denominator")
            best = max(best, weighted_norm(lhs, w, p, vol) / den)
    return best


def orlicz_bound_ratios(sol, nf, h=None):
    """(rho(grad Bf)/rho(f), max_k rho(d grad Bf)/rho(|d+f| + |d-f| + |f|/l(Q)))."""
    g = sol.grid
    vol = g.cell_volume
    G = _grad(sol)
    den = float(modular(nf, np.abs(sol.f.values), vol))
    if den == 0:
        raise PreconditionError("zero denominator")
    r2 = float(modular(nf, np.sqrt(np.sum(G**2, axis=(-2, -1))), vol)) / den
    h = g.spacing if h is None else h
    steps_of(g, h)
    r3 = 0.0
    for k in range(g.ndim):
        for sign in (1, -1):
            lhs, rhs = _dq_terms(sol, h, k, sign)
            d = float(modular(nf, rhs, vol))
            if d == 0:
                raise PreconditionError("zero denominator")
            r3 = max(r3, float(modular(nf, np.sqrt(np.sum(lhs**2, axis=(-2, -1))), vol)) / d)
    return r2, r3


@dataclass(frozen=True)
class SecondDifferenceReport:
    max_ratio: float
    samples: int
    skipped: int
    hessian_sup: float


def second_difference_bound_check(mollifier=None, samples=100_000, seed=0, n=2):
    """max |rho(a) - rho(a+w) - rho(b) + rho(b+w)| / (||D^2 rho|| |w| |a-b|) over random triples."""
    moll = mollifier or make_mollifier(n)
    n = moll.n
    rng = np.random.default_rng(seed)
    R = moll.radius
    a = rng.uniform(-1.2 * R, 1.2 * R, (samples, n))

    def vec(scale_lo, scale_hi):
        u = rng.normal(size=(samples, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return u * np.exp(rng.uniform(np.log(scale_lo), np.log(scale_hi), samples))[:, None]

    w = vec(1e-4 * R, 2 * R)
    b = a + vec(1e-4 * R, 2 * R)
    # include degenerate triples: they must be skipped (both sides vanish)
    w[::1000] = 0.0
    b[500::1000] = a[500::1000]
    num = np.abs(moll(a) - moll(a + w) - moll(b) + moll(b + w))
    den = moll.hessian_sup * np.linalg.norm(w, axis=1) * np.linalg.norm(a - b, axis=1)
    ok = den > 0
    return SecondDifferenceReport(float(np.max(num[ok] / den[ok])), samples, int((~ok).sum()), moll.hessian_sup)


# ---------------------------------------------------------------- presets


FAMILY_1D = ("sin", "cos", "odd")
FAMILY_2D = ("dx", "dy", "dxdy", "sinbump", "xbump")


def _bump1(t, a=0.4):
    """cos^4(pi t / (2a)) on |t| < a, a C^3 bump, and its derivative."""
    inside = np.abs(t) < a
    c = np.cos(np.pi * t / (2 * a))
    s = np.sin(np.pi * t / (2 * a))
    b = np.where(inside, c**4, 0.0)
    db = np.where(inside, -4 * c**3 * s * np.pi / (2 * a), 0.0)
    return b, db


def preset_family(cube, N, names=None):
    """Zero-mean analytic test functions f(x) = F((x - c)/l) on a cube, exactly mean free on the grid.

    1-D presets: ``sin``, ``cos``, ``odd``.  2-D presets: ``dx``, ``dy``, ``dxdy``,
    ``sinbump``, ``xbump`` (the default family) and ``dgauss``, a narrower
    profile that is under-resolved on coarse grids.  Every 2-D preset is odd in
    some coordinate about the cube centre, so grid sums vanish to rounding.
    """
    g = cube_grid(cube, N)
    y = (g.coords() - np.asarray(cube.center)) / cube.side
    n = cube.ndim
    if n == 1:
        t = y[..., 0]
        table = {
            "sin": np.sin(2 * np.pi * t),
            "cos": np.cos(2 * np.pi * t),
            "odd": t * (1 - 4 * t**2) ** 2 * 8,
        }
    elif n == 2:
        b1, d1 = _bump1(y[..., 0])
        b2, d2 = _bump1(y[..., 1])
        r2 = np.sum(y**2, axis=-1)
        table = {
            "dx": d1 * b2,
            "dy": b1 * d2,
            "dxdy": d1 * d2,
            "sinbump": np.sin(2 * np.pi * y[..., 0]) * b1 * b2,
            "xbump": 8.0 * y[..., 0] * b1 * b2,
            "dgauss": -y[..., 0] / 0.0225 * np.exp(-r2 / 0.045) * b1 * b2,
        }
    else:
        raise DomainError("presets exist for n = 1, 2")
    if names is None:
        names = FAMILY_1D if n == 1 else FAMILY_2D
    out = {}
    for name in names:
        if name not in table:
            raise DomainError(f"unknown preset {name!r}")
        out[name] = UniformGridField(g, table[name])
    return out

