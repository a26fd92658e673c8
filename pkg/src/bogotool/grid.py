"""Uniform cube grids, grid fields and discrete difference quotients.

Grid points are the centres of congruent cells of side ``spacing``; sums of
point values times ``spacing**n`` are midpoint quadratures over the union of
cells (the grid *box*).  Fields are extended by zero outside the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError, PreconditionError

__all__ = [
    "UniformGrid",
    "UniformGridField",
    "steps_of",
    "shift",
    "inner_mask",
    "diff_quot",
    "delta_quot",
    "gradient",
    "sym_gradient",
    "divergence",
    "curl2d",
    "commute_check",
    "product_rule_check",
    "partial_integration_check",
    "modular_dq_inequality",
    "ANALYTIC_FAMILY",
    "analytic_family",
]


@dataclass(frozen=True)
class UniformGrid:
    origin: tuple
    spacing: float
    dims: tuple

    def __post_init__(self):
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        dims = tuple(int(d) for d in np.atleast_1d(self.dims))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", float(self.spacing))
        if len(origin) != len(dims):
            raise DomainError("origin and dims must have the same length")
        if not self.spacing > 0:
            raise DomainError("spacing must be positive")
        if any(d < 2 for d in dims):
            raise DomainError("need at least 2 points per axis")

    @classmethod
    def cell_centered(cls, lower, upper, cells):
        """Grid whose points are the centres of ``cells`` cells per axis of a box."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = max(lower.size, upper.size, np.size(cells))
        lower = np.broadcast_to(lower, (n,))
        upper = np.broadcast_to(upper, (n,))
        cells = np.broadcast_to(np.atleast_1d(cells), (n,)).astype(int)
        h = (upper - lower) / cells
        if not np.allclose(h, h[0], rtol=1e-12, atol=0):
            raise DomainError("cells must be cubes (equal spacing on every axis)")
        return cls(tuple(lower + 0.5 * h[0]), float(h[0]), tuple(cells))

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def cell_volume(self):
        return self.spacing**self.ndim

    @property
    def lower(self):
        return np.asarray(self.origin) - 0.5 * self.spacing

    @property
    def upper(self):
        return np.asarray(self.origin) + (np.asarray(self.dims) - 0.5) * self.spacing

    def axis(self, k):
        return self.origin[k] + self.spacing * np.arange(self.dims[k])

    def coords(self):
        """Point coordinates, shape ``dims + (n,)``."""
        mesh = np.meshgrid(*(self.axis(k) for k in range(self.ndim)), indexing="ij")
        return np.stack(mesh, axis=-1)

    def box_distance(self, points=None):
        """Distance of points (default: grid points) to the boundary of the grid box."""
        x = self.coords() if points is None else np.asarray(points, dtype=float)
        return np.min(np.minimum(x - self.lower, self.upper - x), axis=-1)

    def zeros(self, rank=0):
        return UniformGridField(self, np.zeros(self.dims + (self.ndim,) * rank))

    def sample(self, fn):
        """Evaluate ``fn(coords)`` (coords of shape dims+(n,)) into a field."""
        return UniformGridField(self, np.asarray(fn(self.coords()), dtype=float))


@dataclass(frozen=True)
class UniformGridField:
    grid: UniformGrid
    values: np.ndarray
    support_box: tuple | None = dc_field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        g = self.grid
        if vals.shape[: g.ndim] != g.dims:
            raise DomainError(f"values shape {vals.shape} does not match grid dims {g.dims}")
        comp = vals.shape[g.ndim:]
        if len(comp) > 2 or any(c != g.ndim for c in comp):
            raise DomainError("component axes must have length n (vector) or n x n (tensor)")
        if self.support_box is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.support_box)
            x = g.coords()
            outside = np.any((x < lo) | (x > hi), axis=-1)
            vals[outside] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def rank(self):
        return self.values.ndim - self.grid.ndim

    def with_values(self, values):
        return UniformGridField(self.grid, values)

    def pointwise_norm(self):
        """|F(x)| (Euclidean / Frobenius over the component axes)."""
        if self.rank == 0:
            return np.abs(self.values)
        axes = tuple(range(self.grid.ndim, self.values.ndim))
        return np.sqrt(np.sum(self.values**2, axis=axes))

    def integral(self):
        return np.sum(self.values, axis=tuple(range(self.grid.ndim))) * self.grid.cell_volume

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, other):
        return self.with_values(self.values * _vals(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


def _vals(x):
    return x.values if isinstance(x, UniformGridField) else x


# ---------------------------------------------------------------------------
# shifts and difference quotients


def steps_of(grid, h):
    """Number of grid steps in h; h must be a positive integer multiple of the spacing."""
    if not h > 0:
        raise DomainError("h must be positive")
    m = h / grid.spacing
    mi = int(round(m))
    if mi < 1 or abs(m - mi) > 1e-9 * max(1.0, m):
        raise DomainError(f"h={h} is not an integer multiple of the grid spacing {grid.spacing}")
    return mi


def shift(values, axis, m, sign=1):
    """values(x + sign*m*e_axis) with zero extension outside the array."""
    out = np.zeros_like(values)
    n = values.shape[axis]
    if m >= n:
        return out
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if sign > 0:
        src[axis] = slice(m, n)
        dst[axis] = slice(0, n - m)
    else:
        src[axis] = slice(0, n - m)
        dst[axis] = slice(m, n)
    out[tuple(dst)] = values[tuple(src)]
    return out


def inner_mask(grid, k, m, sign=1):
    """Points whose shift by sign*m*e_k stays on the grid."""
    idx = np.arange(grid.dims[k]) + sign * m
    ok = (idx >= 0) & (idx < grid.dims[k])
    shape = [1] * grid.ndim
    shape[k] = grid.dims[k]
    return np.broadcast_to(ok.reshape(shape), grid.dims)


def diff_quot(field, k, h, sign=1):
    """d^{+-}_{h,k} F = (F(x +- h e_k) - F(x)) / h, F zero outside the grid."""
    if not 0 <= k < field.grid.ndim:
        raise DomainError(f"axis {k} out of range")
    m = steps_of(field.grid, h)
    v = field.values
    return field.with_values((shift(v, k, m, sign) - v) / h)


def delta_quot(field, k, h, sign=1):
    """Delta^{+-}_{h,k} F = h d^{+-}_{h,k} F."""
    m = steps_of(field.grid, h)
    v = field.values
    return field.with_values(shift(v, k, m, sign) - v)


# ---------------------------------------------------------------------------
# differential operators


def _partial(values, k, h, scheme):
    if scheme == "centered":
        return np.gradient(values, h, axis=k, edge_order=2)
    if scheme == "forward":
        return (shift(values, k, 1, 1) - values) / h
    if scheme == "backward":
        return (values - shift(values, k, 1, -1)) / h
    raise ValueError(f"unknown scheme {scheme!r}")


def gradient(field, scheme="centered"):
    """Gradient appended as a trailing axis: grad F[..., j] = d_j F.

    ``centered``: second-order centred differences inside, second-order
    one-sided differences on the boundary layer.
    """
    g = field.grid
    if field.rank >= 2:
        raise DomainError("gradient of a tensor field is not supported")
    parts = [_partial(field.values, k, g.spacing, scheme) for k in range(g.ndim)]
    return field.with_values(np.stack(parts, axis=-1))


def sym_gradient(u, scheme="centered"):
    if u.rank != 1:
        raise DomainError("sym_gradient expects a vector field")
    G = gradient(u, scheme).values
    return u.with_values(0.5 * (G + np.swapaxes(G, -1, -2)))


def divergence(u, scheme="centered"):
    if u.rank != 1:
        raise DomainError("divergence expects a vector field")
    g = u.grid
    total = sum(_partial(u.values[..., k], k, g.spacing, scheme) for k in range(g.ndim))
    return UniformGridField(g, total)


def curl2d(psi, scheme="centered"):
    """u = (d_2 psi, -d_1 psi) for a scalar field on a 2D grid."""
    g = psi.grid
    if g.ndim != 2 or psi.rank != 0:
        raise DomainError("curl2d expects a scalar field on a 2D grid")
    u1 = _partial(psi.values, 1, g.spacing, scheme)
    u2 = -_partial(psi.values, 0, g.spacing, scheme)
    return UniformGridField(g, np.stack([u1, u2], axis=-1))


# ---------------------------------------------------------------------------
# identity checks


def commute_check(field, k, h, sign=1):
    """max |grad(d F) - d(grad F)| where both sides use the centred stencil exactly."""
    g = field.grid
    m = steps_of(g, h)
    lhs = gradient(diff_quot(field, k, h, sign)).values
    rhs = diff_quot(gradient(field), k, h, sign).values
    mask = np.ones(g.dims, dtype=bool)
    for j in range(g.ndim):
        idx = np.arange(g.dims[j])
        ok = (idx >= 1) & (idx <= g.dims[j] - 2)
        if j == k:
            ok &= (idx + sign * m >= 1) & (idx + sign * m <= g.dims[j] - 2)
        shape = [1] * g.ndim
        shape[j] = g.dims[j]
        mask &= ok.reshape(shape)
    if not mask.any():
        raise DomainError("no point where both stencils are interior")
    diff = np.abs(lhs - rhs)[mask]
    return float(diff.max()) if diff.size else 0.0


def product_rule_check(F, G, k, h, sign=1):
    m = steps_of(F.grid, h)
    fg = F.with_values(F.values * G.values)
    lhs = diff_quot(fg, k, h, sign).values
    rhs = shift(F.values, k, m, sign) * diff_quot(G, k, h, sign).values + diff_quot(F, k, h, sign).values * G.values
    return float(np.max(np.abs(lhs - rhs)))


def _touches_margin(values, k, m):
    n = values.shape[k]
    lo = np.take(values, np.arange(0, min(m, n)), axis=k)
    hi = np.take(values, np.arange(max(n - m, 0), n), axis=k)
    return np.any(lo != 0) or np.any(hi != 0)


def partial_integration_check(F, G, h, k):
    """|sum F d+G - sum d-F G| h^n for fields vanishing on a margin of width h."""
    m = steps_of(F.grid, h)
    if _touches_margin(F.values, k, m) or _touches_margin(G.values, k, m):
        raise PreconditionError("F and G must vanish on a margin of width h along the shift axis")
    lhs = np.sum(F.values * diff_quot(G, k, h, +1).values)
    rhs = np.sum(diff_quot(F, k, h, -1).values * G.values)
    return float(abs(lhs - rhs) * F.grid.cell_volume)


@dataclass(frozen=True)
class ModularInequality:
    lhs: float
    rhs: float
    passed: bool


def modular_dq_inequality(psi, F, k, h, h0, dF, sign=1, rtol=1e-3):
    """Compare sum_{E_h0} psi(|d F|) with sum_E psi(|d_k F|) (both times h^n).

    ``dF`` is the analytic partial derivative d_k F sampled on the grid; E is
    the grid box and E_h0 the points at distance > h0 from its boundary.
    """
    if not 0 < h <= h0:
        raise DomainError("need 0 < h <= h0")
    g = F.grid
    inner = g.box_distance() > h0
    if not inner.any():
        raise DomainError("E_h0 is empty")
    dq = diff_quot(F, k, h, sign)
    lhs = float(np.sum(psi(dq.pointwise_norm()[inner])) * g.cell_volume)
    rhs = float(np.sum(psi(dF.pointwise_norm())) * g.cell_volume)
    return ModularInequality(lhs, rhs, lhs <= rhs * (1 + rtol))


# ---------------------------------------------------------------------------
# analytic test functions on the unit square: (value, d/dx, d/dy)

ANALYTIC_FAMILY = {
    "sincos": (
        lambda x, y: np.sin(2 * np.pi * x) * np.cos(np.pi * y),
        lambda x, y: 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(np.pi * y),
        lambda x, y: -np.pi * np.sin(2 * np.pi * x) * np.sin(np.pi * y),
    ),
    "gauss": (
        lambda x, y: np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / 0.05),
        lambda x, y: -2 * (x - 0.4) / 0.05 * np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / 0.05),
        lambda x, y: -2 * (y - 0.6) / 0.05 * np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / 0.05),
    ),
    "cubic": (
        lambda x, y: x**2 * y - y**3,
        lambda x, y: 2 * x * y,
        lambda x, y: x**2 - 3 * y**2,
    ),
    "tanh": (
        lambda x, y: np.tanh(4 * (x - 0.5)) * (1 + y),
        lambda x, y: 4 * (1 - np.tanh(4 * (x - 0.5)) ** 2) * (1 + y),
        lambda x, y: np.tanh(4 * (x - 0.5)),
    ),
    "log": (
        lambda x, y: np.log(2 + x + y**2),
        lambda x, y: 1 / (2 + x + y**2),
        lambda x, y: 2 * y / (2 + x + y**2),
    ),
}


def analytic_family(grid, names=None):
    """{name: (F, (d_1 F, d_2 F))} sampled on a 2-D grid."""
    if grid.ndim != 2:
        raise DomainError("the analytic family is two-dimensional")
    x = grid.coords()
    out = {}
    for name in names or ANALYTIC_FAMILY:
        f, fx, fy = ANALYTIC_FAMILY[name]
        vals = [UniformGridField(grid, fn(x[..., 0], x[..., 1]) * np.ones(grid.dims)) for fn in (f, fx, fy)]
        out[name] = (vals[0], tuple(vals[1:]))
    return out
