"""Power-law Stokes flow on the unit square by energy minimisation over stream functions.

Discretisation (mesh width h = 1/N):

* psi lives on the nodes (i h, j h), i, j = 0..N, and vanishes on the two
  outer node layers, which imposes u = 0 on the boundary;
* u1 = d_2 psi on the horizontal edge midpoints, u2 = -d_1 psi on the vertical
  ones, so the cell divergence d_1 u1 + d_2 u2 vanishes identically;
* D11 = d_1 u1 and D22 = d_2 u2 live on the cells, the shear
  (d_2 u1 + d_1 u2)/2 on the nodes;
* the energy is  mu h^2 sum_cells 1/4 sum_corners phi(|D|) - h^2 sum f.u,
  where each corner term uses the cell normal strains and the corner shear.

The energy is strictly convex for delta > 0 (or p = 2) and is minimised by a
damped Newton method with Armijo backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import DomainError, PreconditionError
from .grid import UniformGrid, UniformGridField, diff_quot, steps_of
from .mollifier import make_mollifier
from .nfunc import NFunctionPD, conjugate_eval, phi_eval
from .tensor import StressModel, calibrate, f_assoc, frob, stress

__all__ = [
    "PStokesProblem",
    "PStokesSolution",
    "CutoffSpec",
    "vortex_force",
    "discrete_energy",
    "energy_change",
    "energy_gradient",
    "gradient_fd_check",
    "solve",
    "solve_linear_oracle",
    "weak_residual",
    "apriori_ratio",
    "make_cutoff",
    "interior_regularity_check",
    "h1_seminorm",
]


def vortex_force(amplitude=10.0, sigma=0.2, center=(0.5, 0.5)):
    """f = A curl g for a Gaussian g: a divergence-free swirl."""
    c = np.asarray(center, dtype=float)

    def f(x):
        d = np.asarray(x, dtype=float) - c
        g = np.exp(-np.sum(d * d, axis=-1) / (2 * sigma**2))
        return amplitude * np.stack([-d[..., 1] * g, d[..., 0] * g], axis=-1) / sigma**2

    return f


def zero_force(x):
    return np.zeros(np.shape(x))


FORCES = {"vortex": vortex_force, "zero": lambda: zero_force}


@dataclass(frozen=True)
class PStokesProblem:
    model: StressModel
    force: Callable
    N: int
    side: float = 1.0

    def __post_init__(self):
        p, d = self.model.p, self.model.delta
        if not 1 < p <= 2:
            raise DomainError("p must lie in (1, 2]")
        if d < 0:
            raise DomainError("delta must be nonnegative")
        if self.N < 6:
            raise DomainError("need N >= 6")
        object.__setattr__(self, "_ops", _operators(self.N, self.side / self.N))
        ops = self._ops
        fe1 = self.force(ops.edge1_pts)[..., 0]
        fe2 = self.force(ops.edge2_pts)[..., 1]
        if not (np.all(np.isfinite(fe1)) and np.all(np.isfinite(fe2))):
            raise DomainError("force must be finite")
        # gradient of the load term h^2 sum f.u with respect to the unknowns
        load = ops.h**2 * (ops.U1.T @ fe1.ravel() + ops.U2.T @ fe2.ravel())
        object.__setattr__(self, "_load", load)

    @property
    def h(self):
        return self.side / self.N

    @property
    def nf(self):
        return self.model.nf

    @property
    def cell_grid(self):
        return UniformGrid.cell_centered((0.0, 0.0), (self.side, self.side), self.N)

    def force_cells(self):
        g = self.cell_grid
        return UniformGridField(g, self.force(g.coords()))

    @property
    def load_norm(self):
        return float(np.linalg.norm(self._load))


# ---------------------------------------------------------------- operators


@dataclass(frozen=True)
class _Ops:
    N: int
    h: float
    P: sparse.csr_matrix  # unknowns -> all nodes
    U1: sparse.csr_matrix
    U2: sparse.csr_matrix
    D11: sparse.csr_matrix  # unknowns -> cells
    D22: sparse.csr_matrix
    G21: sparse.csr_matrix  # d_2 u1 on all nodes
    G12: sparse.csr_matrix  # d_1 u2 on all nodes
    S: sparse.csr_matrix  # shear on all nodes
    corners: tuple  # nodes -> cells selections
    B: tuple  # per corner: stacked (D11, D22, sqrt2 * shear at corner)
    edge1_pts: np.ndarray
    edge2_pts: np.ndarray


def _d1(m, h):
    """(m x m+1) forward difference."""
    return sparse.diags([-np.ones(m), np.ones(m)], [0, 1], shape=(m, m + 1)) / h


def _operators(N, h):
    n1 = N + 1
    I_n1 = sparse.identity(n1, format="csr")
    I_N = sparse.identity(N, format="csr")
    keep = np.arange(2, N - 1)
    sel = sparse.csr_matrix((np.ones(keep.size), (keep, np.arange(keep.size))), shape=(n1, keep.size))
    P = sparse.kron(sel, sel, format="csr")
    D = _d1(N, h)
    U1 = sparse.kron(I_n1, D, format="csr") @ P  # (N+1) x N edges
    U2 = -sparse.kron(D, I_n1, format="csr") @ P  # N x (N+1) edges
    D11 = sparse.kron(D, I_N, format="csr") @ U1
    D22 = sparse.kron(I_N, D, format="csr") @ U2
    # node derivatives with the zero extension of u outside the square
    Dn = sparse.diags([-np.ones(N), np.ones(N)], [-1, 0], shape=(n1, N), format="csr") / h
    G21 = sparse.kron(I_n1, Dn, format="csr") @ U1
    G12 = sparse.kron(Dn, I_n1, format="csr") @ U2
    S = 0.5 * (G21 + G12)
    T0 = sparse.eye(N, n1, 0, format="csr")
    T1 = sparse.eye(N, n1, 1, format="csr")
    corners = tuple(sparse.kron(a, b, format="csr") for a in (T0, T1) for b in (T0, T1))
    r2 = np.sqrt(2.0)
    B = tuple(sparse.vstack([D11, D22, r2 * (C @ S)], format="csr") for C in corners)
    xs = h * np.arange(n1)
    xm = h * (np.arange(N) + 0.5)
    e1 = np.stack(np.meshgrid(xs, xm, indexing="ij"), -1)
    e2 = np.stack(np.meshgrid(xm, xs, indexing="ij"), -1)
    return _Ops(N, h, P, U1, U2, D11, D22, G21, G12, S, corners, B, e1, e2)


def _unknowns(problem, psi):
    """Map a node array (N+1, N+1) or an unknown vector to the unknown vector."""
    ops = problem._ops
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 1:
        if psi.size != ops.P.shape[1]:
            raise DomainError("wrong number of unknowns")
        return psi
    if psi.shape != (ops.N + 1, ops.N + 1):
        raise DomainError("psi must be given on the (N+1) x (N+1) nodes")
    x = ops.P.T @ psi.ravel()
    if not np.allclose(ops.P @ x, psi.ravel(), rtol=0, atol=0):
        raise PreconditionError("psi must vanish on the two outer node layers")
    return x


def _nodes(problem, x):
    ops = problem._ops
    return (ops.P @ x).reshape(ops.N + 1, ops.N + 1)


def _corner_strains(problem, x):
    return [(B @ x).reshape(3, -1) for B in problem._ops.B]


def discrete_energy(problem, psi):
    """J(psi) = mu h^2 sum 1/4 sum_corners phi(|Du|) - h^2 sum f.u."""
    x = _unknowns(problem, psi)
    h2 = problem.h**2
    nf = problem.nf
    e = 0.0
    for v in _corner_strains(problem, x):
        e += np.sum(phi_eval(nf, np.sqrt(np.sum(v * v, axis=0))))
    return float(problem.model.mu * h2 * 0.25 * e - problem._load @ x)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def energy_change(problem, psi, dpsi):
    """J(psi + dpsi) - J(psi), accurate relative to the change itself.

    Per corner term, |v + w| - |v| = (2 v.w + w.w) / (|v + w| + |v|) and the
    increment of phi is a Gauss rule on phi' for small increments, so steps
    whose effect is far below the rounding level of J itself stay resolvable.
    """
    x = _unknowns(problem, psi)
    dx = _unknowns(problem, dpsi)
    nf = problem.nf
    p, d = problem.model.p, problem.model.delta
    total = 0.0
    for B in problem._ops.B:
        v = (B @ x).reshape(3, -1)
        w = (B @ dx).reshape(3, -1)
        t0 = np.sqrt(np.sum(v * v, axis=0))
        t1 = np.sqrt(np.sum((v + w) ** 2, axis=0))
        den = t0 + t1
        with np.errstate(divide="ignore", invalid="ignore"):
            dt = np.where(den > 0, np.sum(w * (2 * v + w), axis=0) / den, 0.0)
        small = np.abs(dt) <= 1e-3 * (d + t0)
        inc = np.empty_like(t0)
        big = ~small
        inc[big] = phi_eval(nf, t1[big]) - phi_eval(nf, t0[big])
        if small.any():
            a, b = t0[small], dt[small]
            s = a[:, None] + 0.5 * b[:, None] * (1.0 + _GL_NODES[None, :])
            dphi = (d + s) ** (p - 2.0) * s if p != 2 else s
            inc[small] = 0.5 * b * (dphi @ _GL_WEIGHTS)
        total += float(np.sum(inc))
    return float(problem.model.mu * problem.h**2 * 0.25 * total - problem._load @ dx)


def _flux_weight(problem, t):
    # phi'(t)/t = (delta + t)^(p-2), finite at t = 0 when delta > 0 or p = 2
    p, d = problem.model.p, problem.model.delta
    if p == 2:
        return np.ones_like(t)
    return (d + t) ** (p - 2.0)


def _gradient_vec(problem, x):
    h2 = problem.h**2
    g = np.zeros_like(x)
    for B, v in zip(problem._ops.B, _corner_strains(problem, x)):
        t = np.sqrt(np.sum(v * v, axis=0))
        g += B.T @ (v * _flux_weight(problem, t)).ravel()
    return problem.model.mu * h2 * 0.25 * g - problem._load


def _refuse_nonsmooth(problem):
    if problem.model.delta == 0 and problem.model.p < 2:
        raise DomainError("the energy is not differentiable at Du = 0 for delta = 0, p < 2")


def energy_gradient(problem, psi):
    """Exact gradient of :func:`discrete_energy` as a node array (zero on the margin)."""
    _refuse_nonsmooth(problem)
    return _nodes(problem, _gradient_vec(problem, _unknowns(problem, psi)))


def _hessian(problem, x):
    p, d = problem.model.p, problem.model.delta
    h2 = problem.h**2
    H = None
    for B, v in zip(problem._ops.B, _corner_strains(problem, x)):
        t = np.sqrt(np.sum(v * v, axis=0))
        a = _flux_weight(problem, t)
        if p == 2:
            b = np.zeros_like(t)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                b = np.where(t > 0, (p - 2.0) * (d + t) ** (p - 3.0) / t, 0.0)
        m = v.shape[1]
        rows, cols, vals = [], [], []
        idx = np.arange(m)
        for i in range(3):
            for j in range(3):
                val = b * v[i] * v[j] + (a if i == j else 0.0)
                rows.append(i * m + idx)
                cols.append(j * m + idx)
                vals.append(val)
        W = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(3 * m, 3 * m))
        term = B.T @ W @ B
        H = term if H is None else H + term
    return problem.model.mu * h2 * 0.25 * H


@dataclass(frozen=True)
class PStokesSolution:
    problem: PStokesProblem
    psi: np.ndarray  # node values
    energy_history: tuple
    grad_norm: float
    tolerance: float
    converged: bool
    iterations: int
    method: str
    energy_changes: tuple = ()  # accurate J(x_k+1) - J(x_k) of every accepted step

    @property
    def x(self):
        return _unknowns(self.problem, self.psi)

    def velocity(self):
        """(u1 on horizontal edges, u2 on vertical edges)."""
        ops = self.problem._ops
        x = self.x
        N = ops.N
        return (ops.U1 @ x).reshape(N + 1, N), (ops.U2 @ x).reshape(N, N + 1)

    def velocity_cells(self):
        u1, u2 = self.velocity()
        v = np.stack([0.5 * (u1[1:] + u1[:-1]), 0.5 * (u2[:, 1:] + u2[:, :-1])], axis=-1)
        return UniformGridField(self.problem.cell_grid, v)

    def divergence(self):
        ops = self.problem._ops
        x = self.x
        return ((ops.D11 + ops.D22) @ x).reshape(ops.N, ops.N)

    def grad_u(self):
        """Cell field of the velocity gradient, [..., i, j] = d_j u_i (node shears averaged to cells)."""
        ops = self.problem._ops
        x = self.x
        N = ops.N
        avg = sum(ops.corners) * 0.25
        g = np.empty((N, N, 2, 2))
        g[..., 0, 0] = (ops.D11 @ x).reshape(N, N)
        g[..., 1, 1] = (ops.D22 @ x).reshape(N, N)
        g[..., 0, 1] = (avg @ (ops.G21 @ x)).reshape(N, N)
        g[..., 1, 0] = (avg @ (ops.G12 @ x)).reshape(N, N)
        return UniformGridField(self.problem.cell_grid, g)

    def Du(self):
        G = self.grad_u()
        return G.with_values(0.5 * (G.values + np.swapaxes(G.values, -1, -2)))

    def F(self):
        D = self.Du()
        return D.with_values(f_assoc(self.problem.model, D.values))


def solve(problem, tol=1e-10, max_iters=200, method="newton", psi0=None):
    """Minimise the discrete energy from psi0 (default 0).

    Stops when ||grad J||_2 <= tol (1 + ||load||_2), where the load is the
    gradient of the forcing term.  Steps are accepted only if they decrease
    the energy (Armijo condition with c = 1e-4, evaluated on the accurately
    computed energy change); the history accumulates these changes, which
    are also kept in ``energy_changes`` since the last ones can fall below
    the rounding level of the energy itself.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    _refuse_nonsmooth(problem)
    if method not in ("newton", "gd"):
        raise DomainError("method must be 'newton' or 'gd'")
    x = np.zeros(problem._ops.P.shape[1]) if psi0 is None else _unknowns(problem, psi0).copy()
    target = tol * (1.0 + problem.load_norm)
    E = discrete_energy(problem, x)
    history = [E]
    changes = []
    g = _gradient_vec(problem, x)
    gn = float(np.linalg.norm(g))
    it = 0
    step = 1.0
    while gn > target and it < max_iters:
        it += 1
        if method == "newton":
            d = -splinalg.spsolve(_hessian(problem, x).tocsc(), g)
            alpha = 1.0
        else:
            d = -g
            alpha = step
        slope = float(g @ d)
        if not slope < 0:
            break
        accepted = False
        for _ in range(60):
            dE = energy_change(problem, x, alpha * d)
            if dE <= 1e-4 * alpha * slope:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            break
        x = x + alpha * d
        E = E + dE
        history.append(E)
        changes.append(dE)
        g = _gradient_vec(problem, x)
        gn = float(np.linalg.norm(g))
        step = min(alpha * 2.0, 1e12)
    return PStokesSolution(problem, _nodes(problem, x), tuple(history), gn, target,
                           gn <= target, it, method, tuple(changes))


# ---------------------------------------------------------------- linear oracle


def smooth_test_psi(problem, rng):
    """Random smooth node field: (sin(pi x) sin(pi y))^2 times a random bilinear."""
    ops = problem._ops
    xs = np.linspace(0.0, problem.side, ops.N + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    a = rng.normal(size=4)
    L = problem.side
    vals = (np.sin(np.pi * X / L) * np.sin(np.pi * Y / L)) ** 2 * (a[0] + a[1] * X + a[2] * Y + a[3] * X * Y)
    return _nodes(problem, ops.P.T @ vals.ravel())


def gradient_fd_check(problem, psi=None, num_dirs=10, eps=1e-5, seed=0):
    """Max relative error between <grad J, d> and a centred difference of J.

    Evaluated at ``psi`` (a random smooth field by default) along random
    smooth directions; the difference uses :func:`energy_change`.
    """
    rng = np.random.default_rng(seed)
    if psi is None:
        psi = smooth_test_psi(problem, rng)
    g = energy_gradient(problem, psi)
    worst = 0.0
    for _ in range(num_dirs):
        d = smooth_test_psi(problem, rng)
        fd = (energy_change(problem, psi, eps * d) - energy_change(problem, psi, -eps * d)) / (2 * eps)
        an = float(np.sum(g * d))
        worst = max(worst, abs(an - fd) / max(abs(an), 1e-300))
    return worst


def _strain_slices(psi, h):
    """Cell normal strains and node shears of a node stream function by array slicing."""
    u1 = (psi[:, 1:] - psi[:, :-1]) / h  # (N+1, N)
    u2 = -(psi[1:, :] - psi[:-1, :]) / h  # (N, N+1)
    d11 = (u1[1:] - u1[:-1]) / h
    d22 = (u2[:, 1:] - u2[:, :-1]) / h
    u1p = np.pad(u1, ((0, 0), (1, 1)))
    u2p = np.pad(u2, ((1, 1), (0, 0)))
    s = 0.5 * ((u1p[:, 1:] - u1p[:, :-1]) / h + (u2p[1:] - u2p[:-1]) / h)  # nodes
    return u1, u2, d11, d22, s


def solve_linear_oracle(problem):
    """Direct solve of the quadratic case (p = 2, delta = 0) from an independently probed dense system."""
    if not (problem.model.p == 2 and problem.model.delta == 0):
        raise DomainError("the linear oracle needs p = 2, delta = 0")
    N, h = problem.N, problem.h
    free = [(i, j) for i in range(2, N - 1) for j in range(2, N - 1)]
    cols = []
    for i, j in free:
        e = np.zeros((N + 1, N + 1))
        e[i, j] = 1.0
        _, _, d11, d22, s = _strain_slices(e, h)
        corners = [s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]]
        cols.append(np.concatenate([np.concatenate([d11.ravel(), d22.ravel(), np.sqrt(2) * c.ravel()])
                                    for c in corners]))
    M = np.array(cols).T
    A = problem.model.mu * h * h * 0.25 * (M.T @ M)
    ops = problem._ops
    fe1 = problem.force(ops.edge1_pts)[..., 0]
    fe2 = problem.force(ops.edge2_pts)[..., 1]
    b = np.empty(len(free))
    for k, (i, j) in enumerate(free):
        e = np.zeros((N + 1, N + 1))
        e[i, j] = 1.0
        u1, u2, *_ = _strain_slices(e, h)
        b[k] = h * h * (np.sum(fe1 * u1) + np.sum(fe2 * u2))
    y = np.linalg.solve(A, b)
    psi = np.zeros((N + 1, N + 1))
    for k, (i, j) in enumerate(free):
        psi[i, j] = y[k]
    return psi


def h1_seminorm(problem, psi):
    """sqrt(h^2 sum over cells and nodes of the squared velocity derivatives)."""
    _, _, d11, d22, _ = _strain_slices(psi, problem.h)
    u1, u2, *_ = _strain_slices(psi, problem.h)
    h = problem.h
    u1p = np.pad(u1, ((0, 0), (1, 1)))
    u2p = np.pad(u2, ((1, 1), (0, 0)))
    g21 = (u1p[:, 1:] - u1p[:, :-1]) / h
    g12 = (u2p[1:] - u2p[:-1]) / h
    return float(h * np.sqrt(np.sum(d11**2) + np.sum(d22**2) + np.sum(g21**2) + np.sum(g12**2)))


# ---------------------------------------------------------------- certificates


def _eta_bump(N, h, rng):
    c = rng.uniform(0.3, 0.7, 2)
    r = rng.uniform(0.15, 0.25)
    xs = h * np.arange(N + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    q = ((X - c[0]) ** 2 + (Y - c[1]) ** 2) / r**2
    with np.errstate(divide="ignore", over="ignore"):
        eta = np.where(q < 1, np.exp(-1.0 / np.where(q < 1, 1 - q, 1.0)), 0.0)
    freq = rng.integers(0, 3, 2)
    eta = eta * np.cos(2 * np.pi * (freq[0] * X + freq[1] * Y) + rng.uniform(0, 2 * np.pi))
    eta[:2] = 0
    eta[-2:] = 0
    eta[:, :2] = 0
    eta[:, -2:] = 0
    return eta


def weak_residual(solution, num_tests=10, seed=0):
    """max over test fields w = curl eta of |sum S(Du).Dw - sum f.w| h^2 / ||grad w||_{L^p'}.

    The sums use the same corner quadrature as the energy; S is evaluated by
    the tensor module on the assembled strain tensors.
    """
    problem = solution.problem
    model = problem.model
    h = problem.h
    N = problem.N
    rng = np.random.default_rng(seed)
    _, _, d11, d22, s = _strain_slices(solution.psi, h)
    ops = problem._ops
    fe1 = problem.force(ops.edge1_pts)[..., 0]
    fe2 = problem.force(ops.edge2_pts)[..., 1]
    pp = model.p / (model.p - 1.0)

    def corner_tensors(d11, d22, s):
        out = []
        for c in (s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]):
            T = np.empty(d11.shape + (2, 2))
            T[..., 0, 0], T[..., 1, 1] = d11, d22
            T[..., 0, 1] = T[..., 1, 0] = c
            out.append(T)
        return out

    Du = corner_tensors(d11, d22, s)
    Sc = [stress(model, T) for T in Du]
    worst = 0.0
    for _ in range(num_tests):
        eta = _eta_bump(N, h, rng)
        w1, w2, e11, e22, es = _strain_slices(eta, h)
        Dw = corner_tensors(e11, e22, es)
        a = 0.25 * sum(np.sum(S * T) for S, T in zip(Sc, Dw)) * h * h
        b = (np.sum(fe1 * w1) + np.sum(fe2 * w2)) * h * h
        gw = h1_grad_lp(eta, h, pp)
        worst = max(worst, abs(a - b) / gw)
    return worst


def h1_grad_lp(psi, h, q):
    """||grad curl psi||_{L^q} with the cell/node split of the velocity derivatives."""
    u1, u2, d11, d22, _ = _strain_slices(psi, h)
    u1p = np.pad(u1, ((0, 0), (1, 1)))
    u2p = np.pad(u2, ((1, 1), (0, 0)))
    g21 = (u1p[:, 1:] - u1p[:, :-1]) / h
    g12 = (u2p[1:] - u2p[:-1]) / h
    c21 = 0.25 * (g21[:-1, :-1] + g21[1:, :-1] + g21[:-1, 1:] + g21[1:, 1:])
    c12 = 0.25 * (g12[:-1, :-1] + g12[1:, :-1] + g12[:-1, 1:] + g12[1:, 1:])
    mag = np.sqrt(d11**2 + d22**2 + c21**2 + c12**2)
    return float((np.sum(mag**q) * h * h) ** (1.0 / q))


def apriori_ratio(solution, gamma0=None):
    """gamma0 sum phi(|grad u|) / sum phi*(|f|), both with weight h^2."""
    problem = solution.problem
    if gamma0 is None:
        gamma0 = problem.model.gamma0_est
        if gamma0 is None:
            gamma0 = calibrate(problem.model).gamma0_est
    nf = problem.nf
    G = solution.grad_u()
    f = problem.force_cells()
    den = float(np.sum(conjugate_eval(nf, f.pointwise_norm())))
    if den == 0:
        raise PreconditionError("zero data norm")
    num = float(np.sum(phi_eval(nf, G.pointwise_norm())))
    return gamma0 * num / den


# ---------------------------------------------------------------- cut-off and interior regularity


@dataclass(frozen=True)
class CutoffSpec:
    lower: tuple  # cube Q
    side: float
    xi: UniformGridField
    norm1: float  # ||xi||_{1,inf}
    norm2: float  # ||xi||_{2,inf}


def _step_profile(num=20001):
    """Smooth step on [0, 1] from the cumulative 1-D bump."""
    m = make_mollifier(1)
    s = np.linspace(-m.radius, m.radius, num)
    dens = m.profile(s)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(s))])
    cdf /= cdf[-1]
    t = (s + m.radius) / (2 * m.radius)
    return t, cdf


_STEP = None


def _step(t):
    global _STEP
    if _STEP is None:
        _STEP = _step_profile()
    return np.interp(t, *_STEP, left=0.0, right=1.0)


def _cutoff_1d(x, lo, side):
    """1 on the middle half of [lo, lo + side], 0 outside the middle three quarters."""
    c = lo + 0.5 * side
    a = np.abs(x - c)
    inner, outer = 0.25 * side, 0.375 * side
    return 1.0 - _step((a - inner) / (outer - inner))


def make_cutoff(lower, side, grid, min_cells=8, refine=8):
    """Tensor cut-off xi with 1 on Q/2, 0 outside 3Q/4 (cubes sharing Q's centre).

    Raises DomainError when the two transition bands together span fewer
    than ``min_cells`` grid cells, or when 3Q/4 is not inside the grid box.
    """
    lower = np.asarray(lower, dtype=float)
    band = 0.125 * side
    if 2 * band / grid.spacing < min_cells - 1e-9:
        raise DomainError(f"Q too small for the grid: transition spans {2 * band / grid.spacing:.2f} cells")
    if np.any(lower + 0.125 * side < grid.lower - 1e-12) or np.any(lower + 0.875 * side > grid.upper + 1e-12):
        raise DomainError("3Q/4 must lie inside the grid box")
    x = grid.coords()
    xi = np.ones(grid.dims)
    for k in range(grid.ndim):
        xi = xi * _cutoff_1d(x[..., k], lower[k], side)
    # derivative norms on a refined 1-D grid; the tensor product has
    # ||xi||_{1,inf} = max|eta'| and ||xi||_{2,inf} = max(|eta''|, |eta'|^2)
    s = np.linspace(lower[0], lower[0] + side, int(refine * side / grid.spacing) * 64 + 1)
    eta = _cutoff_1d(s, lower[0], side)
    d1 = np.gradient(eta, s)
    d2 = np.gradient(d1, s)
    n1 = float(np.max(np.abs(d1)))
    n2 = float(max(np.max(np.abs(d2)), n1 * n1))
    return CutoffSpec(tuple(lower), float(side), UniformGridField(grid, xi), n1, n2)


def _fd_gradient(values, h):
    """Centred differences in the interior (grid axes only), shape values.shape + (n,)."""
    nd = 2
    out = np.zeros(values.shape + (nd,))
    for k in range(nd):
        sl_hi = [slice(None)] * values.ndim
        sl_lo = [slice(None)] * values.ndim
        sl_c = [slice(None)] * values.ndim
        sl_hi[k] = slice(2, None)
        sl_lo[k] = slice(None, -2)
        sl_c[k] = slice(1, -1)
        out[tuple(sl_c) + (Ellipsis, k)] = (values[tuple(sl_hi)] - values[tuple(sl_lo)]) / (2 * h)
    return out


@dataclass(frozen=True)
class RegularityReport:
    lhs: float
    rhs: float
    ratio: float
    hs: tuple
    tang_F: dict  # k -> tuple over h of sum xi^2 |d+_{h,k} F(Du)|^2 h^2
    tang_phi: dict  # k -> tuple over h of sum phi(xi |grad d+_{h,k} u|) h^2
    tang_spread: float  # max over quantities of max_h / min_h
    xi_norm1: float
    xi_norm2: float


def _in_box(grid, lo, hi):
    x = grid.coords()
    return np.all((x > lo) & (x < hi), axis=-1)


def interior_regularity_check(solution, lower=(0.25, 0.25), side=0.5, cutoff=None, h_mults=(1, 2, 4)):
    """LHS = sum_{Q/2} |grad F(Du)|^2 h^2 against RHS = sum_Q (phi*(|f|) + phi(|grad u|)) h^2,
    plus the difference-quotient quantities for every h = m h_g.

    With ``cutoff=None`` (or ``h_mults=()``) only LHS/RHS is computed.
    """
    problem = solution.problem
    g = problem.cell_grid
    hg = g.spacing
    lower = np.asarray(lower, dtype=float)
    for m in h_mults:
        if m * hg >= 0.25 * side:
            raise DomainError("difference steps must satisfy h < l(Q)/4")
    nf = problem.nf
    F = solution.F()
    G = solution.grad_u()
    half_lo = lower + 0.25 * side
    half = _in_box(g, half_lo, half_lo + 0.5 * side)
    inQ = _in_box(g, lower, lower + side)
    gradF = _fd_gradient(F.values, hg)
    lhs = float(np.sum(np.sum(gradF**2, axis=(-3, -2, -1))[half]) * hg * hg)
    fmag = problem.force_cells().pointwise_norm()
    rhs = float((np.sum(conjugate_eval(nf, fmag[inQ])) + np.sum(phi_eval(nf, G.pointwise_norm()[inQ]))) * hg * hg)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    tang_F, tang_phi = {}, {}
    spread = 1.0
    n1 = n2 = float("nan")
    if h_mults:
        if cutoff is None:
            cutoff = make_cutoff(lower, side, g)
        xi = cutoff.xi.values
        n1, n2 = cutoff.norm1, cutoff.norm2
        hs = tuple(m * hg for m in h_mults)
        for k in range(2):
            qa, qb = [], []
            for h in hs:
                steps_of(g, h)
                dF = diff_quot(F, k, h, 1).values
                dG = diff_quot(G, k, h, 1).values
                qa.append(float(np.sum(xi**2 * frob(dF) ** 2) * hg * hg))
                qb.append(float(np.sum(phi_eval(nf, xi * frob(dG))) * hg * hg))
            tang_F[k + 1] = tuple(qa)
            tang_phi[k + 1] = tuple(qb)
            for q in (qa, qb):
                if min(q) > 0:
                    spread = max(spread, max(q) / min(q))
                elif max(q) > 0:
                    spread = np.inf
    else:
        hs = ()
    return RegularityReport(lhs, rhs, ratio, hs, tang_F, tang_phi, spread, n1, n2)
