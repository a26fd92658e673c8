"""Pair-sum kernels: the Bogovskii ray sum and truncated CZ sums.

Each sum has a numba implementation and a numpy implementation with the same
signature; ``USE_NUMBA`` picks the default.
"""

from __future__ import annotations

import math

import numpy as np

from ._accel import USE_NUMBA, njit, prange

# builtin CZ kernel codes for the fast path
RIESZ, LOG_GRAD, NONCANCEL = 0, 1, 2


# ---------------------------------------------------------------- Bogovskii


@njit(cache=True, parallel=True, fastmath=False)
def _bogo_nb(targets, sources, fvals, center, R, amp, nodes, weights, cellvol, out):
    M, n = targets.shape
    K = sources.shape[0]
    B = fvals.shape[0]
    m = nodes.shape[0]
    R2 = R * R
    for i in prange(M):
        d = np.empty(n)
        e = np.empty(n)
        w = np.empty(n)
        acc = np.zeros((B, n))
        for j in range(K):
            r2 = 0.0
            for a in range(n):
                d[a] = targets[i, a] - sources[j, a]
                r2 += d[a] * d[a]
            if r2 == 0.0:
                continue
            r = math.sqrt(r2)
            b = 0.0
            q = -R2
            for a in range(n):
                e[a] = d[a] / r
                w[a] = sources[j, a] - center[a]
                b += e[a] * w[a]
                q += w[a] * w[a]
            disc = b * b - q
            if disc <= 0.0:
                continue
            sq = math.sqrt(disc)
            lo = -b - sq
            hi = -b + sq
            if lo < r:
                lo = r
            if hi <= lo:
                continue
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            s = 0.0
            for k in range(m):
                xi = mid + half * nodes[k]
                u2 = 0.0
                for a in range(n):
                    t = w[a] + xi * e[a]
                    u2 += t * t
                v = 1.0 - u2 / R2
                if v > 0.0:
                    s += weights[k] * math.exp(-1.0 / v) * xi ** (n - 1)
            if s == 0.0:
                continue
            s *= half * amp * cellvol / r ** n
            for bb in range(B):
                fv = fvals[bb, j]
                if fv != 0.0:
                    for a in range(n):
                        acc[bb, a] += fv * s * d[a]
        for bb in range(B):
            for a in range(n):
                out[bb, i, a] = acc[bb, a]


def _bogo_np(targets, sources, fvals, center, R, amp, nodes, weights, cellvol, out):
    M, n = targets.shape
    R2 = R * R
    w = sources - center
    wn2 = np.sum(w * w, axis=1)
    for i in range(M):
        d = targets[i] - sources
        r = np.sqrt(np.sum(d * d, axis=1))
        ok = r > 0
        d, r, wi, wq = d[ok], r[ok], w[ok], wn2[ok]
        e = d / r[:, None]
        b = np.sum(e * wi, axis=1)
        disc = b * b - (wq - R2)
        sq = np.sqrt(np.maximum(disc, 0.0))
        lo = np.maximum(-b - sq, r)
        hi = -b + sq
        hit = (disc > 0) & (hi > lo)
        if not hit.any():
            out[:, i, :] = 0.0
            continue
        d, r, wi, e, lo, hi = d[hit], r[hit], wi[hit], e[hit], lo[hit], hi[hit]
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        xi = mid[:, None] + half[:, None] * nodes[None, :]
        pts = wi[:, None, :] + xi[..., None] * e[:, None, :]
        v = 1.0 - np.sum(pts * pts, axis=2) / R2
        with np.errstate(divide="ignore", over="ignore"):
            rho = np.where(v > 0, np.exp(-1.0 / np.where(v > 0, v, 1.0)), 0.0)
        s = np.sum(weights * rho * xi ** (n - 1), axis=1) * half * amp * cellvol / r**n
        fv = fvals[:, ok][:, hit]
        out[:, i, :] = (fv * s) @ d


def bogovskii_sum(targets, sources, fvals, center, R, amp, order, cellvol, use_numba=None):
    """Sum_y f(y) k(x, y) |cell| for each target x; returns shape (B, M, n).

    ``amp * exp(-1/(1 - |z - center|^2/R^2))`` is the rescaled mollifier, the
    inner ray integral uses an ``order``-point Gauss-Legendre rule on the
    chord where the ray meets its support, and the pair x = y is skipped.
    """
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    fvals = np.ascontiguousarray(np.atleast_2d(fvals), dtype=float)
    center = np.ascontiguousarray(center, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(int(order))
    out = np.zeros((fvals.shape[0], targets.shape[0], targets.shape[1]))
    use = USE_NUMBA if use_numba is None else use_numba
    fn = _bogo_nb if use else _bogo_np
    fn(targets, sources, fvals, center, float(R), float(amp), nodes, weights, float(cellvol), out)
    return out


# ---------------------------------------------------------------- CZ sums


@njit(cache=True)
def _cz_kernel_nb(kind, comp, d, r):
    n = d.shape[0]
    if kind == 0:
        return d[comp] / r ** (n + 1)
    if kind == 1:
        return -d[0] * d[1] / (math.pi * r**4)
    return 1.0 / r**n


@njit(cache=True, parallel=True)
def _cz_nb(targets, sources, fvals, eps, kind, comp, cellvol, out):
    M, n = targets.shape
    K = sources.shape[0]
    B = fvals.shape[0]
    E = eps.shape[0]
    for i in prange(M):
        d = np.empty(n)
        acc = np.zeros((B, E))
        for j in range(K):
            r2 = 0.0
            for a in range(n):
                d[a] = targets[i, a] - sources[j, a]
                r2 += d[a] * d[a]
            r = math.sqrt(r2)
            if r <= eps[0]:
                continue
            kv = _cz_kernel_nb(kind, comp, d, r) * cellvol
            for q in range(E):
                if r > eps[q]:
                    for bb in range(B):
                        acc[bb, q] += fvals[bb, j] * kv
        for bb in range(B):
            for q in range(E):
                out[bb, q, i] = acc[bb, q]


def cz_kernel_np(kind, comp, d):
    """Builtin kernel values K(x, y) as a function of d = x - y (last axis)."""
    n = d.shape[-1]
    r = np.sqrt(np.sum(d * d, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == RIESZ:
            return d[..., comp] / r ** (n + 1)
        if kind == LOG_GRAD:
            return -d[..., 0] * d[..., 1] / (math.pi * r**4)
        return 1.0 / r**n


def _cz_np(targets, sources, fvals, eps, kind, comp, cellvol, out):
    for i in range(targets.shape[0]):
        d = targets[i] - sources
        r = np.sqrt(np.sum(d * d, axis=1))
        keep = r > eps[0]
        kv = np.zeros_like(r)
        kv[keep] = cz_kernel_np(kind, comp, d[keep]) * cellvol
        for q in range(eps.shape[0]):
            out[:, q, i] = fvals @ np.where(r > eps[q], kv, 0.0)


def cz_sum(targets, sources, fvals, eps, kind, comp, cellvol, use_numba=None):
    """Truncated sums over |x - y| > eps for several eps; returns (B, E, M).

    ``eps`` must be sorted ascending.
    """
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    fvals = np.ascontiguousarray(np.atleast_2d(fvals), dtype=float)
    eps = np.ascontiguousarray(eps, dtype=float)
    out = np.zeros((fvals.shape[0], eps.size, targets.shape[0]))
    use = USE_NUMBA if use_numba is None else use_numba
    fn = _cz_nb if use else _cz_np
    fn(targets, sources, fvals, eps, int(kind), int(comp), float(cellvol), out)
    return out


def generic_cz_sum(evaluate, targets, sources, fvals, eps, cellvol, chunk=256):
    """Truncated sums for an arbitrary vectorised ``evaluate(x, y)``."""
    fvals = np.atleast_2d(fvals)
    eps = np.asarray(eps, dtype=float)
    out = np.zeros((fvals.shape[0], eps.size, targets.shape[0]))
    for start in range(0, targets.shape[0], chunk):
        x = targets[start:start + chunk]
        d = x[:, None, :] - sources[None, :, :]
        r = np.sqrt(np.sum(d * d, axis=-1))
        keep = r > eps[0]
        kv = np.zeros_like(r)
        xx = np.broadcast_to(x[:, None, :], d.shape)[keep]
        yy = np.broadcast_to(sources[None, :, :], d.shape)[keep]
        kv[keep] = evaluate(xx, yy) * cellvol
        for q in range(eps.size):
            out[:, q, start:start + chunk] = np.einsum("bk,mk->bm", fvals, np.where(r > eps[q], kv, 0.0))
    return out
