"""Grid field import/export.

CSV: one row per grid point (row-major), coordinates then components.
Binary (little endian): int64 n, int64 dims[n], float64 spacing, int64 rank,
then the values as row-major float64 (grid axes first, components last).
The binary header has no origin; readers pass it explicitly.
"""

from __future__ import annotations

import csv
import struct

import numpy as np

from .grid import UniformGrid, UniformGridField


def _components(field):
    g = field.grid
    return field.values.reshape(int(np.prod(g.dims)), -1)


def write_csv(field, path):
    g = field.grid
    coords = g.coords().reshape(-1, g.ndim)
    comps = _components(field)
    header = [f"x{k + 1}" for k in range(g.ndim)] + [f"c{j}" for j in range(comps.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for xrow, crow in zip(coords, comps):
            w.writerow([repr(float(v)) for v in xrow] + [repr(float(v)) for v in crow])


def read_csv(path, rank=None):
    """Read a CSV written by :func:`write_csv`; the grid is inferred from the coordinates."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(1 for h in header if h.startswith("x"))
    coords, comps = body[:, :n], body[:, n:]
    axes = [np.unique(coords[:, k]) for k in range(n)]
    dims = tuple(len(a) for a in axes)
    spacing = float(np.diff(axes[0]).mean()) if dims[0] > 1 else 1.0
    origin = tuple(float(a[0]) for a in axes)
    ncomp = comps.shape[1]
    if rank is None:
        rank = {1: 0, n: 1, n * n: 2}.get(ncomp)
        if rank is None:
            raise ValueError(f"cannot infer rank from {ncomp} components")
    grid = UniformGrid(origin, spacing, dims)
    return UniformGridField(grid, comps.reshape(dims + (n,) * rank))


def write_binary(field, path):
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<q", g.ndim))
        fh.write(struct.pack(f"<{g.ndim}q", *g.dims))
        fh.write(struct.pack("<d", g.spacing))
        fh.write(struct.pack("<q", field.rank))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def read_binary(path, origin=None):
    with open(path, "rb") as fh:
        data = fh.read()
    (n,) = struct.unpack_from("<q", data, 0)
    off = 8
    dims = struct.unpack_from(f"<{n}q", data, off)
    off += 8 * n
    (spacing,) = struct.unpack_from("<d", data, off)
    off += 8
    (rank,) = struct.unpack_from("<q", data, off)
    off += 8
    shape = tuple(dims) + (n,) * rank
    values = np.frombuffer(data, dtype="<f8", offset=off).reshape(shape)
    if origin is None:
        origin = (0.0,) * n
    return UniformGridField(UniformGrid(origin, spacing, dims), values.copy())
