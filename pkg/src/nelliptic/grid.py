"""Uniform tensor grids on boxes and their text file format.

The grid file is line-oriented:

    nelliptic-grid v1
    dim 2
    shape 65 65
    origin -1 -1
    spacing 0.03125
    <one value per line, row-major>

Values are written with shortest round-trip decimal formatting (repr), so
read(write(g)) reproduces the file bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError


@dataclass
class GridFunction:
    """Values on a uniform isotropic grid; the discrete carrier of u and f."""

    dim: int
    shape: tuple
    origin: tuple
    spacing: float
    values: np.ndarray  # row-major, shape == self.shape

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidInputError("GridFunction supports dim 1 or 2")
        if len(self.shape) != self.dim or len(self.origin) != self.dim:
            raise InvalidInputError("shape/origin must have length dim")
        if self.spacing <= 0:
            raise InvalidInputError("spacing must be positive")
        self.values = np.asarray(self.values, dtype=float).reshape(self.shape)
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("grid values must be finite")

    # -- geometry --------------------------------------------------------------

    @staticmethod
    def from_box(lo, hi, h, fn=None, dim=None):
        """Grid covering the box [lo, hi]^dim with spacing h; hi is adjusted
        to the nearest node at or beyond the requested endpoint."""
        if dim is None:
            dim = len(lo) if hasattr(lo, "__len__") else 1
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.size == 1 and dim > 1:
            lo = np.repeat(lo, dim)
            hi = np.repeat(hi, dim)
        shape = tuple(int(round((b - a) / h)) + 1 for a, b in zip(lo, hi))
        g = GridFunction(dim, shape, tuple(lo), float(h), np.zeros(shape))
        if fn is not None:
            g.values = np.array([fn(x) for x in g.points()]).reshape(shape)
        return g

    def axes(self):
        return [
            self.origin[d] + self.spacing * np.arange(self.shape[d])
            for d in range(self.dim)
        ]

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def box(self):
        lo = np.asarray(self.origin, dtype=float)
        hi = lo + self.spacing * (np.asarray(self.shape) - 1)
        return lo, hi

    def copy(self) -> "GridFunction":
        return GridFunction(self.dim, self.shape, self.origin, self.spacing, self.values.copy())

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        if self.dim == 1:
            m[1:-1] = True
        else:
            m[1:-1, 1:-1] = True
        return m

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    # -- evaluation -------------------------------------------------------------

    def __call__(self, x):
        """Multilinear interpolation; x must lie inside the box."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.box()
        if np.any(x < lo - 1e-9 * self.spacing) or np.any(x > hi + 1e-9 * self.spacing):
            raise InvalidInputError("evaluation point outside the grid box")
        t = (x - lo) / self.spacing
        i0 = np.minimum(np.floor(t).astype(int), np.asarray(self.shape) - 2)
        i0 = np.maximum(i0, 0)
        w = t - i0
        if self.dim == 1:
            a, b = self.values[i0[0]], self.values[i0[0] + 1]
            return float(a * (1 - w[0]) + b * w[0])
        v = self.values
        i, j = i0
        wi, wj = w
        return float(
            v[i, j] * (1 - wi) * (1 - wj)
            + v[i + 1, j] * wi * (1 - wj)
            + v[i, j + 1] * (1 - wi) * wj
            + v[i + 1, j + 1] * wi * wj
        )


# ---------------------------------------------------------------------------
# file format


def write_grid(g: GridFunction, path) -> None:
    lines = ["nelliptic-grid v1", "dim %d" % g.dim]
    lines.append("shape " + " ".join(str(s) for s in g.shape))
    lines.append("origin " + " ".join(repr(float(o)) for o in g.origin))
    lines.append("spacing " + repr(float(g.spacing)))
    for v in g.values.ravel():
        lines.append(repr(float(v)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_grid(path) -> GridFunction:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != "nelliptic-grid v1":
        raise InvalidInputError("not a nelliptic-grid v1 file: %s" % path)
    header = {}
    for ln in lines[1:5]:
        key, _, rest = ln.partition(" ")
        header[key] = rest
    dim = int(header["dim"])
    shape = tuple(int(s) for s in header["shape"].split())
    origin = tuple(float(o) for o in header["origin"].split())
    spacing = float(header["spacing"])
    values = np.array([float(v) for v in lines[5:]])
    expected = int(np.prod(shape))
    if values.size != expected:
        raise InvalidInputError(
            "grid file has %d values, expected %d" % (values.size, expected)
        )
    return GridFunction(dim, shape, origin, spacing, values.reshape(shape))
