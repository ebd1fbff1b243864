"""Uniform lattice over a convex planar domain, with quadrature and IO.

The lattice covers the domain's bounding box plus one spacing of padding on
every side, so a masked node never sits on the array border and 8-neighbour
stencil reads need no bounds checks.  Node categories:

    mask      node inside the (closed) domain polygon
    interior  masked node whose 8 lattice neighbours are all masked
    boundary  masked node that is not interior

Quadrature weights are the full cell h^2 for interior nodes and the
polygon-clipped cell area for boundary nodes, which keeps integration
first-order accurate up to the boundary.
"""

import csv
import io
import json

import numpy as np

from . import geometry as geo
from .errors import DegenerateDomain, GridMismatch, GridTooCoarse, NonFinite

_MIN_ACROSS = 5  # smallest masked row/column extent build_grid accepts


class Grid2D:
    """Immutable uniform grid restricted to a convex polygon.

    Attributes of interest: h, xs, ys, X, Y (node coordinates), mask,
    interior, boundary (boolean node arrays), weights (quadrature), and
    domain (the polygon vertices).
    """

    def __init__(self, domain, h, mask, xs, ys, weights):
        self.domain = np.asarray(domain, dtype=float)
        self.h = float(h)
        self.xs = xs
        self.ys = ys
        self.X, self.Y = np.meshgrid(xs, ys)
        self.mask = mask
        inner = np.ones_like(mask)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                inner &= np.roll(np.roll(mask, di, 0), dj, 1)
        self.interior = mask & inner
        self.boundary = mask & ~self.interior
        self.weights = weights
        self.area = float(weights.sum())
        self._hessian_weights = None
        self._interior2 = None

    # -- derived node sets --------------------------------------------------

    @property
    def n_nodes(self):
        return int(self.mask.sum())

    @property
    def n_interior(self):
        return int(self.interior.sum())

    @property
    def n_boundary(self):
        return int(self.boundary.sum())

    @property
    def interior2(self):
        """Interior nodes whose 8 neighbours are themselves interior
        (second stencil ring, used by fourth-order residuals)."""
        if self._interior2 is None:
            inner = np.ones_like(self.interior)
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    inner &= np.roll(np.roll(self.interior, di, 0), dj, 1)
            self._interior2 = self.interior & inner
        return self._interior2

    @property
    def hessian_weights(self):
        """Quadrature weights for interior-node fields: each boundary node's
        weight is folded into its nearest interior node, so integrating a
        field defined only at interior nodes still covers all of the domain."""
        if self._hessian_weights is None:
            from scipy.ndimage import distance_transform_edt

            we = np.where(self.interior, self.weights, 0.0)
            if self.boundary.any() and self.interior.any():
                _, (iy, ix) = distance_transform_edt(
                    ~self.interior, return_indices=True
                )
                by, bx = np.nonzero(self.boundary)
                np.add.at(we, (iy[by, bx], ix[by, bx]), self.weights[by, bx])
            self._hessian_weights = we
        return self._hessian_weights

    def same_lattice(self, other):
        return (
            self.h == other.h
            and self.mask.shape == other.mask.shape
            and np.array_equal(self.xs, other.xs)
            and np.array_equal(self.ys, other.ys)
            and np.array_equal(self.mask, other.mask)
        )

    def require_same_lattice(self, other):
        if not self.same_lattice(other):
            raise GridMismatch("grids do not share a lattice")

    def boundary_distance(self):
        """Distance of every node to the domain polygon boundary."""
        return geo.distance_to_polygon_boundary(self.X, self.Y, self.domain)

    def node_at(self, x, y):
        """Indices (i, j) of the lattice node nearest to (x, y)."""
        j = int(round((x - self.xs[0]) / self.h))
        i = int(round((y - self.ys[0]) / self.h))
        return i, j


def _validate_convex_ccw(verts):
    v = np.asarray(verts, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
        raise DegenerateDomain("domain needs at least 3 polygon vertices")
    if geo.polygon_area(v) < 0:
        v = v[::-1]
    area = geo.polygon_area(v)
    scale = max(1.0, float(np.abs(v).max()))
    if area <= 1e-12 * scale * scale:
        raise DegenerateDomain("domain polygon has (near) empty interior")
    # convexity: every cross product of consecutive edges >= 0 (CCW)
    a = v
    b = np.roll(v, -1, axis=0)
    c = np.roll(v, -2, axis=0)
    cross = (b[:, 0] - a[:, 0]) * (c[:, 1] - b[:, 1]) - (b[:, 1] - a[:, 1]) * (
        c[:, 0] - b[:, 0]
    )
    if np.any(cross < -1e-9 * scale * scale):
        raise DegenerateDomain("domain polygon is not convex")
    return v


def _contiguous(mask_1d):
    idx = np.nonzero(mask_1d)[0]
    return idx.size == 0 or bool(np.all(np.diff(idx) == 1))


def _check_grid_convex(mask):
    ny, nx = mask.shape
    for i in range(ny):
        if not _contiguous(mask[i, :]):
            return False
    for j in range(nx):
        if not _contiguous(mask[:, j]):
            return False
    for k in range(-ny + 1, nx):  # diagonals both ways
        if not _contiguous(np.diagonal(mask, offset=k)):
            return False
        if not _contiguous(np.diagonal(mask[::-1], offset=k)):
            return False
    return True


def build_grid(domain, h, min_across=_MIN_ACROSS):
    """Discretize a convex polygon (see geometry.rectangle / geometry.disc)
    on a uniform lattice of spacing h.

    Raises DegenerateDomain for empty interiors and GridTooCoarse when fewer
    than `min_across` nodes span the domain in either axis.
    """
    if not h > 0:
        raise DegenerateDomain(f"grid spacing h={h} must be positive")
    verts = _validate_convex_ccw(domain)
    xmin, ymin = verts.min(axis=0)
    xmax, ymax = verts.max(axis=0)
    nx = int(np.floor((xmax - xmin) / h + 1e-9)) + 1
    ny = int(np.floor((ymax - ymin) / h + 1e-9)) + 1
    # one padding ring on every side keeps masked nodes off the array border
    xs = xmin + h * np.arange(-1, nx + 1)
    ys = ymin + h * np.arange(-1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    tol = 1e-9 * max(1.0, xmax - xmin, ymax - ymin)
    mask = geo.points_in_convex_polygon(X, Y, verts, tol=tol)
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False

    row_max = int(mask.sum(axis=1).max(initial=0))
    col_max = int(mask.sum(axis=0).max(initial=0))
    if row_max < min_across or col_max < min_across:
        raise GridTooCoarse(
            f"only {row_max}x{col_max} nodes across the domain at h={h}; "
            f"need at least {min_across}"
        )
    if not _check_grid_convex(mask):
        raise DegenerateDomain("masked node set is not grid-convex")

    weights = _cell_weights(verts, h, xs, ys, mask)
    grid = Grid2D(verts, h, mask, xs, ys, weights)
    slack = 2.0 * h * geo.polygon_perimeter(verts)
    if abs(grid.area - geo.polygon_area(verts)) > slack:
        raise DegenerateDomain(
            "quadrature weights miss the domain area beyond the 2h*perimeter bound"
        )
    return grid


def _cell_weights(verts, h, xs, ys, mask):
    weights = np.zeros((ys.size, xs.size))
    inner = np.ones_like(mask)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            inner &= np.roll(np.roll(mask, di, 0), dj, 1)
    interior = mask & inner
    weights[interior] = h * h
    for i, j in zip(*np.nonzero(mask & ~interior)):
        x, y = xs[j], ys[i]
        cell = geo.rectangle(x - h / 2, y - h / 2, x + h / 2, y + h / 2)
        clipped = geo.clip_polygon_convex(cell, verts)
        weights[i, j] = geo.polygon_area(clipped) if clipped.shape[0] >= 3 else 0.0
    return weights


def grid_from_mask(xs, ys, h, mask, weights=None):
    """Internal constructor for grids over non-polygonal masked regions
    (rotated-graph domains).  Rows of the mask must be contiguous; columns
    are trimmed to their longest contiguous run.  Quadrature weights default
    to the full cell h^2, which is first-order accurate for these uses.
    """
    mask = mask.copy()
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False
    for j in range(mask.shape[1]):
        col = np.nonzero(mask[:, j])[0]
        if col.size and np.any(np.diff(col) != 1):
            runs = np.split(col, np.nonzero(np.diff(col) != 1)[0] + 1)
            best = max(runs, key=len)
            mask[:, j] = False
            mask[best, j] = True
    X, Y = np.meshgrid(xs, ys)
    if not mask.any():
        raise DegenerateDomain("masked region is empty")
    pts = np.column_stack([X[mask], Y[mask]])
    from . import geometry as _geo

    hull = _geo.convex_hull(pts)
    if hull.shape[0] < 3:
        lo = pts.min(axis=0) - h / 2
        hi = pts.max(axis=0) + h / 2
        hull = geo.rectangle(lo[0], lo[1], hi[0], hi[1])
    w = np.where(mask, h * h, 0.0) if weights is None else weights
    return Grid2D(hull, h, mask, xs, ys, w)


class GridFunction:
    """One float per masked node, stored on the padded lattice array.

    Values off the mask are zero and must never be read.  `valid` optionally
    narrows the carrier further (residual fields masked by a determinant
    floor); None means every masked node carries a value.
    """

    def __init__(self, grid, values, valid=None, check=True):
        self.grid = grid
        values = np.asarray(values, dtype=float)
        if values.shape != grid.mask.shape:
            raise GridMismatch(
                f"values shape {values.shape} != lattice {grid.mask.shape}"
            )
        self.values = np.where(grid.mask, values, 0.0)
        self.valid = valid
        if check:
            carrier = grid.mask if valid is None else (grid.mask & valid)
            if not np.all(np.isfinite(self.values[carrier])):
                raise NonFinite("grid function has non-finite values on its carrier")

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, fn(grid.X, grid.Y))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.mask.shape, float(c)))

    def copy(self):
        return GridFunction(
            self.grid,
            self.values.copy(),
            None if self.valid is None else self.valid.copy(),
            check=False,
        )

    def masked(self):
        """Values at masked nodes, flattened row-major (y outer, x inner)."""
        return self.values[self.grid.mask]

    def range(self):
        v = self.masked()
        return float(v.max() - v.min()) if v.size else 0.0


def integrate(g):
    """Quadrature sum over masked nodes; linear and deterministic."""
    return float(np.sum(g.grid.weights * g.values))


# ---------------------------------------------------------------------------
# serialization: CSV for flat value tables, JSON for self-contained objects
# ---------------------------------------------------------------------------

def gridfunction_to_csv(g, path_or_buf):
    """Write `x,y,value` rows for masked nodes, row-major by y then x."""
    own = isinstance(path_or_buf, (str, bytes))
    f = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(f)
        w.writerow(["x", "y", "value"])
        ii, jj = np.nonzero(g.grid.mask)
        for i, j in zip(ii, jj):
            w.writerow(
                [repr(float(g.grid.xs[j])), repr(float(g.grid.ys[i])),
                 repr(float(g.values[i, j]))]
            )
    finally:
        if own:
            f.close()


def gridfunction_from_csv(grid, path_or_buf):
    """Read values written by gridfunction_to_csv back onto `grid`."""
    own = isinstance(path_or_buf, (str, bytes))
    f = open(path_or_buf, "r", newline="") if own else path_or_buf
    try:
        rd = csv.reader(f)
        header = next(rd)
        if [c.strip() for c in header] != ["x", "y", "value"]:
            raise NonFinite(f"unexpected CSV header {header!r}")
        values = np.zeros(grid.mask.shape)
        seen = np.zeros(grid.mask.shape, dtype=bool)
        for row in rd:
            x, y, v = float(row[0]), float(row[1]), float(row[2])
            i, j = grid.node_at(x, y)
            if not (
                0 <= i < grid.mask.shape[0]
                and 0 <= j < grid.mask.shape[1]
                and grid.mask[i, j]
                and abs(grid.xs[j] - x) < 1e-9 * grid.h + 1e-15
                and abs(grid.ys[i] - y) < 1e-9 * grid.h + 1e-15
            ):
                raise GridMismatch(f"CSV node ({x}, {y}) is not on the grid")
            values[i, j] = v
            seen[i, j] = True
        if not np.array_equal(seen, grid.mask):
            raise GridMismatch("CSV does not cover the grid's masked nodes")
        return GridFunction(grid, values)
    finally:
        if own:
            f.close()


def gridfunction_to_json(g):
    """Self-contained JSON document (domain polygon, h, masked values)."""
    return {
        "h": g.grid.h,
        "domain": [[float(a), float(b)] for a, b in g.grid.domain],
        "values": [float(v) for v in g.masked()],
    }


def gridfunction_from_json(doc):
    grid = build_grid(np.array(doc["domain"]), float(doc["h"]))
    vals = np.asarray(doc["values"], dtype=float)
    if vals.size != grid.n_nodes:
        raise GridMismatch(
            f"JSON carries {vals.size} values for a grid of {grid.n_nodes} nodes"
        )
    values = np.zeros(grid.mask.shape)
    values[grid.mask] = vals
    return GridFunction(grid, values)


def dump_gridfunction_json(g, path):
    with open(path, "w") as f:
        json.dump(gridfunction_to_json(g), f)


def load_gridfunction_json(path):
    with open(path) as f:
        return gridfunction_from_json(json.load(f))


def gridfunction_csv_string(g):
    buf = io.StringIO()
    gridfunction_to_csv(g, buf)
    return buf.getvalue()
