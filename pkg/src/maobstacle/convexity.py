"""Discrete convex analysis on the lattice.

"Convex" for a grid function means wide-stencil second-difference
nonnegativity: at every interior node the centered second difference along
the two axes and the two diagonals is >= -eps_cvx, with eps_cvx scaled to
the data range.  The Aleksandrov measure is computed from subdifferential
cells: the cell of a node is the polygon of slopes of planes supporting the
whole node cloud there, and its area is the node's mass.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from ._kernels import envelope_fixpoint
from .errors import (
    BoundaryNode,
    ConvexityViolation,
    EOutsideDomain,
    NonFinite,
)
from .grid import GridFunction

EPS_CVX_FACTOR = 1e-9

# second-difference directions: axes then diagonals (di, dj) with i = y row
_STENCIL_DIRS = ((0, 1), (1, 0), (1, 1), (1, -1))


def second_difference_violation(grid, values):
    """Largest violation of wide-stencil convexity over interior nodes
    (0.0 when convex).  Differences are raw, not divided by h^2."""
    worst = 0.0
    interior = grid.interior
    for di, dj in _STENCIL_DIRS:
        plus = np.roll(np.roll(values, -di, 0), -dj, 1)
        minus = np.roll(np.roll(values, di, 0), dj, 1)
        d2 = plus + minus - 2.0 * values
        m = d2[interior].min() if interior.any() else 0.0
        worst = min(worst, float(m))
    return -worst


class ConvexGridFunction(GridFunction):
    """Grid function carrying a convexity certificate.

    `violation` is the measured worst second-difference violation; the
    certificate admits up to eps_cvx = 1e-9 * (data range).
    """

    def __init__(self, grid, values, valid=None, check=True, eps_factor=EPS_CVX_FACTOR):
        super().__init__(grid, values, valid=valid, check=check)
        self.violation = second_difference_violation(grid, self.values)
        self.eps_cvx = eps_factor * max(self.range(), 1e-300)
        if check and self.violation > self.eps_cvx:
            raise ConvexityViolation(
                f"second-difference violation {self.violation:.3e} exceeds "
                f"certificate tolerance {self.eps_cvx:.3e}"
            )

    @classmethod
    def certify(cls, g, eps_factor=EPS_CVX_FACTOR):
        return cls(g.grid, g.values, valid=g.valid, eps_factor=eps_factor)

    def copy(self):
        return ConvexGridFunction(self.grid, self.values.copy(), check=False)


def convex_envelope(g, max_sweeps=100000):
    """Largest wide-stencil convex minorant of g (boundary values kept).

    Idempotent by construction: the sweep kernel runs to an exact fixpoint,
    so a second application makes zero updates.
    """
    if not np.all(np.isfinite(g.values[g.grid.mask])):
        raise NonFinite("convex_envelope input has non-finite values")
    vals = np.where(g.grid.mask, g.values, 0.0).copy()
    upper = vals.copy()
    update = g.grid.interior.astype(np.uint8)
    caps = np.zeros(8)
    envelope_fixpoint(vals, upper, update, caps, False, max_sweeps)
    return ConvexGridFunction(g.grid, vals, check=False)


# ---------------------------------------------------------------------------
# normal mapping and the Monge-Ampere measure
# ---------------------------------------------------------------------------

def normal_mapping_cell(u, node, slope_pad=2.0):
    """Subdifferential cell of an interior node: the polygon of slopes p with
    u(y) >= u(node) + p . (y - node) for every masked node y.

    Computed by clipping a large slope box against one half-plane per node.
    """
    i, j = node
    grid = u.grid
    if not grid.interior[i, j]:
        raise BoundaryNode(f"node {node} is not interior")
    x0, y0 = grid.xs[j], grid.ys[i]
    u0 = u.values[i, j]
    ii, jj = np.nonzero(grid.mask)
    dx = grid.xs[jj] - x0
    dy = grid.ys[ii] - y0
    du = u.values[ii, jj] - u0
    keep = (dx != 0.0) | (dy != 0.0)
    dx, dy, du = dx[keep], dy[keep], du[keep]
    # generous initial box: max attainable slope magnitude plus padding
    r = np.hypot(dx, dy)
    bound = float(np.abs(du / r).max()) + slope_pad
    poly = geo.rectangle(-bound, -bound, bound, bound)
    # clip tightest constraints first to shrink the polygon early
    order = np.argsort(du / r, kind="stable")
    for k in order:
        poly = geo.clip_polygon_halfplane(poly, (dx[k], dy[k]), du[k])
        if poly.shape[0] == 0:
            break
    return poly


@dataclass
class MAMeasure:
    """Per-interior-node Aleksandrov masses and their total."""

    grid: object
    masses: np.ndarray
    total: float = field(init=False)

    def __post_init__(self):
        self.total = float(self.masses.sum())

    def mass_at(self, node):
        return float(self.masses[node])

    def restricted(self, node_mask):
        return float(self.masses[node_mask & self.grid.interior].sum())


def _lower_hull_gradients(px, py, pv):
    """For every lifted point, gradients of the incident lower-hull facets.

    Returns a list of per-point gradient lists; empty where the point is not
    a vertex of the lower convex hull.
    """
    from scipy.spatial import ConvexHull, QhullError

    n = px.size
    incident = [[] for _ in range(n)]
    pts = np.column_stack([px, py, pv])
    # degenerate (affine) clouds have no 3-D hull; every cell is a point
    centered = pts - pts.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-12 * (1 + np.abs(pts).max())) < 3:
        return incident
    try:
        hull = ConvexHull(pts, qhull_options="Qt")
    except QhullError:
        return incident
    eq = hull.equations  # outward normals, offsets
    lower = eq[:, 2] < -1e-12
    for f in np.nonzero(lower)[0]:
        nx, ny_, nz = eq[f, 0], eq[f, 1], eq[f, 2]
        gx, gy = -nx / nz, -ny_ / nz
        for v in hull.simplices[f]:
            incident[v].append((gx, gy))
    return incident


def ma_measure(u):
    """Aleksandrov Monge-Ampere measure of a certified convex grid function.

    mass(node) = area(normal_mapping_cell(node)) for interior nodes; the
    cells tile the slope image, so the total equals |N_u(interior)|.
    """
    grid = u.grid
    ii, jj = np.nonzero(grid.mask)
    incident = _lower_hull_gradients(
        grid.xs[jj].astype(float), grid.ys[ii].astype(float), u.values[ii, jj]
    )
    masses = np.zeros(grid.mask.shape)
    for k, grads in enumerate(incident):
        i, j = ii[k], jj[k]
        if not grid.interior[i, j] or len(grads) < 3:
            continue
        cell = geo.convex_hull(np.array(grads))
        if cell.shape[0] >= 3:
            masses[i, j] = geo.polygon_area(cell)
    return MAMeasure(grid, masses)


# ---------------------------------------------------------------------------
# finite-difference Hessian fields
# ---------------------------------------------------------------------------

@dataclass
class HessianField:
    """Centered 9-point-stencil Hessian data on interior nodes.

    det is clamped at zero from below; `clamped` records where.  The
    cofactor entries satisfy cof = det * inv(H) identically where det > 0.
    """

    grid: object
    uxx: np.ndarray
    uxy: np.ndarray
    uyy: np.ndarray
    det: np.ndarray
    det_raw: np.ndarray
    clamped: np.ndarray

    @property
    def cof_xx(self):
        return self.uyy

    @property
    def cof_yy(self):
        return self.uxx

    @property
    def cof_xy(self):
        return -self.uxy

    def n_clamped(self):
        return int(self.clamped.sum())


def hessian_field(u):
    """Finite-difference Hessian, determinant and cofactors of u."""
    grid = u.grid
    v = u.values
    h2 = grid.h * grid.h
    uxx = (np.roll(v, -1, 1) + np.roll(v, 1, 1) - 2.0 * v) / h2
    uyy = (np.roll(v, -1, 0) + np.roll(v, 1, 0) - 2.0 * v) / h2
    upp = np.roll(np.roll(v, -1, 0), -1, 1)
    umm = np.roll(np.roll(v, 1, 0), 1, 1)
    upm = np.roll(np.roll(v, -1, 0), 1, 1)
    ump = np.roll(np.roll(v, 1, 0), -1, 1)
    uxy = (upp + umm - upm - ump) / (4.0 * h2)
    interior = grid.interior
    for a in (uxx, uyy, uxy):
        a[~interior] = 0.0
    det_raw = uxx * uyy - uxy * uxy
    det_raw[~interior] = 0.0
    clamped = interior & (det_raw < 0.0)
    det = np.where(clamped, 0.0, det_raw)
    return HessianField(grid, uxx, uxy, uyy, det, det_raw, clamped)


# ---------------------------------------------------------------------------
# weak continuity of the measure under convex perturbations
# ---------------------------------------------------------------------------

@dataclass
class WeakContinuityReport:
    deltas: list
    masses: list
    limit_mass: float
    gap: float
    tol: float

    @property
    def passed(self):
        return self.gap <= self.tol


def weak_continuity_check(u, delta, e_mask, n_members=5):
    """Probe upper semicontinuity of E -> mu[.](E) along an analytic convex
    perturbation family u_i = u + delta 2^{-i} q, q = |x - centroid|^4.

    Returns the measured gap max_i mu[u_i](E) - mu[u](E); the tolerance
    scales with h and the initial amplitude.
    """
    grid = u.grid
    e_mask = np.asarray(e_mask, dtype=bool)
    if e_mask.shape != grid.mask.shape:
        raise EOutsideDomain("E mask does not match the lattice")
    if not e_mask.any():
        raise EOutsideDomain("E is empty")
    # compact containment: E and its stencil ring must be interior
    ring = np.zeros_like(e_mask)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            ring |= np.roll(np.roll(e_mask, di, 0), dj, 1)
    if not np.all(grid.interior[ring]):
        raise EOutsideDomain("E is not compactly contained in the domain interior")

    cx = float(grid.X[grid.mask].mean())
    cy = float(grid.Y[grid.mask].mean())
    q = ((grid.X - cx) ** 2 + (grid.Y - cy) ** 2) ** 2
    limit_mass = ma_measure(u).restricted(e_mask)
    deltas, masses = [], []
    if delta == 0.0:
        deltas = [0.0] * n_members
        masses = [limit_mass] * n_members
        gap = 0.0
    else:
        for i in range(n_members):
            d = float(delta) * 2.0 ** (-i)
            ui = ConvexGridFunction(grid, u.values + d * q, check=False)
            deltas.append(d)
            masses.append(ma_measure(ui).restricted(e_mask))
        gap = max(masses) - limit_mass
    diam = float(np.hypot(*(u.grid.domain.max(0) - u.grid.domain.min(0))))
    tol = 10.0 * abs(delta) * diam ** 3 + 10.0 * grid.h
    return WeakContinuityReport(deltas, masses, limit_mass, gap, tol)
