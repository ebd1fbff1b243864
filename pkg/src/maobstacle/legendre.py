"""Legendre transform of grid functions, dual functional and dual residual.

The conjugate is evaluated by direct maximization over primal nodes on a
fresh lattice covering the slope hull; grids here are small enough that the
O(N_primal * N_dual) kernel beats cleverness.  The dual function is a
sampled max of affine functions, so its convexity certificate is exact.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from ._kernels import conjugate_max
from .convexity import ConvexGridFunction, hessian_field
from .errors import FOutOfDomain, NoStrictRegion
from .functional import DET_LOG_FLOOR
from .grid import GridFunction, build_grid

STRICT_DET_FLOOR = 0.01  # both-sides strict-convexity floor for matching


@dataclass
class DualPair:
    """Primal function u over Omega, conjugate u* over the slope domain,
    and the finite-difference slope map y = Du(x) at primal interior nodes.

    `dual` is the exact discrete conjugate (max of affines, certified
    convex).  `dual_refined` sharpens it with a local quadratic model of u
    around each argmax node; it agrees with `dual` to O(h^2) and is what
    Hessian-sensitive consumers (det duality, dual residual) differentiate,
    since the raw max-of-affines carries lattice-scale ripple.
    """

    primal: ConvexGridFunction
    dual: ConvexGridFunction
    dual_refined: np.ndarray
    slope_x: np.ndarray
    slope_y: np.ndarray
    degenerate: bool
    skipped_pairs: int = 0

    @property
    def dual_grid(self):
        return self.dual.grid


def primal_slopes(u):
    """Centered-difference gradient at interior nodes (0 elsewhere)."""
    grid = u.grid
    v = u.values
    sx = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * grid.h)
    sy = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * grid.h)
    sx[~grid.interior] = 0.0
    sy[~grid.interior] = 0.0
    return sx, sy


def conjugate_at(u, points):
    """u*(p) = max over masked nodes of (x . p - u(x)) for arbitrary slopes."""
    grid = u.grid
    px = grid.X[grid.mask].astype(float)
    py = grid.Y[grid.mask].astype(float)
    pv = u.values[grid.mask]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out, _ = conjugate_max(px, py, pv, pts[:, 0].copy(), pts[:, 1].copy())
    return out


def _refine_conjugate(u, star, arg, qx, qy):
    """Sharpen the discrete conjugate with a one-Newton-step quadratic model
    of u around the argmax node (trust region: one cell).  Only dual nodes
    whose argmax is interior with a nondegenerate Hessian are refined; the
    refinement never decreases the value (it adds candidate support points).
    """
    grid = u.grid
    h = grid.h
    hf = hessian_field(u)
    ii, jj = np.nonzero(grid.mask)
    ai, aj = ii[arg], jj[arg]
    ok = grid.interior[ai, aj] & (hf.det[ai, aj] > 1e-12)
    v = u.values
    gx = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * h)
    gy = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * h)
    rx = qx - gx[ai, aj]
    ry = qy - gy[ai, aj]
    a11 = hf.uxx[ai, aj]
    a12 = hf.uxy[ai, aj]
    a22 = hf.uyy[ai, aj]
    det = np.where(hf.det[ai, aj] > 1e-12, hf.det[ai, aj], 1.0)
    dx = np.clip((a22 * rx - a12 * ry) / det, -h, h)
    dy = np.clip((-a12 * rx + a11 * ry) / det, -h, h)
    quad = (
        v[ai, aj]
        + gx[ai, aj] * dx
        + gy[ai, aj] * dy
        + 0.5 * (a11 * dx * dx + 2 * a12 * dx * dy + a22 * dy * dy)
    )
    cand = (grid.xs[aj] + dx) * qx + (grid.ys[ai] + dy) * qy - quad
    return np.where(ok, np.maximum(cand, star), star)


def legendre_transform(u, dual_resolution=None):
    """Conjugate of u on a fresh uniform lattice over the slope hull.

    `dual_resolution` is the node count across the hull's longer axis;
    the default matches the dual node count to the primal one.  A collapsed
    slope hull (affine u) yields a tiny inflated box flagged `degenerate`.
    """
    grid = u.grid
    sx, sy = primal_slopes(u)
    pts = np.column_stack([sx[grid.interior], sy[grid.interior]])
    hull = geo.convex_hull(pts)
    degenerate = hull.shape[0] < 3 or geo.polygon_area(hull) < 1e-12 * (
        1.0 + float(np.abs(pts).max()) ** 2
    )
    if dual_resolution is None:
        dual_resolution = max(9, int(round(np.sqrt(grid.n_nodes))))
    if degenerate:
        cx, cy = pts.mean(axis=0)
        half = max(1e-6, 1e-6 * (1.0 + abs(cx) + abs(cy)))
        hull = geo.rectangle(cx - half, cy - half, cx + half, cy + half)
    extent = float(max(np.ptp(hull[:, 0]), np.ptp(hull[:, 1])))
    dual_h = extent / (dual_resolution - 1)
    dual_grid = build_grid(hull, dual_h, min_across=3)

    px = grid.X[grid.mask].astype(float)
    py = grid.Y[grid.mask].astype(float)
    pv = u.values[grid.mask]
    qx = dual_grid.X[dual_grid.mask].astype(float)
    qy = dual_grid.Y[dual_grid.mask].astype(float)
    star, arg = conjugate_max(px, py, pv, qx, qy)
    dvals = np.zeros(dual_grid.mask.shape)
    dvals[dual_grid.mask] = star
    dual = ConvexGridFunction(dual_grid, dvals)
    refined = np.zeros(dual_grid.mask.shape)
    refined[dual_grid.mask] = _refine_conjugate(u, star, arg, qx, qy)
    return DualPair(u, dual, refined, sx, sy, degenerate)


def biconjugate(pair):
    """(u*)* evaluated back on the primal grid."""
    u = pair.primal
    grid = u.grid
    dg = pair.dual_grid
    qx = dg.X[dg.mask].astype(float)
    qy = dg.Y[dg.mask].astype(float)
    qv = pair.dual.values[dg.mask]
    xx = grid.X[grid.mask].astype(float)
    yy = grid.Y[grid.mask].astype(float)
    out, _ = conjugate_max(qx, qy, qv, xx, yy)
    vals = np.zeros(grid.mask.shape)
    vals[grid.mask] = out
    return GridFunction(grid, vals)


def _bilinear(grid, field, valid, px, py):
    """Bilinear interpolation of a node field at points; NaN when any of the
    four surrounding nodes is not `valid`."""
    gx = (px - grid.xs[0]) / grid.h
    gy = (py - grid.ys[0]) / grid.h
    j0 = np.floor(gx).astype(int)
    i0 = np.floor(gy).astype(int)
    out = np.full(px.shape, np.nan)
    ok = (
        (i0 >= 0)
        & (j0 >= 0)
        & (i0 + 1 < grid.mask.shape[0])
        & (j0 + 1 < grid.mask.shape[1])
    )
    i0c = np.clip(i0, 0, grid.mask.shape[0] - 2)
    j0c = np.clip(j0, 0, grid.mask.shape[1] - 2)
    ok &= (
        valid[i0c, j0c]
        & valid[i0c, j0c + 1]
        & valid[i0c + 1, j0c]
        & valid[i0c + 1, j0c + 1]
    )
    tx = gx - j0
    ty = gy - i0
    f00 = field[i0c, j0c]
    f01 = field[i0c, j0c + 1]
    f10 = field[i0c + 1, j0c]
    f11 = field[i0c + 1, j0c + 1]
    val = (
        f00 * (1 - tx) * (1 - ty)
        + f01 * tx * (1 - ty)
        + f10 * (1 - tx) * ty
        + f11 * tx * ty
    )
    out[ok] = val[ok]
    return out


def det_duality_check(pair):
    """max over matched pairs of |det D2u(x) * det D2u*(Du(x)) - 1|.

    Matched pairs are primal interior nodes with det above the strict floor
    whose slope lands in a dual cell of strictly convex nodes.
    """
    u = pair.primal
    grid = u.grid
    hf = hessian_field(u)
    hf_d = hessian_field(GridFunction(pair.dual_grid, pair.dual_refined))
    strict = grid.interior & (hf.det > STRICT_DET_FLOOR)
    if not strict.any():
        raise NoStrictRegion("no primal nodes above the determinant floor")
    px = pair.slope_x[strict]
    py = pair.slope_y[strict]
    dg = pair.dual_grid
    dual_ok = dg.interior & (hf_d.det > STRICT_DET_FLOOR)
    dual_det = _bilinear(dg, hf_d.det, dual_ok, px, py)
    good = np.isfinite(dual_det)
    if not good.any():
        raise NoStrictRegion("no matched strictly convex dual region")
    prod = hf.det[strict][good] * dual_det[good]
    pair.skipped_pairs = int((~good).sum())
    return float(np.abs(prod - 1.0).max())


def _f_at_points(spec, px, py, slack):
    """Load values at arbitrary points: analytic when available, otherwise
    interpolated from the grid with nearest-node fallback within `slack`."""
    if spec.f_callable is not None:
        return spec.f_callable(px, py)
    grid = spec.grid
    vals = _bilinear(grid, spec.f.values, grid.mask, px, py)
    miss = ~np.isfinite(vals)
    if miss.any():
        inside = geo.points_in_convex_polygon(px[miss], py[miss], grid.domain,
                                              tol=slack)
        if not inside.all():
            raise FOutOfDomain(
                f"{int((~inside).sum())} dual slopes leave the load's domain"
            )
        ii = np.clip(
            np.round((py[miss] - grid.ys[0]) / grid.h).astype(int),
            0, grid.mask.shape[0] - 1,
        )
        jj = np.clip(
            np.round((px[miss] - grid.xs[0]) / grid.h).astype(int),
            0, grid.mask.shape[1] - 1,
        )
        vals[miss] = spec.f.values[ii, jj]
    return vals


def eval_J_dual(pair, spec):
    """Dual objective over the slope domain.

    alpha > 0:  int (det D2u*)^(1-alpha) - alpha int f(Du*) (y.Du* - u*) det D2u*
    alpha = 0:  -int det D2u* log det D2u* - int f(Du*) (y.Du* - u*) det D2u*
    """
    dual = GridFunction(pair.dual_grid, pair.dual_refined)
    dg = pair.dual_grid
    hf = hessian_field(dual)
    we = dg.hessian_weights
    det = np.where(dg.interior, hf.det, 0.0)
    a = spec.alpha
    if a > 0.0:
        nonlinear = float(np.sum(we * det ** (1.0 - a)))
    else:
        safe = np.maximum(det, DET_LOG_FLOOR)
        nonlinear = -float(np.sum(we * det * np.log(safe)))

    sx, sy = primal_slopes(dual)  # = Du* on the dual grid
    interior = dg.interior
    fx = np.zeros(dg.mask.shape)
    fvals = _f_at_points(spec, sx[interior], sy[interior], slack=2 * spec.grid.h)
    fx[interior] = fvals
    ydu = dg.X * sx + dg.Y * sy
    integrand = fx * (ydu - dual.values) * det
    load = float(np.sum(we * np.where(interior, integrand, 0.0)))
    scale = a if a > 0.0 else 1.0
    return nonlinear - scale * load


def dual_el_residual(pair, spec):
    """Residual of the dual Euler-Lagrange equation on the dual grid.

    alpha > 0: U*^ij w*_ij + alpha/(1-alpha) f(Du*) det,  w* = det^(-alpha)
    alpha = 0: U*^ij w*_ij + f(Du*) det,                  w* = -log det
    """
    dual = GridFunction(pair.dual_grid, pair.dual_refined)
    dg = pair.dual_grid
    hf = hessian_field(dual)
    a = spec.alpha
    strict = dg.interior & (hf.det > STRICT_DET_FLOOR)
    if not strict.any():
        raise NoStrictRegion("dual function has no strictly convex region")
    w = np.zeros(dg.mask.shape)
    if a > 0.0:
        w[strict] = hf.det[strict] ** (-a)
    else:
        w[strict] = -np.log(hf.det[strict])

    h2 = dg.h * dg.h
    wxx = (np.roll(w, -1, 1) + np.roll(w, 1, 1) - 2 * w) / h2
    wyy = (np.roll(w, -1, 0) + np.roll(w, 1, 0) - 2 * w) / h2
    wxy = (
        np.roll(np.roll(w, -1, 0), -1, 1)
        + np.roll(np.roll(w, 1, 0), 1, 1)
        - np.roll(np.roll(w, -1, 0), 1, 1)
        - np.roll(np.roll(w, 1, 0), -1, 1)
    ) / (4 * h2)
    # valid where the whole 9-point stencil is strict
    valid = strict.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            valid &= np.roll(np.roll(strict, di, 0), dj, 1)
    valid &= dg.interior2

    sx, sy = primal_slopes(dual)
    fx = np.zeros(dg.mask.shape)
    if valid.any():
        fx[valid] = _f_at_points(spec, sx[valid], sy[valid], slack=2 * spec.grid.h)
    lhs = hf.cof_xx * wxx + 2.0 * hf.cof_xy * wxy + hf.cof_yy * wyy
    if a > 0.0:
        rhs = -(a / (1.0 - a)) * fx * hf.det
    else:
        rhs = -fx * hf.det
    res = np.where(valid, lhs - rhs, 0.0)
    return GridFunction(dg, res, valid=valid)
