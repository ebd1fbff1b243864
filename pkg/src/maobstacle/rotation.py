"""Graph rotation in R^3, the transformed functional, and sub-level slices.

The fixed rotation is z1 = -x3, z2 = x2, z3 = x1 applied to the graph
x3 = u(x1, x2).  For a window where u is strictly increasing in x1 that
rotation alone represents the graph as a *concave* function of (z1, z2),
so the window is first mirrored (x1 -> -x1, a unimodular change that leaves
determinants and integrals untouched); the composite gives a convex v with
v1 > 0, the frame in which the transformed functional and its
Euler-Lagrange expression hold.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .convexity import ConvexGridFunction, hessian_field
from .errors import (
    EmptySlice,
    NoStrictRegion,
    NotGraphAfterRotation,
    VanishingSlope,
)
from .grid import GridFunction, grid_from_mask

SIGMA_MIN = 1e-3  # representability floor for the window slope u_x1
STRICT_DET_FLOOR = 0.01

# z = R x for the graph rotation; mirror M flips x1 before rotating
ROTATION = np.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
MIRROR = np.diag([-1.0, 1.0, 1.0])


def lam(alpha, n=2):
    """Exponent bookkeeping lambda = 1 - alpha (n + 2)."""
    return 1.0 - alpha * (n + 2)


@dataclass
class RotatedGraph:
    """Convex re-representation v(z1, z2) of a primal graph window."""

    zgrid: object
    v: ConvexGridFunction
    window: tuple = None
    mirrored: bool = True
    source_grid: object = None
    meta: dict = field(default_factory=dict)

    def back_points(self):
        """Primal (x1, x2, u) coordinates of every rotated node."""
        zg = self.zgrid
        z1 = zg.X[zg.mask]
        z2 = zg.Y[zg.mask]
        v = self.v.values[zg.mask]
        x1 = -v if self.mirrored else v
        return x1, z2, -z1

    def correspondence_error(self, u):
        """Max gap between rotated-back nodes and the primal graph
        (u interpolated bilinearly at the back-projected points)."""
        from .legendre import _bilinear

        x1, x2, uz = self.back_points()
        vals = _bilinear(u.grid, u.values, u.grid.mask, x1, x2)
        good = np.isfinite(vals)
        if not good.any():
            return np.inf
        return float(np.abs(vals[good] - uz[good]).max())

    @classmethod
    def from_function(cls, fn, x0, x1, y0, y1, h):
        """Synthetic rotated graph sampled from an analytic v(z1, z2)
        (test bed for the sub-level machinery)."""
        from . import geometry as geo
        from .grid import build_grid

        zg = build_grid(geo.rectangle(x0, y0, x1, y1), h)
        v = ConvexGridFunction.from_callable(zg, fn)
        return cls(zg, v, window=None, mirrored=False)


def rotate_graph(u, window, sigma_min=SIGMA_MIN):
    """Rotate the graph of u over a window with u_x1 >= sigma_min > 0.

    window = (x0, x1, y0, y1) must be covered by masked nodes.  Returns a
    RotatedGraph whose grid has the same spacing h in both z axes; v is
    recovered per row by inverting a cubic spline of u along x1.
    """
    grid = u.grid
    x0, x1, y0, y1 = window
    h = grid.h
    cols = np.nonzero((grid.xs >= x0 - 1e-9 * h) & (grid.xs <= x1 + 1e-9 * h))[0]
    rows = np.nonzero((grid.ys >= y0 - 1e-9 * h) & (grid.ys <= y1 + 1e-9 * h))[0]
    if cols.size < 4 or rows.size < 4:
        raise NotGraphAfterRotation("window too small for the rotation stencil")
    sub = grid.mask[np.ix_(rows, cols)]
    if not sub.all():
        raise NotGraphAfterRotation("window is not fully inside the domain")
    vals = u.values[np.ix_(rows, cols)]
    slopes = np.diff(vals, axis=1) / h
    if slopes.min() < sigma_min:
        raise NotGraphAfterRotation(
            f"window slope u_x1 falls to {slopes.min():.3e} < sigma_min={sigma_min}"
        )

    # mirrored abscissae ascending; u decreasing along them, z1 = -u increasing
    xt = -grid.xs[cols][::-1]
    ut = vals[:, ::-1]
    z_lo = float((-ut).min())
    z_hi = float((-ut).max())
    n1 = int(np.floor((z_hi - z_lo) / h + 1e-9)) + 1
    z1s = z_lo + h * np.arange(-1, n1 + 1)
    z2s = grid.ys[rows[0]] + h * np.arange(-1, rows.size + 1)
    mask = np.zeros((z2s.size, z1s.size), dtype=bool)
    vv = np.zeros_like(mask, dtype=float)

    for r in range(rows.size):
        urow = ut[r]
        zrow = -urow  # ascending
        lo, hi = zrow[0], zrow[-1]
        ok = (z1s >= lo + 0.25 * h) & (z1s <= hi - 0.25 * h)
        if ok.sum() < 2:
            continue
        spl = CubicSpline(xt, urow)
        dspl = spl.derivative()
        targets = -z1s[ok]
        x = np.interp(z1s[ok], zrow, xt)
        for _ in range(4):
            x = x - (spl(x) - targets) / dspl(x)
            x = np.clip(x, xt[0], xt[-1])
        mask[r + 1, ok] = True
        vv[r + 1, ok] = x

    zgrid = grid_from_mask(z1s, z2s, h, mask)
    v = ConvexGridFunction(zgrid, np.where(zgrid.mask, vv, 0.0))
    return RotatedGraph(
        zgrid,
        v,
        window=tuple(window),
        mirrored=True,
        source_grid=grid,
        meta={"sigma_min": sigma_min},
    )


def _slope_fields(rg):
    zg = rg.zgrid
    v = rg.v.values
    v1 = (np.roll(v, -1, 1) - np.roll(v, 1, 1)) / (2 * zg.h)
    v1[~zg.interior] = 0.0
    return v1


def eval_A_hat(rg, alpha, sigma_min=SIGMA_MIN):
    """Transformed nonlinear term over the rotated domain (n = 2):

    alpha > 0:  int (det D2v)^alpha |v1|^(1 - 4 alpha)
    alpha = 0:  int [log det D2v - 2 log(v1^2)] |v1|
    """
    zg = rg.zgrid
    hf = hessian_field(rg.v)
    v1 = _slope_fields(rg)
    interior = zg.interior
    small = interior & (np.abs(v1) < sigma_min)
    if interior.any() and small.sum() > 0.01 * interior.sum():
        raise VanishingSlope(
            f"|v1| < {sigma_min} at {int(small.sum())} of {int(interior.sum())} nodes"
        )
    we = zg.hessian_weights
    av1 = np.abs(np.where(interior, v1, 0.0))
    det = np.where(interior, hf.det, 0.0)
    if alpha > 0.0:
        integrand = det ** alpha * np.where(interior, av1 ** (1.0 - 4.0 * alpha), 0.0)
        return float(np.sum(we * integrand))
    integrand = np.zeros_like(det)
    di = np.maximum(det[interior], 1e-300)
    vi = np.maximum(av1[interior], 1e-300)
    integrand[interior] = (np.log(di) - 2.0 * np.log(vi ** 2)) * av1[interior]
    return float(np.sum(we * integrand))


def rotated_el_residual(rg, alpha, Ft, sigma_min=SIGMA_MIN):
    """Residual of the transformed Euler-Lagrange equation

        V^ij (d^(alpha-1))_ij - g - F_script = 0,   d = det D2v,

    with g = lambda (1-alpha) d^alpha [2 v^ij v_ij1 / v1 - 4 v11 / v1^2]
    and F_script = Ft / (alpha v1^lambda) for alpha > 0, Ft / v1 at alpha=0.
    lambda is a literal factor of g, so it vanishes exactly at alpha = 1/4.
    """
    zg = rg.zgrid
    h = zg.h
    hf = hessian_field(rg.v)
    v1 = _slope_fields(rg)
    ft = Ft.values if isinstance(Ft, GridFunction) else np.asarray(Ft, dtype=float)

    strict = zg.interior & (hf.det > STRICT_DET_FLOOR)
    sloped = zg.interior & (np.abs(v1) >= sigma_min)
    if not strict.any():
        raise NoStrictRegion("rotated graph has no strictly convex region")
    if not sloped.any():
        raise VanishingSlope("rotated graph slope below sigma_min everywhere")
    base = strict & sloped

    d = np.where(base, hf.det, 1.0)
    w = np.where(base, d ** (alpha - 1.0), 0.0)
    h2 = h * h
    w11 = (np.roll(w, -1, 1) + np.roll(w, 1, 1) - 2 * w) / h2
    w22 = (np.roll(w, -1, 0) + np.roll(w, 1, 0) - 2 * w) / h2
    w12 = (
        np.roll(np.roll(w, -1, 0), -1, 1)
        + np.roll(np.roll(w, 1, 0), 1, 1)
        - np.roll(np.roll(w, -1, 0), 1, 1)
        - np.roll(np.roll(w, 1, 0), -1, 1)
    ) / (4 * h2)
    lhs = hf.cof_xx * w11 + 2.0 * hf.cof_xy * w12 + hf.cof_yy * w22

    # third derivatives v_ij1: centered z1-difference of the Hessian entries
    def d1(a):
        return (np.roll(a, -1, 1) - np.roll(a, 1, 1)) / (2 * h)

    v111 = d1(hf.uxx)
    v121 = d1(hf.uxy)
    v221 = d1(hf.uyy)
    iv11 = np.where(base, hf.cof_xx / d, 0.0)
    iv12 = np.where(base, hf.cof_xy / d, 0.0)
    iv22 = np.where(base, hf.cof_yy / d, 0.0)
    vijvij1 = iv11 * v111 + 2.0 * iv12 * v121 + iv22 * v221
    lv = lam(alpha)
    v1s = np.where(sloped, v1, 1.0)
    g = lv * (
        2.0 * (1.0 - alpha) * d ** alpha * vijvij1 / v1s
        - (1.0 - alpha) * 4.0 * d ** alpha * hf.uxx / v1s ** 2
    )
    if alpha > 0.0:
        fscript = ft / (alpha * v1s ** lv)
    else:
        fscript = ft / v1s

    # valid where the whole stencil of w and the third differences exist
    valid = base.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            valid &= np.roll(np.roll(base, di, 0), dj, 1)
    valid &= zg.interior2
    res = np.where(valid, lhs - g - fscript, 0.0)
    return GridFunction(zg, res, valid=valid)


def rotated_g_magnitude(rg, alpha, sigma_min=SIGMA_MIN):
    """Max |g| over the strict region (exactly 0 at alpha = 1/4)."""
    zg = rg.zgrid
    hf = hessian_field(rg.v)
    v1 = _slope_fields(rg)
    base = zg.interior2 & (hf.det > STRICT_DET_FLOOR) & (np.abs(v1) >= sigma_min)
    if not base.any():
        raise NoStrictRegion("no strict region for the g-term")
    h = zg.h
    d = np.where(base, hf.det, 1.0)

    def d1(a):
        return (np.roll(a, -1, 1) - np.roll(a, 1, 1)) / (2 * h)

    vijvij1 = (
        (hf.cof_xx / d) * d1(hf.uxx)
        + 2.0 * (hf.cof_xy / d) * d1(hf.uxy)
        + (hf.cof_yy / d) * d1(hf.uyy)
    )
    v1s = np.where(np.abs(v1) >= sigma_min, v1, 1.0)
    lv = lam(alpha)
    g = lv * (
        2.0 * (1.0 - alpha) * d ** alpha * vijvij1 / v1s
        - (1.0 - alpha) * 4.0 * d ** alpha * hf.uxx / v1s ** 2
    )
    return float(np.abs(g[base]).max())


@dataclass
class SublevelSlice:
    """Shifted function v_hat = v - s z1 - level and its negativity region."""

    rg: object
    s: float
    level: float
    vhat: np.ndarray
    slice_mask: np.ndarray
    det: np.ndarray
    conditions_ok: bool

    @property
    def n_nodes(self):
        return int(self.slice_mask.sum())

    def max_det(self):
        m = self.slice_mask & self.rg.zgrid.interior
        return float(self.det[m].max()) if m.any() else 0.0

    def boundary_values(self):
        """v_hat at slice nodes adjacent to the slice boundary (should be
        within one gradient step of zero)."""
        ring = np.zeros_like(self.slice_mask)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ring |= np.roll(np.roll(~self.slice_mask, di, 0), dj, 1)
        edge = self.slice_mask & ring
        return self.vhat[edge]


def sublevel_slice(rg, s, level, tol_factor=1e-6):
    """Slice {v < s z1 + level} of a rotated graph satisfying v >= 0,
    v >= z1, v1 >= 0 (within tolerance; recorded, not enforced)."""
    if not (0.0 < s < 0.5 and 0.0 < level < 0.5):
        raise EmptySlice(f"slice parameters s={s}, level={level} outside (0, 1/2)")
    zg = rg.zgrid
    v = rg.v.values
    scale = max(rg.v.range(), 1.0)
    tol = tol_factor * scale
    v1 = _slope_fields(rg)
    m = zg.mask
    conditions_ok = bool(
        v[m].min() >= -tol
        and (v - zg.X)[m].min() >= -tol
        and v1[zg.interior].min() >= -tol
    )
    vhat = np.where(m, v - s * zg.X - level, 0.0)
    slice_mask = m & (vhat < 0.0)
    if slice_mask.sum() < 4:
        raise EmptySlice(
            f"sub-level set has {int(slice_mask.sum())} nodes (need >= 4)"
        )
    hf = hessian_field(rg.v)
    return SublevelSlice(rg, float(s), float(level), vhat, slice_mask, hf.det,
                         conditions_ok)
