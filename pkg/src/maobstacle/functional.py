"""The objective: nonlinear term, load, obstacle barrier and boundary barrier.

For grid functions the nonlinear term integrates a power (or log) of the
clamped finite-difference determinant.  Interior-node integrands are
integrated with `hessian_weights`, which folds each boundary cell into its
nearest interior node so constants integrate to the full domain area.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .convexity import ConvexGridFunction, hessian_field
from .errors import (
    BarrierDomain,
    BoundaryMismatch,
    ConfigError,
    ContactWithObstacle,
    InfeasibleConstraints,
    LogOfDegenerateHessian,
)
from .grid import GridFunction

DET_LOG_FLOOR = 1e-12   # clamp for the alpha = 0 logarithm
DEGENERATE_FRACTION = 0.01  # tolerated share of log-clamped interior nodes


def _as_gridfunction(grid, obj):
    if isinstance(obj, GridFunction):
        grid.require_same_lattice(obj.grid)
        return obj, None
    if callable(obj):
        return GridFunction.from_callable(grid, obj), obj
    if np.isscalar(obj):
        return GridFunction.constant(grid, obj), None
    return GridFunction(grid, np.asarray(obj, dtype=float)), None


@dataclass
class FunctionalSpec:
    """Everything defining the maximization problem on one grid:
    exponent alpha, load f, boundary datum phi, obstacle psi, and the
    gradient-target polygon (the slope hull of phi over the closed domain).
    """

    grid: object
    alpha: float
    f: GridFunction
    phi: GridFunction
    psi: GridFunction
    gradient_polygon: np.ndarray
    f_callable: object = None
    phi_callable: object = None

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 0.25):
            raise ConfigError(
                f"alpha={self.alpha} outside the admissible range [0, 0.25]"
            )
        grid = self.grid
        rng = max(self.phi.range(), self.psi.range(), 1e-300)
        gap = (self.phi.values - self.psi.values)[grid.boundary]
        if gap.size and gap.min() <= 1e-12 * rng:
            raise InfeasibleConstraints(
                "obstacle psi is not strictly below phi on the boundary"
            )
        # phi must be wide-stencil convex with strictly positive curvature
        pv = self.phi.values
        for di, dj in ((0, 1), (1, 0), (1, 1), (1, -1)):
            d2 = (
                np.roll(np.roll(pv, -di, 0), -dj, 1)
                + np.roll(np.roll(pv, di, 0), dj, 1)
                - 2.0 * pv
            )
            if grid.interior.any() and d2[grid.interior].min() <= 0.0:
                raise ConfigError(
                    "boundary datum phi is not strictly convex on the lattice"
                )
        if self.gradient_polygon.shape[0] < 3:
            raise ConfigError("gradient-target polygon is degenerate")

    @classmethod
    def from_callables(cls, grid, alpha, f, phi, psi):
        """Build a spec by sampling callables (or constants/arrays).

        phi must be evaluable on a one-spacing neighbourhood of the domain;
        its slope hull is taken over centered differences at all masked
        nodes, so the hull covers the boundary gradients.
        """
        f_gf, f_call = _as_gridfunction(grid, f)
        psi_gf, _ = _as_gridfunction(grid, psi)
        if callable(phi):
            phi_vals = phi(grid.X, grid.Y)  # includes the padding ring
            phi_gf = GridFunction(grid, phi_vals)
            sx = (np.roll(phi_vals, -1, 1) - np.roll(phi_vals, 1, 1)) / (2 * grid.h)
            sy = (np.roll(phi_vals, -1, 0) - np.roll(phi_vals, 1, 0)) / (2 * grid.h)
            slopes = np.column_stack([sx[grid.mask], sy[grid.mask]])
            phi_call = phi
        else:
            phi_gf, phi_call = _as_gridfunction(grid, phi)
            pv = phi_gf.values
            sx = (np.roll(pv, -1, 1) - np.roll(pv, 1, 1)) / (2 * grid.h)
            sy = (np.roll(pv, -1, 0) - np.roll(pv, 1, 0)) / (2 * grid.h)
            slopes = np.column_stack([sx[grid.interior], sy[grid.interior]])
        hull = geo.convex_hull(slopes)
        return cls(grid, float(alpha), f_gf, phi_gf, psi_gf, hull, f_call, phi_call)

    def slope_caps(self, dirs):
        """Support-function bounds of the gradient polygon for the physical
        displacements h * dirs (used by the admissibility projection)."""
        d = np.asarray(dirs, dtype=float) * self.grid.h
        # dirs are (di, dj) = (y, x); slope space is (sx, sy)
        return geo.support_function(self.gradient_polygon, d[:, 1], d[:, 0])


@dataclass
class PenaltyConfig:
    """Obstacle-penalty schedule and weights.

    The weight a(x) = dist(x, boundary)^p vanishes at boundary nodes so the
    barrier integral stays finite for admissible iterates that only touch
    the obstacle at the rim.
    """

    eps_schedule: list
    weight: GridFunction
    weight_power: int = 3
    pen_exponent: int = 2
    barrier_j: int = 0

    def __post_init__(self):
        eps = [float(e) for e in self.eps_schedule]
        if any(e <= 0 for e in eps):
            raise ConfigError("penalty schedule must be positive")
        for a, b in zip(eps, eps[1:]):
            r = b / a
            if not (0.1 - 1e-12 <= r <= 0.9 + 1e-12):
                raise ConfigError(
                    f"penalty schedule ratio {r:.3f} outside [0.1, 0.9]"
                )
        self.eps_schedule = eps
        wv = self.weight.values
        grid = self.weight.grid
        if grid.boundary.any() and np.any(wv[grid.boundary] != 0.0):
            raise ConfigError("penalty weight must vanish at boundary nodes")
        if grid.interior.any() and np.any(wv[grid.interior] <= 0.0):
            raise ConfigError("penalty weight must be positive at interior nodes")

    @classmethod
    def for_grid(cls, grid, eps0=0.1, ratio=0.5, stages=8, weight_power=3,
                 barrier_j=0):
        dist = grid.boundary_distance()
        a = np.where(grid.interior, dist ** weight_power, 0.0)
        weight = GridFunction(grid, a)
        eps = [eps0 * ratio ** i for i in range(stages)]
        return cls(eps, weight, weight_power, 2, barrier_j)


# ---------------------------------------------------------------------------
# functional evaluations
# ---------------------------------------------------------------------------

def eval_A(u, alpha, hf=None):
    """Nonlinear term: integral of det^alpha (alpha > 0) or log det (alpha = 0)
    of the clamped finite-difference determinant."""
    if hf is None:
        hf = hessian_field(u)
    grid = u.grid
    we = grid.hessian_weights
    if alpha > 0.0:
        return float(np.sum(we * np.where(grid.interior, hf.det, 0.0) ** alpha))
    degenerate = grid.interior & (hf.det < DET_LOG_FLOOR)
    n_int = grid.n_interior
    if n_int and degenerate.sum() > DEGENERATE_FRACTION * n_int:
        raise LogOfDegenerateHessian(
            f"{int(degenerate.sum())} of {n_int} interior nodes have "
            f"det < {DET_LOG_FLOOR} with alpha = 0"
        )
    logdet = np.where(grid.interior, np.log(np.maximum(hf.det, DET_LOG_FLOOR)), 0.0)
    return float(np.sum(we * logdet))


def eval_J(u, spec, hf=None):
    """Full objective: eval_A minus the (alpha-scaled) load term."""
    load = float(np.sum(spec.grid.weights * spec.f.values * u.values))
    if spec.alpha > 0.0:
        return eval_A(u, spec.alpha, hf) - spec.alpha * load
    return eval_A(u, 0.0, hf) - load


def eval_obstacle_penalty(u, lower, cfg, eps):
    """Barrier integral eps * int a(x) (u - lower)^(-2).

    Raises ContactWithObstacle (the infinite-penalty signal) when the gap
    closes at an interior node.
    """
    grid = u.grid
    interior = grid.interior
    gap = u.values[interior] - lower.values[interior]
    if gap.size and gap.min() <= 0.0:
        raise ContactWithObstacle(
            f"iterate touches its lower envelope (min gap {gap.min():.3e})"
        )
    a = cfg.weight.values[interior]
    w = grid.weights[interior]
    return float(eps) * float(np.sum(w * a / gap ** cfg.pen_exponent))


def eval_barrier_H(t, j=0):
    """Boundary-attachment barrier H_j(t) = (1 - (4^j t)^2)^(-4)."""
    s = (4.0 ** j) * np.asarray(t, dtype=float)
    if np.any(np.abs(s) >= 1.0):
        raise BarrierDomain(f"|4^{j} t| >= 1")
    out = (1.0 - s * s) ** -4
    return float(out) if out.ndim == 0 else out


def barrier_H_derivative(t, j=0):
    """d/dt of eval_barrier_H (used by the attached-boundary objective)."""
    s = (4.0 ** j) * np.asarray(t, dtype=float)
    if np.any(np.abs(s) >= 1.0):
        raise BarrierDomain(f"|4^{j} t| >= 1")
    out = 8.0 * (4.0 ** j) * s * (1.0 - s * s) ** -5
    return float(out) if out.ndim == 0 else out


def concavity_probe(u, v, spec, t):
    """J(t u + (1-t) v) minus the matching combination of J values.

    The combination is re-certified convex before evaluation.  Nonnegative
    up to quadrature slack when the objective is concave on the class.
    """
    spec.grid.require_same_lattice(u.grid)
    spec.grid.require_same_lattice(v.grid)
    if not (0.0 < t < 1.0):
        raise ConfigError(f"t={t} must lie in (0, 1)")
    rng = max(u.range(), v.range(), 1e-300)
    bdiff = np.abs(u.values - v.values)[u.grid.boundary]
    if bdiff.size and bdiff.max() > 1e-9 * rng:
        raise BoundaryMismatch(
            f"boundary values differ by up to {bdiff.max():.3e}"
        )
    mid = ConvexGridFunction(u.grid, t * u.values + (1.0 - t) * v.values)
    return eval_J(mid, spec) - (t * eval_J(u, spec) + (1.0 - t) * eval_J(v, spec))
