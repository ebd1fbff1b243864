"""Exception types shared across the package.

Every guard documented in the public API raises one of these, so callers
(and the CLI exit-code mapping) can dispatch on type rather than message.
"""


class MaobstacleError(Exception):
    """Base class for all package errors."""


# -- grid -------------------------------------------------------------------

class DegenerateDomain(MaobstacleError):
    """Domain polygon has empty interior."""


class GridTooCoarse(MaobstacleError):
    """Fewer lattice nodes across the domain than the scheme can use."""


class NonFinite(MaobstacleError):
    """Grid function contains NaN or infinity."""


class GridMismatch(MaobstacleError):
    """Two grid objects that must share a lattice do not."""


# -- convexity --------------------------------------------------------------

class ConvexityViolation(MaobstacleError):
    """Values fail the wide-stencil convexity certificate."""


class BoundaryNode(MaobstacleError):
    """Operation requires an interior node."""


class EOutsideDomain(MaobstacleError):
    """Evaluation set is not compactly contained in the domain."""


# -- functional -------------------------------------------------------------

class LogOfDegenerateHessian(MaobstacleError):
    """alpha = 0 functional evaluated where the determinant collapses."""


class ContactWithObstacle(MaobstacleError):
    """Barrier integrand blew up: iterate touched its lower envelope."""


class BarrierDomain(MaobstacleError):
    """Boundary barrier evaluated outside (-1, 1) after rescaling."""


class BoundaryMismatch(MaobstacleError):
    """Concavity probe arguments do not share grid or boundary values."""


# -- legendre / rotation ----------------------------------------------------

class NoStrictRegion(MaobstacleError):
    """No nodes with determinant above the strict-convexity floor."""


class FOutOfDomain(MaobstacleError):
    """Load function requested outside its domain of definition."""


class NotGraphAfterRotation(MaobstacleError):
    """Window slope condition fails; rotated surface is not a graph."""


class VanishingSlope(MaobstacleError):
    """Rotated-graph slope |v1| fell below the representability floor."""


class EmptySlice(MaobstacleError):
    """Sub-level slice of the rotated graph contains too few nodes."""


# -- solver -----------------------------------------------------------------

class InfeasibleConstraints(MaobstacleError):
    """Admissible class is empty for the given boundary datum and obstacle."""


class NonConvergence(MaobstacleError):
    """Iteration caps hit while the objective was still moving."""


# -- diagnostics ------------------------------------------------------------

class EmptyInterior(MaobstacleError):
    """No nodes at the requested margin from the boundary."""


class InsufficientRadii(MaobstacleError):
    """Fewer than three dyadic radii fit inside the domain."""


class NoContactBoundary(MaobstacleError):
    """Contact set is empty or the base point is not on its boundary."""


# -- cli --------------------------------------------------------------------

class ConfigError(MaobstacleError):
    """Run configuration violates a documented invariant."""
