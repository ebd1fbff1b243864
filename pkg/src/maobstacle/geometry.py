"""Small computational-geometry toolkit for convex polygons.

Polygons are (k, 2) float arrays of vertices in counter-clockwise order
without a repeated closing vertex.  Everything here is exact-order
deterministic; no randomized predicates.
"""

import numpy as np


def convex_hull(points):
    """Convex hull (CCW vertex array) via Andrew's monotone chain.

    Collinear points on the hull boundary are dropped.  Degenerate input
    (all collinear or a single point) returns the reduced vertex set, so
    callers must check the vertex count before treating it as a polygon.
    """
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if pts.shape[0] <= 2:
        return pts
    # lexicographic sort by (x, y)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(chain_pts):
        chain = []
        for p in chain_pts:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(p)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return np.array(lower if len(lower) >= len(upper) else upper)
    return np.array(hull)


def polygon_area(verts):
    """Signed shoelace area; positive for CCW."""
    v = np.asarray(verts, dtype=float)
    if v.shape[0] < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def polygon_perimeter(verts):
    v = np.asarray(verts, dtype=float)
    d = np.roll(v, -1, axis=0) - v
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def points_in_convex_polygon(px, py, verts, tol=0.0):
    """Boolean mask: point lies inside or on the CCW polygon (within tol)."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    inside = np.ones(px.shape, dtype=bool)
    v = np.asarray(verts, dtype=float)
    for k in range(v.shape[0]):
        ax, ay = v[k]
        bx, by = v[(k + 1) % v.shape[0]]
        cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        inside &= cross >= -tol
    return inside


def clip_polygon_halfplane(verts, a, b):
    """Sutherland-Hodgman clip of a polygon against {p : a . p <= b}."""
    v = np.asarray(verts, dtype=float)
    if v.shape[0] == 0:
        return v
    out = []
    n = v.shape[0]
    s = v @ np.asarray(a, dtype=float) - b  # signed violation per vertex
    for k in range(n):
        p, q = v[k], v[(k + 1) % n]
        sp, sq = s[k], s[(k + 1) % n]
        if sp <= 0.0:
            out.append(p)
            if sq > 0.0:
                t = sp / (sp - sq)
                out.append(p + t * (q - p))
        elif sq <= 0.0:
            t = sp / (sp - sq)
            out.append(p + t * (q - p))
    return np.array(out) if out else np.empty((0, 2))


def clip_polygon_convex(subject, clipper):
    """Intersection of `subject` with convex CCW polygon `clipper`."""
    out = np.asarray(subject, dtype=float)
    c = np.asarray(clipper, dtype=float)
    for k in range(c.shape[0]):
        ax, ay = c[k]
        bx, by = c[(k + 1) % c.shape[0]]
        # inside of edge (a -> b) for CCW polygon: cross >= 0,
        # i.e. normal n = (by - ay, ax - bx), n . p <= n . a
        n = np.array([by - ay, ax - bx])
        out = clip_polygon_halfplane(out, n, float(n @ c[k]))
        if out.shape[0] == 0:
            break
    return out


def support_function(verts, dx, dy):
    """h_K(d) = max over vertices of v . d (vectorized over directions)."""
    v = np.asarray(verts, dtype=float)
    dx = np.asarray(dx, dtype=float)
    dy = np.asarray(dy, dtype=float)
    vals = np.multiply.outer(dx, v[:, 0]) + np.multiply.outer(dy, v[:, 1])
    return vals.max(axis=-1)


def distance_to_polygon_boundary(px, py, verts):
    """Distance from points to the polygon boundary (unsigned)."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    v = np.asarray(verts, dtype=float)
    best = np.full(px.shape, np.inf)
    for k in range(v.shape[0]):
        a = v[k]
        b = v[(k + 1) % v.shape[0]]
        ex, ey = b - a
        ee = ex * ex + ey * ey
        t = ((px - a[0]) * ex + (py - a[1]) * ey) / ee
        t = np.clip(t, 0.0, 1.0)
        qx = a[0] + t * ex
        qy = a[1] + t * ey
        d = np.hypot(px - qx, py - qy)
        np.minimum(best, d, out=best)
    return best


def rectangle(x0, y0, x1, y1):
    """CCW vertex array of an axis-aligned rectangle."""
    if not (x1 > x0 and y1 > y0):
        from .errors import DegenerateDomain
        raise DegenerateDomain(f"rectangle [{x0},{x1}]x[{y0},{y1}] has empty interior")
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)


def disc(cx=0.0, cy=0.0, r=1.0, segments=256):
    """Regular polygon approximating a disc (for masking and clipping)."""
    if r <= 0:
        from .errors import DegenerateDomain
        raise DegenerateDomain(f"disc radius {r} <= 0")
    th = 2.0 * np.pi * np.arange(segments) / segments
    return np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)])
