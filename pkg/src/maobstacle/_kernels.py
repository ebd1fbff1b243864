"""Hot numeric kernels, in numba and pure-numpy variants.

All kernels operate on the padded (ny, nx) value arrays used by Grid2D;
masked nodes never sit on the array border, so 8-neighbour reads from an
updatable node are always in bounds.  Directions are indexed in the fixed
order DIRS = axes then diagonals; caps are support-function bounds for the
slope constraint expressed per displacement.

Kernels stop at an exact fixpoint (a full sweep with zero float changes),
which is what makes envelope idempotence exact rather than approximate.
"""

import numpy as np

from ._backend import BACKEND

# displacement order shared by all sweep kernels: (di, dj) with i = row (y), j = col (x)
DIRS = np.array(
    [(0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)],
    dtype=np.int64,
)
# envelope uses opposite pairs: axes first, then the two diagonals
ENV_PAIRS = np.array([(0, 1), (1, 0), (1, 1), (1, -1)], dtype=np.int64)

_BIG = np.inf


# ---------------------------------------------------------------------------
# pure numpy variants (Jacobi-style; same fixpoint as the Gauss-Seidel ones)
# ---------------------------------------------------------------------------

def _shift(a, di, dj, fill):
    out = np.full_like(a, fill)
    src = a[
        max(0, -di) : a.shape[0] - max(0, di),
        max(0, -dj) : a.shape[1] - max(0, dj),
    ]
    out[
        max(0, di) : a.shape[0] - max(0, -di),
        max(0, dj) : a.shape[1] - max(0, -dj),
    ] = src
    return out


def envelope_fixpoint_numpy(vals, upper, update, caps, use_caps, max_sweeps):
    """Relax vals to the largest minorant of `upper` that is wide-stencil
    convex (and slope-capped when use_caps) at all `update` nodes."""
    update = update.astype(bool)
    sweeps = 0
    while sweeps < max_sweeps:
        cand = upper.copy()
        for di, dj in ENV_PAIRS:
            avg = 0.5 * (_shift(vals, di, dj, _BIG) + _shift(vals, -di, -dj, _BIG))
            np.minimum(cand, avg, out=cand)
        if use_caps:
            for k, (di, dj) in enumerate(DIRS):
                np.minimum(cand, _shift(vals, di, dj, _BIG) + caps[k], out=cand)
        new = np.where(update, np.minimum(vals, cand), vals)
        sweeps += 1
        if np.array_equal(new, vals):
            break
        vals[...] = new
    return sweeps


def raise_fixpoint_numpy(vals, update, caps, max_sweeps):
    """Raise vals at `update` nodes until u(n) >= u(n+d) - cap(d) for all d."""
    update = update.astype(bool)
    sweeps = 0
    while sweeps < max_sweeps:
        cand = np.full_like(vals, -_BIG)
        for k, (di, dj) in enumerate(DIRS):
            np.maximum(cand, _shift(vals, -di, -dj, -_BIG) - caps[k], out=cand)
        new = np.where(update, np.maximum(vals, cand), vals)
        sweeps += 1
        if np.array_equal(new, vals):
            break
        vals[...] = new
    return sweeps


def conjugate_max_numpy(px, py, pv, qx, qy):
    """out[k], arg[k] = max / argmax over i of (px[i] qx[k] + py[i] qy[k] - pv[i])."""
    out = np.empty(qx.shape[0])
    arg = np.empty(qx.shape[0], dtype=np.int64)
    block = max(1, int(4e6) // max(1, px.shape[0]))
    for s in range(0, qx.shape[0], block):
        e = min(s + block, qx.shape[0])
        m = qx[s:e, None] * px[None, :] + qy[s:e, None] * py[None, :] - pv[None, :]
        arg[s:e] = m.argmax(axis=1)
        out[s:e] = m[np.arange(e - s), arg[s:e]]
    return out, arg


# ---------------------------------------------------------------------------
# numba variants (Gauss-Seidel with rotating sweep corners)
# ---------------------------------------------------------------------------

def _build_numba():
    from numba import njit

    dirs = DIRS.copy()
    env_pairs = ENV_PAIRS.copy()

    @njit(cache=True)
    def envelope_fixpoint(vals, upper, update, caps, use_caps, max_sweeps):
        ny, nx = vals.shape
        sweeps = 0
        corner = 0
        while sweeps < max_sweeps:
            changed = False
            if corner == 0:
                i0, i1, istep, j0, j1, jstep = 0, ny, 1, 0, nx, 1
            elif corner == 1:
                i0, i1, istep, j0, j1, jstep = ny - 1, -1, -1, nx - 1, -1, -1
            elif corner == 2:
                i0, i1, istep, j0, j1, jstep = 0, ny, 1, nx - 1, -1, -1
            else:
                i0, i1, istep, j0, j1, jstep = ny - 1, -1, -1, 0, nx, 1
            for i in range(i0, i1, istep):
                for j in range(j0, j1, jstep):
                    if update[i, j] == 0:
                        continue
                    m = upper[i, j]
                    for p in range(env_pairs.shape[0]):
                        di = env_pairs[p, 0]
                        dj = env_pairs[p, 1]
                        avg = 0.5 * (vals[i - di, j - dj] + vals[i + di, j + dj])
                        if avg < m:
                            m = avg
                    if use_caps:
                        for k in range(dirs.shape[0]):
                            c = vals[i - dirs[k, 0], j - dirs[k, 1]] + caps[k]
                            if c < m:
                                m = c
                    if m < vals[i, j]:
                        vals[i, j] = m
                        changed = True
            sweeps += 1
            corner = (corner + 1) % 4
            if not changed:
                break
        return sweeps

    @njit(cache=True)
    def raise_fixpoint(vals, update, caps, max_sweeps):
        ny, nx = vals.shape
        sweeps = 0
        corner = 0
        while sweeps < max_sweeps:
            changed = False
            if corner == 0:
                i0, i1, istep, j0, j1, jstep = 0, ny, 1, 0, nx, 1
            else:
                i0, i1, istep, j0, j1, jstep = ny - 1, -1, -1, nx - 1, -1, -1
            for i in range(i0, i1, istep):
                for j in range(j0, j1, jstep):
                    if update[i, j] == 0:
                        continue
                    m = vals[i, j]
                    for k in range(dirs.shape[0]):
                        c = vals[i + dirs[k, 0], j + dirs[k, 1]] - caps[k]
                        if c > m:
                            m = c
                    if m > vals[i, j]:
                        vals[i, j] = m
                        changed = True
            sweeps += 1
            corner = (corner + 1) % 2
            if not changed:
                break
        return sweeps

    @njit(cache=True)
    def conjugate_max(px, py, pv, qx, qy):
        nq = qx.shape[0]
        n = px.shape[0]
        out = np.empty(nq)
        arg = np.empty(nq, dtype=np.int64)
        for k in range(nq):
            best = -1e300
            besti = 0
            a = qx[k]
            b = qy[k]
            for i in range(n):
                v = a * px[i] + b * py[i] - pv[i]
                if v > best:
                    best = v
                    besti = i
            out[k] = best
            arg[k] = besti
        return out, arg

    return {
        "envelope_fixpoint": envelope_fixpoint,
        "raise_fixpoint": raise_fixpoint,
        "conjugate_max": conjugate_max,
    }


_NUMPY_IMPLS = {
    "envelope_fixpoint": envelope_fixpoint_numpy,
    "raise_fixpoint": raise_fixpoint_numpy,
    "conjugate_max": conjugate_max_numpy,
}


def get_impls(backend):
    """Kernel dict for a named backend ('numba' or 'numpy')."""
    if backend == "numpy":
        return dict(_NUMPY_IMPLS)
    if backend == "numba":
        return _build_numba()
    raise ValueError(backend)


_active = get_impls(BACKEND)
envelope_fixpoint = _active["envelope_fixpoint"]
raise_fixpoint = _active["raise_fixpoint"]
conjugate_max = _active["conjugate_max"]
