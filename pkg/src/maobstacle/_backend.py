"""Kernel backend selection.

The hot inner loops (envelope sweeps, gauge sweeps, Legendre conjugation)
ship in two variants: numba-compiled and pure numpy.  The active one is
chosen once at import from the MAOBSTACLE_BACKEND environment variable:

    MAOBSTACLE_BACKEND=numba   force numba (ImportError if unavailable)
    MAOBSTACLE_BACKEND=numpy   force the pure-numpy fallback
    unset / "auto"             numba when importable, else numpy

``benchmarks/bench_kernels.py`` times both variants side by side.
"""

import os

_requested = os.environ.get("MAOBSTACLE_BACKEND", "auto").strip().lower()

if _requested in ("", "auto"):
    try:
        import numba  # noqa: F401
        BACKEND = "numba"
    except ImportError:
        BACKEND = "numpy"
elif _requested == "numba":
    import numba  # noqa: F401
    BACKEND = "numba"
elif _requested == "numpy":
    BACKEND = "numpy"
else:
    raise ValueError(
        f"MAOBSTACLE_BACKEND={_requested!r}: expected 'numba', 'numpy' or 'auto'"
    )
