"""Backend selection for the hot kernels.

Two interchangeable kernel implementations exist: numba @njit loops and pure
numpy vectorised code.  The environment variable HAZARD_LAB_BACKEND picks one
("numba" or "numpy"); unset means numba when importable, numpy otherwise.
HAZARD_LAB_THREADS caps the numba thread pool (and is accepted, but inert,
under the numpy backend).
"""

import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only where numba is absent
    numba = None
    HAS_NUMBA = False

_VALID = ("numba", "numpy")


def requested_backend():
    """Backend name from the environment, validated but not resolved."""
    raw = os.environ.get("HAZARD_LAB_BACKEND", "").strip().lower()
    if raw and raw not in _VALID:
        raise ValueError(
            f"HAZARD_LAB_BACKEND must be one of {_VALID}, got {raw!r}"
        )
    return raw or None


def active_backend():
    """Resolve the backend actually used for kernel dispatch."""
    req = requested_backend()
    if req == "numba" and not HAS_NUMBA:
        raise RuntimeError("HAZARD_LAB_BACKEND=numba but numba is not importable")
    if req:
        return req
    return "numba" if HAS_NUMBA else "numpy"


def thread_cap():
    """Worker cap from HAZARD_LAB_THREADS; 0 means library default."""
    raw = os.environ.get("HAZARD_LAB_THREADS", "").strip()
    if not raw:
        return 0
    try:
        val = int(raw)
    except ValueError as exc:
        raise ValueError(f"HAZARD_LAB_THREADS must be an integer, got {raw!r}") from exc
    if val < 1:
        raise ValueError(f"HAZARD_LAB_THREADS must be >= 1, got {val}")
    return val


def apply_thread_cap():
    """Install the HAZARD_LAB_THREADS cap into numba's thread pool.

    Safe to call repeatedly; a no-op under the numpy backend.  Results are
    independent of the cap by construction (kernels only parallelise
    per-path work that writes disjoint rows), so this is purely a resource
    control.
    """
    cap = thread_cap()
    if cap and HAS_NUMBA and active_backend() == "numba":
        limit = min(cap, numba.config.NUMBA_NUM_THREADS)
        numba.set_num_threads(limit)
        return limit
    return 0
