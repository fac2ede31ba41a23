"""Thread-count control for the numba-parallel kernels.

All parallel kernels in this package write each output element from
exactly one thread and reduce through fixed-shape blocks, so results are
bit-identical for any thread count. The environment variable
``GWFLOW_THREADS`` sets the default; a CLI flag overrides it.
"""

from __future__ import annotations

import os
import warnings

import numba

ENV_VAR = "GWFLOW_THREADS"


def max_threads() -> int:
    """Size of the numba thread pool (hardware parallelism by default)."""
    return int(numba.config.NUMBA_NUM_THREADS)


def set_thread_count(n: int) -> int:
    """Activate ``n`` threads, clamped to the pool size with a warning.

    Returns the thread count actually in effect.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"thread count must be >= 1, got {n}")
    avail = max_threads()
    if n > avail:
        warnings.warn(
            f"requested {n} threads but only {avail} available; running with {avail}",
            RuntimeWarning,
            stacklevel=2,
        )
        n = avail
    numba.set_num_threads(n)
    return n


def current_thread_count() -> int:
    return int(numba.get_num_threads())


def default_thread_count() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw:
        try:
            return max(1, min(int(raw), max_threads()))
        except ValueError:
            warnings.warn(f"ignoring non-integer {ENV_VAR}={raw!r}", RuntimeWarning)
    return max_threads()
