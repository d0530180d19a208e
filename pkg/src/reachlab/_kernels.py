"""Backend selection for the distance-transform kernel.

The compiled extension is used when it imports; otherwise the pure-Python
fallback is bound. ``REACHLAB_BACKEND=python`` forces the fallback.
"""

import os

import numpy as np

from . import _edt_py

INF = _edt_py.INF

try:
    if os.environ.get("REACHLAB_BACKEND", "").lower() == "python":
        raise ImportError("python backend forced")
    from . import _edt as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

_IMPLS = {"python": _edt_py.lower_envelope_lines}
if _compiled is not None:
    _IMPLS["cython"] = _compiled.lower_envelope_lines


def available_backends():
    return tuple(sorted(_IMPLS))


def thread_count():
    raw = os.environ.get("REACHLAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    if hasattr(os, "sched_getaffinity"):
        return max(1, len(os.sched_getaffinity(0)))
    return os.cpu_count() or 1


def squared_edt(seeds, with_index=False, backend=None, threads=None):
    """Exact squared distance (lattice units) from every cell to the nearest seed.

    Returns ``(d2, src)`` where ``src`` holds the C-order flat index of one
    nearest seed (or ``None`` when ``with_index`` is false). Cells with no seed
    anywhere get ``INF`` and ``-1``.
    """
    impl = _IMPLS[backend or BACKEND]
    nthreads = thread_count() if threads is None else threads
    seeds = np.asarray(seeds, dtype=bool)
    f = np.where(seeds, 0, INF).astype(np.int64)
    src = np.where(seeds.ravel(), np.arange(seeds.size, dtype=np.int64), -1)
    src = src.reshape(seeds.shape)
    for axis in range(seeds.ndim):
        fl = np.ascontiguousarray(np.moveaxis(f, axis, -1))
        sl = np.ascontiguousarray(np.moveaxis(src, axis, -1))
        shape = fl.shape
        fl = fl.reshape(-1, shape[-1])
        sl = sl.reshape(-1, shape[-1])
        fo = np.empty_like(fl)
        so = np.empty_like(sl)
        impl(fl, sl, fo, so, nthreads)
        f = np.moveaxis(fo.reshape(shape), -1, axis)
        src = np.moveaxis(so.reshape(shape), -1, axis)
    f = np.ascontiguousarray(f)
    return f, (np.ascontiguousarray(src) if with_index else None)
