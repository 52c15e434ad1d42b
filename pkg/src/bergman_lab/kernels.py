"""Backend selection for the hot loops.

The compiled extension ``_speedups`` is used when it imports; otherwise the
numpy fallback in ``_pykernels`` is used. Setting ``BERGMAN_LAB_PURE=1``
forces the fallback. ``BACKEND`` names the active one.
"""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _pykernels

try:
    if os.environ.get("BERGMAN_LAB_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _speedups as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"
_impl = _compiled if _compiled is not None else _pykernels


def default_threads():
    try:
        return max(1, int(os.environ.get("BERGMAN_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _split(d):
    d = np.ascontiguousarray(d, dtype=complex)
    return np.ascontiguousarray(d.real), np.ascontiguousarray(d.imag)


def box_masses(defects, weights, centers, scales, threads=None, backend=None):
    """Masses of closed boxes ``|c_j - d_i| <= h_k``.

    Parameters
    ----------
    defects : (N,) complex array
        Node positions in defect coordinates ``d = 1 - w / anchor``.
    weights : (N,) float array
    centers : (M,) complex array
        Box centers in the same coordinates, ``c = 1 - xi / anchor``.
    scales : (K,) float array, strictly increasing

    Returns
    -------
    (M, K) float array
    """
    impl = {"compiled": _compiled, "python": _pykernels, None: _impl}[backend]
    if impl is None:
        raise RuntimeError("compiled backend is not available")
    dre, dim = _split(defects)
    cre, cim = _split(centers)
    w = np.ascontiguousarray(weights, dtype=float)
    h = np.ascontiguousarray(scales, dtype=float)
    if h.size > 1 and np.any(np.diff(h) <= 0):
        raise ValueError("scales must be strictly increasing")
    threads = threads or default_threads()
    m = cre.shape[0]
    if threads <= 1 or m < 2 * threads:
        return impl.box_masses(dre, dim, w, cre, cim, h)
    edges = np.linspace(0, m, threads + 1).astype(int)
    with ThreadPoolExecutor(threads) as pool:
        parts = pool.map(lambda ab: impl.box_masses(dre, dim, w, cre[ab[0]:ab[1]].copy(),
                                                    cim[ab[0]:ab[1]].copy(), h),
                         zip(edges[:-1], edges[1:]))
        return np.vstack(list(parts))


def blaschke_log_modulus(z, zeros, backend=None):
    """``sum_n log|phi_{a_n}(z)|`` for a finite zero list."""
    impl = {"compiled": _compiled, "python": _pykernels, None: _impl}[backend]
    if impl is None:
        raise RuntimeError("compiled backend is not available")
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zre, zim = _split(z.ravel())
    are, aim = _split(np.asarray(zeros, dtype=complex).ravel())
    return impl.blaschke_log_modulus(zre, zim, are, aim).reshape(shape)
