"""Pure-numpy versions of the compiled kernels in ``_speedups.pyx``.

Both modules expose the same functions with the same argument order so
that :mod:`bergman_lab.kernels` can swap one for the other.
"""
import numpy as np

_CHUNK_ELEMS = 4_000_000


def box_masses(dre, dim, weights, cre, cim, scales):
    n = dre.shape[0]
    m = cre.shape[0]
    k = scales.shape[0]
    out = np.zeros((m, k + 1))
    if n == 0 or m == 0:
        return out[:, :k]
    d = dre + 1j * dim
    rows = max(1, _CHUNK_ELEMS // max(n, 1))
    for start in range(0, m, rows):
        stop = min(m, start + rows)
        c = (cre[start:stop] + 1j * cim[start:stop])[:, None]
        diff = c - d[None, :]
        dist2 = diff.real * diff.real + diff.imag * diff.imag
        # ties count as inside: bin b holds nodes whose first admitting scale is b
        bins = np.searchsorted(scales * scales, dist2, side="left")
        flat = bins + (k + 1) * np.arange(stop - start)[:, None]
        counts = np.bincount(flat.ravel(), weights=np.broadcast_to(weights, dist2.shape).ravel(),
                             minlength=(stop - start) * (k + 1))
        out[start:stop] = counts.reshape(stop - start, k + 1)
    np.cumsum(out, axis=1, out=out)
    return out[:, :k]


def blaschke_log_modulus(zre, zim, are, aim):
    z = zre + 1j * zim
    a = are + 1j * aim
    out = np.zeros(z.shape[0])
    with np.errstate(divide="ignore"):
        # a point on a zero gives -inf, as in the compiled kernel
        for aj in a:
            out += np.log(np.abs(aj - z)) - np.log(np.abs(1.0 - np.conj(aj) * z))
    return out
