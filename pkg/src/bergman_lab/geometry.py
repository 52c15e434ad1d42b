"""Exact primitives of disk geometry.

Carleson boxes, the pseudo-hyperbolic metric, Moebius maps, finite Blaschke
products, pseudo-hyperbolic disks, and transforms of boundary data (Poisson
integral, conjugate function).

Points near the unit circle are frequently carried in *defect coordinates*
``d = 1 - w / anchor`` for a unimodular ``anchor``; :func:`one_minus_expi`
supplies the exact defect of a boundary point ``anchor * exp(i t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

# Half-angle constant of the sector containing Delta(a, 1/2) for a >= 3/4.
SECTOR_CONSTANT = 64 * math.pi / 54


class DomainError(ValueError):
    """A point or parameter lies outside the domain of an operation."""


def one_minus_expi(t):
    """``1 - exp(i t)`` without cancellation for small ``t``."""
    t = np.asarray(t, dtype=float)
    return 2.0 * np.sin(t / 2.0) ** 2 - 1j * np.sin(t)


def _check_disk(*points):
    for p in points:
        if np.any(np.abs(np.asarray(p)) >= 1.0):
            raise DomainError("points must lie in the open unit disk")


def pseudo_hyperbolic(u, v):
    """rho(u, v) = |u - v| / |1 - conj(u) v|, broadcasting over arrays."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    _check_disk(u, v)
    out = np.abs(u - v) / np.abs(1.0 - np.conj(u) * v)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CarlesonBox:
    """S(xi, h) = {z in D : |z - xi| < h}."""

    center: complex
    size: float

    def __post_init__(self):
        if abs(abs(self.center) - 1.0) > 1e-14:
            raise DomainError("box center must be unimodular")
        if not 0.0 < self.size <= 1.0:
            raise DomainError("box size must lie in (0, 1]")

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return (np.abs(z - self.center) < self.size) & (np.abs(z) < 1.0)


@dataclass(frozen=True)
class MobiusMap:
    """z -> (a z + b) / (c z + d)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if abs(self.a * self.d - self.b * self.c) == 0:
            raise ValueError("degenerate Moebius map (ad - bc = 0)")

    @classmethod
    def from_matrix(cls, m):
        return cls(complex(m[0][0]), complex(m[0][1]), complex(m[1][0]), complex(m[1][1]))

    @classmethod
    def involution(cls, a):
        """phi_a(z) = (a - z) / (1 - conj(a) z): swaps a and 0."""
        a = complex(a)
        if abs(a) >= 1:
            raise DomainError("|a| must be < 1")
        return cls(-1.0, a, -a.conjugate(), 1.0)

    @classmethod
    def automorphism(cls, a, rotation=1.0):
        """rotation * phi_a, the general disk automorphism."""
        m = cls.involution(a)
        lam = complex(rotation)
        return cls(lam * m.a, lam * m.b, m.c, m.d)

    @classmethod
    def from_three_points(cls, z1, z2, z3):
        """The map sending z1 -> 0, z2 -> 1, z3 -> infinity."""
        z1, z2, z3 = complex(z1), complex(z2), complex(z3)
        return cls(z2 - z3, -z1 * (z2 - z3), z2 - z1, -z3 * (z2 - z1))

    @property
    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (self.a * z + self.b) / (self.c * z + self.d)

    def compose(self, other):
        """self o other."""
        return MobiusMap.from_matrix(self.matrix @ other.matrix)

    def inverse(self):
        return MobiusMap(self.d, -self.b, -self.c, self.a)


class BlaschkeProduct:
    """Finite Blaschke product with convergence factors |a|/a (1 when a = 0).

    Parameters
    ----------
    zeros : sequence of complex
        Zeros inside the disk, repeated according to multiplicity.
    truncation : int, optional
        Only the first ``truncation`` zeros are used.
    """

    def __init__(self, zeros, truncation=None):
        zeros = np.asarray(zeros, dtype=complex).ravel()
        if truncation is not None:
            zeros = zeros[:truncation]
        if zeros.size and np.max(np.abs(zeros)) >= 1:
            raise DomainError("Blaschke zeros must lie in the open disk")
        self.zeros = zeros
        self.blaschke_sum = float(np.sum(1.0 - np.abs(zeros)))
        if not np.isfinite(self.blaschke_sum):
            raise ValueError("sum of (1 - |a_n|) must be finite")
        mod = np.abs(zeros)
        self.factors = np.where(mod > 0, mod / np.where(mod > 0, zeros, 1.0), 1.0)

    @property
    def truncation(self):
        return self.zeros.size

    def __len__(self):
        return self.zeros.size

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones_like(z)
        for a, f in zip(self.zeros, self.factors):
            out = out * f * (a - z) / (1.0 - np.conj(a) * z)
        return out

    def log_modulus(self, z):
        """log|B(z)| = sum of log|phi_a(z)|."""
        if not self.zeros.size:
            return np.zeros(np.shape(z))
        return kernels.blaschke_log_modulus(z, self.zeros)

    def split(self, radius=0.75):
        """(inner, outer) products with zeros of modulus < radius and >= radius."""
        small = np.abs(self.zeros) < radius
        return BlaschkeProduct(self.zeros[small]), BlaschkeProduct(self.zeros[~small])


@dataclass(frozen=True)
class PseudoHyperbolicDisk:
    """Delta(a, s) = {z : rho(a, z) < s}, which is a Euclidean disk."""

    center: complex
    radius: float
    euclidean_center: complex = field(init=False)
    euclidean_radius: float = field(init=False)

    def __post_init__(self):
        if abs(self.center) >= 1:
            raise DomainError("center must lie in the disk")
        if not 0 < self.radius < 1:
            raise DomainError("radius must lie in (0, 1)")
        a, s = complex(self.center), float(self.radius)
        den = 1.0 - s * s * abs(a) ** 2
        object.__setattr__(self, "euclidean_center", (1.0 - s * s) * a / den)
        object.__setattr__(self, "euclidean_radius", s * (1.0 - abs(a) ** 2) / den)

    def contains(self, z):
        return np.abs(np.asarray(z) - self.euclidean_center) < self.euclidean_radius

    def boundary(self, n=256):
        t = 2 * np.pi * np.arange(n) / n
        return self.euclidean_center + self.euclidean_radius * np.exp(1j * t)


@dataclass(frozen=True)
class CompanionDisk:
    """Disk D_a of diameter [c, 1/c] orthogonal to the circle, with its arc A_a.

    ``delta`` is the pseudo-hyperbolic disk Delta(a, 1/2); ``c`` its
    real boundary point in (0, a).
    """

    a: float
    c: float
    delta: PseudoHyperbolicDisk
    center: float
    radius: float
    arc_half_angle: float

    @property
    def diameter(self):
        return 2 * self.radius

    @property
    def arc_length(self):
        return 2 * self.arc_half_angle

    def contains(self, z):
        return np.abs(np.asarray(z) - self.center) < self.radius


def orthogonal_boundary_disk(a):
    """Companion disk D_a and arc A_a attached to a real zero a in [3/4, 1)."""
    a = float(a)
    if not 0.75 <= a < 1:
        raise DomainError("a must lie in [3/4, 1)")
    h = 1 - a
    c = (2 * a - 1) / (2 - a)
    one_minus_c = 3 * h / (2 - a)
    center = (c + 1 / c) / 2
    radius = one_minus_c * (1 + c) / (2 * c)
    # the circle |z - m| = R meets |z| = 1 where tan(t/2) = (1 - c)/(1 + c)
    half = 2 * math.atan(3 * h / (1 + a))
    return CompanionDisk(a, c, PseudoHyperbolicDisk(a, 0.5), center, radius, half)


# --- boundary data -----------------------------------------------------------

@dataclass(frozen=True)
class BoundaryFunction:
    """Samples of a 2pi-periodic function on theta_j = 2 pi j / M.

    ``tag`` records the interpretation ("G", "logG", "I_v", "sigma",
    "arbitrary", ...). ``finite`` is an optional per-sample mask marking
    values that were computed without a divergence flag.
    """

    values: np.ndarray
    tag: str = "arbitrary"
    finite: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        m = v.shape[0]
        if v.ndim != 1 or m < 2 or m & (m - 1):
            raise ValueError("boundary grid length must be a power of two")
        object.__setattr__(self, "values", v)
        if self.finite is None:
            object.__setattr__(self, "finite", np.isfinite(v))
        if self.tag == "G":
            ok = self.finite & np.isfinite(v)
            if np.any(v[ok] < 1 - 1e-9):
                raise ValueError("G must be >= 1")

    @classmethod
    def from_callable(cls, f, m, tag="arbitrary"):
        return cls(np.asarray(f(grid(m))), tag)

    @property
    def size(self):
        return self.values.shape[0]

    @property
    def theta(self):
        return grid(self.size)

    def mean(self):
        return self.values.mean()

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("theta,value\n" if np.isrealobj(self.values) else "theta,real,imag\n")
            for t, v in zip(self.theta, self.values):
                if np.isrealobj(self.values):
                    fh.write(f"{t:.17g},{v:.17g}\n")
                else:
                    fh.write(f"{t:.17g},{v.real:.17g},{v.imag:.17g}\n")


def grid(m):
    return 2 * np.pi * np.arange(m) / m


def _check_uniform(data):
    if not isinstance(data, BoundaryFunction):
        raise TypeError("expected a BoundaryFunction on a uniform grid")


def _abel_modes(m):
    n = np.fft.fftfreq(m, d=1.0 / m)
    w = np.ones(m)
    if m % 2 == 0:
        w[m // 2] = 0.5  # Nyquist mode split between +-M/2
        n[m // 2] = m // 2
    return n, w


def poisson_integral(data, z):
    """Harmonic extension P[data](z) by Abel summation of the DFT.

    Returns real values for real data. The Nyquist mode is split evenly
    between +M/2 and -M/2 so that constants and cosines are reproduced
    exactly.
    """
    _check_uniform(data)
    z = np.asarray(z, dtype=complex)
    _check_disk(z)
    m = data.size
    c = np.fft.fft(data.values) / m
    n, w = _abel_modes(m)
    flat = z.ravel()
    r = np.abs(flat)[:, None]
    th = np.angle(flat)[:, None]
    nn = np.abs(n)[None, :]
    out = np.empty(flat.shape, dtype=complex)
    step = max(1, 2_000_000 // m)
    for s in range(0, flat.size, step):
        rr, tt = r[s:s + step], th[s:s + step]
        pos = (c * w)[None, :] * rr ** nn * np.exp(1j * n[None, :] * tt)
        if m % 2 == 0:
            # the -M/2 half of the Nyquist mode
            pos = pos + (c[m // 2] * 0.5) * rr ** (m // 2) * np.exp(-1j * (m // 2) * tt)
        out[s:s + step] = pos.sum(axis=1)
    out = out.reshape(z.shape)
    if np.isrealobj(data.values):
        out = out.real
    return out if out.ndim else out.item()


def poisson_kernel(r, t):
    r = np.asarray(r, dtype=float)
    # (1 - r)^2 + 4 r sin^2(t/2) avoids cancellation near the boundary point
    return (1 - r) * (1 + r) / ((1 - r) ** 2 + 4 * r * np.sin(0.5 * np.asarray(t)) ** 2)


def poisson_quadrature(data, z):
    """Direct trapezoid quadrature of the Poisson kernel (cross-check)."""
    _check_uniform(data)
    z = np.asarray(z, dtype=complex)
    _check_disk(z)
    th = data.theta
    flat = z.ravel()
    k = poisson_kernel(np.abs(flat)[:, None], np.angle(flat)[:, None] - th[None, :])
    out = (k @ data.values) / data.size
    out = out.reshape(z.shape)
    return out if out.ndim else out.item()


def arc_harmonic_measure(z, lo, hi):
    """P[1_A](z) for the arc A = {e^{it} : lo <= t <= hi}, in closed form."""
    z = np.asarray(z, dtype=complex)
    d = 1 - z
    # e^{it} - z = (1 - z) - (1 - e^{it}) stays accurate for arcs and points near 1
    ang = np.angle((d - one_minus_expi(hi)) / (d - one_minus_expi(lo)))
    ang = np.where(ang < 0, ang + 2 * np.pi, ang)
    return ang / np.pi - (hi - lo) / (2 * np.pi)


def conjugate_function(data):
    """Harmonic conjugate of boundary data via the multiplier -i sign(n)."""
    _check_uniform(data)
    m = data.size
    c = np.fft.fft(data.values)
    n = np.fft.fftfreq(m, d=1.0 / m)
    mult = -1j * np.sign(n)
    mult[m // 2] = 0.0  # Nyquist mode has no well-defined sign
    out = np.fft.ifft(c * mult)
    if np.isrealobj(data.values):
        out = out.real
    return BoundaryFunction(out, tag=data.tag + "~" if data.tag else "conjugate")


def annulus_radii(n):
    """r_n = exp(-2^-n), the radii of the annuli used by the subharmonic averaging."""
    return np.exp(-(2.0 ** -np.asarray(n, dtype=float)))
