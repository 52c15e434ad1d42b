"""Sampling helpers shared by the test modules."""
import numpy as np


def disk_sample(rng, n, rmax=1.0):
    return rmax * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


def f_property_sample(rng, omega, r, n):
    """Uniform disk points, a cluster in D(omega, 2r), and points hugging the circle near omega."""
    a = disk_sample(rng, n // 3, 1 - 1e-12)
    k = n // 3
    b = omega + 2 * r * np.sqrt(rng.random(4 * k)) * np.exp(2j * np.pi * rng.random(4 * k))
    b = b[np.abs(b) < 1][:k]
    m = n - a.size - b.size
    half = 2 * np.arcsin(r / 2)
    ang = np.angle(omega) + rng.uniform(-2 * half, 2 * half, m)
    c = (1 - 10.0 ** -rng.uniform(1, 10, m)) * np.exp(1j * ang)
    return np.concatenate([a, b, c])


def blaschke_stress_points(zeros, rng, n):
    """Uniform points with |z| >= 1/2 plus clusters in Delta(a, 0.95) around each zero with h >= 1e-12."""
    pts = [disk_sample(rng, n // 2)]
    near = [a for a in zeros if abs(a) >= 0.5 and 1 - abs(a) >= 1e-12]
    k = max(1, (n - n // 2) // max(1, len(near)))
    for a in near:
        s = 0.95 * np.sqrt(rng.random(k)) * np.exp(2j * np.pi * rng.random(k))
        pts.append((a - s) / (1 - np.conj(a) * s))
    z = np.concatenate(pts)
    return z[(np.abs(z) >= 0.5) & (np.abs(z) < 1)]
