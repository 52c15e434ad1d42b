"""Hilbert-Schmidt regularization diagnostics.

The radial integral G(theta), weak-L1 reports, the Szego outer-function
minimizer, radial infima I_v, the Blaschke-product log bound, and the
counterexample weight whose log(1/I_v) is weak-L1 but not integrable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .analytic import AnalyticMap, contact_point
from .geometry import (BlaschkeProduct, BoundaryFunction, arc_harmonic_measure, grid, one_minus_expi,
                       orthogonal_boundary_disk, pseudo_hyperbolic)
from .measures import dyadic_s_rule, gauss_rule
from .operators import HS_DEPTHS, divergence_verdict, hs_norm_integral

MAX_DIVERGENT_FRACTION = 0.01
BLASCHKE_FLOOR = 0.75


class RegularizationError(ValueError):
    """The data do not support the requested construction."""


# --- G(theta) -----------------------------------------------------------------

def radial_rule(alpha, depth, n=6):
    """Nodes r and weights for int_0^1 g(r) d lambda_alpha(r).

    With u = 1 - r^2 the measure is (alpha + 1) u^alpha du. Dyadic panels
    toward u = 0 cover u <= 1/2; the rest is integrated in r, where
    non-radial integrands stay smooth.
    """
    u, w = dyadic_s_rule(0.5, depth, n, alpha)
    x, wx = roots_legendre(4 * n)
    top = math.sqrt(0.5)
    r_in = 0.5 * top * (x + 1)
    w_in = 0.5 * top * wx * 2 * r_in * (1 - r_in * r_in) ** alpha
    r = np.concatenate([np.sqrt(1.0 - u), r_in])
    return r, (alpha + 1.0) * np.concatenate([w, w_in]), 1.0 - r * r


def G_values(phi, alpha, theta, depths=HS_DEPTHS, n=6):
    """(values, finite) of G at arbitrary angles, with the depth-doubling rule."""
    theta = np.asarray(theta, dtype=float)
    table = np.empty((len(depths), theta.size))
    for i, dpt in enumerate(depths):
        r, w, _ = radial_rule(alpha, dpt, n)
        z = r[:, None] * np.exp(1j * theta[None, :])
        mod = np.abs(phi(z))
        with np.errstate(all="ignore"):
            gap = (1 - mod) * (1 + mod)
            integrand = np.where(gap > 0, gap ** -(alpha + 2.0), np.inf)
        ok = np.all(np.isfinite(integrand), axis=0)
        table[i] = np.where(ok, w @ np.where(np.isfinite(integrand), integrand, 0.0), np.inf)
    finite = np.ones(theta.size, dtype=bool)
    for j in range(theta.size):
        col = table[:, j]
        if not np.all(np.isfinite(col)) or divergence_verdict(list(col), depths)[0] == "diverging":
            finite[j] = False
    values = np.where(finite, table[-1], np.inf)
    return values, finite


def compute_G(phi, alpha=0.0, m=256, depths=HS_DEPTHS, n=6):
    """G on the uniform grid of ``m`` angles; divergent angles are flagged."""
    values, finite = G_values(phi, alpha, grid(m), depths, n)
    if not np.any(finite):
        raise RegularizationError("G diverges at every grid angle")
    return BoundaryFunction(values, "G", finite)


# --- weak-L1 ------------------------------------------------------------------

@dataclass(frozen=True)
class WeakL1Report:
    """Distribution-function diagnostics of a nonnegative function."""

    levels: np.ndarray
    measures: np.ndarray
    weak_sup: float
    l1: float
    truncated_l1: np.ndarray
    divergent: bool
    measure: str

    @property
    def products(self):
        return self.levels * self.measures

    def to_dict(self):
        return {"levels": self.levels.tolist(), "measures": self.measures.tolist(),
                "weak_sup": self.weak_sup, "l1": self.l1, "truncated_l1": self.truncated_l1.tolist(),
                "divergent": self.divergent, "measure": self.measure}


def weak_l1_report(f, weights=None, n_levels=64, measure="normalized", floor=None):
    """sup_a a m({f > a}) on a logarithmic level grid, plus L1 truncations.

    ``f`` is a :class:`BoundaryFunction` (uniform grid) or an array with
    explicit quadrature ``weights`` in radians. ``measure`` is "normalized"
    (d theta / 2 pi) or "lebesgue" (d theta). The L1 estimate is flagged
    divergent when a m(a) has not decayed at the top of the level grid.
    """
    if isinstance(f, BoundaryFunction):
        vals = np.asarray(f.values, dtype=float)
        wts = np.full(vals.size, 2 * np.pi / vals.size)
    else:
        vals = np.asarray(f, dtype=float)
        wts = np.asarray(weights, dtype=float)
    if np.any(vals < 0):
        raise ValueError("weak-L1 report needs a nonnegative function")
    if measure == "normalized":
        wts = wts / (2 * np.pi)
    elif measure != "lebesgue":
        raise ValueError("measure must be 'normalized' or 'lebesgue'")
    vals = np.where(np.isfinite(vals), vals, np.nan)
    ok = np.isfinite(vals)
    v, w = vals[ok], wts[ok]
    top = float(v.max()) if v.size else 0.0
    if top <= 0:
        z = np.zeros(1)
        return WeakL1Report(z, z, 0.0, 0.0, z, False, measure)
    lo = floor if floor is not None else max(top * 1e-6, float(v[v > 0].min()) * 0.5)
    levels = np.geomspace(lo, top, n_levels, endpoint=False)
    order = np.argsort(v)
    vs, ws = v[order], w[order]
    tail = np.concatenate([np.cumsum(ws[::-1])[::-1], [0.0]])
    idx = np.searchsorted(vs, levels, side="right")
    meas = tail[idx]
    cum_vw = np.concatenate([[0.0], np.cumsum(vs * ws)])
    trunc = cum_vw[idx] + levels * meas
    prod = levels * meas
    sup = float(prod.max())
    window = levels <= top / 8
    divergent = bool(np.any(window) and prod[window][-1] >= 0.5 * sup)
    return WeakL1Report(levels, meas, sup, float(np.sum(v * w)), trunc, divergent, measure)


# --- outer functions and the Szego minimizer -----------------------------------

def herglotz_coefficients(data):
    """Taylor coefficients of the analytic function whose real part on the grid is ``data``."""
    v = np.asarray(data, dtype=float)
    m = v.size
    c = np.fft.fft(v) / m
    a = np.empty(m // 2 + 1, dtype=complex)
    a[0] = c[0].real
    a[1:m // 2] = 2 * c[1:m // 2]
    a[m // 2] = c[m // 2].real
    return a


def _horner(a, z):
    out = np.zeros(np.shape(z), dtype=complex)
    for coef in a[::-1]:
        out = out * z + coef
    return out


@dataclass(frozen=True)
class OuterFunction:
    """w0 = prod (1 - e^{-i theta_k} z)^{p_k / 2} exp(H(z)) with w0(0) = 1.

    ``H`` is the Herglotz completion of the regular part of the log-modulus
    data; the power factors absorb isolated power-law singularities of G.
    """

    coefficients: np.ndarray
    target: BoundaryFunction
    singular_angles: tuple = ()
    singular_exponents: tuple = ()

    def log(self, z):
        z = np.asarray(z, dtype=complex)
        out = _horner(self.coefficients, z)
        with np.errstate(all="ignore"):
            for t, p in zip(self.singular_angles, self.singular_exponents):
                out = out + 0.5 * p * np.log(1 - np.exp(-1j * t) * z)
        return out

    def __call__(self, z):
        with np.errstate(divide="ignore"):
            return np.exp(self.log(z))

    def near(self, zeta, base):
        """w0(base (1 - zeta)) with the power factors kept accurate near their angles."""
        zeta = np.asarray(zeta, dtype=complex)
        base = complex(base)
        out = _horner(self.coefficients, base * (1 - zeta))
        for t, p in zip(self.singular_angles, self.singular_exponents):
            psi = math.atan2(base.imag, base.real) - t
            fac = one_minus_expi(psi) + np.exp(1j * psi) * zeta
            with np.errstate(divide="ignore"):
                out = out + 0.5 * p * np.log(fac)
        return np.exp(out)

    def boundary(self, theta=None):
        theta = self.target.theta if theta is None else np.asarray(theta, dtype=float)
        return self(np.exp(1j * theta))

    def modulus_error(self):
        """max relative deviation of |w0| from the prescribed modulus on the grid (finite bins)."""
        ok = self.target.finite
        th = self.target.theta
        want = self.target.values.copy()
        with np.errstate(divide="ignore"):
            for t, p in zip(self.singular_angles, self.singular_exponents):
                want = want + 0.5 * p * np.log(np.abs(1 - np.exp(1j * (th - t))))
        got = np.abs(self.boundary())[ok]
        return float(np.max(np.abs(got / np.exp(want[ok]) - 1)))

    def as_map(self, base=None):
        hooks = {}
        if base is not None:
            hooks = {"base": complex(base), "local": lambda zeta: self.near(zeta, base)}
        return AnalyticMap(self, "outer", "w0", None, spec={"name": "outer"}, **hooks)


@dataclass(frozen=True)
class SzegoResult:
    outer: OuterFunction
    infimum: float
    achieved: float
    divergent_bins: np.ndarray
    clipped_bins: np.ndarray
    singular: tuple
    mode: str

    def achieved_on(self, G_fine):
        """(1/2 pi) int |w0|^2 G on another (finer) grid, skipping non-finite samples."""
        th = G_fine.theta
        vals = np.abs(self.outer.boundary(th)) ** 2 * G_fine.values
        ok = np.isfinite(vals) & G_fine.finite
        return float(np.sum(vals[ok]) / G_fine.size)

    def to_dict(self):
        return {"infimum": self.infimum, "achieved": self.achieved, "mode": self.mode,
                "divergent_bins": self.divergent_bins.tolist(), "clipped_bins": self.clipped_bins.tolist(),
                "singular": [list(s) for s in self.singular]}


def _power_exponent(logG, finite, j, width=4):
    """Local exponent p in G ~ c |theta - theta_j|^-p from the neighbouring bins."""
    m = logG.size
    xs, ys = [], []
    for k in range(1, width + 1):
        for s in (-1, 1):
            i = (j + s * k) % m
            if not finite[i]:
                return None
            xs.append(math.log(k * 2 * math.pi / m))
            ys.append(logG[i])
    slope = np.polyfit(xs, ys, 1)[0]
    return -slope if -slope > 0 else None


def szego_minimizer(G, mode="factor", max_divergent=MAX_DIVERGENT_FRACTION, ceiling=None):
    """Outer w0 with w0(0) = 1 and |w0|^2 G = exp(mean log G) on the grid.

    Refuses when more than ``max_divergent`` of the bins diverge. Isolated
    divergent bins are absorbed by a power factor whose exponent is fitted
    from the neighbouring bins (``mode="factor"``) or clipped at ``ceiling``
    (``mode="clip"``, default ceiling the largest finite log G).
    """
    if G.tag != "G":
        raise ValueError("szego_minimizer expects a BoundaryFunction tagged 'G'")
    finite = G.finite & np.isfinite(G.values)
    bad = np.nonzero(~finite)[0]
    if bad.size > max_divergent * G.size:
        raise RegularizationError(f"{bad.size} of {G.size} bins diverge; log G is not integrable "
                                  "on this grid and no weight is produced")
    logG = np.full(G.size, np.nan)
    logG[finite] = np.log(G.values[finite])
    th = G.theta
    R = logG.copy()
    singular, clipped = [], []
    for j in bad:
        p = _power_exponent(logG, finite, j) if mode == "factor" else None
        if p is None:
            clipped.append(int(j))
            continue
        singular.append((float(th[j]), float(p)))
        with np.errstate(divide="ignore"):
            R = R + p * np.log(np.abs(1 - np.exp(1j * (th - th[j]))))
    top = float(np.nanmax(logG[finite])) if ceiling is None else math.log(ceiling)
    for j in bad:
        if int(j) in clipped:
            R[j] = top
        else:
            R[j] = 0.5 * (R[(j - 1) % G.size] + R[(j + 1) % G.size])
    mean = float(np.mean(R))
    target = -0.5 * (R - mean)
    outer = OuterFunction(herglotz_coefficients(target), BoundaryFunction(target, "logmod", finite),
                          tuple(s[0] for s in singular), tuple(s[1] for s in singular))
    with np.errstate(all="ignore"):
        vals = np.abs(outer.boundary()) ** 2 * G.values
    achieved = float(np.mean(vals[finite]))
    return SzegoResult(outer, math.exp(mean), achieved, bad, np.array(clipped, dtype=int),
                       tuple(singular), mode)


@dataclass
class HSWeightResult:
    G: BoundaryFunction
    szego: SzegoResult | None
    weight: AnalyticMap | None
    hs: object | None
    interior: float | None
    verdict: str
    note: str = ""

    def to_dict(self):
        return {"verdict": self.verdict, "note": self.note, "interior": self.interior,
                "szego": self.szego.to_dict() if self.szego else None,
                "hs": self.hs.to_dict() if self.hs is not None else None,
                "G_divergent_fraction": float(1 - np.mean(self.G.finite))}


def interior_term(w, phi, alpha, radius=math.exp(-1.0)):
    """int over |z| < radius of |w|^2 / (1 - |phi|^2)^(alpha + 2) dA_alpha."""
    ns = gauss_rule(0.0, 32, 128)
    z = radius * ns.z
    dens = (alpha + 1) * (1 - np.abs(z) ** 2) ** alpha
    vals = np.abs(w(z)) ** 2 / (1 - np.abs(phi(z)) ** 2) ** (alpha + 2)
    return float(radius ** 2 * np.sum(ns.weight * dens * vals))


def hs_weight_pipeline(phi, alpha=0.0, m=256, depths=HS_DEPTHS, mode="factor"):
    """G -> Szego weight w0 -> HS verdict of M_w0 C_phi."""
    try:
        G = compute_G(phi, alpha, m, depths)
    except RegularizationError as exc:
        return HSWeightResult(BoundaryFunction(np.full(m, np.inf), "G", np.zeros(m, dtype=bool)),
                              None, None, None, None, "refused", str(exc))
    try:
        sz = szego_minimizer(G, mode)
    except RegularizationError as exc:
        return HSWeightResult(G, None, None, None, None, "refused", str(exc))
    base = phi.base if phi.base is not None else contact_point(phi)
    w = sz.outer.as_map(base)
    hs = hs_norm_integral(phi, w, alpha, depths)
    return HSWeightResult(G, sz, w, hs, interior_term(w, phi, alpha), hs.verdict)


# --- radial infima ------------------------------------------------------------

def infimum_radii(k=14, per_octave=1):
    j = np.arange(per_octave, k * per_octave + 1)
    return 1.0 - 2.0 ** (-j / per_octave)


def radial_infimum(v, m=1024, k=14, per_octave=1, theta=None):
    """I_v(theta) as the minimum of |v| over radii 1 - 2^-j (j / per_octave = 1..k).

    On a uniform grid (default) returns a :class:`BoundaryFunction`; with
    explicit ``theta`` returns an array. The grid minimum over-estimates
    the true infimum.
    """
    th = grid(m) if theta is None else np.asarray(theta, dtype=float)
    rr = infimum_radii(k, per_octave)
    out = np.full(th.size, np.inf)
    for r in rr:
        out = np.minimum(out, np.abs(v(r * np.exp(1j * th))))
    return BoundaryFunction(out, "I_v") if theta is None else out


# --- Blaschke log bound -------------------------------------------------------

def _wrap(t):
    t = np.asarray(t, dtype=float)
    # in-range angles pass through untouched so tiny angles keep full precision
    inside = (t > -np.pi) & (t <= np.pi)
    return np.where(inside, t, (t + np.pi) % (2 * np.pi) - np.pi)


def atom_constant(a):
    """Smallest C with |theta| <= C h on Delta(a, 1/2) and 1/I_a <= C h / |theta| there."""
    a = float(a)
    h = 1 - a
    ta = 3 * a / (4 - a * a)
    R = 2 * (1 - a * a) / (4 - a * a)
    theta_a = math.asin(min(1.0, R / ta))
    c1 = theta_a / h
    c2 = theta_a * (a + (1 - a * a) / (a * math.sin(theta_a))) / h
    return max(c1, c2)


@dataclass(frozen=True)
class BlaschkeBound:
    """log(1/|B(z)|) <= G(arg z) + f(arg z) + u(z) with u = P[w]."""

    product: BlaschkeProduct
    C: float
    outer_zeros: np.ndarray
    inner_zeros: np.ndarray
    arcs: np.ndarray

    def f(self, theta):
        return self._f(np.exp(1j * np.asarray(theta, dtype=float)))

    def _f(self, z):
        out = np.zeros(np.shape(z))
        for a in self.outer_zeros:
            h = 1 - abs(a)
            t = np.abs(np.angle(z * np.conj(a)))
            with np.errstate(divide="ignore"):
                out = out + np.where(t <= self.C * h, np.log(self.C * h / t), 0.0)
        return out

    def G(self, theta):
        """Closed-form bounds for log(1/I_a) of the zeros below the modulus floor."""
        out = np.zeros(np.shape(theta))
        for a in self.inner_zeros:
            if abs(a) <= 0.25:
                out = out + math.log(8)
                continue
            t = np.abs(_wrap(np.asarray(theta) - np.angle(a)))
            with np.errstate(divide="ignore"):
                near = np.abs(np.log(0.5 * abs(a) * np.abs(np.sin(t))))
            out = out + np.where(t <= np.pi / 2, near, math.log(4))
        return out

    def u(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for a, half in zip(self.outer_zeros, self.arcs):
            zr = z * np.exp(-1j * np.angle(a))
            out = out + 2 * math.log(2) * arc_harmonic_measure(zr, -half, half)
        return out

    def w_norm(self):
        """||w||_1 in d theta units, per atom."""
        return 2 * math.log(2) * 2 * self.arcs

    def f_norm(self):
        return 2 * self.C * (1 - np.abs(self.outer_zeros))

    def lhs(self, z):
        return -self.product.log_modulus(z)

    def rhs(self, z):
        z = np.asarray(z, dtype=complex)
        return self.G(np.angle(z)) + self._f(z) + self.u(z)

    def violations(self, z, tol=1e-12):
        lhs, rhs = self.lhs(z), self.rhs(z)
        return int(np.count_nonzero(lhs > rhs + tol * np.maximum(1, np.abs(rhs))))

    def to_dict(self):
        return {"C": self.C, "n_outer": int(self.outer_zeros.size), "n_inner": int(self.inner_zeros.size),
                "f_norms": self.f_norm().tolist(), "w_norms": self.w_norm().tolist(),
                "w_constant": float(np.max(self.w_norm() / (1 - np.abs(self.outer_zeros))))
                if self.outer_zeros.size else 0.0}


def blaschke_log_bound(B, C=None, split=False):
    """Decomposition of log(1/|B|) for zeros of modulus >= 3/4.

    With ``split=True`` zeros below the floor are allowed and contribute
    the closed-form G_a bounds (valid for |z| >= 1/2). ``C`` defaults to
    the largest per-atom constant measured from the zeros.
    """
    zeros = np.asarray(B.zeros)
    low = np.abs(zeros) < BLASCHKE_FLOOR
    if np.any(low) and not split:
        raise ValueError("zeros below modulus 3/4: split the product first")
    outer = zeros[~low]
    if C is None:
        C = max((atom_constant(abs(a)) for a in outer), default=0.0)
    arcs = np.array([orthogonal_boundary_disk(abs(a)).arc_half_angle for a in outer])
    return BlaschkeBound(B, float(C), outer, zeros[low], arcs)


def fifty_zero_fixture(seed=0, n=50):
    """Zeros of modulus 1 - 2^-k (k = 2 .. n+1) along random rays."""
    rng = np.random.default_rng(seed)
    k = np.arange(2, n + 2)
    return (1 - 2.0 ** -k) * np.exp(2j * np.pi * rng.random(n))


# --- the counterexample -------------------------------------------------------

def sigma(theta):
    """1 / (theta log^2 theta) on (0, 1/2], zero elsewhere on (-pi, pi]."""
    t = _wrap(np.asarray(theta, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where((t > 0) & (t <= 0.5), 1.0 / (t * np.log(t) ** 2), 0.0)


def sigma_mass(lo, hi):
    """Exact mass of sigma on [lo, hi] within [0, 1/2] (antiderivative -1/log t)."""
    def F(t):
        return 0.0 if t <= 0 else -1.0 / math.log(t)
    return F(hi) - F(lo)


def _log1p(q):
    """Complex log(1 + q), accurate for tiny |q|."""
    small = np.abs(q) < 1e-4
    qs = np.where(small, q, 0)
    series = qs * (1 - qs * (0.5 - qs * (1 / 3 - qs * 0.25)))
    with np.errstate(all="ignore"):
        return np.where(small, series, np.log(1 + np.where(small, 0, q)))


@dataclass(frozen=True)
class CounterexampleWeight:
    """v = exp(-(u + i u~)) with u = P[sigma].

    sigma is replaced by its cell averages on geometric cells (exact cell
    masses), and each cell's Herglotz integral is taken in closed form.
    """

    edges: np.ndarray
    masses: np.ndarray

    @property
    def total_mass(self):
        return float(self.masses.sum())

    def H(self, z):
        """Herglotz integral (1/2 pi) int (e^{it} + z)/(e^{it} - z) sigma(t) dt."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.zeros(flat.shape, dtype=complex)
        lo, hi = self.edges[:-1], self.edges[1:]
        dens = self.masses / (hi - lo)
        step = max(1, 4_000_000 // lo.size)
        rot = np.exp(1j * lo)[None, :]
        chord = -rot * one_minus_expi(hi - lo)[None, :]
        for s in range(0, flat.size, step):
            zz = flat[s:s + step, None]
            # (e^{i hi} - z) / (e^{i lo} - z) = 1 + q, formed without cancellation
            q = chord / (rot - zz)
            lg = _log1p(q)
            darg = np.where(lg.imag < 0, lg.imag + 2 * np.pi, lg.imag)
            val = (-(hi - lo)[None, :] + 2 * darg - 2j * lg.real) / (2 * np.pi)
            out[s:s + step] = val @ dens
        return out.reshape(z.shape)

    def u(self, z):
        return self.H(z).real

    def __call__(self, z):
        return np.exp(-self.H(z))

    def as_map(self):
        return AnalyticMap(self, "counterexample", "v", 1.0, spec={"name": "counterexample"})

    def log_inv_I(self, theta, k=20, per_octave=1):
        """log(1/I_v) = max over the radius grid of u(r e^{i theta})."""
        th = np.asarray(theta, dtype=float)
        rr = infimum_radii(k, per_octave)
        z = rr[:, None] * np.exp(1j * th[None, :])
        return self.u(z).max(axis=0)


def counterexample_v(cells_per_octave=16, depth=64):
    lo = 0.5 * 2.0 ** (-np.arange(depth * cells_per_octave, -1, -1) / cells_per_octave)
    edges = np.concatenate([[0.0], lo])
    masses = np.array([sigma_mass(a, b) for a, b in zip(edges[:-1], edges[1:])])
    return CounterexampleWeight(edges, masses)


def log_theta_grid(lo, hi, per_octave=32):
    """Midpoints and widths of a geometric grid on [lo, hi]."""
    n = max(1, int(round(per_octave * math.log2(hi / lo))))
    e = np.geomspace(lo, hi, n + 1)
    return 0.5 * (e[:-1] + e[1:]), np.diff(e)


@dataclass(frozen=True)
class Certificate:
    ks: np.ndarray
    truncated: np.ndarray
    predicted_growth: np.ndarray
    C: float
    C_range: float
    weak_sups: np.ndarray
    pointwise_ratio_min: float
    sigma_mass: float
    growth_ok: bool
    weak_ok: bool

    def to_dict(self):
        return {"ks": self.ks.tolist(), "truncated": self.truncated.tolist(),
                "predicted_growth": self.predicted_growth.tolist(), "C": self.C, "C_range": self.C_range,
                "weak_sups": self.weak_sups.tolist(), "pointwise_ratio_min": self.pointwise_ratio_min,
                "sigma_mass": self.sigma_mass, "growth_ok": self.growth_ok, "weak_ok": self.weak_ok}


def counterexample_certificate(v=None, ks=range(4, 15), per_octave=32, k_radii=None, factor=0.8):
    """Growth of int_eps^(1/2) log(1/I_v) against C log log(1/eps), and weak-L1 stability.

    C is the smallest value of log(1/I_v(theta)) theta log(1/theta) over
    [2^-k0, 1/2] with k0 = ks[0]; ``C_range`` is the same minimum over the
    whole probed range, the constant that the pointwise lower bound certifies.
    """
    v = counterexample_v() if v is None else v
    ks = np.asarray(list(ks))
    kmax = int(ks.max())
    k_radii = kmax + 6 if k_radii is None else k_radii
    th, dth = log_theta_grid(2.0 ** -kmax, 0.5, per_octave)
    f = v.log_inv_I(th, k_radii)
    ratio = f * th * np.log(1 / th)
    C = float(ratio[th >= 2.0 ** -ks[0]].min())
    C_range = float(ratio.min())
    trunc = np.array([np.sum((f * dth)[th >= 2.0 ** -k]) for k in ks])
    ll = np.log(np.log(2.0 ** ks))
    predicted = factor * C * (ll - ll[0])
    growth = trunc - trunc[0]
    weak = np.array([weak_l1_report(np.where(th >= 2.0 ** -k, f, 0.0), dth, measure="lebesgue").weak_sup
                     for k in ks])
    k8 = int(np.nonzero(ks == 8)[0][0]) if 8 in ks else 0
    return Certificate(ks, trunc, predicted, C, C_range, weak, float(ratio.min()), v.total_mass,
                       bool(np.all(growth >= predicted - 1e-12)), bool(np.all(weak < 2 * weak[k8])))


# --- subharmonic means and the U-ratio invariant -------------------------------

def circle_means(phi, w=None, alpha=0.0, radii=None, n_theta=1024):
    """(1/2 pi) int |w|^2 U (r e^{i theta}) d theta at each radius."""
    radii = np.linspace(0.05, 0.95, 19) if radii is None else np.asarray(radii, dtype=float)
    th = grid(n_theta)
    z = radii[:, None] * np.exp(1j * th[None, :])
    U = 1.0 / (1 - np.abs(phi(z)) ** 2) ** (alpha + 2)
    ww = np.abs(w(z)) ** 2 if w is not None else 1.0
    return radii, (ww * U).mean(axis=1)


def subharmonic_report(phi, w=None, alpha=0.0, n_max=12, n_theta=2048):
    """Circle means of g = ((1 - |z|^2)/(1 - |phi|^2))^(alpha + 1) at r_n = 1 - 2^-n and their partial sums."""
    rn = 1.0 - 2.0 ** -np.arange(0, n_max + 1)
    th = grid(n_theta)
    z = rn[:, None] * np.exp(1j * th[None, :])
    g = ((1 - np.abs(z) ** 2) / (1 - np.abs(phi(z)) ** 2)) ** (alpha + 1)
    if w is not None:
        g = g * np.abs(w(z)) ** 2
    means = g.mean(axis=1)
    return {"radii": rn.tolist(), "means": means.tolist(), "partial_sums": np.cumsum(means).tolist()}


def u_ratio_sample(phi, alpha=0.0, n=2000, seed=0, rho=0.5):
    """Ratios U(a)/U(b) for random pairs with pseudo-hyperbolic distance <= rho."""
    rng = np.random.default_rng(seed)
    a = np.sqrt(rng.random(n)) * 0.999 * np.exp(2j * np.pi * rng.random(n))
    s = rho * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
    b = (a - s) / (1 - np.conj(a) * s)
    assert np.all(pseudo_hyperbolic(a, b) <= rho + 1e-12)

    def U(z):
        mod = np.abs(phi(z))
        return 1.0 / ((1 - mod) * (1 + mod)) ** (alpha + 2)

    return U(a) / U(b)


def u_ratio_bound(alpha):
    return 3.0 ** (alpha + 2) * 2.0 ** (alpha + 2)

