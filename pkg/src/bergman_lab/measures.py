"""Quadrature for dA_alpha, pull-back measures and Carleson profiles.

Disk nodes are laid out in coordinates ``(s, theta)`` relative to a boundary
point ``base``: ``z = base * (1 - s) * exp(i theta)``. The domain defect
``zeta = 1 - z / base = s exp(i theta) + (1 - exp(i theta))`` is kept
alongside ``z`` so that points with ``|zeta|`` far below machine epsilon
stay distinct. With dA = dx dy / pi,

    dA_alpha = (alpha + 1) (s (2 - s))^alpha (1 - s) ds dtheta / pi.

Three layouts are provided:

``gauss``
    one Gauss-Jacobi panel in t = r^2 times a uniform angular rule; exact
    for polynomials in |z|^2 of moderate degree.
``graded``
    tensor product of dyadic panels in s (down to 2^-2D) and in theta (down
    to 2^-D) around ``base``; used for integrands that blow up like
    (s + theta^2)^-p at the base.
``corner``
    L-shaped dyadic layers that shrink isotropically toward ``base`` plus a
    coarser global rule; used for pull-back measures, whose fine structure
    sits at the contact point.
"""
from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from . import kernels
from .analytic import AnalyticMap, constant, contact_point
from .geometry import one_minus_expi

CORNER_SIZE = 0.25


# --- one-dimensional panel rules ---------------------------------------------

def legendre_panel(lo, hi, n):
    x, w = roots_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def jacobi_panel(hi, n, alpha):
    """Nodes/weights with sum w g(s) ~ int_0^hi s^alpha g(s) ds."""
    if alpha == 0:
        return legendre_panel(0.0, hi, n)
    x, w = roots_jacobi(n, 0.0, alpha)
    return 0.5 * hi * (x + 1.0), w * (0.5 * hi) ** (alpha + 1.0)


def _s_rule(lo, hi, n, alpha):
    """Rule for int s^alpha g(s) ds on [lo, hi] (Jacobi when lo == 0)."""
    if lo == 0:
        return jacobi_panel(hi, n, alpha)
    s, w = legendre_panel(lo, hi, n)
    return s, w * s ** alpha


def dyadic_s_rule(top, depth, n, alpha):
    """Panels [top 2^-j-1, top 2^-j] for j < depth plus a Jacobi panel at 0."""
    parts = [_s_rule(top * 2.0 ** -(j + 1), top * 2.0 ** -j, n, alpha) for j in range(depth)]
    parts.append(_s_rule(0.0, top * 2.0 ** -depth, n, alpha))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# --- node sets ----------------------------------------------------------------

@dataclass(frozen=True)
class NodeSet:
    """Quadrature nodes for dA_alpha in (s, theta) coordinates around ``base``."""

    s: np.ndarray
    theta: np.ndarray
    weight: np.ndarray
    base: complex = 1.0
    alpha: float = 0.0
    dropped_mass: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def zeta(self):
        return self.s * np.exp(1j * self.theta) + one_minus_expi(self.theta)

    @property
    def z(self):
        return self.base * (1.0 - self.s) * np.exp(1j * self.theta)

    def __len__(self):
        return self.s.shape[0]

    def integrate(self, values):
        return float(np.sum(self.weight * values))


def _tensor(s, ws, t, wt, alpha):
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * (alpha + 1.0) * (2.0 - S) ** alpha * (1.0 - S) / math.pi
    return S.ravel(), T.ravel(), W.ravel()


def _concat(parts):
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


def gauss_rule(alpha, n_radial=64, n_angular=256):
    """Gauss-Jacobi in t = r^2 times the uniform angular rule."""
    x, w = roots_jacobi(n_radial, alpha, 0.0)
    t = 0.5 * (x + 1.0)
    wt = w * 0.5 ** (alpha + 1.0) * (alpha + 1.0)
    th = 2 * np.pi * np.arange(n_angular) / n_angular
    r = np.sqrt(t)
    S, T = np.meshgrid(1.0 - r, th, indexing="ij")
    W = np.outer(wt, np.full(n_angular, 1.0 / n_angular))
    return NodeSet(S.ravel(), T.ravel(), W.ravel(), 1.0, alpha, 0.0,
                   {"mode": "gauss", "n_radial": n_radial, "n_angular": n_angular})


def _theta_panels(lo, hi, width, n):
    k = max(1, int(math.ceil((hi - lo) / width)))
    edges = np.linspace(lo, hi, k + 1)
    parts = [legendre_panel(a, b, n) for a, b in zip(edges[:-1], edges[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def graded_rule(alpha, base=1.0, depth=32, n=6, far_panels=16, outer=CORNER_SIZE):
    """Tensor rule graded toward ``base``: s down to 2^-2D, theta down to 2^-D.

    The corner cell s < 2^-2D, |theta| < 2^-D is dropped; its area is
    recorded in ``dropped_mass``.
    """
    s, ws = dyadic_s_rule(1.0, 2 * depth, n, alpha)
    tp = [legendre_panel(outer * 2.0 ** -(j + 1), outer * 2.0 ** -j, n) for j in range(depth - 2)]
    tp.append(legendre_panel(0.0, outer * 2.0 ** -(depth - 2), n))
    tfar = _theta_panels(outer, math.pi, (math.pi - outer) / far_panels, n)
    t = np.concatenate([p[0] for p in tp] + [tfar[0]])
    wt = np.concatenate([p[1] for p in tp] + [tfar[1]])
    t = np.concatenate([t, -t])
    wt = np.concatenate([wt, wt])
    S, T, W = _tensor(s, ws, t, wt, alpha)
    s_cut, t_cut = 2.0 ** (-2 * depth), outer * 2.0 ** -(depth - 2)
    drop = (S < s_cut) & (np.abs(T) < t_cut)
    dropped = float(W[drop].sum())
    keep = ~drop
    return NodeSet(S[keep], T[keep], W[keep], complex(base), alpha, dropped,
                   {"mode": "graded", "depth": depth, "n": n})


def corner_rule(alpha, base=1.0, depth=40, n=6, n_theta=2048, n_radial=16,
                outer=CORNER_SIZE, s_grading=3, global_depth=None):
    """Isotropic dyadic layers toward ``base`` plus a global rule.

    Returns the node set and the global resolution scale ``h_glob``: boxes
    smaller than ``h_glob`` are only resolved close to ``base``.
    """
    parts = []
    for k in range(depth):
        a = outer * 2.0 ** -k
        sa, wa = legendre_panel(a / 2, a, n)
        t_in, wt_in = legendre_panel(0.0, a / 2, n)
        t_out, wt_out = legendre_panel(a / 2, a, n)
        sb, wb = dyadic_s_rule(a / 2, s_grading, n, alpha)
        sa_w = wa * sa ** alpha
        for tt, ww in ((t_in, wt_in), (t_out, wt_out)):
            parts.append(_tensor(sa, sa_w, np.concatenate([tt, -tt]), np.concatenate([ww, ww]), alpha))
        parts.append(_tensor(sb, wb, np.concatenate([t_out, -t_out]), np.concatenate([wt_out, wt_out]), alpha))
    spacing = 2 * math.pi / n_theta
    h_glob = 16 * spacing
    if global_depth is None:
        global_depth = max(2, int(math.ceil(math.log2(8 * outer / h_glob))) + 1)
    sg, wsg = dyadic_s_rule(outer, global_depth, n, alpha)
    tg, wtg = _theta_panels(outer, math.pi, n * spacing, n)
    parts.append(_tensor(sg, wsg, np.concatenate([tg, -tg]), np.concatenate([wtg, wtg]), alpha))
    so, wso = legendre_panel(outer, 1.0, n_radial)
    th = -math.pi + spacing * (np.arange(n_theta) + 0.5)
    parts.append(_tensor(so, wso * so ** alpha, th, np.full(n_theta, spacing), alpha))
    S, T, W = _concat(parts)
    a_k = outer * 2.0 ** -depth
    dropped = 2.0 ** alpha * a_k ** (alpha + 1.0) * 2 * a_k / math.pi
    return NodeSet(S, T, W, complex(base), alpha, dropped,
                   {"mode": "corner", "depth": depth, "n": n, "n_theta": n_theta,
                    "h_glob": h_glob, "innermost": a_k})


# --- weighted area measure ------------------------------------------------------

@dataclass(frozen=True)
class WeightedAreaMeasure:
    """dA_alpha = (alpha + 1)(1 - |z|^2)^alpha dA with its quadrature layouts."""

    alpha: float = 0.0
    n_radial: int = 64
    n_angular: int = 256

    def __post_init__(self):
        if self.alpha <= -1:
            raise ValueError("alpha must exceed -1")

    def nodes(self):
        return gauss_rule(self.alpha, self.n_radial, self.n_angular)

    def graded(self, base=1.0, depth=32, n=6):
        return graded_rule(self.alpha, base, depth, n)

    def corner(self, base=1.0, **kw):
        return corner_rule(self.alpha, base, **kw)

    def density(self, z):
        return (self.alpha + 1) * (1 - np.abs(z) ** 2) ** self.alpha

    def moment(self, n):
        """int |z|^2n dA_alpha = Gamma(alpha+2) Gamma(n+1) / Gamma(n+alpha+2)."""
        from scipy.special import gammaln
        return math.exp(gammaln(self.alpha + 2) + gammaln(n + 1) - gammaln(n + self.alpha + 2))


# --- pull-back samples ---------------------------------------------------------

@dataclass(frozen=True)
class Resolution:
    """Knobs for pull-back quadrature."""

    n: int = 6
    n_theta: int = 2048
    n_radial: int = 16
    h_min: float = 2.0 ** -14
    corner_depth: int | None = None
    max_depth: int = 300


def boundary_distance(defects):
    """1 - |1 - d| without cancellation."""
    d = np.asarray(defects, dtype=complex)
    return (2 * d.real - np.abs(d) ** 2) / (1 + np.abs(1 - d))


@dataclass(frozen=True)
class PullbackSample:
    """Discrete representation of mu_{w, phi}.

    ``defects`` are image defects ``1 - phi(z) / anchor``; ``zeta`` are the
    domain defects relative to ``base``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    images: np.ndarray
    defects: np.ndarray
    anchor: complex = 1.0
    alpha: float = 0.0
    gamma: float | None = None
    zeta: np.ndarray | None = None
    base: complex = 1.0
    rejected: int = 0
    dropped_mass: float = 0.0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.alpha + 2.0)
        if np.any(self.weights < 0):
            raise ValueError("pull-back weights must be nonnegative")

    def __len__(self):
        return self.weights.shape[0]

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    @property
    def h_glob(self):
        return self.info.get("h_glob", 0.0)

    def boundary_distance(self):
        return boundary_distance(self.defects)

    def scaled(self, c):
        return replace(self, weights=self.weights * float(c))

    def reweighted(self, factor):
        """Multiply every weight by a nonnegative per-node factor."""
        factor = np.asarray(factor, dtype=float)
        if np.any(factor < 0) or not np.all(np.isfinite(factor)):
            raise ValueError("reweighting factor must be finite and nonnegative")
        return replace(self, weights=self.weights * factor)

    def weighted_by_image(self, u):
        """Sample of |u|^2 d(this measure); ``u`` takes image defects."""
        vals = u(self.defects) if not isinstance(u, AnalyticMap) else u.value_near(self.defects, self.anchor)
        return self.reweighted(np.abs(vals) ** 2)

    def integrate_image(self, g):
        """sum of weight * g(defect)."""
        return float(np.sum(self.weights * g(self.defects)))

    # io
    MAGIC = b"PBSMPL"
    VERSION = 2

    def to_binary(self, path):
        n = len(self)
        rec = np.empty((n, 7), dtype="<f8")
        rec[:, 0], rec[:, 1] = self.nodes.real, self.nodes.imag
        rec[:, 2] = self.weights
        rec[:, 3], rec[:, 4] = self.images.real, self.images.imag
        rec[:, 5], rec[:, 6] = self.defects.real, self.defects.imag
        with open(path, "wb") as fh:
            fh.write(self.MAGIC + struct.pack("<H", self.VERSION) + struct.pack("<Q", n))
            a = complex(self.anchor)
            fh.write(struct.pack("<4d", self.alpha, self.gamma, a.real, a.imag))
            fh.write(rec.tobytes())

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            head = fh.read(16)
            if head[:6] != cls.MAGIC:
                raise ValueError("not a pull-back sample file")
            (version,) = struct.unpack("<H", head[6:8])
            if version != cls.VERSION:
                raise ValueError(f"unsupported sample version {version}")
            (n,) = struct.unpack("<Q", head[8:16])
            alpha, gamma, are, aim = struct.unpack("<4d", fh.read(32))
            rec = np.frombuffer(fh.read(56 * n), dtype="<f8").reshape(n, 7)
        return cls(rec[:, 0] + 1j * rec[:, 1], rec[:, 2].copy(), rec[:, 3] + 1j * rec[:, 4],
                   rec[:, 5] + 1j * rec[:, 6], complex(are, aim), alpha, gamma)

    def to_csv(self, path):
        data = np.column_stack([self.nodes.real, self.nodes.imag, self.weights, self.images.real,
                                self.images.imag, self.defects.real, self.defects.imag])
        np.savetxt(path, data, delimiter=",", fmt="%.17g",
                   header="node_re,node_im,weight,image_re,image_im,defect_re,defect_im", comments="")


def _choose_depth(phi, base, target, res, outer=CORNER_SIZE):
    if res.corner_depth is not None:
        return res.corner_depth
    k_mass = int(math.ceil(math.log2(outer / 1e-7)))
    for k in range(k_mass, res.max_depth):
        a = outer * 2.0 ** -k
        probe = np.array([a * (1 + 1j), a * (1 - 1j), a + 0j, 1j * a, -1j * a])
        d = phi.defect_near(probe, base, target) if target is not None else None
        if d is None or not np.all(np.isfinite(d)):
            return k
        if np.max(np.abs(d)) <= res.h_min / 16:
            return k
    return res.max_depth


def pullback(phi, w=None, alpha=0.0, resolution=None, gamma=None, anchor=None):
    """Quadrature sample of mu_{w, phi}.

    The corner layers are centred at the contact point of ``phi`` (where
    ``|phi|`` reaches 1), so boxes at the image of that point are resolved
    down to ``resolution.h_min``. Boxes elsewhere are resolved down to the
    global scale recorded as ``info['h_glob']``.
    """
    res = resolution or Resolution()
    w = w if w is not None else constant(1.0)
    cp = contact_point(phi)
    if cp is None:
        base, target = 1.0 + 0j, None
    else:
        base, target = cp
    anchor = complex(anchor if anchor is not None else (target if target is not None else 1.0))
    depth = _choose_depth(phi, base, target, res)
    ns = corner_rule(alpha, base, depth=depth, n=res.n, n_theta=res.n_theta, n_radial=res.n_radial)
    zeta = ns.zeta
    with np.errstate(all="ignore"):
        if target is not None:
            d = phi.defect_near(zeta, base, anchor)
        else:
            d = 1.0 - phi(ns.z) / anchor
        wv = w.value_near(zeta, base)
        wt = ns.weight * np.abs(wv) ** 2
    ok = np.isfinite(d) & np.isfinite(wt)
    rejected = int(np.count_nonzero(~ok))
    if rejected:
        warnings.warn(f"{rejected} quadrature nodes rejected (non-finite evaluation)")
    images = anchor * (1.0 - d[ok])
    info = dict(ns.info)
    info["symbol"] = getattr(phi, "label", "")
    return PullbackSample(ns.z[ok], wt[ok], images, d[ok], anchor, alpha, gamma, zeta[ok], base,
                          rejected, ns.dropped_mass, info)


# --- box grids and profiles ------------------------------------------------------

def dyadic_scales(k_max, k_min=1):
    return 2.0 ** -np.arange(k_min, k_max + 1, dtype=float)


@dataclass(frozen=True)
class BoxGrid:
    """Box centres (angles relative to ``anchor``) crossed with scales.

    ``resolved[j, k]`` marks boxes that the sample resolves: every box at
    or above ``h_glob`` and boxes within ``2 h`` of the anchor below it.
    """

    angles: np.ndarray
    scales: np.ndarray
    anchor: complex = 1.0
    h_glob: float = 0.0

    @classmethod
    def standard(cls, scales, m=512, anchor=1.0, h_glob=0.0, local=True):
        scales = np.sort(np.asarray(scales, dtype=float))
        ang = 2 * np.pi * np.arange(m) / m
        ang = np.where(ang > np.pi, ang - 2 * np.pi, ang)
        if local:
            kmax = int(math.ceil(2 * math.log2(1.0 / scales[0]))) + 8
            off = 2.0 ** (-np.arange(1, kmax + 1) / 2.0)
            off = off[off < 2 * np.pi / m]
            ang = np.concatenate([ang, off, -off])
        ang = np.unique(ang)
        return cls(ang, scales, complex(anchor), float(h_glob))

    @property
    def centers(self):
        """Centres in anchor-defect coordinates, 1 - xi / anchor."""
        return one_minus_expi(self.angles)

    @property
    def points(self):
        return self.anchor * np.exp(1j * self.angles)

    @property
    def resolved(self):
        h = self.scales[None, :]
        return (h >= self.h_glob) | (np.abs(self.angles)[:, None] <= 2 * h)

    def with_scales(self, scales):
        return replace(self, scales=np.sort(np.asarray(scales, dtype=float)))


def box_mass_table(sample, grid, threads=None):
    """(centres, scales) table of closed-box masses."""
    keep = sample.boundary_distance() <= grid.scales[-1]
    return kernels.box_masses(sample.defects[keep], sample.weights[keep], grid.centers,
                              grid.scales, threads=threads)


@dataclass(frozen=True)
class CarlesonProfile:
    """Per-scale grid maxima of mu[S(xi, h)] / h^gamma."""

    scales: np.ndarray
    ratios: np.ndarray
    argmax_angles: np.ndarray
    gamma: float
    grid_size: int
    h_glob: float
    anchor: complex = 1.0
    zero_mass: bool = False
    table: np.ndarray | None = field(default=None, repr=False)

    @property
    def argmax_centers(self):
        return self.anchor * np.exp(1j * self.argmax_angles)

    def at(self, h):
        j = int(np.argmin(np.abs(self.scales - h)))
        return float(self.ratios[j])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("h,ratio,argmax_angle\n")
            for h, p, a in zip(self.scales, self.ratios, self.argmax_angles):
                fh.write(f"{h:.17g},{p:.17g},{a:.17g}\n")

    def to_dict(self):
        return {"scales": self.scales.tolist(), "ratios": self.ratios.tolist(),
                "argmax_angles": self.argmax_angles.tolist(), "gamma": self.gamma,
                "grid_size": self.grid_size, "h_glob": self.h_glob, "zero_mass": self.zero_mass}


def carleson_profile(sample, gamma=None, grid=None, scales_k=14, m=512, keep_table=False, threads=None):
    """Grid maxima h_k -> max_xi mu[S(xi, h_k)] / h_k^gamma over resolved boxes."""
    gamma = sample.gamma if gamma is None else float(gamma)
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    if grid is None:
        grid = BoxGrid.standard(dyadic_scales(scales_k, 0), m, sample.anchor, sample.h_glob)
    table = box_mass_table(sample, grid, threads) / grid.scales[None, :] ** gamma
    masked = np.where(grid.resolved, table, -np.inf)
    idx = np.argmax(masked, axis=0)
    ratios = np.maximum(masked[idx, np.arange(grid.scales.size)], 0.0)
    return CarlesonProfile(grid.scales.copy(), ratios, grid.angles[idx], gamma, grid.angles.size,
                           grid.h_glob, grid.anchor, sample.total_mass == 0,
                           table if keep_table else None)


def box_ratio_grid(boxes, sample, gamma):
    """mu[S] / h^gamma for an explicit list of :class:`CarlesonBox`.

    Returns the ratios and a flag that is True when the sample is empty.
    """
    if gamma <= 1:
        raise ValueError("gamma must exceed 1")
    if len(sample) == 0 or sample.total_mass == 0:
        return np.zeros(len(boxes)), True
    out = np.empty(len(boxes))
    for i, b in enumerate(boxes):
        c = 1.0 - complex(b.center) / complex(sample.anchor)
        m = kernels.box_masses(sample.defects, sample.weights, np.array([c]), np.array([b.size]))
        out[i] = m[0, 0] / b.size ** gamma
    return out, False


@dataclass(frozen=True)
class Classification:
    verdict: str
    slope: float
    stderr: float
    scales_used: int

    def to_dict(self):
        return {"verdict": self.verdict, "slope": self.slope, "stderr": self.stderr,
                "scales_used": self.scales_used}


def classify(profile, n_fine=6, slope_tol=0.25):
    """Log-log trend of the finest ``n_fine`` scales.

    slope > tol: vanishing; |slope| <= tol: carleson-non-vanishing;
    slope < -tol: not-carleson. Identically zero fine scales count as
    vanishing with slope +inf.
    """
    h = profile.scales
    order = np.argsort(h)
    h, p = h[order], profile.ratios[order]
    if h.size < n_fine:
        return Classification("indeterminate", float("nan"), float("nan"), int(h.size))
    hf, pf = h[:n_fine], p[:n_fine]
    if np.all(pf == 0):
        return Classification("vanishing", float("inf"), 0.0, n_fine)
    if np.any(pf == 0):
        nz = pf > 0
        if nz.sum() < 3:
            return Classification("vanishing", float("inf"), 0.0, n_fine)
        hf, pf = hf[nz], pf[nz]
    x, y = np.log(hf), np.log(pf)
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = max(1, x.size - 2)
    resid = y - A @ coef
    stderr = float(math.sqrt(resid @ resid / dof / np.sum((x - x.mean()) ** 2)))
    if slope > slope_tol:
        verdict = "vanishing"
    elif slope < -slope_tol:
        verdict = "not-carleson"
    else:
        verdict = "carleson-non-vanishing"
    return Classification(verdict, slope, stderr, int(x.size))
