"""Constructive weights that make a compact C_phi bounded but not compact.

Everything here works in anchor-defect coordinates ``d = 1 - w / anchor`` on
the image side, so the stage scales (which shrink by orders of magnitude per
stage) stay representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .analytic import AnalyticMap, boundary_sup, constant
from .geometry import one_minus_expi
from .measures import BoxGrid, PullbackSample, Resolution, carleson_profile, classify, pullback

BISECT_RTOL = 1e-6


class ConstructionError(RuntimeError):
    """A construction step has no admissible choice on the probed grid."""


class Refusal(ValueError):
    """The input is outside the scope of the construction (with the reason)."""


# --- the F-builder ----------------------------------------------------------------

@dataclass(frozen=True)
class FBuilder:
    """F = exp(U(g(T))) with |F| > 1 exactly on D(omega, r) within the disk.

    ``omega = anchor * exp(i omega_angle)``. T sends A -> 0, C = (1 - r) omega
    -> 1 and B -> infinity, where A and B are the points where the circle
    |z - omega| = r meets the unit circle (Im(A / omega) > 0). ``g`` is the
    principal square root and ``U(s) = (i/2)(1 - s)/(1 + s)``, so
    ``log|F| = Im g / |1 + g|^2`` and ``|log F| < 1/2``.
    """

    omega_angle: float
    r: float
    anchor: complex = 1.0

    def __post_init__(self):
        if not 0 < self.r < 1:
            raise ValueError("r must lie in (0, 1)")

    @property
    def omega(self):
        return complex(self.anchor) * complex(np.exp(1j * self.omega_angle))

    @property
    def arc_half_angle(self):
        return 2 * math.asin(self.r / 2)

    @property
    def defects(self):
        """(A, B, C) in omega-defect coordinates."""
        t = self.arc_half_angle
        return complex(one_minus_expi(t)), complex(one_minus_expi(-t)), complex(self.r)

    @property
    def points(self):
        a, b, c = self.defects
        return tuple(self.omega * (1 - x) for x in (a, b, c))

    def to_omega(self, d):
        """anchor-defect -> omega-defect."""
        d = np.asarray(d, dtype=complex)
        rot = np.exp(-1j * self.omega_angle)
        return d * rot + one_minus_expi(-self.omega_angle)

    def T(self, D):
        a, b, c = self.defects
        return (D - a) / (D - b) * ((c - b) / (c - a))

    def log_F(self, d):
        """U(g(T)) at anchor-defect points ``d``."""
        tt = self.T(self.to_omega(d))
        if np.any((tt.real < 0) & (np.abs(tt.imag) <= 1e-300 * np.abs(tt))):
            raise ConstructionError("branch violation: T hit the negative axis")
        g = np.sqrt(tt)
        return 0.5j * (1 - g) / (1 + g)

    def log_modulus(self, d):
        tt = self.T(self.to_omega(d))
        g = np.sqrt(tt)
        return g.imag / np.abs(1 + g) ** 2

    def at_defect(self, d):
        return np.exp(self.log_F(d))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.at_defect(1 - z / complex(self.anchor))

    def boundary_sup(self, samples=20001):
        """max |F| on the unit circle (attained on the arc inside D(omega, r))."""
        t = np.linspace(-self.arc_half_angle, self.arc_half_angle, samples)[1:-1]
        D = one_minus_expi(t)
        tt = self.T(D)
        g = np.sqrt(tt)
        return float(np.exp(np.max(g.imag / np.abs(1 + g) ** 2)))


def build_F(omega, r, anchor=1.0):
    """F-builder for a unimodular ``omega`` (or its angle relative to ``anchor``)."""
    if isinstance(omega, complex) or np.iscomplexobj(omega):
        omega = complex(omega)
        if abs(abs(omega) - 1) > 1e-12:
            raise ValueError("omega must be unimodular")
        ang = math.atan2((omega / complex(anchor)).imag, (omega / complex(anchor)).real)
    else:
        ang = float(omega)
    return FBuilder(ang, float(r), complex(anchor))


def f_property_checks(F, z, margin=1e-3):
    """Violation counts of the four F properties at sample points.

    Strict inequalities are only demanded at points whose pseudo-hyperbolic
    distance to the circle |z - omega| = r is at least ``margin``. With D the
    Euclidean distance, |1 - conj(w) z| <= (1 - |z|^2) + |z - w| gives the
    lower bound D / (1 - |z|^2 + D) used here.
    """
    z = np.asarray(z, dtype=complex)
    val = F(z)
    mod = np.abs(val)
    signed = np.abs(z - F.omega) - F.r
    D = np.abs(signed)
    rho = D / ((1 - np.abs(z)) * (1 + np.abs(z)) + D)
    inside = (signed < 0) & (rho >= margin)
    outside = (signed > 0) & (rho >= margin)
    return {
        "re_positive": int(np.count_nonzero(~(val.real > 0))),
        "modulus_bounds": int(np.count_nonzero((mod < 0.5) | (mod > 2))),
        "below_one_outside": int(np.count_nonzero(outside & ~(mod < 1))),
        "above_one_inside": int(np.count_nonzero(inside & ~(mod > 1))),
        "checked_inside": int(inside.sum()),
        "checked_outside": int(outside.sum()),
    }


# --- Phi(delta) ------------------------------------------------------------------

def master_scales(h_min, per_octave=4):
    """Scales 2^(-j / per_octave) from 1 down to ``h_min``."""
    j = np.arange(0, int(math.ceil(per_octave * math.log2(1.0 / h_min))) + 1)
    return 2.0 ** (-j / per_octave)


@dataclass
class PhiFunction:
    """Phi(delta) = grid max over h <= beta of h^-gamma int_S |F|^(2 delta) dnu."""

    nu: PullbackSample
    F: FBuilder
    gamma: float
    beta: float
    grid: BoxGrid
    threads: int | None = None
    evaluations: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        keep = self.nu.boundary_distance() <= self.beta
        self._d = self.nu.defects[keep]
        self._w = self.nu.weights[keep]
        self._ell = 2.0 * self.F.log_modulus(self._d)
        res = self.grid.resolved
        rows = np.any(res, axis=1)
        self._angles = self.grid.angles[rows]
        self._centers = one_minus_expi(self._angles)
        self._mask = res[rows]
        self._hg = self.grid.scales ** self.gamma

    def table(self, delta):
        w = self._w * np.exp(delta * self._ell)
        t = kernels.box_masses(self._d, w, self._centers, self.grid.scales, threads=self.threads)
        self.evaluations += 1
        return np.where(self._mask, t / self._hg[None, :], -np.inf)

    def restrict(self, lo, hi, target):
        """Drop centres that cannot reach ``target`` for any delta in [lo, hi].

        Since |log|F|| < 1/2, each box ratio moves by at most exp(|t|) when
        delta moves by t, so only boxes with ratio(lo) >= target e^(lo - hi)
        can cross. The returned Phi is exact whenever it is >= target.
        """
        t = self.table(lo)
        keep = np.any(t >= target * math.exp(lo - hi), axis=1)
        if np.any(keep):
            self._angles, self._centers, self._mask = self._angles[keep], self._centers[keep], self._mask[keep]
            self._cache.clear()

    def argmax(self, delta):
        t = self.table(delta)
        j, k = np.unravel_index(int(np.argmax(t)), t.shape)
        return float(t[j, k]), float(self._angles[j]), float(self.grid.scales[k])

    def __call__(self, delta):
        if delta not in self._cache:
            self._cache[delta] = self.argmax(delta)[0]
        return self._cache[delta]


def phi_of_delta(state, delta):
    if delta <= 0:
        raise ValueError("delta must be positive")
    return state(delta)


# --- the v-builder ------------------------------------------------------------

@dataclass
class VBuilderOutput:
    """v = (eps / 2C) F^delta0 with its witness and check results."""

    F: FBuilder
    delta0: float
    C: float
    eps: float
    beta: float
    r: float
    gamma: float
    zeta_angle: float
    t: float
    target: float
    phi_at_delta0: float
    sup_norm: float
    omega_mass: float
    checks: dict = field(default_factory=dict)

    @property
    def coefficient(self):
        return self.eps / (2 * self.C)

    @property
    def zeta(self):
        return self.F.anchor * np.exp(1j * self.zeta_angle)

    @property
    def witness_ratio(self):
        return self.coefficient ** 2 * self.phi_at_delta0

    def at_defect(self, d):
        return self.coefficient * np.exp(self.delta0 * self.F.log_F(d))

    def __call__(self, z):
        return self.at_defect(1 - np.asarray(z, dtype=complex) / complex(self.F.anchor))

    def to_dict(self):
        return {"delta0": self.delta0, "C": self.C, "epsilon": self.eps, "beta": self.beta,
                "r": self.r, "gamma": self.gamma, "zeta_angle": self.zeta_angle, "t": self.t,
                "omega_angle": self.F.omega_angle, "sup_norm": self.sup_norm,
                "witness_ratio": self.witness_ratio, "checks": self.checks}


def carleson_constant(nu, gamma, scales, m=512):
    grid = BoxGrid.standard(scales, m, nu.anchor, nu.h_glob)
    prof = carleson_profile(nu, gamma, grid)
    return float(prof.ratios.max()), prof


def _stage_grid(nu, scales, beta, extra, m):
    sc = np.unique(np.concatenate([scales[scales <= beta * (1 + 1e-12)], np.asarray(extra, dtype=float)]))
    return BoxGrid.standard(sc, m, nu.anchor, nu.h_glob)


def solve_delta0(phi, target, max_doublings=60):
    """Doubling from 1 then bisection; returns (delta0, Phi(delta0)) with Phi <= target."""
    lo = 1.0
    if phi(lo) >= target:
        raise ConstructionError("Phi(1) already exceeds the target; the Carleson constant is off")
    hi = 2.0
    for _ in range(max_doublings):
        if phi(hi) >= target:
            break
        lo, hi = hi, 2 * hi
    else:
        raise ConstructionError("Phi did not reach the target while doubling delta")
    if hasattr(phi, "restrict"):
        phi.restrict(lo, hi, target)
    while (hi - lo) > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if phi(mid) >= target:
            hi = mid
        else:
            lo = mid
    return lo, phi(lo)


def build_v(nu, beta, eps, gamma=None, C=None, scales=None, m=512, threads=None, check=True):
    """Weight v with the four properties: small inside |z| < 1 - beta, box ratios <= 1,
    ratios <= eps^2 above beta, and a witnessed box with ratio >= (3/4)^2."""
    gamma = nu.gamma if gamma is None else float(gamma)
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not 0 < beta <= 1:
        raise ValueError("beta must lie in (0, 1]")
    h_floor = nu.info.get("h_min", 2.0 ** -14)
    if scales is None:
        scales = master_scales(h_floor)
    scales = np.asarray(scales, dtype=float)
    if C is None:
        C, _ = carleson_constant(nu, gamma, scales, m)
    C = max(1.0, float(C))
    r = beta * (eps ** 2 / 2) ** (1 / gamma)
    # omega: resolved centre carrying the most nu-mass at scale r
    g_r = BoxGrid.standard(np.array([r]), m, nu.anchor, nu.h_glob)
    masses = kernels.box_masses(nu.defects, nu.weights, g_r.centers, g_r.scales, threads=threads)[:, 0]
    masses = np.where(g_r.resolved[:, 0], masses, -1.0)
    j = int(np.argmax(masses))
    if masses[j] <= 0:
        raise ConstructionError("no centre carries positive mass at scale r; the measure does not "
                                "reach the circle at this scale")
    F = FBuilder(float(g_r.angles[j]), r, nu.anchor)
    target = (2 * C / eps) ** 2
    grid = _stage_grid(nu, scales, beta, [r, beta], m)
    phi = PhiFunction(nu, F, gamma, beta, grid, threads)
    delta0, phi0 = solve_delta0(phi, target)
    _, z_ang, t = phi.argmax(delta0)
    node_sup = float(np.max(np.abs(F.at_defect(nu.defects)))) if len(nu) else 0.0
    fsup = max(F.boundary_sup() * (1 + 1e-9), node_sup)
    sup = (eps / (2 * C)) * fsup ** delta0
    out = VBuilderOutput(F, delta0, C, eps, beta, r, gamma, z_ang, t, target, phi0, sup, float(masses[j]))
    if check:
        out.checks = check_v(out, nu, scales, m, threads)
    return out


def check_v(v, nu, scales, m=512, threads=None, n_points=10000, seed=0):
    """Measured versions of the four v properties on the probed grid."""
    rng = np.random.default_rng(seed)
    res = {}
    rad = 1 - v.beta
    if rad > 0:
        rr = rad * np.sqrt(rng.random(n_points)) * (1 - 1e-12)
        z = rr * np.exp(2j * np.pi * rng.random(n_points))
        z = np.concatenate([z, rad * (1 - 1e-12) * np.exp(2j * np.pi * np.arange(2048) / 2048)])
        amax = float(np.max(np.abs(v(z))))
    else:
        amax = 0.0
    res["a_max_inside"] = amax
    res["a"] = amax < v.eps
    grid = BoxGrid.standard(np.unique(np.concatenate([scales, [v.r, v.beta, v.t, 1.0]])), m, nu.anchor, nu.h_glob)
    weighted = nu.weighted_by_image(v.at_defect)
    prof = carleson_profile(weighted, v.gamma, grid, threads=threads)
    res["b_max"] = float(prof.ratios.max())
    res["b"] = res["b_max"] <= 1 + 1e-9
    above = prof.scales > v.beta
    res["c_max"] = float(prof.ratios[above].max()) if np.any(above) else 0.0
    res["c"] = res["c_max"] <= v.eps ** 2
    res["d_ratio"] = v.witness_ratio
    res["d"] = v.witness_ratio >= 0.75 ** 2
    res["r_formula"] = v.r == v.beta * (v.eps ** 2 / 2) ** (1 / v.gamma)
    res["delta0_gt_1"] = v.delta0 > 1
    return res


# --- the inductive u and decompactification -------------------------------------

def stage_epsilon(n):
    """eps_n = 2^(-n-3); the full series sums to 1/8."""
    return 2.0 ** (-n - 3)


@dataclass
class StageRecord:
    n: int
    beta: float
    v: VBuilderOutput
    next_beta: float | None = None
    threshold: float | None = None
    verified: dict = field(default_factory=dict)

    def to_dict(self):
        return {"n": self.n, "beta": self.beta, "t": self.v.t, "zeta": self.v.zeta_angle,
                "epsilon": self.v.eps, "delta0": self.v.delta0, "C": self.v.C, "r": self.v.r,
                "sup_norm": self.v.sup_norm, "next_beta": self.next_beta,
                "threshold": self.threshold, "verified": self.verified}


@dataclass
class DecompactWeight:
    """Truncated u = sum of stage weights, and optionally w = u o phi."""

    stages: list
    anchor: complex
    gamma: float
    nu: PullbackSample | None = field(default=None, repr=False)
    w: AnalyticMap | None = field(default=None, repr=False)
    report: dict = field(default_factory=dict)
    note: str = ""

    def u_at_defect(self, d):
        d = np.asarray(d, dtype=complex)
        out = np.zeros(d.shape, dtype=complex)
        for st in self.stages:
            out = out + st.v.at_defect(d)
        return out

    def u(self, z):
        return self.u_at_defect(1 - np.asarray(z, dtype=complex) / complex(self.anchor))

    @property
    def witnesses(self):
        return [(st.v.zeta_angle, st.v.t) for st in self.stages]

    def to_dict(self):
        return {"stages": [s.to_dict() for s in self.stages], "gamma": self.gamma,
                "anchor": [complex(self.anchor).real, complex(self.anchor).imag],
                "report": self.report, "note": self.note}


def choose_next_beta(nu, gamma, upper, threshold, scales, m=512, threads=None):
    """Largest grid scale b < upper whose every sub-scale satisfies the nu bound.

    Between consecutive grid scales the monotone bound
    ratio(h) <= ratio(h_hi) (h_hi / h_lo)^gamma covers the continuum.
    """
    sc = scales[scales < upper * (1 - 1e-12)]
    if sc.size < 2:
        raise ConstructionError("scale budget exhausted")
    grid = BoxGrid.standard(sc, m, nu.anchor, nu.h_glob)
    prof = carleson_profile(nu, gamma, grid, threads=threads)
    h = prof.scales
    env = np.empty_like(h)
    env[0] = prof.ratios[0]
    env[1:] = prof.ratios[1:] * (h[1:] / h[:-1]) ** gamma
    # cumulative max from the finest scale upward
    cum = np.maximum.accumulate(env)
    ok = np.nonzero(cum <= threshold)[0]
    if ok.size == 0 or ok[-1] == 0:
        raise ConstructionError("no probed scale satisfies the vanishing bound; increase resolution")
    return float(h[ok[-1]]), float(cum[ok[-1]])


def build_u(nu, gamma=None, n_stages=4, scales=None, m=512, threads=None, check=True):
    """Stage the weights v_1, ..., v_N (with beta_1 = 1)."""
    gamma = nu.gamma if gamma is None else float(gamma)
    h_floor = nu.info.get("h_min", 2.0 ** -14)
    scales = master_scales(h_floor) if scales is None else np.asarray(scales, dtype=float)
    C, _ = carleson_constant(nu, gamma, scales, m)
    stages = []
    beta = 1.0
    for n in range(1, n_stages + 1):
        eps = stage_epsilon(n)
        v = build_v(nu, beta, eps, gamma, C, scales, m, threads, check)
        rec = StageRecord(n, beta, v)
        thr = eps ** 2 / (1 + v.sup_norm ** 2)
        upper = min(v.t, 1.0 / (n + 1))
        try:
            nb, _ = choose_next_beta(nu, gamma, upper, thr, scales, m, threads)
        except ConstructionError as exc:
            rec.verified["next_beta_error"] = str(exc)
            stages.append(rec)
            break
        rec.next_beta, rec.threshold = nb, thr
        stages.append(rec)
        beta = nb
    return DecompactWeight(stages, nu.anchor, gamma, nu)


def verify_stages(dw, scales, m=512, threads=None):
    """Per-stage S1-S5 on the probed grid, with each stage's own weight."""
    nu = dw.nu
    grid = BoxGrid.standard(scales, m, nu.anchor, nu.h_glob)
    out = []
    for i, st in enumerate(dw.stages):
        v = st.v
        res = {}
        nb = st.next_beta
        res["S1"] = bool(st.beta >= v.t and (nb is None or v.t > nb))
        if i + 1 < len(dw.stages):
            res["S1"] = res["S1"] and dw.stages[i + 1].beta >= dw.stages[i + 1].v.t
        res["S2"] = v.checks.get("a", True) if v.checks else None
        prof = carleson_profile(nu.weighted_by_image(v.at_defect), dw.gamma, grid, threads=threads)
        h = prof.scales
        low = h <= (nb if nb is not None else 0)
        high = h >= st.beta
        mid = ~(low | high)
        s3 = np.concatenate([prof.ratios[low], prof.ratios[high]])
        res["S3_max"] = float(s3.max()) if s3.size else 0.0
        res["S3"] = res["S3_max"] <= v.eps ** 2 * (1 + 1e-9)
        res["S4_max"] = float(prof.ratios[mid].max()) if np.any(mid) else 0.0
        res["S4"] = res["S4_max"] <= 1 + 1e-9
        res["S5"] = v.witness_ratio >= 0.75 ** 2
        st.verified.update(res)
        out.append(res)
    return out


def verification_scales(dw, h_min):
    base = 2.0 ** -np.arange(0, int(math.ceil(math.log2(1 / h_min))) + 1, dtype=float)
    extra = []
    for st in dw.stages:
        extra += [st.beta, st.v.t, st.v.r] + ([st.next_beta] if st.next_beta else [])
    return np.unique(np.concatenate([base, extra]))


def compose_weight(u_at_defect, phi, anchor, sup_norm=None):
    """w = u o phi for ``u`` given in image-defect coordinates."""
    anchor = complex(anchor)
    hooks = {}
    if phi.base is not None:
        hooks = {"base": phi.base,
                 "local": lambda zeta: u_at_defect(phi.defect_near(zeta, phi.base, anchor))}
    return AnalyticMap(lambda z: u_at_defect(1 - phi(z) / anchor), "composite", f"u∘{phi.label}",
                       sup_norm, spec={"name": "decompact", "symbol": phi.spec}, **hooks)


def decompactify(phi, alpha=0.0, n_stages=4, gamma=None, resolution=None, m=512, threads=None):
    """w = u o phi making M_w C_phi bounded but not compact, plus a verification report.

    Raises :class:`Refusal` when ``||phi||_inf < 1``. When C_phi is not
    compact to begin with, returns w = 1 with a note.
    """
    sup = boundary_sup(phi)
    if sup < 1 - 1e-9:
        raise Refusal(f"||phi||_inf = {sup:.6g} < 1: every weighted composition operator with "
                      "bounded weight stays compact, so no decompactifying weight exists")
    gamma = alpha + 2.0 if gamma is None else float(gamma)
    if resolution is None:
        # the fourth witness scale of kappa_{1/2} sits near 1e-19
        resolution = Resolution(h_min=1e-20)
    nu = pullback(phi, None, alpha, resolution, gamma)
    nu.info["h_min"] = resolution.h_min
    scales = master_scales(resolution.h_min)
    grid0 = BoxGrid.standard(2.0 ** -np.arange(0, 15, dtype=float), m, nu.anchor, nu.h_glob)
    cls = classify(carleson_profile(nu, gamma, grid0, threads=threads))
    if cls.verdict != "vanishing":
        return DecompactWeight([], nu.anchor, gamma, nu, constant(1.0),
                               {"classification": cls.to_dict()},
                               "C_phi is not compact on this space; w = 1 already gives a bounded, "
                               "non-compact operator")
    dw = build_u(nu, gamma, n_stages, scales, m, threads)
    dw.w = compose_weight(dw.u_at_defect, phi, nu.anchor, sum(st.v.sup_norm for st in dw.stages))
    vs = verification_scales(dw, resolution.h_min)
    verify_stages(dw, vs, m, threads)
    mu = nu.weighted_by_image(dw.u_at_defect)
    grid = BoxGrid.standard(vs, m, nu.anchor, nu.h_glob)
    prof_mu = carleson_profile(mu, gamma, grid, keep_table=True, threads=threads)
    prof_nu = carleson_profile(nu, gamma, grid, keep_table=True, threads=threads)
    wit = []
    for st in dw.stages:
        j = int(np.argmin(np.abs(grid.angles - st.v.zeta_angle)))
        k = int(np.argmin(np.abs(grid.scales - st.v.t)))
        wit.append({"n": st.n, "t": st.v.t, "zeta_angle": st.v.zeta_angle,
                    "mu_ratio": float(prof_mu.table[j, k]), "nu_ratio": float(prof_nu.table[j, k]),
                    "nu_profile": float(prof_nu.ratios[k])})
    dw.report = {
        "classification_nu": cls.to_dict(),
        "mu_profile": prof_mu.to_dict(),
        "nu_profile": prof_nu.to_dict(),
        "upper_bound": (5 / 4) ** 2,
        "mu_profile_max": float(prof_mu.ratios.max()),
        "witnesses": wit,
        "min_witness_ratio": min((x["mu_ratio"] for x in wit), default=float("nan")),
        "norm_w_sq": mu.total_mass,
        "stages_completed": len(dw.stages),
        "stages_requested": n_stages,
        "finest_scale": float(vs.min()),
        "limitations": "suprema are grid maxima over resolved boxes; scales below "
                       f"{vs.min():.3g} are not probed",
    }
    return dw
