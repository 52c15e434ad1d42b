"""Analytic self-maps and weights on the unit disk.

An :class:`AnalyticMap` is a closed evaluator plus metadata. Maps that touch
the unit circle at a known point also carry *germ hooks* so that values very
close to that point can be computed without cancellation:

``base``
    domain point on the circle around which the hooks are expanded;
``target``
    unimodular value ``f(base)`` (self-maps only);
``germ(zeta)``
    image defect ``1 - f(base * (1 - zeta)) / target``;
``local(zeta)``
    value ``f(base * (1 - zeta))``.

Deep-scale quadrature (:mod:`bergman_lab.measures`) works entirely in these
coordinates, which is what lets box scales of order 1e-12 be resolved in
double precision.
"""
from __future__ import annotations

import json
import math
import re
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import BlaschkeProduct, DomainError, MobiusMap

DEFAULT_RADIUS = 0.95
MAX_SCALING = 1e12


def _same_point(a, b):
    return a is not None and b is not None and abs(complex(a) - complex(b)) < 1e-14


@dataclass(frozen=True, eq=False)
class AnalyticMap:
    """Analytic function on the disk with optional near-boundary hooks."""

    func: Callable
    kind: str
    label: str = ""
    sup_norm: float | None = None
    derivative: Callable | None = None
    base: complex | None = None
    target: complex | None = None
    germ: Callable | None = None
    local: Callable | None = None
    spec: dict | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = self.func(z)
        return np.broadcast_to(out, z.shape).astype(complex) if np.ndim(out) < z.ndim else out

    @property
    def is_self_map_contact(self):
        return self.germ is not None and self.target is not None

    def value_near(self, zeta, base):
        """f(base * (1 - zeta)), through the local hook when it applies."""
        zeta = np.asarray(zeta, dtype=complex)
        if self.local is not None and _same_point(base, self.base):
            return np.asarray(self.local(zeta), dtype=complex) * np.ones_like(zeta)
        if self.germ is not None and _same_point(base, self.base):
            return self.target * (1.0 - self.germ(zeta))
        return self(complex(base) * (1.0 - zeta))

    def defect_near(self, zeta, base, target):
        """1 - f(base * (1 - zeta)) / target."""
        zeta = np.asarray(zeta, dtype=complex)
        if self.germ is not None and _same_point(base, self.base) and _same_point(target, self.target):
            return np.asarray(self.germ(zeta), dtype=complex) * np.ones_like(zeta)
        return 1.0 - self.value_near(zeta, base) / complex(target)

    def taylor(self, n, radius=DEFAULT_RADIUS):
        """Cached :func:`taylor_coefficients` (initialize-once per key)."""
        key = (int(n), float(radius))
        with self._lock:
            hit = self._cache.get(key)
            if hit is None:
                hit = taylor_coefficients(self, n, radius)
                self._cache[key] = hit
        return hit

    def compose(self, inner):
        return compose(self, inner)

    def __mul__(self, other):
        return product(self, other)

    def __add__(self, other):
        return add(self, other)

    def to_json(self):
        return json.dumps(self.spec, sort_keys=True)


# --- constructors -------------------------------------------------------------

def _principal_power(x, p, name):
    if np.any((np.real(x) < -1e-12) & (np.abs(np.imag(x)) < 1e-300)):
        raise DomainError(f"{name}: argument on the branch cut")
    return np.power(x, p)


def identity():
    return AnalyticMap(lambda z: z, "polynomial", "id", 1.0, lambda z: np.ones_like(z),
                       base=1.0, target=1.0, germ=lambda zeta: zeta,
                       spec={"name": "id"})


def constant(c=1.0):
    c = complex(c)
    name = {1: "one", 0: "zero"}.get(c, None)
    spec = {"name": name} if name else {"name": "const", "params": {"c": _num(c)}}
    return AnalyticMap(lambda z: np.full(np.shape(z), c, dtype=complex), "polynomial",
                       name or f"const({c})", abs(c), lambda z: np.zeros_like(z),
                       local=lambda zeta: np.full(np.shape(zeta), c, dtype=complex), spec=spec)


def scale(lam):
    """z -> lam z."""
    lam = complex(lam)
    if abs(lam) > 1:
        raise DomainError("|lambda| must be <= 1 for a self-map")
    return AnalyticMap(lambda z: lam * z, "polynomial", f"scale({lam})", abs(lam),
                       lambda z: np.full(np.shape(z), lam), spec={"name": "scale", "params": {"lam": _num(lam)}})


def lens_symbol():
    """phi(z) = (1 + z) / 2, touching the circle only at 1 with phi'(1) = 1/2."""
    return AnalyticMap(lambda z: (1.0 + z) / 2.0, "lens", "lens", 1.0,
                       lambda z: np.full(np.shape(z), 0.5 + 0j),
                       base=1.0, target=1.0, germ=lambda zeta: zeta / 2.0,
                       spec={"name": "lens"})


def kappa_symbol(s):
    """phi_s(z) = 1 - (1 - z)^s, a compact symbol with sup-norm 1.

    This is a choice made here: it serves as the concrete compact symbol
    touching the circle (only at 1) for the decompactification pipeline.
    """
    s = float(s)
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")

    def f(z):
        return 1.0 - _principal_power(1.0 - z, s, "kappa")

    def df(z):
        return s * _principal_power(1.0 - z, s - 1.0, "kappa")

    return AnalyticMap(f, "composite", f"kappa(s={s})", 1.0, df, base=1.0, target=1.0,
                       germ=lambda zeta: _principal_power(zeta, s, "kappa"),
                       spec={"name": "kappa", "params": {"s": s}})


def power_weight(beta):
    """w(z) = (1 - z)^beta with the principal branch, beta > -1/2."""
    beta = float(beta)
    if beta <= -0.5:
        raise DomainError("beta must exceed -1/2")
    sup = 2.0 ** beta if beta >= 0 else math.inf
    return AnalyticMap(lambda z: _principal_power(1.0 - z, beta, "powerweight"), "power-weight",
                       f"powerweight(beta={beta})", sup,
                       lambda z: -beta * _principal_power(1.0 - z, beta - 1.0, "powerweight"),
                       base=1.0, local=lambda zeta: _principal_power(zeta, beta, "powerweight"),
                       spec={"name": "powerweight", "params": {"beta": beta}})


def finite_privalov_weight(points, s=1.0):
    """w(z) = prod_j (1 - conj(xi_j) z)^s, vanishing at every xi_j."""
    pts = [complex(p) for p in points]
    if not pts:
        return constant(1.0)
    if any(abs(abs(p) - 1) > 1e-12 for p in pts):
        raise DomainError("Privalov points must be unimodular")
    if s <= 0:
        raise DomainError("s must be positive")
    s = float(s)

    def f(z):
        out = np.ones(np.shape(z), dtype=complex)
        for p in pts:
            out = out * _principal_power(1.0 - np.conj(p) * z, s, "privalov")
        return out

    b = pts[0]

    def loc(zeta):
        z = b * (1.0 - zeta)
        out = _principal_power(zeta, s, "privalov") * np.ones(np.shape(zeta), dtype=complex)
        for p in pts[1:]:
            out = out * _principal_power(1.0 - np.conj(p) * z, s, "privalov")
        return out

    return AnalyticMap(f, "outer", f"privalov({len(pts)} points, s={s})", 2.0 ** (s * len(pts)),
                       base=b, local=loc,
                       spec={"name": "privalov", "params": {"points": [_pair(p) for p in pts], "s": s}})


def mobius(a, rotation=1.0):
    m = MobiusMap.automorphism(a, rotation)
    return AnalyticMap(m, "möbius", f"mobius({complex(a)})", 1.0,
                       spec={"name": "mobius", "params": {"a": _num(a), "rotation": _num(rotation)}})


def blaschke(zeros, label="blaschke", spec=None):
    b = BlaschkeProduct(zeros)
    return AnalyticMap(b, "blaschke", label, 1.0,
                       spec=spec or {"name": "blaschke", "params": {"zeros": [_num(a) for a in b.zeros]}})


def compose(outer, inner):
    """outer o inner, propagating germ hooks through the contact point."""
    base = target = germ = local = None
    if inner.is_self_map_contact:
        base = inner.base
        if outer.is_self_map_contact and _same_point(outer.base, inner.target):
            target = outer.target
            germ = lambda zeta: outer.germ(inner.germ(zeta))  # noqa: E731
        else:
            local = lambda zeta: outer.value_near(inner.germ(zeta), inner.target)  # noqa: E731
    deriv = None
    if outer.derivative is not None and inner.derivative is not None:
        deriv = lambda z: outer.derivative(inner(z)) * inner.derivative(z)  # noqa: E731
    sup = outer.sup_norm
    return AnalyticMap(lambda z: outer(inner(z)), "composite", f"{outer.label}∘{inner.label}",
                       sup, deriv, base=base, target=target, germ=germ, local=local,
                       spec={"op": "compose", "args": [outer.spec, inner.spec]})


def _binary(f, g, op, kind, sup, label):
    base = f.base if f.base is not None else g.base
    if f.base is not None and g.base is not None and not _same_point(f.base, g.base):
        base = None
    local = None
    if base is not None:
        if op == "mul":
            local = lambda zeta: f.value_near(zeta, base) * g.value_near(zeta, base)  # noqa: E731
        else:
            local = lambda zeta: f.value_near(zeta, base) + g.value_near(zeta, base)  # noqa: E731
    fn = (lambda z: f(z) * g(z)) if op == "mul" else (lambda z: f(z) + g(z))
    return AnalyticMap(fn, kind, label, sup, base=base, local=local,
                       spec={"op": op, "args": [f.spec, g.spec]})


def product(f, g):
    sup = f.sup_norm * g.sup_norm if f.sup_norm is not None and g.sup_norm is not None else None
    return _binary(f, g, "mul", "composite", sup, f"{f.label}×{g.label}")


def add(f, g):
    sup = f.sup_norm + g.sup_norm if f.sup_norm is not None and g.sup_norm is not None else None
    return _binary(f, g, "add", "sum", sup, f"{f.label}+{g.label}")


def from_callable(func, kind="composite", label="custom", sup_norm=None, **hooks):
    return AnalyticMap(func, kind, label, sup_norm, spec={"name": "custom", "label": label}, **hooks)


# --- Taylor coefficients ------------------------------------------------------

@dataclass(frozen=True)
class TaylorSeries:
    """Coefficients c_0..c_{N-1} extracted on |z| = radius."""

    coefficients: np.ndarray
    radius: float
    tail_bound: float
    truncated: bool = False

    def __len__(self):
        return self.coefficients.shape[0]

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.polynomial.polynomial.polyval(z, self.coefficients)


def max_terms(radius, limit=MAX_SCALING):
    return int(math.floor(math.log(limit) / -math.log(radius))) + 1


def circle_samples(m, radius):
    return radius * np.exp(2j * np.pi * np.arange(m) / m)


def coefficients_from_samples(values, n, radius):
    """First n Cauchy coefficients from samples on m equispaced points of |z|=radius.

    ``values`` may be (m,) or (m, k); coefficients are along axis 0.
    """
    m = values.shape[0]
    c = np.fft.fft(values, axis=0)[:n] / m
    k = np.arange(n).reshape((n,) + (1,) * (values.ndim - 1))
    return c * radius ** (-k.astype(float))


def taylor_coefficients(f, n, radius=DEFAULT_RADIUS):
    """Taylor coefficients c_k = FFT(samples on |z| = radius)_k / radius^k.

    When ``radius**-k`` would exceed 1e12 the series is truncated and
    flagged. The tail bound is the aliasing estimate ``max |c_k| radius^k``
    over the top quarter of the computed band, scaled back to the extraction
    circle.
    """
    if not 0 < radius < 1:
        raise DomainError("radius must lie in (0, 1)")
    n = int(n)
    truncated = False
    cap = max_terms(radius)
    if n > cap:
        n, truncated = cap, True
    m = 1 << max(6, int(math.ceil(math.log2(4 * n))))
    vals = f(circle_samples(m, radius))
    c = coefficients_from_samples(vals, m, radius)
    scale_top = np.abs(c[m // 2:3 * m // 4]) * radius ** np.arange(m // 2, 3 * m // 4)
    fmax = float(np.max(np.abs(vals))) if vals.size else 0.0
    tail = float(scale_top.max()) + 1e-15 * fmax
    return TaylorSeries(c[:n], radius, tail * m, truncated)


# --- boundary probes ----------------------------------------------------------

def boundary_sup(f, samples=4096, depth=1e-9):
    """max |f| on the circle of radius 1 - depth (plus the germ contact, if any)."""
    z = (1.0 - depth) * np.exp(2j * np.pi * np.arange(samples) / samples)
    val = float(np.max(np.abs(f(z))))
    if f.is_self_map_contact:
        val = max(val, abs(complex(f.target)))
    return val


def contact_point(f, samples=4096, tol=1e-6):
    """(base, target) where a self-map reaches the circle, or None."""
    if f.is_self_map_contact:
        return complex(f.base), complex(f.target)
    t = 2 * np.pi * np.arange(samples) / samples
    z = (1.0 - 1e-12) * np.exp(1j * t)
    vals = f(z)
    j = int(np.argmax(np.abs(vals)))
    if abs(vals[j]) < 1 - tol:
        return None
    w = vals[j] / abs(vals[j])
    return complex(np.exp(1j * t[j])), complex(w)


def schwarz_pick_ratio(f, z):
    """(1 - |z|^2) / (1 - |f(z)|^2) and the bound 2(1+|f(0)|)/(1-|f(0)|)."""
    z = np.asarray(z, dtype=complex)
    f0 = abs(complex(f(np.array([0j]))[0]))
    return (1 - np.abs(z) ** 2) / (1 - np.abs(f(z)) ** 2), 2 * (1 + f0) / (1 - f0)


# --- specification mini-language --------------------------------------------

_TOKEN = re.compile(r"\s*(?:(∘)|(×|\*)|(\+)|(\()|(\))|([A-Za-z_][A-Za-z0-9_]*)(\(([^()]*)\))?)")


def _num(x):
    x = complex(x)
    return x.real if x.imag == 0 else [x.real, x.imag]


def _to_complex(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


def _parse_value(text):
    text = text.strip()
    if text.startswith("[") and text.endswith("]"):
        return [_parse_value(t) for t in text[1:-1].split(";") if t.strip()]
    try:
        return float(text)
    except ValueError:
        pass
    try:
        return complex(text.replace("i", "j"))
    except ValueError:
        return text


def _parse_args(text):
    args, kwargs = [], {}
    if not text or not text.strip():
        return args, kwargs
    for part in text.split(","):
        if "=" in part:
            k, v = part.split("=", 1)
            kwargs[k.strip()] = _parse_value(v)
        else:
            args.append(_parse_value(part))
    return args, kwargs


def _leaf(name, args, kwargs):
    params = dict(kwargs)
    positional = {"scale": ["lam"], "kappa": ["s"], "powerweight": ["beta"], "const": ["c"],
                  "privalov": ["points", "s"], "blaschke": ["file"], "mobius": ["a", "rotation"]}
    for key, val in zip(positional.get(name, []), args):
        if name == "blaschke" and isinstance(val, list):
            key = "zeros"
        params[key] = val
    if name == "privalov" and "points" in params:
        pts = params["points"]
        params["points"] = [_pair(x) for x in (pts if isinstance(pts, list) else [pts])]
    params = {k: ([_num(x) if isinstance(x, complex) else x for x in v] if isinstance(v, list)
                  else _num(v) if isinstance(v, complex) else v) for k, v in params.items()}
    node = {"name": name}
    if params:
        node["params"] = params
    return node


def _pair(x):
    x = complex(x)
    return [x.real, x.imag]


def parse_spec(text):
    """Parse a symbol/weight expression into a JSON-able tree.

    Grammar: ``expr := term ('+' term)*``, ``term := comp (('*'|'×') comp)*``,
    ``comp := atom (('∘'|'o') atom)*``, ``atom := name['(' args ')'] | '(' expr ')'``.
    """
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse symbol spec near {text[pos:]!r}")
        pos = m.end()
        if m.group(1) or (m.group(6) == "o" and m.group(7) is None):
            toks.append(("op", "compose"))
        elif m.group(2):
            toks.append(("op", "mul"))
        elif m.group(3):
            toks.append(("op", "add"))
        elif m.group(4):
            toks.append(("(", None))
        elif m.group(5):
            toks.append((")", None))
        else:
            toks.append(("leaf", _leaf(m.group(6), *_parse_args(m.group(8)))))
    node, rest = _parse_level(toks, 0)
    if rest:
        raise ValueError(f"trailing tokens in symbol spec {text!r}")
    return node


_LEVELS = ["add", "mul", "compose"]


def _parse_level(toks, level):
    if level == len(_LEVELS):
        return _parse_atom(toks)
    left, toks = _parse_level(toks, level + 1)
    while toks and toks[0] == ("op", _LEVELS[level]):
        right, toks = _parse_level(toks[1:], level + 1)
        left = {"op": _LEVELS[level], "args": [left, right]}
    return left, toks


def _parse_atom(toks):
    if not toks:
        raise ValueError("unexpected end of symbol spec")
    kind, val = toks[0]
    if kind == "leaf":
        return val, toks[1:]
    if kind == "(":
        node, rest = _parse_level(toks[1:], 0)
        if not rest or rest[0][0] != ")":
            raise ValueError("unbalanced parentheses in symbol spec")
        return node, rest[1:]
    raise ValueError("misplaced operator in symbol spec")


def _read_zeros(path):
    zs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line[0].isalpha():
                continue
            parts = [p for p in re.split(r"[,\s]+", line) if p]
            zs.append(complex(float(parts[0]), float(parts[1]) if len(parts) > 1 else 0.0))
    return zs


def build(node):
    """Instantiate an :class:`AnalyticMap` from a parsed spec tree."""
    if "op" in node:
        a, b = (build(x) for x in node["args"])
        return {"compose": compose, "mul": product, "add": add}[node["op"]](a, b)
    name, p = node["name"], node.get("params", {})
    if name in ("id", "z"):
        return identity()
    if name == "lens":
        return lens_symbol()
    if name == "kappa":
        return kappa_symbol(p.get("s", 0.5))
    if name == "powerweight":
        return power_weight(p.get("beta", 1.0))
    if name == "scale":
        return scale(_to_complex(p.get("lam", 0.5)))
    if name == "one":
        return constant(1.0)
    if name == "zero":
        return constant(0.0)
    if name == "const":
        return constant(_to_complex(p.get("c", 1.0)))
    if name == "privalov":
        pts = p.get("points", [[1.0, 0.0]])
        return finite_privalov_weight([_to_complex(x) for x in pts], float(p.get("s", 1.0)))
    if name == "mobius":
        return mobius(_to_complex(p.get("a", 0.0)), _to_complex(p.get("rotation", 1.0)))
    if name == "blaschke":
        if "file" in p:
            return blaschke(_read_zeros(p["file"]), spec=node)
        return blaschke([_to_complex(a) for a in p.get("zeros", [])], spec=node)
    raise ValueError(f"unknown symbol {name!r}")


def from_spec(text_or_tree):
    """Build a map from spec text (``'kappa(s=0.5)'``) or its JSON tree."""
    if isinstance(text_or_tree, str):
        t = text_or_tree.strip()
        tree = json.loads(t) if t.startswith("{") else parse_spec(t)
    else:
        tree = text_or_tree
    return build(tree)
