import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import beta as beta_fn
from scipy.special import binom

from bergman_lab.analytic import (
    boundary_sup,
    compose,
    constant,
    contact_point,
    finite_privalov_weight,
    from_callable,
    from_spec,
    identity,
    kappa_symbol,
    lens_symbol,
    mobius,
    parse_spec,
    power_weight,
    scale,
    schwarz_pick_ratio,
    taylor_coefficients,
)
from bergman_lab.geometry import DomainError
from bergman_lab.measures import graded_rule


def _disk(rng, n, rmax=0.999):
    return rmax * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))


# --- Taylor extraction ---------------------------------------------------------------

def test_taylor_of_z_squared():
    c = taylor_coefficients(from_callable(lambda z: z ** 2), 4).coefficients
    assert np.allclose(c, [0, 0, 1, 0], atol=1e-12)


def test_taylor_of_lens():
    c = taylor_coefficients(lens_symbol(), 6).coefficients
    assert np.allclose(c, [0.5, 0.5, 0, 0, 0, 0], atol=1e-12)


def test_taylor_of_identity():
    c = taylor_coefficients(identity(), 5).coefficients
    assert np.allclose(c, [0, 1, 0, 0, 0], atol=1e-12)


def test_taylor_geometric_series():
    f = from_callable(lambda z: 1 / (1 - z / 2))
    c = taylor_coefficients(f, 40, radius=0.9).coefficients
    assert np.max(np.abs(c - 2.0 ** -np.arange(40))) < 1e-12


def test_taylor_overflow_truncates_with_flag():
    ts = taylor_coefficients(identity(), 100000, radius=0.5)
    assert ts.truncated
    assert 0.5 ** -(len(ts) - 1) <= 1e12 * 1.0001


@pytest.mark.parametrize("f", [lens_symbol(), kappa_symbol(0.5), power_weight(0.75), mobius(0.3j),
                               finite_privalov_weight([1, -1j], 1.5)], ids=lambda f: f.label)
def test_taylor_round_trip(f, rng):
    ts = f.taylor(512)
    z = _disk(rng, 500, ts.radius / 2)
    assert np.max(np.abs(ts(z) - f(z))) <= max(ts.tail_bound, 1e-12)


def test_taylor_cache_is_initialize_once():
    f = lens_symbol()
    assert f.taylor(16) is f.taylor(16)


# --- symbol library -----------------------------------------------------------------

def test_lens_radial_limit_and_boundary_modulus():
    f = lens_symbol()
    assert complex(f(1 - 1e-14)) == pytest.approx(1.0)
    t = np.linspace(-math.pi, math.pi, 101)
    assert np.allclose(np.abs(f(np.exp(1j * t))), np.cos(t / 2), atol=1e-15)


def test_lens_is_self_map(rng):
    assert np.all(np.abs(lens_symbol()(_disk(rng, 1000))) < 1)


def test_power_weight_values():
    w = power_weight(1.0)
    assert complex(w(1j)) == pytest.approx(1 - 1j)
    assert complex(w(0)) == 1
    with pytest.raises(DomainError):
        power_weight(-0.5)


def test_kappa_basic():
    for s in (0.2, 0.5, 0.9):
        assert complex(kappa_symbol(s)(0.0)) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        kappa_symbol(1.0)


def test_kappa_radial_ratio():
    f = kappa_symbol(0.5)
    r = 1 - 2.0 ** -np.arange(2, 30)
    ratio = (1 - r) / (1 - np.abs(f(r)))
    assert np.allclose(ratio, np.sqrt(1 - r), rtol=1e-6)
    assert ratio[-1] < 1e-4


def test_kappa_sup_norm_approaches_one():
    f = kappa_symbol(0.5)
    t = np.linspace(-math.pi, math.pi, 100001)
    vals = [np.max(np.abs(f((1 - d) * np.exp(1j * t)))) for d in (1e-2, 1e-4, 1e-8)]
    assert all(v < 1 for v in vals)
    assert vals[0] < vals[1] < vals[2]
    assert vals[2] > 1 - 1e-3
    assert boundary_sup(f) == 1.0


def test_privalov_weight():
    w = finite_privalov_weight([1.0], 1.0)
    assert complex(w(0.99)) == pytest.approx(0.01)
    assert finite_privalov_weight([], 2.0)(0.3) == 1
    w3 = finite_privalov_weight([1, 1j, -1], 0.5)
    z = np.exp(2j * np.pi * np.linspace(0, 1, 1000)) * (1 - 1e-9)
    assert np.max(np.abs(w3(z))) <= 2 ** 1.5 + 1e-9
    with pytest.raises(DomainError):
        finite_privalov_weight([0.5])


def test_privalov_moorhouse_product_vanishes_along_radius():
    w = finite_privalov_weight([1.0], 1.0)
    phi = lens_symbol()
    r = 1 - 2.0 ** -np.arange(2, 20)
    prod = np.abs(w(r)) ** 2 * (1 - r ** 2) / (1 - np.abs(phi(r)) ** 2)
    assert np.all(np.diff(prod) < 0) and prod[-1] < 1e-4


@pytest.mark.parametrize("f", [lens_symbol(), kappa_symbol(0.5), kappa_symbol(0.25), scale(0.5),
                               mobius(0.4 - 0.2j), identity()], ids=lambda f: f.label)
def test_schwarz_pick(f, rng):
    ratio, bound = schwarz_pick_ratio(f, _disk(rng, 5000, 0.99))
    assert np.all(ratio <= bound * (1 + 1e-12))


def test_composition_is_pointwise(rng):
    f = compose(kappa_symbol(0.5), lens_symbol())
    z = _disk(rng, 1000)
    assert np.max(np.abs(f(z) - kappa_symbol(0.5)(lens_symbol()(z)))) < 1e-13


def test_composition_germ_through_contact():
    f = compose(kappa_symbol(0.5), lens_symbol())
    zeta = np.array([1e-30, 1e-12 + 1e-12j])
    assert np.allclose(f.defect_near(zeta, 1.0, 1.0), np.sqrt(zeta / 2), rtol=1e-12)


def test_contact_point():
    assert contact_point(scale(0.5)) is None
    base, target = contact_point(lens_symbol())
    assert base == 1 and target == 1
    rot = from_callable(lambda z: -z * 0.999999999)
    b, t = contact_point(rot)
    assert abs(t + b) < 1e-3


# --- power-weight norms -----------------------------------------------------------------

@pytest.mark.parametrize("beta", [-0.4, 0.25, 1.0, 2.5])
@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_power_weight_norm_closed_form(beta, alpha):
    # ||(1 - z)^b||^2 = (a+1) sum_n |binom(b, n)|^2 B(n+1, a+1)
    n = np.arange(0, 20000)
    closed = (alpha + 1) * np.sum(binom(beta, n) ** 2 * beta_fn(n + 1, alpha + 1))
    g = graded_rule(alpha, 1.0, depth=30)
    vals = np.abs(power_weight(beta).value_near(g.zeta, 1.0)) ** 2
    assert g.integrate(vals) == pytest.approx(closed, rel=5e-3)


# --- spec mini-language -------------------------------------------------------------

def test_spec_language_round_trip():
    f = from_spec("kappa(s=0.5)∘lens")
    g = from_spec(f.spec)
    z = np.array([0.1, 0.5j, -0.3])
    assert np.allclose(f(z), g(z))
    assert parse_spec("kappa(s=0.5)∘lens") == f.spec


@pytest.mark.parametrize("text,z,expected", [
    ("scale(0.5)", 0.4, 0.2),
    ("lens", -1.0, 0.0),
    ("powerweight(beta=1.0)", 0.25, 0.75),
    ("lens×powerweight(beta=1.0)", 0.5, 0.75 * 0.5),
    ("scale(0.5)+one", 0.5, 1.25),
    ("one", 0.3, 1.0),
    ("privalov(points=[1], s=1)", 0.5, 0.5),
])
def test_spec_values(text, z, expected):
    assert complex(from_spec(text)(z)) == pytest.approx(expected)


def test_spec_unknown_symbol():
    with pytest.raises(ValueError):
        from_spec("nosuchsymbol")


@given(st.floats(0.05, 0.95), st.floats(0, 0.999), st.floats(-math.pi, math.pi))
def test_kappa_self_map_property(s, r, t):
    z = r * complex(math.cos(t), math.sin(t))
    assert abs(complex(kappa_symbol(s)(z))) < 1


def test_constant_map_hooks():
    c = constant(0.5)
    assert np.all(c.value_near(np.array([1e-30, 0.3]), 1.0) == 0.5)


def test_blaschke_zero_list_spec():
    import json
    from bergman_lab.analytic import from_spec
    B = from_spec("blaschke([0.5; -0.5j])")
    assert abs(complex(B(0.5))) < 1e-15 and abs(complex(B(-0.5j))) < 1e-15
    tree = json.loads(json.dumps(B.spec))
    assert abs(complex(from_spec(tree)(0.3)) - complex(B(0.3))) < 1e-15
