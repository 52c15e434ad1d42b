import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import beta as beta_fn
from scipy.special import gamma

from bergman_lab.analytic import (
    constant,
    finite_privalov_weight,
    from_callable,
    identity,
    kappa_symbol,
    lens_symbol,
    power_weight,
    scale,
)
from bergman_lab.operators import (
    BergmanBasis,
    OperatorMatrix,
    an_bound,
    an_bound_argmin,
    build_matrix,
    chi,
    divergence_verdict,
    hs_norm_basis,
    hs_norm_integral,
    jc_ratio,
    moorhouse_probe,
    singular_values,
)


def lens_power_hs(beta):
    """HS^2 of M_w C_phi, phi = (1+z)/2, w = (1-z)^beta, alpha = 0, in closed form.

    Polar coordinates about z = 1 reduce the area integral to
    4^(beta+1)/pi * B(1/2, beta - 1/2) * int_0^1 x^(2 beta - 1) / (2 - x)^2 dx.
    """
    j = quad(lambda x: x ** (2 * beta - 1) / (2 - x) ** 2, 0, 1)[0]
    return 4 ** (beta + 1) / math.pi * beta_fn(0.5, beta - 0.5) * j


# --- basis -----------------------------------------------------------------------------

@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0, 2.5])
def test_basis_norms(alpha):
    b = BergmanBasis(alpha, 60)
    n = np.arange(60)
    exact = gamma(alpha + 2) * gamma(n + 1) / gamma(n + alpha + 2)
    assert np.allclose(b.norm_sq, exact, rtol=1e-12)


def test_basis_alpha_zero_is_harmonic():
    assert np.allclose(BergmanBasis(0.0, 100).norm_sq, 1 / (np.arange(100) + 1), rtol=1e-13)


# --- matrices ----------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [0.3, 0.5 + 0.1j])
def test_diagonal_exactness(lam):
    M = build_matrix(scale(lam), None, 0.0, 32).entries
    assert np.max(np.abs(M - np.diag(complex(lam) ** np.arange(32)))) < 1e-12


def test_zero_symbol_is_rank_one():
    M = build_matrix(constant(0.0), None, 0.0, 16).entries
    E = np.zeros((16, 16))
    E[0, 0] = 1
    assert np.max(np.abs(M - E)) < 1e-13
    s = singular_values(build_matrix(constant(0.0), None, 0.0, 16))
    assert s.values[0] == pytest.approx(1.0) and np.max(s.values[1:]) < 1e-13


def test_multiplication_by_z_is_weighted_shift():
    M = build_matrix(identity(), from_callable(lambda z: z), 0.0, 20).entries
    n = np.arange(19)
    assert np.allclose(np.diag(M, -1), np.sqrt((n + 1) / (n + 2)), atol=1e-12)
    off = M.copy()
    off[np.arange(1, 20), np.arange(19)] = 0
    assert np.max(np.abs(off)) < 1e-12


def test_matrix_truncation_flag():
    op = build_matrix(scale(0.5), None, 0.0, 5000)
    assert op.truncated and op.size < 5000


def test_matrix_io(tmp_path):
    op = build_matrix(lens_symbol(), power_weight(1.0), 1.0, 12)
    op.to_binary(tmp_path / "m.bin")
    alpha, entries = OperatorMatrix.read_binary(tmp_path / "m.bin")
    assert alpha == 1.0 and np.array_equal(entries, op.entries)
    op.to_csv(tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().count("\n") >= 12


def test_singular_values_of_diagonal():
    spec = singular_values(build_matrix(scale(0.5), None, 0.0, 64), 16)
    assert np.allclose(spec.values, 2.0 ** -np.arange(16), atol=1e-12)
    assert spec.values_double is not None and np.all(spec.converged)


def test_singular_values_headroom_flag():
    spec = singular_values(build_matrix(scale(0.5), None, 0.0, 16), 8)
    assert not np.any(spec.converged)


def test_spectrum_is_nonincreasing_and_below_frobenius():
    op = build_matrix(lens_symbol(), power_weight(1.0), 0.0, 48)
    s = singular_values(op, check=False).values
    assert np.all(np.diff(s) <= 1e-15)
    assert s[0] <= math.sqrt(op.frobenius_sq()) * (1 + 1e-12)


def test_frobenius_increases_toward_hs():
    hs = lens_power_hs(1.0)
    prev = 0.0
    for n in (16, 32, 64, 128):
        f = build_matrix(lens_symbol(), power_weight(1.0), 0.0, n).frobenius_sq()
        assert f >= prev - 1e-12
        assert f <= hs * (1 + 1e-6)
        prev = f


# --- Hilbert-Schmidt ---------------------------------------------------------------------

def test_hs_contracted_symbol_both_routes():
    a = hs_norm_integral(scale(0.5))
    b = hs_norm_basis(scale(0.5))
    assert a.value == pytest.approx(4 / 3, rel=5e-3)
    assert b.value == pytest.approx(4 / 3, rel=5e-3)
    assert np.all(np.diff(b.partial_sums) >= 0)


def test_hs_zero_symbol_and_zero_weight():
    assert hs_norm_basis(constant(0.0)).value == pytest.approx(1.0, abs=1e-12)
    assert hs_norm_integral(lens_symbol(), constant(0.0)).value == 0.0


@pytest.mark.parametrize("beta", [1.0, 0.75, 0.6])
def test_hs_lens_against_closed_form(beta):
    exact = lens_power_hs(beta)
    got = hs_norm_integral(lens_symbol(), power_weight(beta))
    assert got.verdict == "finite"
    assert got.value == pytest.approx(exact, rel=1e-3)
    assert hs_norm_basis(lens_symbol(), power_weight(beta)).value == pytest.approx(exact, rel=1e-2)


@pytest.mark.parametrize("beta", [0.25, 0.4])
def test_hs_lens_divergence(beta):
    assert hs_norm_integral(lens_symbol(), power_weight(beta)).verdict == "diverging"
    b = hs_norm_basis(lens_symbol(), power_weight(beta))
    assert b.verdict == "infinite" and b.trigger is not None


TRIPLES = [
    (scale(0.5), None, 0.0),
    (scale(0.5), None, 1.0),
    (lens_symbol(), power_weight(1.0), 0.0),
    (lens_symbol(), power_weight(1.5), 1.0),
    (kappa_symbol(0.5), None, 0.0),
    (scale(0.5), from_callable(lambda z: 1 + z, sup_norm=2.0), 0.0),
]


@pytest.mark.parametrize("phi,w,alpha", TRIPLES, ids=range(len(TRIPLES)))
def test_two_way_hs_agreement(phi, w, alpha):
    a = hs_norm_integral(phi, w, alpha)
    b = hs_norm_basis(phi, w, alpha)
    assert a.verdict == "finite" and b.verdict == "finite"
    assert abs(a.value - b.value) / a.value < 1e-2


def test_divergence_rule():
    assert divergence_verdict([1, 1.3, 1.7, 2.2], [8, 16, 32, 64]) == ("diverging", 16)
    assert divergence_verdict([1, 1.3, 1.3, 2.2], [8, 16, 32, 64])[0] == "finite"
    assert divergence_verdict([1, 1.2, 1.44, 1.73], [8, 16, 32, 64])[0] == "finite"


# --- probes ---------------------------------------------------------------------------

def test_moorhouse_lens_without_weight_stays_away_from_zero():
    p = moorhouse_probe(lens_symbol())
    r = p.radii
    radial = (1 - r ** 2) / (1 - ((1 + r) / 2) ** 2)
    assert np.all(p.sup_linear >= radial * (1 - 1e-12))
    assert p.sup_linear[-1] > 1.9


def test_moorhouse_lens_with_privalov_weight_vanishes():
    p = moorhouse_probe(lens_symbol(), finite_privalov_weight([1.0], 1.0))
    assert p.decreasing() and p.sup_linear[-1] < 1e-3


def test_moorhouse_contracted_symbol():
    p = moorhouse_probe(scale(0.5))
    assert np.all(p.sup_linear <= (1 - p.radii ** 2) / 0.75 * (1 + 1e-12))


@pytest.mark.parametrize("phi,w", [(lens_symbol(), finite_privalov_weight([1.0], 1.0)),
                                   (lens_symbol(), None), (kappa_symbol(0.5), None),
                                   (scale(0.5), power_weight(1.0))])
def test_moorhouse_variants_vanish_together(phi, w):
    p = moorhouse_probe(phi, w, 1.0)
    f, g = p.sup_linear, p.sup_power
    assert np.all(np.minimum(f, g) <= np.sqrt(f * g) * (1 + 1e-12))
    assert (f[-1] < 1e-2) == (g[-1] < 1e-2)


def test_jc_ratio_lens_and_kappa():
    assert jc_ratio(lens_symbol()).limit == pytest.approx(2.0, rel=1e-2)
    assert jc_ratio(kappa_symbol(0.5)).limit < 0.02
    assert jc_ratio(scale(0.5), 1j).limit < 1e-3
    with pytest.raises(ValueError):
        jc_ratio(lens_symbol(), 0.5)


# --- approximation-number bound ----------------------------------------------------

def test_chi_is_zero_for_contraction():
    hs = 2.0 ** -np.arange(1, 10)
    assert np.all(chi(scale(0.5), hs) == 0)


def test_an_bound_with_vanishing_chi():
    hs = 2.0 ** (-np.arange(4, 40) / 4)
    chis = chi(scale(0.5), hs)
    assert an_bound(hs, chis, 10) == pytest.approx(math.sqrt(10) * math.exp(-5), rel=1e-12)
    assert an_bound_argmin(hs, chis, 10)[0] == 0.5


def test_an_bound_quartic_chi():
    hs = np.geomspace(1e-4, 0.9, 4000)
    chis = hs ** 4
    vals = [an_bound(hs, chis, n) for n in (1, 5, 25, 125, 625)]
    assert np.all(np.diff(vals) <= 0)
    for n, v in zip((1, 5, 25, 125, 625), vals):
        direct = np.min(np.sqrt(n) * np.exp(-n * hs) + hs)
        assert v <= direct + 1e-12


def test_an_bound_large_n_limit():
    hs = np.geomspace(1e-3, 0.5, 200)
    chis = hs ** 3
    assert an_bound(hs, chis, 50000) == pytest.approx(np.min(np.sqrt(chis) / hs), rel=1e-6)
    with pytest.raises(ValueError):
        an_bound([], [], 3)


@given(st.integers(1, 400), st.floats(1.0, 6.0))
def test_an_bound_nonincreasing_in_n(n, p):
    hs = np.geomspace(1e-3, 0.9, 64)
    chis = hs ** p
    assert an_bound(hs, chis, n + 1) <= an_bound(hs, chis, n)
