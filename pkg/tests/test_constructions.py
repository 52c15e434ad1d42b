import math

import numpy as np
import pytest
from helpers import disk_sample, f_property_sample
from hypothesis import given
from hypothesis import strategies as st

from bergman_lab.analytic import kappa_symbol, lens_symbol, scale
from bergman_lab.constructions import (
    ConstructionError,
    PhiFunction,
    Refusal,
    build_F,
    build_u,
    build_v,
    carleson_constant,
    decompactify,
    f_property_checks,
    master_scales,
    phi_of_delta,
    stage_epsilon,
)
from bergman_lab.geometry import CarlesonBox, one_minus_expi
from bergman_lab.measures import BoxGrid, box_ratio_grid, graded_rule

# --- F-builder ---------------------------------------------------------------------------


def test_F_example_points():
    F = build_F(1.0 + 0j, 0.5)
    assert abs(complex(F(-0.9))) < 1
    assert abs(complex(F(1 - 0.25))) > 1
    f0 = complex(F(0.0))
    assert 0.5 <= abs(f0) <= 2 and f0.real > 0


def test_F_reference_points():
    # A and B lie on the unit circle, C = (1 - r) omega lies inside and has |F| = 1
    F = build_F(1j, 0.3)
    A, B, C = F.points
    for p in (A, B):
        assert abs(p) == pytest.approx(1.0, abs=1e-15)
        assert abs(p - 1j) == pytest.approx(0.3, abs=1e-15)
    assert abs(C - 1j) == pytest.approx(0.3, abs=1e-14)
    assert C == pytest.approx(0.7j, abs=1e-15)
    assert float(F.log_modulus(np.array([1 - C]))[0]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("omega,r", [(1.0 + 0j, 0.5), (1j, 0.1), (np.exp(1j * np.pi / 7), 0.9)])
def test_F_properties(omega, r, rng):
    F = build_F(complex(omega), r)
    z = f_property_sample(rng, omega, r, 20000)
    res = f_property_checks(F, z)
    assert res["checked_inside"] > 100 and res["checked_outside"] > 100
    for key in ("re_positive", "modulus_bounds", "below_one_outside", "above_one_inside"):
        assert res[key] == 0, key


def test_F_on_boundary_and_sup():
    F = build_F(1.0 + 0j, 0.2)
    t = np.linspace(-math.pi, math.pi, 20001)
    mod = np.abs(F.at_defect(one_minus_expi(t)))
    assert np.all((mod >= 0.5) & (mod <= 2))
    assert F.boundary_sup() == pytest.approx(mod.max(), rel=1e-6)


@given(st.floats(-math.pi, math.pi), st.floats(1e-6, 0.999), st.floats(0, 1 - 1e-9), st.floats(-math.pi, math.pi))
def test_F_modulus_property(ang, r, rad, t):
    F = build_F(ang, r)
    val = complex(F(rad * complex(math.cos(t), math.sin(t))))
    assert val.real > 0 and 0.5 <= abs(val) <= 2


def test_F_small_defects_stay_accurate():
    F = build_F(0.0, 1e-15)
    d = np.array([0.5e-15 + 0j, 1e-30 + 0j])
    assert np.all(np.abs(F.at_defect(d)) > 1)


def test_r_formula():
    beta, eps, gamma = 0.5, 0.5, 2.0
    assert beta * (eps ** 2 / 2) ** (1 / gamma) == pytest.approx(0.17678, abs=1e-5)


# --- Phi(delta) ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def phi_state(nu_kappa):
    scales = master_scales(2.0 ** -14)
    F = build_F(0.0, 0.05)
    grid = BoxGrid.standard(scales, 512, nu_kappa.anchor, nu_kappa.h_glob)
    C, _ = carleson_constant(nu_kappa, 2.0, scales)
    return PhiFunction(nu_kappa, F, 2.0, 1.0, grid), max(C, 1.0)


def test_phi_sandwich(phi_state):
    phi, _ = phi_state
    rng = np.random.default_rng(3)
    for _ in range(20):
        d, t = rng.uniform(0.1, 30), rng.uniform(-5, 5)
        if d + t <= 0:
            t = -t
        a, b = phi_of_delta(phi, d), phi_of_delta(phi, d + t)
        assert 4.0 ** -abs(t) * a <= b * (1 + 1e-12)
        assert b <= 4.0 ** abs(t) * a * (1 + 1e-12)


def test_phi_bounds(phi_state):
    phi, C = phi_state
    assert phi_of_delta(phi, 1.0) <= 4 * C
    for d in (0.5, 2.0, 7.0):
        assert phi_of_delta(phi, d) <= 4.0 ** d * C


def test_phi_blows_up(phi_state):
    phi, _ = phi_state
    d = 1.0
    while phi_of_delta(phi, d) <= 1e6 and d < 2 ** 20:
        d *= 2
    assert phi_of_delta(phi, d) > 1e6
    with pytest.raises(ValueError):
        phi_of_delta(phi, 0.0)


# --- v-builder ---------------------------------------------------------------------------

@pytest.mark.parametrize("key", [(1.0, 1 / 8), (0.25, 1 / 16)])
def test_v_properties(v_outputs, nu_kappa, key):
    v = v_outputs[key]
    ch = v.checks
    assert ch["a"] and ch["b"] and ch["c"] and ch["d"]
    assert ch["r_formula"] and v.delta0 > 1
    assert v.r == v.beta * (v.eps ** 2 / 2) ** (1 / v.gamma)
    assert v.t <= v.beta
    # independent recount of the witness box
    weighted = nu_kappa.weighted_by_image(v.at_defect)
    ratio, _ = box_ratio_grid([CarlesonBox(complex(v.zeta), v.t)], weighted, v.gamma)
    assert ratio[0] >= 0.75 ** 2 - 0.05
    assert ratio[0] <= 1 + 1e-6


def test_v_small_inside(v_outputs, rng):
    v = v_outputs[(0.25, 1 / 16)]
    z = disk_sample(rng, 20000, 0.75)
    assert np.max(np.abs(v(z))) < v.eps


def test_v_serialization(v_outputs):
    d = v_outputs[(1.0, 1 / 8)].to_dict()
    assert {"delta0", "C", "epsilon", "beta", "r", "t", "zeta_angle"} <= set(d)


def test_v_argument_checks(nu_kappa):
    with pytest.raises(ValueError):
        build_v(nu_kappa, 1.0, 1.5)
    with pytest.raises(ValueError):
        build_v(nu_kappa, 0.0, 0.5)


def test_v_needs_mass_at_scale():
    from bergman_lab.measures import pullback
    nu = pullback(scale(0.5), None, 0.0)
    with pytest.raises(ConstructionError):
        build_v(nu, 0.25, 0.5, check=False)


def test_stage_epsilons_sum_below_quarter():
    total = sum(stage_epsilon(n) for n in range(1, 200))
    assert total < 0.25 and total == pytest.approx(1 / 8)


def test_single_stage_is_build_v(nu_kappa):
    dw = build_u(nu_kappa, 2.0, 1, check=False)
    v = build_v(nu_kappa, 1.0, stage_epsilon(1), 2.0, check=False)
    assert dw.stages[0].beta == 1.0
    assert dw.stages[0].v.t == v.t
    assert dw.stages[0].v.delta0 == pytest.approx(v.delta0, rel=1e-12)


# --- decompactification ------------------------------------------------------------------------

def test_refusal_for_contraction():
    with pytest.raises(Refusal):
        decompactify(scale(0.5))


def test_non_compact_symbol_gets_unit_weight():
    dw = decompactify(lens_symbol(), n_stages=1)
    assert not dw.stages and "not compact" in dw.note
    assert complex(dw.w(0.3)) == 1


def test_stage_chain(decompact):
    st_ = decompact.stages
    assert len(st_) == 4
    assert st_[0].beta == 1.0
    for i, s in enumerate(st_):
        assert s.verified["S1"] and s.verified["S2"] and s.verified["S3"]
        assert s.verified["S4"] and s.verified["S5"]
        assert s.beta >= s.v.t
        if i + 1 < len(st_):
            nxt = st_[i + 1]
            assert nxt.beta < s.beta and s.v.t > nxt.beta
            assert nxt.beta <= 1 / (s.n + 1)
        assert s.v.eps == stage_epsilon(s.n)


def test_decompact_profile_bounds(decompact):
    rep = decompact.report
    assert rep["mu_profile_max"] <= (5 / 4) ** 2
    for w in rep["witnesses"]:
        assert w["mu_ratio"] >= 0.25
        assert w["nu_profile"] < 0.05
    assert rep["stages_completed"] == 4


def test_change_of_variables_for_weight(decompact):
    phi = kappa_symbol(0.5)
    g = graded_rule(0.0, 1.0, 40)
    lhs = g.integrate(np.abs(decompact.w.value_near(g.zeta, 1.0)) ** 2)
    rhs = decompact.report["norm_w_sq"]
    assert lhs == pytest.approx(rhs, rel=1e-6)
    assert phi.sup_norm == 1.0


def test_stage_records_serialize(decompact):
    import json
    d = decompact.to_dict()
    text = json.dumps(d, default=float)
    for key in ("n", "beta", "t", "zeta", "epsilon", "delta0", "C", "verified"):
        assert key in d["stages"][0]
    assert "stages" in json.loads(text)
