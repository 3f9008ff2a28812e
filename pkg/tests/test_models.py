import cmath
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from conftest import GFL_W_CRI_CLOSED_FORM, five_point_derivative
from ibrlyap import models as m
from ibrlyap.energy import PiGains, SysState
from ibrlyap.errors import ConfigError
from ibrlyap.sim import integrate


def phasor_power(delta, E, U, R, X):
    """Active power leaving an internal source E∠delta into U∠0 through R + jX."""
    e = E * cmath.exp(1j * delta)
    i = (e - U) / complex(R, X)
    return (e * i.conjugate()).real


def test_table_a1_presets(gfl, gfm):
    assert (gfl.grid.R_g, gfl.grid.X_g, gfl.grid.U_g) == (0.08, 0.5, 1.0)
    assert gfl.grid.omega_b == 2 * math.pi * 50
    assert (gfl.I_d, gfl.I_q, gfl.omega_limit) == (1.0, 0.0, 0.3)
    assert gfl.gains == PiGains(10 * 2 * math.pi, 1000 * 2 * math.pi)
    assert gfm.gains == PiGains(2 * 2 * math.pi, 15.0)
    assert (gfm.E, gfm.P_in, gfm.C_dc, gfm.V_dc_ref) == (1.0, 1.0, 12.5, 2.5)
    assert m.table_a1_scenario().sag_depth == 0.1


# --- GFL -------------------------------------------------------------------

def test_gfl_vq_examples(gfl):
    eq_angle = math.asin((gfl.grid.X_g * gfl.I_d + gfl.grid.R_g * gfl.I_q) / gfl.grid.U_g)
    assert m.gfl_vq(eq_angle, 0.0, gfl) == pytest.approx(0.0, abs=1e-15)
    assert m.gfl_vq(0.0, 0.0, gfl) == pytest.approx(0.5)
    assert m.gfl_vq(math.pi / 2, 0.0, gfl) == pytest.approx(-0.5)


def test_gfl_dynamics_zero_at_sep(gfl):
    sep = gfl.equilibria().delta_sep
    dd, dx = m.gfl_dynamics(SysState(sep, 0.0), gfl)
    assert abs(dd) < 1e-9 and abs(dx) < 1e-9


def test_gfl_degenerate_loop_without_feedthrough(gfl):
    p = replace(gfl, feedthrough=False)
    rng = np.random.default_rng(1)
    for d, x in rng.uniform(-5, 5, (50, 2)):
        w = m.gfl_omega(d, x, p)
        assert w == pytest.approx(p.gains.k_p * m.gfl_vq(d, 0.0, p) + x, rel=1e-14, abs=1e-12)


def test_gfl_closed_form_matches_fixed_point(gfl):
    rng = np.random.default_rng(7)
    states = np.column_stack([rng.uniform(-math.pi, 3 * math.pi, 1000),
                              rng.uniform(-500, 500, 1000)])
    for d, x in states:
        w = 0.0
        for _ in range(200):
            w_new = gfl.gains.k_p * m.gfl_vq(d, w, gfl) + x
            if w_new == w:
                break
            w = w_new
        assert abs(m.gfl_omega(d, x, gfl) - w) <= 1e-12 * max(1.0, abs(w))


def test_gfl_singular_feedthrough_rejected(gfl):
    k_sing = gfl.grid.omega_b / (gfl.grid.X_g * gfl.I_d)
    with pytest.raises(ConfigError):
        replace(gfl, gains=PiGains(k_sing, 1.0))


def test_gfl_limiter_clamps_frequency(gfl):
    lim = gfl.omega_limit * gfl.grid.omega_b
    dd, _ = gfl.dynamics(SysState(-1.0, 1e4), limiter=True)
    assert dd == pytest.approx(lim)
    dd_free, _ = gfl.dynamics(SysState(-1.0, 1e4), limiter=False)
    assert dd_free > lim


def test_gfl_energy_critical_value(gfl):
    eq = gfl.equilibria()
    # x_int = 0 at (delta_uep, omega=0) because v_q vanishes there
    assert gfl.x_from_omega(eq.delta_uep, 0.0) == pytest.approx(0.0, abs=1e-12)
    w = m.gfl_energy(eq.delta_uep, 0.0, gfl)
    assert w == pytest.approx(GFL_W_CRI_CLOSED_FORM, rel=1e-12)
    assert w == pytest.approx(0.685, rel=0.01)


def test_gfl_energy_path_term_vanishes_at_zero_frequency(gfl):
    eq = gfl.equilibria()
    d = np.linspace(-1, 2.5, 30)
    x = gfl.x_from_omega(d, 0.0)
    expected = x ** 2 / (2 * gfl.gains.k_i) - 0.5 * (d - eq.delta_sep) - (np.cos(d) - math.cos(eq.delta_sep))
    np.testing.assert_allclose(m.gfl_energy(d, x, gfl), expected, atol=1e-13)


def test_gfl_energy_anchor(gfl):
    assert m.gfl_energy(gfl.equilibria().delta_sep, 0.0, gfl) == 0.0


def test_gfl_energy_path_term_sign(gfl):
    eq = gfl.equilibria()
    d, w = 1.0, 40.0
    x = gfl.x_from_omega(d, w)
    no_path = m.gfl_energy(d, x, replace(gfl, feedthrough=False))
    # feedthrough also changes x(omega); compare through the explicit formula
    full = m.gfl_energy(d, x, gfl)
    V = -0.5 * (d - eq.delta_sep) - (math.cos(d) - math.cos(eq.delta_sep))
    assert full == pytest.approx(x ** 2 / (2 * gfl.gains.k_i) + V
                                 + w * (eq.delta_uep - d) / 2 * gfl.grid.X_g / gfl.grid.omega_b)
    assert no_path == pytest.approx(x ** 2 / (2 * gfl.gains.k_i) + V)


# --- GFM -------------------------------------------------------------------

def test_gfm_pe_examples(gfm):
    assert m.gfm_pe(0.0, gfm) == pytest.approx(0.0, abs=1e-15)
    assert m.gfm_pe(math.pi / 2, gfm) == pytest.approx(2.2621, abs=1e-3)
    sep = gfm.equilibria().delta_sep
    assert m.gfm_pe(sep, gfm) == pytest.approx(gfm.P_in, abs=1e-12)


@pytest.mark.parametrize("delta", np.linspace(-3, 3, 13))
def test_gfm_pe_matches_phasor_power(gfm, delta):
    g = gfm.grid
    assert m.gfm_pe(delta, gfm) == pytest.approx(phasor_power(delta, gfm.E, g.U_g, g.R_g, g.X_g), abs=1e-12)


def test_gfm_dynamics_examples(gfm):
    sep = gfm.equilibria().delta_sep
    dd, dx = m.gfm_dynamics(SysState(sep, 0.0), gfm)
    assert abs(dd) < 1e-9 and abs(dx) < 1e-9
    dd0, _ = m.gfm_dynamics(SysState(0.0, 0.0), gfm)
    assert dd0 == pytest.approx(gfm.gains.k_p * gfm.P_in)
    assert gfm.dc_voltage(0.0) == pytest.approx(2.5)


def test_gfm_integral_gain_from_capacitor(gfm):
    assert gfm.integral_gain == pytest.approx(2 * gfm.grid.omega_b * 15 / 12.5)


def test_gfm_capacitor_energy_balance(gfm):
    """Along a trajectory, (C_dc / (2 w_b)) d(v_dc^2)/dt equals P_in - P_e."""
    sep = gfm.equilibria().delta_sep
    h = 1e-5
    tr = integrate(gfm, SysState(sep + 1.0, 0.0), (0.0, 0.05), h)
    v2 = gfm.dc_voltage(tr.x_int) ** 2
    lhs = gfm.C_dc / (2 * gfm.grid.omega_b) * five_point_derivative(v2, h)
    rhs = gfm.P_in - m.gfm_pe(tr.delta[2:-2], gfm)
    np.testing.assert_allclose(lhs, rhs, atol=1e-8)


def test_gfm_energy_critical_value(gfm):
    eq = gfm.equilibria()
    w = m.gfm_energy(eq.delta_uep, 0.0, gfm)
    assert w == pytest.approx(2.036, rel=0.01)
    quad_w, _ = quad(lambda d: -(gfm.P_in - m.gfm_pe(d, gfm)), eq.delta_sep, eq.delta_uep,
                     epsabs=1e-13, epsrel=1e-13)
    assert w == pytest.approx(quad_w, rel=1e-10)
    assert m.gfm_energy(eq.delta_sep, 0.0, gfm) == 0.0


def test_gfm_energy_dissipation_along_trajectory(gfm):
    sep = gfm.equilibria().delta_sep
    h = 1e-5
    tr = integrate(gfm, SysState(sep + 1.5, -0.3 * gfm.integral_gain), (0.0, 0.3), h)
    fd = five_point_derivative(tr.W, h)
    y = gfm.P_in - m.gfm_pe(tr.delta[2:-2], gfm)
    assert np.max(np.abs(fd + gfm.gains.k_p * y ** 2)) < 1e-6


@pytest.mark.parametrize("name", ["gfl", "gfm"])
def test_equilibrium_residuals(name, request):
    p = request.getfixturevalue(name)
    eq = p.equilibria()
    for d in (eq.delta_sep, eq.delta_uep):
        assert np.hypot(*p.dynamics(SysState(d, 0.0))) <= 1e-9


# --- faults ------------------------------------------------------------------

def test_apply_fault_drop_mode(gfl):
    sc = m.FaultScenario(0.1, sag_mode="drop")
    assert m.apply_fault(gfl, sc, "during").grid.U_g == pytest.approx(0.9)


def test_apply_fault_residual_mode(gfl, scenario):
    assert m.apply_fault(gfl, scenario, "during").grid.U_g == 0.1


def test_apply_fault_zero_drop_is_identity(gfm):
    sc = m.FaultScenario(0.0, sag_mode="drop")
    during = m.apply_fault(gfm, sc, "during")
    assert during.grid.U_g == gfm.grid.U_g
    assert m.apply_fault(gfm, sc, "pre") is gfm


def test_apply_fault_post_restores_nominal(gfl, scenario):
    post = m.apply_fault(m.apply_fault(gfl, scenario, "during"), scenario, "post")
    assert post.grid.U_g == 1.0
    assert post == gfl


@settings(max_examples=100, deadline=None)
@given(U=st.floats(0.2, 1.5), sag=st.floats(0.0, 1.0), mode=st.sampled_from(["drop", "residual"]))
def test_fault_idempotence(U, sag, mode):
    p = replace(m.gfm_table_a1(), grid=replace(m.table_a1_grid(), U_g=U))
    sag = sag * U * 0.999
    sc = m.FaultScenario(sag, sag_mode=mode)
    assert m.apply_fault(m.apply_fault(p, sc, "during"), sc, "post") == p


def test_apply_fault_validation(gfl):
    with pytest.raises(ConfigError):
        m.apply_fault(gfl, m.FaultScenario(1.0, sag_mode="drop"), "during")
    with pytest.raises(ConfigError):
        m.apply_fault(gfl, m.FaultScenario(1.5), "during")
    with pytest.raises(ConfigError):
        m.apply_fault(gfl, m.FaultScenario(0.1), "later")
    with pytest.raises(ConfigError):
        m.FaultScenario(0.1, t_start=0.1, t_clear=0.05)


def test_parameter_validation():
    with pytest.raises(ConfigError):
        m.GridParams(0.1, 0.0, 1.0)
    with pytest.raises(ConfigError):
        replace(m.gfl_table_a1(), I_d=1.0, I_q=0.5)
    with pytest.raises(ConfigError):
        replace(m.gfm_table_a1(), C_dc=0.0)
    with pytest.raises(ConfigError):
        m.preset("sg")
