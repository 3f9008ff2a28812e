import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from ibrlyap import models as m
from ibrlyap.energy import LurePiPlant, PiGains
from ibrlyap.equilibrium import Stability, solve_equilibria, stability_of
from ibrlyap.errors import NumericError


def test_gfl_equilibria_closed_form(gfl):
    eq = gfl.equilibria()
    assert eq.exists
    assert eq.delta_sep == pytest.approx(math.pi / 6, abs=1e-10)
    assert eq.delta_uep == pytest.approx(5 * math.pi / 6, abs=1e-10)


def test_gfm_equilibria_match_bracketed_roots(gfm):
    g = lambda d: gfm.P_in - m.gfm_pe(d, gfm)
    sep = brentq(g, 0.0, 1.5, xtol=1e-14)
    uep = brentq(g, 1.6, math.pi, xtol=1e-14)
    eq = gfm.equilibria()
    assert eq.delta_sep == pytest.approx(sep, abs=1e-8)
    assert eq.delta_uep == pytest.approx(uep, abs=1e-8)


@pytest.mark.parametrize("name", ["gfl", "gfm"])
def test_scan_agrees_with_seeded(name, request):
    p = request.getfixturevalue(name)
    seeded = p.equilibria()
    scanned = solve_equilibria(p.plant())
    assert scanned.delta_sep == pytest.approx(seeded.delta_sep, abs=1e-10)
    assert scanned.delta_uep == pytest.approx(seeded.delta_uep, abs=1e-10)


def test_gfl_no_equilibrium_at_low_voltage(gfl):
    weak = gfl.with_grid_voltage(0.4)
    assert not weak.equilibria().exists
    assert not solve_equilibria(weak.plant()).exists


def test_gfm_no_equilibrium_at_deep_sag(gfm):
    assert not gfm.with_grid_voltage(0.1).equilibria().exists


def test_periodicity(gfl):
    base = solve_equilibria(gfl.plant())
    shifted = solve_equilibria(gfl.plant(), center=2 * math.pi)
    assert shifted.delta_sep - base.delta_sep == pytest.approx(2 * math.pi, abs=1e-10)
    assert shifted.delta_uep - base.delta_uep == pytest.approx(2 * math.pi, abs=1e-10)


@pytest.mark.parametrize("name", ["gfl", "gfm"])
def test_local_stability(name, request):
    p = request.getfixturevalue(name)
    eq = p.equilibria()
    assert stability_of(eq.delta_sep, p) is Stability.STABLE
    assert stability_of(eq.delta_uep, p) is Stability.UNSTABLE


def test_zero_proportional_gain_is_indeterminate():
    plant = LurePiPlant(np.sin, np.cos, lambda d: -np.cos(d), 0.5)
    sep = solve_equilibria(plant).delta_sep
    assert stability_of(sep, plant, PiGains(0.0, 10.0)) is Stability.INDETERMINATE
    assert stability_of(sep, plant, PiGains(1.0, 10.0)) is Stability.STABLE
    with pytest.raises(TypeError):
        stability_of(sep, plant)


@pytest.mark.parametrize("name", ["gfl", "gfm"])
def test_potential_extrema(name, request):
    """The potential has a strict local minimum at the SEP and a maximum at the UEP."""
    p = request.getfixturevalue(name)
    eq = p.equilibria()
    V = p.plant().potential
    for d, sign in ((eq.delta_sep, 1), (eq.delta_uep, -1)):
        for h in (1e-2, 1e-3):
            second = V(d + h, eq.delta_sep) - 2 * V(d, eq.delta_sep) + V(d - h, eq.delta_sep)
            assert sign * second > 0


def test_newton_failure_raises():
    # exp never reaches -1, so the loop error has no root
    plant = LurePiPlant(lambda d: np.exp(d), lambda d: np.exp(d), lambda d: np.exp(d), -1.0)
    with pytest.raises(NumericError):
        solve_equilibria(plant, seeds=(0.0, 1.0))


def test_seeded_result_in_window(gfm):
    eq = solve_equilibria(gfm.plant(), seeds=(gfm.equilibria().delta_sep + 4 * math.pi, 2.9))
    assert -math.pi <= eq.delta_sep < math.pi
    assert eq.delta_sep < eq.delta_uep < eq.delta_sep + 2 * math.pi


def test_gfm_sag_moves_sep_right(gfm):
    d = [gfm.with_grid_voltage(u).equilibria().delta_sep for u in (1.0, 0.8, 0.6)]
    assert d[0] < d[1] < d[2]
