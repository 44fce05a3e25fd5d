import itertools
import math

import numpy as np
import pytest
from scipy.integrate import quad

from gfmstab import eac
from gfmstab.errors import ConfigError
from gfmstab.limiters import CsaConfig, ViConfig


def case(lim, fvb=False, **kw):
    return eac.EacCase(lim, fvb, **kw)


def params(v_f, x_tot, p0, v_e=1.0):
    d0 = math.asin(p0 * x_tot / (v_f * v_e))
    return eac.SmibParams(v_e, x_tot - 0.15, 0.15, v_f, d0, p0)


def sinusoid_cct(v_f, v_e, x_tot, p0):
    """Textbook equal-area closed form for a bolted fault (p = 0 while faulted)."""
    pmax = v_f * v_e / x_tot
    d0 = math.asin(p0 / pmax)
    dm = math.pi - d0
    return math.acos((p0 * (dm - d0) + pmax * math.cos(dm)) / pmax)


def test_initial_operating_point(smib):
    assert smib.v_f0 == pytest.approx(1.0152, abs=1e-3)
    assert math.degrees(smib.delta_0) == pytest.approx(9.93, abs=0.05)
    assert smib.x_tot == pytest.approx(0.25)


def test_inconsistent_params_rejected():
    with pytest.raises(ConfigError):
        eac.SmibParams(1.0, 0.1, 0.15, 1.0, 0.5, 0.7)


def test_pdelta_examples(smib):
    assert eac.pdelta(case("none"), smib, math.pi / 2) == pytest.approx(1.0152 / 0.25, abs=5e-3)
    for c in eac.standard_cases():
        assert eac.pdelta(c, smib, 0.0) == 0.0
    unit = params(1.0, 0.25, 0.7)
    assert eac.pdelta(case("csa"), unit, math.pi / 2) == pytest.approx(1.25 / math.sqrt(2), abs=1e-4)
    with pytest.raises(ConfigError):
        eac.pdelta(case("none"), smib, 4.0)


def test_saturation_angle():
    assert math.degrees(eac.saturation_angle(1.0, 1.0, 0.25, 1.25)) == pytest.approx(17.9786, abs=1e-3)
    assert eac.saturation_angle(1.0, 1.0, 0.25, 8.0) == pytest.approx(math.pi)
    assert eac.saturation_angle(1.0, 1.0, 0.25, 9.0) is None


def test_hcl_threshold_angle_regression(smib):
    d_b = eac.saturation_angle(smib.v_f0, 1.0, 0.25, 1.0)
    assert math.degrees(d_b) == pytest.approx(14.2266, abs=1e-4)


def test_hcl_virtual_voltage(smib):
    v, x = eac.hcl_virtual_voltage(smib, ViConfig(), 1.25)
    assert x == pytest.approx(0.1225, abs=1e-6)
    assert v > smib.v_f0
    v0, x0 = eac.hcl_virtual_voltage(smib, ViConfig(k_p_rvi=0.0), 1.25)
    assert x0 == 0 and v0 == pytest.approx(smib.v_f0)
    v_b, _ = eac.hcl_virtual_voltage(smib, ViConfig(k_p_rvi=0.0), 1.25, dv=0.1)
    assert v_b == pytest.approx(smib.v_f0 + 0.1)


def test_curve_maxima_sinusoid(smib):
    base = eac.curve_maximum(case("none"), smib)
    assert base == pytest.approx(smib.v_f0 / smib.x_tot, rel=1e-9)
    boosted = eac.curve_maximum(case("none", True), smib)
    assert boosted == pytest.approx(base * (smib.v_f0 + 0.1) / smib.v_f0, rel=1e-9)


def test_area_balance(eac_table):
    for r in eac_table:
        assert r.a1 == pytest.approx(r.a2, abs=1e-8)


def test_area_balance_by_independent_quadrature(smib, eac_table):
    for r in eac_table:
        curve = eac.pdelta_curve(r.case, smib)
        pts = np.concatenate([np.linspace(r.delta_cl_crit, r.delta_mte_crit, 20001)])
        vals = np.array([curve(d) for d in pts]) - smib.p_g0
        a2 = np.trapezoid(vals, pts)
        assert a2 == pytest.approx(smib.p_g0 * (r.delta_cl_crit - smib.delta_0), abs=1e-5)


def test_nocl_excursion_is_mirror_angle(smib, eac_table):
    assert eac_table[0].delta_mte_crit == pytest.approx(math.pi - math.asin(smib.p_g0 * 0.25 / smib.v_f0))


def test_orderings(eac_table):
    by = {(r.case.limiter, r.case.fvb): r.delta_cl_crit for r in eac_table}
    for lim in ("none", "csa", "hcl"):
        assert by[(lim, True)] >= by[(lim, False)]
    for fvb in (False, True):
        assert by[("csa", fvb)] <= by[("hcl", fvb)] <= by[("none", fvb)]


@pytest.mark.parametrize("dv", [0.0, 0.05, 0.2])
@pytest.mark.parametrize("lim", ["none", "csa", "hcl"])
def test_boost_never_hurts(smib, lim, dv):
    base = eac.critical_clearing_angle(case(lim, dv=dv), smib).delta_cl_crit
    boosted = eac.critical_clearing_angle(case(lim, True, dv=dv), smib).delta_cl_crit
    assert boosted >= base - 1e-9


def test_hcl_jump_goes_down(smib):
    curve = eac.pdelta_curve(case("hcl"), smib)
    d_b = curve.breakpoints[0]
    assert curve(d_b + 1e-9) < curve(d_b)


@pytest.mark.parametrize("lim", ["none", "csa"])
def test_continuous_curves(smib, lim):
    curve = eac.pdelta_curve(case(lim), smib)
    grid = np.linspace(0, math.pi, 20001)
    vals = np.array([curve(d) for d in grid])
    assert np.max(np.abs(np.diff(vals))) < 1e-2


def test_zero_setpoint_is_degenerate():
    p = eac.SmibParams(1.0, 0.1, 0.15, 1.0, 0.0, 0.0)
    r = eac.critical_clearing_angle(case("none"), p)
    assert r.delta_cl_crit == pytest.approx(math.pi)
    assert r.delta_mte_crit == pytest.approx(math.pi)


GRID = list(itertools.product([0.95, 1.05], [0.2, 0.3], [0.3, 0.6, 0.9, 1.2, 1.5]))


@pytest.mark.parametrize("v_f,x_tot,p0", GRID)
def test_numerical_matches_closed_form(v_f, x_tot, p0):
    p = params(v_f, x_tot, p0)
    numeric = eac.critical_clearing_angle(case("none"), p).delta_cl_crit
    assert numeric == pytest.approx(sinusoid_cct(v_f, 1.0, x_tot, p0), abs=1e-6)
    assert eac.closed_form_nocl(p) == pytest.approx(numeric, abs=1e-6)


def test_independent_area_integral_of_sinusoid(smib):
    # closed-form area of the sinusoid against adaptive quadrature
    pmax = smib.v_f0 / smib.x_tot
    a, b = 1.0, 2.5
    val, _ = quad(lambda d: eac.pdelta(case("none"), smib, d), a, b)
    assert val == pytest.approx(pmax * (math.cos(a) - math.cos(b)), abs=1e-10)


def test_no_margin_raises():
    p = params(1.0, 0.25, 0.7)
    tight = eac.EacCase("csa", csa=CsaConfig(i_max=0.3))
    with pytest.raises(Exception, match="unstable"):
        eac.critical_clearing_angle(tight, p)


def test_case_labels_and_validation():
    assert [c.label for c in eac.standard_cases()] == [
        "Base - no CL", "Base - CSA", "Base - HCL", "FVB - no CL", "FVB - CSA", "FVB - HCL"]
    with pytest.raises(ConfigError):
        eac.EacCase("vi")
    with pytest.raises(ConfigError):
        eac.EacCase("none", dv=-0.1)
