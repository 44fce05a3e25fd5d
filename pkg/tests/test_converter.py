import cmath
import math

import pytest

from gfmstab.converter import (
    ConverterParams,
    ConverterSetpoints,
    ConverterState,
    converter_injection,
    current_controller,
    equilibrium_state,
    thevenin_equivalent,
    virtual_resistance_drop,
    voltage_controller,
)
from gfmstab.converter import vsm_derivative
from gfmstab.errors import ConfigError

P = ConverterParams()


def test_defaults_match_parameter_table():
    assert (P.k_cp, P.k_ci, P.k_vp, P.k_vi) == (0.73, 1.19, 0.52, 1.16)
    assert P.m_max == 1.31
    assert P.h_vsc == 4.5


@pytest.mark.parametrize("field", ["h_vsc", "t_vr"])
def test_params_reject_nonpositive(field):
    with pytest.raises(ConfigError):
        ConverterParams(**{field: 0.0})


def test_vsm_equilibrium():
    assert vsm_derivative(0.0, 0.7, ConverterSetpoints(0.7, 1.0), P) == (0.0, 0.0)


def test_vsm_fault_acceleration():
    d_dw, _ = vsm_derivative(0.0, 0.0, ConverterSetpoints(0.7, 1.0), P)
    assert d_dw == pytest.approx(0.7 / 9)


def test_vsm_damping_only():
    d_dw, d_delta = vsm_derivative(0.01, 0.7, ConverterSetpoints(0.7, 1.0), P)
    assert d_dw == pytest.approx(-0.2 / 9)
    assert d_delta == pytest.approx(2 * math.pi * 50 * 0.01)


def test_vsm_free_acceleration_is_linear():
    # p_g = 0, D = 0: delta_omega grows at p_g0/(2H); explicit Euler is exact here
    p = ConverterParams(d_vsc=0.0)
    sp = ConverterSetpoints(0.7, 1.0)
    dw, h = 0.0, 1e-3
    for _ in range(200):
        dw += h * vsm_derivative(dw, 0.0, sp, p)[0]
    assert dw == pytest.approx(0.7 / 9 * 0.2, rel=1e-3)


def test_voltage_controller_proportional_step():
    i_ref = voltage_controller(1.0, 1.1, 0j, 0j, 0j, 0j, P)
    assert i_ref == pytest.approx(0.052)


def test_voltage_controller_zero_error_is_feedforward():
    assert voltage_controller(1.0, 1.0, 0j, 0j, 0j, 0j, P) == 0
    assert voltage_controller(1.0, 1.0, 0.3 + 0.1j, 0.3 + 0.1j, 0j, 0.3 + 0.1j, P) == pytest.approx(0.3 + 0.1j)


def test_virtual_resistance_vanishes_for_settled_current():
    i = 0.8 - 0.2j
    assert virtual_resistance_drop(i, i, P) == 0
    assert virtual_resistance_drop(i, 0j, P) == pytest.approx(P.r_v * i)


def test_current_controller_feedforward_and_gain():
    e_m, clamped = current_controller(0j, 0j, 1.0 + 0j, 0j, P)
    assert e_m == 1.0 and not clamped
    e_m, _ = current_controller(0.1 + 0j, 0j, 1.0 + 0j, 0j, P)
    assert e_m - 1.0 == pytest.approx(0.073)
    i = 0.2 + 0.4j
    e_m, _ = current_controller(i, i, 1.0 + 0j, 0j, P)
    assert e_m == pytest.approx(1.0 + 1j * P.x_f * i)


def test_modulation_clamp_keeps_angle():
    e_m, clamped = current_controller(0j, 0j, 1.5 * cmath.exp(0.3j), 0j, P)
    assert clamped
    assert abs(e_m) == pytest.approx(1.31)
    assert cmath.phase(e_m) == pytest.approx(0.3)


def test_injection_zero_when_em_equals_bus():
    lossless = ConverterParams(c_f=0.0)
    i_s, p, q, v_f = converter_injection(1.02 + 0.1j, 1.02 + 0.1j, lossless)
    assert abs(i_s) < 1e-14 and abs(p) < 1e-14 and abs(q) < 1e-14


def test_injection_reproduces_smib_setpoint(smib):
    p = ConverterParams(r_c=0.0, x_c=0.15)
    v_f = smib.v_f0 * cmath.exp(1j * smib.delta_0)
    i_g = (v_f - smib.v_e) / (0.25j)
    v_g = v_f - 0.15j * i_g
    i_s = i_g + 1j * p.c_f * v_f
    e_m = v_f + p.z_f * i_s
    _, p_g, q_g, v_f_out = converter_injection(e_m, v_g, p)
    assert v_f_out == pytest.approx(v_f)
    assert p_g == pytest.approx(0.7, abs=1e-6)
    assert q_g == pytest.approx(0.049, abs=1e-3)


def test_injection_pure_reactance_peaks_at_quarter_turn():
    p = ConverterParams(r_f=0.0, r_c=0.0, c_f=0.0)
    powers = {d: converter_injection(cmath.exp(1j * math.radians(d)), 1.0, p)[1] for d in range(0, 181, 5)}
    assert max(powers, key=powers.get) == 90
    assert powers[90] == pytest.approx(1 / (p.x_f + p.x_c))


def test_equilibrium_state_thevenin_consistency():
    v_f = 1.02 * cmath.exp(0.2j)
    i_s = 0.7 - 0.1j
    st = equilibrium_state(v_f, i_s, P)
    assert isinstance(st, ConverterState)
    e, z = thevenin_equivalent(st, abs(v_f), P)
    i_dq = i_s * cmath.exp(-1j * st.delta)
    assert e - z * i_dq == pytest.approx(abs(v_f))
