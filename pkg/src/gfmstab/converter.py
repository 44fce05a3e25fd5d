"""Grid-forming converter model in its own dq frame.

Phasor (RMS) representation: the VSM swing law sets the frame angle, the
cascaded voltage and current PI loops act on dq phasors, and the LC filter
and transformer are algebraic. The d axis is aligned with the VSM angle.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields

from .errors import ConfigError


@dataclass(frozen=True)
class ConverterParams:
    s_rating: float = 900.0
    r_f: float = 0.005
    x_f: float = 0.15
    c_f: float = 0.066
    r_c: float = 0.005
    x_c: float = 0.15
    k_cp: float = 0.73
    k_ci: float = 1.19
    k_vp: float = 0.52
    k_vi: float = 1.16
    r_v: float = 0.09
    t_vr: float = 0.0167
    h_vsc: float = 4.5
    d_vsc: float = 20.0
    m_max: float = 1.31

    def __post_init__(self):
        if not self.h_vsc > 0:
            raise ConfigError("h_vsc must be positive")
        if not self.t_vr > 0:
            raise ConfigError("t_vr must be positive")
        if not self.s_rating > 0:
            raise ConfigError("s_rating must be positive")
        if not self.k_cp > 0:
            raise ConfigError("k_cp must be positive")
        for name in ("k_ci", "k_vp", "k_vi", "r_v", "d_vsc", "r_f", "r_c", "c_f"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not self.m_max > 0:
            raise ConfigError("m_max must be positive")
        if complex(self.r_f, self.x_f) == 0 or complex(self.r_c, self.x_c) == 0:
            raise ConfigError("filter and transformer impedances must be nonzero")

    @property
    def z_f(self) -> complex:
        return complex(self.r_f, self.x_f)

    @property
    def z_c(self) -> complex:
        return complex(self.r_c, self.x_c)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass(frozen=True)
class ConverterSetpoints:
    p_g0: float
    v_f0: float
    omega_ref: float = 1.0


@dataclass(frozen=True)
class ConverterState:
    """Dynamic states. Complex fields hold (d, q) pairs."""

    delta: float
    delta_omega: float = 0.0
    xi_v: complex = 0j
    xi_c: complex = 0j
    vr_lowpass: complex = 0j
    i_mag_filtered: float = 0.0


def vsm_derivative(
    delta_omega: float,
    p_g: float,
    setpoints: ConverterSetpoints,
    params: ConverterParams,
    omega_0: float = 2.0 * math.pi * 50.0,
) -> tuple[float, float]:
    """Swing law: returns ``(d delta_omega/dt, d delta/dt)``."""
    d_dw = (setpoints.p_g0 - p_g - params.d_vsc * delta_omega) / (2.0 * params.h_vsc)
    return d_dw, omega_0 * delta_omega


def virtual_resistance_drop(i_s: complex, vr_lowpass: complex, params: ConverterParams) -> complex:
    """``r_v`` times the washed-out filter current (high-pass of ``i_s``)."""
    return params.r_v * (i_s - vr_lowpass)


def voltage_controller(
    v_f: complex,
    v_ref: complex,
    i_s: complex,
    i_g: complex,
    xi_v: complex,
    vr_lowpass: complex,
    params: ConverterParams,
    vi_drop: complex = 0j,
) -> complex:
    """Unclamped current reference.

    Grid-current feedforward plus a PI on the voltage error; the reference
    is lowered by the transient virtual resistance and the VI drop.
    """
    v_ref_eff = v_ref - virtual_resistance_drop(i_s, vr_lowpass, params) - vi_drop
    return i_g + params.k_vp * (v_ref_eff - v_f) + xi_v


def current_controller(
    i_ref: complex,
    i_s: complex,
    v_f: complex,
    xi_c: complex,
    params: ConverterParams,
) -> tuple[complex, bool]:
    """Modulation voltage with voltage feedforward and ``x_f`` decoupling,
    clamped in magnitude to ``m_max`` with its angle kept."""
    e_m = v_f + 1j * params.x_f * i_s + params.k_cp * (i_ref - i_s) + xi_c
    mag = abs(e_m)
    if mag > params.m_max:
        return e_m * (params.m_max / mag), True
    return e_m, False


def converter_injection(
    e_m: complex, v_bus: complex, params: ConverterParams
) -> tuple[complex, float, float, complex]:
    """Solve the filter/capacitor/transformer ladder between ``e_m`` and a
    bus of known voltage. Returns ``(i_s, p_g, q_g, v_f)``."""
    y_f = 1.0 / params.z_f
    y_c = 1.0 / params.z_c
    v_f = (e_m * y_f + v_bus * y_c) / (y_f + y_c + 1j * params.c_f)
    i_s = (e_m - v_f) * y_f
    i_g = (v_f - v_bus) * y_c
    s = v_bus * i_g.conjugate()
    return i_s, s.real, s.imag, v_f


def thevenin_equivalent(
    state: ConverterState, v_ref: float, params: ConverterParams, z_vi: complex = 0j
) -> tuple[complex, complex]:
    """Closed-loop source seen from bus f while no limit is active.

    With the inner loops settled algebraically the converter reduces to
    ``v_f = e - z i_s`` in its dq frame; returns ``(e, z)``.
    """
    den = complex(params.k_vp, params.c_f)
    e = (params.k_vp * (v_ref + params.r_v * state.vr_lowpass) + state.xi_v
         + state.xi_c / params.k_cp) / den
    z = (params.k_vp * (params.r_v + z_vi) + params.r_f / params.k_cp) / den
    return e, z


def equilibrium_state(v_f: complex, i_s: complex, params: ConverterParams) -> ConverterState:
    """States that hold a given bus-f voltage and filter current (network frame)."""
    delta = cmath.phase(v_f)
    rot = cmath.exp(-1j * delta)
    i_dq = i_s * rot
    return ConverterState(
        delta=delta,
        delta_omega=0.0,
        xi_v=1j * params.c_f * abs(v_f),
        xi_c=params.r_f * i_dq,
        vr_lowpass=i_dq,
        i_mag_filtered=abs(i_s),
    )
