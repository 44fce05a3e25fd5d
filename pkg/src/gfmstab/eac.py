"""Equal-area analysis of a grid-forming converter against an infinite bus.

A bolted fault at the infinite bus drops the converter's active power to zero
while the fault lasts; the post-fault power-angle curve depends on the current
limiter and on a constant voltage boost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize_scalar

from .errors import ConfigError, NumericalError
from .limiters import CsaConfig, ViConfig, vi_impedance

CURVE_LIMITERS = ("none", "csa", "hcl")


@dataclass(frozen=True)
class SmibParams:
    v_e: float
    x_e: float
    x_c: float
    v_f0: float
    delta_0: float
    p_g0: float

    def __post_init__(self):
        if not self.x_tot > 0:
            raise ConfigError("x_c + x_e must be positive")
        p = self.v_f0 * self.v_e / self.x_tot * math.sin(self.delta_0)
        if abs(p - self.p_g0) > 1e-3:
            raise ConfigError(
                f"inconsistent operating point: v_f0, delta_0 give p = {p:.5f}, p_g0 = {self.p_g0}"
            )

    @property
    def x_tot(self) -> float:
        return self.x_c + self.x_e

    @property
    def initial_current(self) -> complex:
        vf = self.v_f0 * complex(math.cos(self.delta_0), math.sin(self.delta_0))
        return (vf - self.v_e) / complex(0.0, self.x_tot)

    @classmethod
    def from_setpoint(cls, v_e: float, x_e: float, x_c: float, p_g0: float, q_g0: float) -> "SmibParams":
        """Operating point from the power delivered at the converter's
        grid-side bus, by a power flow on the lossless two-reactance link."""
        from .system import Branch, Bus, Dispatch, build_ybus, solve_power_flow

        net = build_ybus(
            [Bus("f", zone="converter"), Bus("g"), Bus("e")],
            [Branch("transformer", "f", "g", 0.0, x_c), Branch("grid", "g", "e", 0.0, x_e)],
        )
        op = solve_power_flow(
            net,
            [Dispatch("e", "slack", v=v_e), Dispatch("f", "pq", p=p_g0, q=q_g0, metered_at="g")],
        )
        sp = op.setpoints["f"]
        return cls(v_e, x_e, x_c, sp.v_f0, sp.delta_f0, p_g0)


@dataclass(frozen=True)
class EacCase:
    """One power-angle configuration.

    ``virtual_voltage`` selects the EMF behind the virtual impedance in the
    hybrid-limiter branch: ``reference`` keeps the voltage-reference magnitude,
    ``compensated`` adds the drop of the saturated initial current.
    """

    limiter: str = "none"
    fvb: bool = False
    dv: float = 0.1
    csa: CsaConfig = CsaConfig()
    vi: ViConfig = ViConfig()
    virtual_voltage: str = "reference"

    def __post_init__(self):
        if self.limiter not in CURVE_LIMITERS:
            raise ConfigError(f"EAC limiter must be one of {CURVE_LIMITERS}; got {self.limiter!r}")
        if self.dv < 0:
            raise ConfigError("voltage boost dv must be non-negative")
        if self.virtual_voltage not in ("reference", "compensated"):
            raise ConfigError(f"unknown virtual_voltage {self.virtual_voltage!r}")
        if self.limiter == "hcl" and not self.vi.i_thres < self.csa.i_max:
            raise ConfigError("hybrid limiter requires i_thres < i_max")

    @property
    def label(self) -> str:
        lim = {"none": "no CL", "csa": "CSA", "hcl": "HCL"}[self.limiter]
        return f"{'FVB' if self.fvb else 'Base'} - {lim}"

    @property
    def boost(self) -> float:
        return self.dv if self.fvb else 0.0


def standard_cases(csa: CsaConfig = CsaConfig(), vi: ViConfig = ViConfig(), dv: float = 0.1) -> list[EacCase]:
    return [
        EacCase(lim, fvb, dv, csa, vi)
        for fvb in (False, True)
        for lim in ("none", "csa", "hcl")
    ]


def saturation_angle(v_f: float, v_e: float, x_tot: float, limit: float) -> float | None:
    """Smallest angle at which the link current reaches ``limit``; None if
    it never does on [0, pi]."""
    c = (v_f**2 + v_e**2 - (limit * x_tot) ** 2) / (2.0 * v_f * v_e)
    if c > 1.0:
        return 0.0
    if c < -1.0:
        return None
    return math.acos(c)


def hcl_virtual_voltage(params: SmibParams, vi: ViConfig, i_max: float, dv: float = 0.0) -> tuple[float, float]:
    """Magnitude of ``v_f + j x_vi i_s0'`` and the virtual reactance, where
    ``i_s0'`` has magnitude ``i_max`` and the phase of the initial current."""
    _, x_vi = vi_impedance(i_max, vi)
    v_f = params.v_f0 + dv
    vf = v_f * complex(math.cos(params.delta_0), math.sin(params.delta_0))
    i0 = params.initial_current
    i_sat = i_max * i0 / abs(i0) if i0 else 0j
    return abs(vf + 1j * x_vi * i_sat), x_vi


@dataclass(frozen=True)
class PdeltaCurve:
    case: EacCase
    params: SmibParams
    v_f: float
    breakpoints: tuple[float, ...] = field(default=())
    v_virtual: float = 0.0
    x_vi: float = 0.0

    def __call__(self, delta: float) -> float:
        if not -1e-12 <= delta <= math.pi + 1e-12:
            raise ConfigError(f"angle {delta} outside [0, pi]")
        p = self.params
        s = math.sin(delta)
        lim = self.case.limiter
        if lim == "none" or not self.breakpoints or delta <= self.breakpoints[0]:
            return self.v_f * p.v_e * s / p.x_tot
        if lim == "csa":
            den = math.sqrt(max(self.v_f**2 + p.v_e**2 - 2 * self.v_f * p.v_e * math.cos(delta), 0.0))
            return self.v_f * p.v_e * s / den * self.case.csa.i_max
        return self.v_virtual * p.v_e * s / (p.x_tot + self.x_vi)


def pdelta_curve(case: EacCase, params: SmibParams) -> PdeltaCurve:
    v_f = params.v_f0 + case.boost
    if case.limiter == "none":
        return PdeltaCurve(case, params, v_f)
    if case.limiter == "csa":
        brk = saturation_angle(v_f, params.v_e, params.x_tot, case.csa.i_max)
        return PdeltaCurve(case, params, v_f, () if brk is None else (brk,))
    brk = saturation_angle(v_f, params.v_e, params.x_tot, case.vi.i_thres)
    v_comp, x_vi = hcl_virtual_voltage(params, case.vi, case.csa.i_max, case.boost)
    v_virtual = v_f if case.virtual_voltage == "reference" else v_comp
    return PdeltaCurve(case, params, v_f, () if brk is None else (brk,), v_virtual, x_vi)


def pdelta(case: EacCase, params: SmibParams, delta: float) -> float:
    return pdelta_curve(case, params)(delta)


def curve_maximum(case: EacCase, params: SmibParams) -> float:
    curve = pdelta_curve(case, params)
    edges = [0.0, *curve.breakpoints, math.pi]
    best = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo < 1e-12:
            continue
        res = minimize_scalar(lambda d: -curve(d), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        best = max(best, -res.fun, curve(lo), curve(hi))
    return best


@dataclass(frozen=True)
class EacResult:
    case: EacCase
    delta_cl_crit: float
    delta_mte_crit: float
    p_g_max: float
    a1: float
    a2: float


def _excursion_limit(curve: PdeltaCurve, p0: float, delta_0: float) -> float:
    """Largest angle in [delta_0, pi] where the curve crosses ``p0``."""
    grid = np.linspace(delta_0, math.pi, 4001)
    vals = np.array([curve(d) for d in grid]) - p0
    for k in range(len(grid) - 1, 0, -1):
        if vals[k - 1] >= 0.0 > vals[k]:
            lo, hi = grid[k - 1], grid[k]
            for b in curve.breakpoints:
                if lo <= b < hi and curve(b) >= p0 > curve(min(b + 1e-12, math.pi)):
                    return b
            return brentq(lambda d: curve(d) - p0, lo, hi, xtol=1e-14)
    raise NumericalError("unstable for any clearing angle: post-fault curve never exceeds p_g0")


def critical_clearing_angle(case: EacCase, params: SmibParams) -> EacResult:
    curve = pdelta_curve(case, params)
    p0 = params.p_g0
    d0 = params.delta_0
    pmax = curve_maximum(case, params)
    if p0 <= 0.0:
        return EacResult(case, math.pi, math.pi, pmax, 0.0, 0.0)
    if pmax <= p0:
        raise NumericalError("unstable for any clearing angle: no decelerating margin")
    d_mte = _excursion_limit(curve, p0, d0)

    def area2(dcl):
        pts = [b for b in curve.breakpoints if dcl < b < d_mte]
        val, _ = quad(lambda d: curve(d) - p0, dcl, d_mte, points=pts or None,
                      epsabs=1e-12, epsrel=1e-12, limit=200)
        return val

    def balance(dcl):
        return area2(dcl) - p0 * (dcl - d0)

    d_cl = brentq(balance, d0, d_mte, xtol=1e-12)
    return EacResult(case, d_cl, d_mte, pmax, p0 * (d_cl - d0), area2(d_cl))


def closed_form_nocl(params: SmibParams, v_f: float | None = None) -> float:
    """Critical clearing angle for the unlimited sinusoid (textbook closed form)."""
    vf = params.v_f0 if v_f is None else v_f
    pmax = vf * params.v_e / params.x_tot
    dm = math.pi - math.asin(params.p_g0 / pmax)
    return math.acos(params.p_g0 / pmax * (dm - params.delta_0) + math.cos(dm))


def table(params: SmibParams, cases: list[EacCase] | None = None) -> list[EacResult]:
    return [critical_clearing_angle(c, params) for c in (cases or standard_cases())]
