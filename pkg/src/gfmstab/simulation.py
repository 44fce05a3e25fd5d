"""Time-domain simulation, loss-of-synchronism detection and CCT search."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _kernel as K
from .converter import equilibrium_state
from .errors import ConfigError, NumericalError
from .scenario import Scenario
from .system import (
    Branch,
    Bus,
    Dispatch,
    FaultSpec,
    NetworkModel,
    OperatingPoint,
    apply_fault,
    build_ybus,
    clear_fault,
    solve_power_flow,
    transfer_impedance,
)

_LIMITER_CODE = {"none": K.LIM_NONE, "csa": K.LIM_CSA, "vi": K.LIM_VI, "hcl": K.LIM_HCL}
_FVB_CODE = {"none": K.FVB_NONE, "local": K.FVB_LOCAL, "wacs": K.FVB_WACS}


def build_network(scn: Scenario) -> NetworkModel:
    """Grid plus, for every converter, its filter bus (with the filter
    capacitor) and step-up transformer."""
    g = scn.grid
    buses = list(g.buses)
    branches = list(g.branches)
    for c in g.converters:
        buses.append(Bus(c.bus, zone="converter", shunt=1j * c.params.c_f))
        branches.append(Branch(f"{c.name}-tr", c.bus, c.connect, c.params.r_c, c.params.x_c))
    return build_ybus(buses, branches, g.loads, g.base)


def dispatch_of(scn: Scenario) -> list[Dispatch]:
    s = scn.grid.base.s_base
    return [
        Dispatch(c.bus, c.control, p=c.p_mw / s, q=c.q_mvar / s, v=c.v_pu,
                 angle=math.radians(c.angle_deg), metered_at=c.connect)
        for c in scn.grid.converters
    ]


@dataclass
class SimulationModel:
    """Everything a run needs that does not depend on the clearing time."""

    scenario: Scenario
    operating_point: OperatingPoint
    x0: np.ndarray
    params: np.ndarray
    globals_: np.ndarray
    zff: np.ndarray
    zgf: np.ndarray

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.scenario.grid.converters]

    def initial_derivative(self) -> np.ndarray:
        n = self.x0.shape[0]
        dx = np.zeros_like(self.x0)
        hist = np.zeros((1, n))
        bufs = [np.empty(n, dtype=np.complex128) for _ in range(3)]
        scn = self.scenario
        K._rhs(self.x0, 0.0, 0, scn.step, np.zeros(n), self.zff[0], self.zgf[0], self.params,
               self.globals_, _LIMITER_CODE[scn.limiter.kind], _FVB_CODE[scn.fvb.kind], hist,
               scn.grid.base.omega_0, dx, bufs[0], bufs[1], bufs[2], np.empty(n, dtype=np.int64),
               np.empty(n, dtype=np.complex128))
        return dx


def prepare(scn: Scenario) -> SimulationModel:
    net = build_network(scn)
    op = solve_power_flow(net, dispatch_of(scn))
    pre = op.network
    convs = scn.grid.converters
    fbus = [c.bus for c in convs]
    gbus = [c.connect for c in convs]

    phases = [pre, pre, pre]
    if scn.fault is not None:
        f = scn.fault
        spec = FaultSpec(f.location, f.near, f.distance, complex(f.admittance))
        on = apply_fault(pre, spec)
        phases = [pre, on, clear_fault(on, f.action)]
    zff = np.array([transfer_impedance(p, fbus, fbus) for p in phases])
    zgf = np.array([transfer_impedance(p, fbus, gbus) for p in phases])

    lim = scn.limiter
    prm = np.zeros((len(convs), K.N_PARAM))
    x0 = np.zeros((len(convs), K.N_STATE))
    for k, c in enumerate(convs):
        p = c.params
        vf = op.bus_voltages[c.bus]
        vg = op.bus_voltages[c.connect]
        ig = (vf - vg) / p.z_c
        i_s = ig + 1j * p.c_f * vf
        sp = op.setpoints[c.bus]
        prm[k, [K.H, K.D, K.PG0, K.VREF, K.KVP, K.KVI, K.KCP, K.KCI, K.RF, K.XF, K.CF, K.RV,
                K.TVR, K.MMAX, K.RC, K.XC]] = [
            p.h_vsc, p.d_vsc, sp.p_g0, abs(vf), p.k_vp, p.k_vi, p.k_cp, p.k_ci, p.r_f, p.x_f,
            p.c_f, p.r_v, p.t_vr, p.m_max, p.r_c, p.x_c]
        prm[k, [K.IMAX, K.ITH, K.KPR, K.SXR, K.TFILT]] = [
            lim.csa.i_max, lim.vi.i_thres, lim.vi.k_p_rvi, lim.vi.sigma_xr, lim.vi.t_filter]
        st = equilibrium_state(vf, i_s, p)
        x0[k, K.S_DELTA] = st.delta
        x0[k, [K.S_XVD, K.S_XVQ]] = [st.xi_v.real, st.xi_v.imag]
        x0[k, [K.S_XCD, K.S_XCQ]] = [st.xi_c.real, st.xi_c.imag]
        x0[k, [K.S_WD, K.S_WQ]] = [st.vr_lowpass.real, st.vr_lowpass.imag]
        x0[k, K.S_M] = st.i_mag_filtered

    fl, fw = scn.fvb.local, scn.fvb.wacs
    g = np.zeros(K.N_GLOBAL)
    g[[K.G_VA, K.G_VB, K.G_WTH, K.G_DVL]] = [fl.v_a, fl.v_b, fl.omega_thres, fl.delta_v_max]
    g[[K.G_KF, K.G_TF, K.G_TW, K.G_DVW, K.G_EPS, K.G_TAU]] = [
        fw.k_fvb, fw.t_f, fw.t_w, fw.delta_v_max, fw.epsilon, fw.tau]
    return SimulationModel(scn, op, x0, prm, g, zff, zgf)


@dataclass(frozen=True)
class LosEvent:
    time: float
    pair: tuple[int, int]


@dataclass
class SimResult:
    names: list[str]
    t: np.ndarray
    delta: np.ndarray
    delta_omega: np.ndarray
    p_g: np.ndarray
    q_g: np.ndarray
    i_s: np.ndarray
    i_g: np.ndarray
    v_f: np.ndarray
    v_g: np.ndarray
    delta_v_ts: np.ndarray
    csa_active: np.ndarray
    vi_active: np.ndarray
    fvb_active: np.ndarray
    los: LosEvent | None = None
    peak_angle_difference: float = 0.0
    diverged: bool = False
    final_state: np.ndarray | None = field(default=None, repr=False)

    @property
    def stable(self) -> bool:
        return self.los is None and not self.diverged

    def write_csv(self, path: str | Path) -> None:
        write_csv(self, path)


def run(model: SimulationModel, clear_ms: float | None = None, stop_at_los: bool = False,
        step_us: float | None = None, horizon_s: float | None = None) -> SimResult:
    scn = model.scenario
    h = (scn.step_us if step_us is None else step_us) * 1e-6
    horizon = scn.horizon_s if horizon_s is None else horizon_s
    n_steps = int(round(horizon / h))
    if scn.fault is not None:
        dur = (scn.fault.clear_ms if clear_ms is None else clear_ms) / 1000.0
        k_fault = int(round(scn.fault.t_fault_s / h))
        k_clear = k_fault + int(round(dur / h))
    else:
        k_fault = k_clear = n_steps + 1
    rec, rec_t, filled, los_step, li, lj, peak, xf, diverged = K.integrate(
        model.x0, model.params, model.globals_, model.zff, model.zgf, k_fault, k_clear, n_steps,
        h, scn.grid.base.omega_0, _LIMITER_CODE[scn.limiter.kind], _FVB_CODE[scn.fvb.kind],
        scn.record_every, math.radians(scn.los_threshold_deg), stop_at_los)
    rec = rec[:filled]
    los = None
    if los_step >= 0:
        los = LosEvent(los_step * h, (li + 1, lj + 1) if li >= 0 else (0, 0))
    ch = lambda c: rec[:, :, c]  # noqa: E731
    return SimResult(
        names=model.names, t=rec_t[:filled], delta=ch(K.R_DELTA), delta_omega=ch(K.R_DW),
        p_g=ch(K.R_PG), q_g=ch(K.R_QG), i_s=ch(K.R_IS), i_g=ch(K.R_IG), v_f=ch(K.R_VF),
        v_g=ch(K.R_VG), delta_v_ts=ch(K.R_DV), csa_active=ch(K.R_CSA) > 0.5,
        vi_active=ch(K.R_VI) > 0.5, fvb_active=ch(K.R_FVB) > 0.5, los=los,
        peak_angle_difference=float(peak), diverged=bool(diverged), final_state=xf)


def simulate(scn: Scenario, stop_at_los: bool = False) -> SimResult:
    """Initialize from the power flow and integrate the scenario."""
    return run(prepare(scn), stop_at_los=stop_at_los)


def los_from_series(t: np.ndarray, delta: np.ndarray, angle_threshold: float = math.pi
                    ) -> LosEvent | None:
    """Earliest sample at which any pairwise angle difference exceeds the
    threshold; the pair is 1-based."""
    delta = np.asarray(delta, dtype=float)
    n = delta.shape[1]
    best = None
    for i in range(n):
        for j in range(i + 1, n):
            over = np.nonzero(np.abs(delta[:, i] - delta[:, j]) > angle_threshold)[0]
            if over.size and (best is None or over[0] < best[0]):
                best = (over[0], (i + 1, j + 1))
    if best is None:
        return None
    return LosEvent(float(np.asarray(t)[best[0]]), best[1])


def detect_los(result: SimResult, angle_threshold: float = math.pi) -> LosEvent | None:
    return los_from_series(result.t, result.delta, angle_threshold)


# ----------------------------------------------------------------- CCT search


@dataclass(frozen=True)
class CctResult:
    """``cct_ms`` is the largest stable clearing duration found. ``above_cap``
    means the scenario was still stable at the cap."""

    cct_ms: int
    above_cap: bool
    evaluations: tuple[tuple[int, bool], ...]

    def label(self) -> str:
        return f">{self.cct_ms}" if self.above_cap else str(self.cct_ms)


def find_cct(
    scn: Scenario | SimulationModel,
    resolution_ms: int | None = None,
    start_ms: int | None = None,
    cap_ms: int | None = None,
) -> CctResult:
    """Bracket by doubling from ``start_ms`` up to ``cap_ms``, then bisect on
    the ``resolution_ms`` grid."""
    model = scn if isinstance(scn, SimulationModel) else prepare(scn)
    s = model.scenario
    if s.fault is None:
        raise ConfigError("CCT search needs a fault")
    res = resolution_ms or s.cct.resolution_ms
    start = start_ms or s.cct.start_ms
    cap = cap_ms or s.cct.cap_ms
    max_ms = 1000.0 * (s.horizon_s - s.fault.t_fault_s) - res
    if cap > max_ms:
        raise ConfigError("CCT cap must end before the simulation horizon")
    if start % res or cap % res:
        raise ConfigError("CCT start and cap must be multiples of the resolution")
    seen: dict[int, bool] = {}

    def stable(ms: int) -> bool:
        if ms not in seen:
            seen[ms] = run(model, clear_ms=ms, stop_at_los=True).stable
        return seen[ms]

    def done(value, above=False):
        return CctResult(value, above, tuple(sorted(seen.items())))

    if not stable(0):
        return done(0)
    lo, hi = 0, start
    while stable(hi):
        lo = hi
        if hi >= cap:
            return done(cap, True)
        hi = min(2 * hi, cap)
    lo_u, hi_u = lo // res, hi // res
    while hi_u - lo_u > 1:
        mid = (lo_u + hi_u) // 2
        if stable(mid * res):
            lo_u = mid
        else:
            hi_u = mid
    return done(lo_u * res)


def sweep_cct(scn: Scenario | SimulationModel, durations_ms: Iterable[int]) -> tuple[int, bool]:
    """Exhaustive oracle: first stable-to-unstable transition on the given
    grid and whether stability was monotone over it."""
    model = scn if isinstance(scn, SimulationModel) else prepare(scn)
    flags = [(ms, run(model, clear_ms=ms, stop_at_los=True).stable) for ms in durations_ms]
    last = 0
    first_drop = None
    for ms, ok in flags:
        if ok and first_drop is None:
            last = ms
        elif not ok and first_drop is None:
            first_drop = ms
    monotone = all(not ok for ms, ok in flags if first_drop is not None and ms >= first_drop)
    return last, monotone


@dataclass(frozen=True)
class LatencyRow:
    tau_ms: float
    cct: CctResult


def cct_latency_sweep(scn: Scenario, taus: Sequence[float], **kw) -> list[LatencyRow]:
    """CCT for each communication latency (seconds) of the wide-area booster."""
    if scn.fvb.kind != "wacs":
        raise ConfigError("latency sweep requires fvb mode 'wacs'")
    rows = []
    for tau in taus:
        s = replace(scn, fvb=replace(scn.fvb, wacs=replace(scn.fvb.wacs, tau=float(tau))))
        rows.append(LatencyRow(1000.0 * tau, find_cct(s, **kw)))
    return rows


# ------------------------------------------------------------------- output

_CSV_CHANNELS = (
    ("delta_deg", lambda r: np.degrees(r.delta)),
    ("domega_pu", lambda r: r.delta_omega),
    ("pg_pu", lambda r: r.p_g),
    ("ig_pu", lambda r: r.i_g),
    ("vf_pu", lambda r: r.v_f),
    ("dvts_pu", lambda r: r.delta_v_ts),
    ("qg_pu", lambda r: r.q_g),
    ("is_pu", lambda r: r.i_s),
    ("vg_pu", lambda r: r.v_g),
    ("csa", lambda r: r.csa_active.astype(int)),
    ("vi", lambda r: r.vi_active.astype(int)),
    ("fvb", lambda r: r.fvb_active.astype(int)),
)


def write_csv(result: SimResult, path: str | Path) -> None:
    """One row per recorded sample; the trailing ``los`` column is 1 from the
    detected loss of synchronism onward."""
    n = result.delta.shape[1]
    header = ["t"]
    cols = [result.t]
    data = [(name, fn(result)) for name, fn in _CSV_CHANNELS]
    for k in range(n):
        for name, values in data:
            header.append(f"vsc{k + 1}_{name}")
            cols.append(values[:, k])
    los_t = result.los.time if result.los is not None else math.inf
    header.append("los")
    cols.append((result.t >= los_t - 1e-12).astype(int))
    table = np.column_stack(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in table:
            w.writerow([f"{v:.10g}" for v in row])


def require_finite(result: SimResult) -> None:
    if result.diverged:
        raise NumericalError("simulation produced non-finite states")
