"""Acceptance criteria, one test per criterion, each reporting a PASS/FAIL line."""
import itertools
import math
import time

import numpy as np
import pytest

from gfmstab import eac
from gfmstab.limiters import CsaConfig, ViConfig, csa_clamp, hcl_step, vi_impedance
from gfmstab.scenario import parse_scenario
from gfmstab.simulation import prepare, run

from conftest import FAULTS, FVB_MODES, LIMITERS, scenario

TABLE_ANGLES = [120.32, 39.13, 105.83, 123.24, 41.65, 109.61]
TABLE_PMAX = [4.06, 1.27, 2.73, 4.46, 1.25, 2.99]


def test_criterion_01_eac_table(report):
    t0 = time.perf_counter()
    scn = parse_scenario("smib_eac")
    params = eac.SmibParams.from_setpoint(scn.v_e, scn.x_e, scn.x_c, scn.p_g0, scn.q_g0)
    rows = eac.table(params, list(scn.cases))
    elapsed = time.perf_counter() - t0
    bad = []
    for r, ang, pm in zip(rows, TABLE_ANGLES, TABLE_PMAX):
        got_a, got_p = math.degrees(r.delta_cl_crit), r.p_g_max
        if abs(got_a - ang) > 1.5:
            bad.append(f"{r.case.label} angle {got_a:.2f} vs {ang}")
        if abs(got_p - pm) > 0.02:
            bad.append(f"{r.case.label} p_max {got_p:.4f} vs {pm}")
    if elapsed >= 1.0:
        bad.append(f"runtime {elapsed:.2f} s")
    angles = ", ".join(f"{math.degrees(r.delta_cl_crit):.2f}" for r in rows)
    pmax = ", ".join(f"{r.p_g_max:.3f}" for r in rows)
    detail = f"angles [{angles}] deg, p_max [{pmax}] pu, {elapsed:.2f} s"
    if bad:
        detail += "; out of tolerance: " + "; ".join(bad)
    assert report(1, not bad, detail), detail


def test_criterion_02_smib_initialization(report):
    p = eac.SmibParams.from_setpoint(1.0, 0.1, 0.15, 0.7, 0.049)
    d0 = math.degrees(p.delta_0)
    ok = abs(p.v_f0 - 1.0152) <= 1e-3 and abs(d0 - 9.93) <= 0.05
    assert report(2, ok, f"v_f0 = {p.v_f0:.5f} pu, delta_0 = {d0:.3f} deg")


def test_criterion_03_virtual_impedance(report):
    r, x = vi_impedance(1.25, ViConfig())
    assert report(3, abs(x - 0.1225) <= 1e-6, f"x_vi = {x:.7f} pu, r_vi = {r:.7f} pu")


def test_criterion_04_equilibrium_hold(report):
    res = run(prepare(scenario("kundur_two_area")))
    worst = float(np.max(np.abs(res.delta_omega)))
    ok = worst < 1e-6 and res.t[-1] >= 5.0 - 1e-9
    assert report(4, ok, f"max |delta_omega| = {worst:.2e} pu over {res.t[-1]:.1f} s")


def test_criterion_05_fault1_classification(report, fault1_models):
    outcome, slow = {}, []
    for (lim, fvb), model in fault1_models.items():
        t0 = time.perf_counter()
        res = run(model, clear_ms=140)
        dt = time.perf_counter() - t0
        if dt >= 30:
            slow.append(f"{lim}/{fvb} {dt:.1f} s")
        outcome[(lim, fvb)] = res.stable
    expected = {k: k != ("csa", "none") for k in outcome}
    wrong = [f"{l}/{f}" for (l, f), s in outcome.items() if s != expected[(l, f)]]
    ok = not wrong and not slow
    desc = ", ".join(f"{l}/{f}:{'stable' if s else 'LOS'}" for (l, f), s in sorted(outcome.items()))
    assert report(5, ok, desc + (f"; misclassified {wrong}" if wrong else "") + (f"; slow {slow}" if slow else ""))


def test_criterion_06_cct_orderings(report, cct):
    val = {(f, l, m): cct(f, l, m).cct_ms for f in FAULTS for l in LIMITERS for m in FVB_MODES}
    fails = []
    for f in FAULTS:
        if not val[(f, "hcl", "none")] >= val[(f, "csa", "none")]:
            fails.append(f"(a) {f}")
        for l in LIMITERS:
            base, loc, wacs = val[(f, l, "none")], val[(f, l, "local")], val[(f, l, "wacs")]
            strict = f in ("kundur_fault1", "kundur_fault2")
            if not (loc > base if strict else loc >= base):
                fails.append(f"(b) {f}/{l}")
            if not wacs >= loc:
                fails.append(f"(c) {f}/{l}")
        if f in ("kundur_fault3", "kundur_fault4") and val[(f, "csa", "local")] != val[(f, "csa", "none")]:
            fails.append(f"(d) {f}")
    rows = "; ".join(
        f"{f[-1]}/{l}: {val[(f, l, 'none')]}/{val[(f, l, 'local')]}/{val[(f, l, 'wacs')]}"
        for f in FAULTS for l in LIMITERS)
    detail = f"CCT ms base/local/wacs {rows}" + (f"; violated {fails}" if fails else "")
    assert report(6, not fails, detail), detail


def test_criterion_07_latency_robustness(report, cct):
    parts, fails = [], []
    for f in ("kundur_fault1", "kundur_fault2"):
        for l in LIMITERS:
            a, b = cct(f, l, "wacs", 0).cct_ms, cct(f, l, "wacs", 100).cct_ms
            parts.append(f"{f[-1]}/{l}: {a}->{b}")
            if abs(b - a) > 30:
                fails.append(f"{f}/{l}")
    detail = "CCT ms tau 0->100: " + "; ".join(parts) + (f"; violated {fails}" if fails else "")
    assert report(7, not fails, detail), detail


def test_criterion_08_limiter_invariants(report, fault1_models):
    csa = CsaConfig()
    vi = ViConfig()
    fails = []
    rng = np.random.default_rng(7)
    for z in rng.normal(scale=2.0, size=(500, 2)) @ np.array([1, 1j]):
        out, sat = csa_clamp(z, csa)
        if abs(out) > csa.i_max * (1 + 1e-12) or csa_clamp(out, csa)[0] != pytest.approx(out):
            fails.append("clamp bound/idempotence")
            break
        if sat and abs(np.angle(out) - np.angle(z)) > 1e-12:
            fails.append("clamp angle")
            break
    if vi_impedance(vi.i_thres, vi) != (0.0, 0.0) or vi_impedance(vi.i_thres + 1e-9, vi)[1] > 1e-8:
        fails.append("VI continuity")
    for z in rng.normal(scale=0.4, size=(200, 2)) @ np.array([1, 1j]):
        if abs(z) >= vi.i_thres:
            continue
        out, drop, flags = hcl_step(z, z, csa, vi)
        if out != z or drop != 0 or flags.vi_active or flags.csa_active:
            fails.append("HCL below threshold")
            break
    worst = 0.0
    for (lim, fvb), model in fault1_models.items():
        res = run(model, clear_ms=140)
        mask = res.csa_active
        if mask.any():
            worst = max(worst, float(res.i_s[mask].max()))
    if worst > 1.25 * 1.02:
        fails.append(f"in-simulation current {worst:.4f}")
    detail = f"max |i_s| while CSA active {worst:.4f} pu" + (f"; violated {fails}" if fails else "")
    assert report(8, not fails, detail), detail


def test_criterion_09_eac_oracle(report):
    worst = 0.0
    grid = list(itertools.product([0.95, 1.05], [0.2, 0.3], [0.3, 0.6, 0.9, 1.2, 1.5]))
    for v_f, x_tot, p0 in grid:
        pmax = v_f / x_tot
        d0 = math.asin(p0 / pmax)
        dm = math.pi - d0
        closed = math.acos(p0 / pmax * (dm - d0) + math.cos(dm))
        params = eac.SmibParams(1.0, x_tot - 0.15, 0.15, v_f, d0, p0)
        numeric = eac.critical_clearing_angle(eac.EacCase("none"), params).delta_cl_crit
        worst = max(worst, abs(numeric - closed))
    assert report(9, len(grid) == 20 and worst < 1e-6, f"{len(grid)} points, max deviation {worst:.2e} rad")


def test_criterion_10_step_convergence(report, fault1_models):
    parts, ok = [], True
    for key in (("csa", "none"), ("csa", "local"), ("hcl", "none")):
        model = fault1_models[key]
        a = run(model, clear_ms=140).peak_angle_difference
        b = run(model, clear_ms=140, step_us=50).peak_angle_difference
        rel = abs(b - a) / a
        ok &= rel < 0.01
        parts.append(f"{key[0]}/{key[1]}: {math.degrees(a):.3f} vs {math.degrees(b):.3f} deg ({rel:.2e})")
    assert report(10, ok, "; ".join(parts))
