"""Compiled fixed-step RK4 integrator for the multi-converter phasor model.

Each converter is reduced to either a Thevenin source (voltage and current
loops unconstrained), a current source (current reference saturated) or a
modulation-limited source behind the filter impedance. The active set is
rebuilt from scratch at every right-hand-side evaluation.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# converter parameter columns
H, D, PG0, VREF, KVP, KVI, KCP, KCI, RF, XF, CF, RV, TVR, MMAX, RC, XC = range(16)
IMAX, ITH, KPR, SXR, TFILT = range(16, 21)
N_PARAM = 21

# state columns
S_DELTA, S_DW, S_XVD, S_XVQ, S_XCD, S_XCQ, S_WD, S_WQ, S_M, S_XW, S_XL = range(11)
N_STATE = 11

# global FVB parameters
G_VA, G_VB, G_WTH, G_DVL, G_KF, G_TF, G_TW, G_DVW, G_EPS, G_TAU = range(10)
N_GLOBAL = 10

LIM_NONE, LIM_CSA, LIM_VI, LIM_HCL = 0, 1, 2, 3
FVB_NONE, FVB_LOCAL, FVB_WACS = 0, 1, 2

MODE_THEVENIN, MODE_CURRENT, MODE_MODULATION = 0, 1, 2

# recorded channels per converter
R_DELTA, R_DW, R_PG, R_QG, R_IS, R_IG, R_VF, R_VG, R_DV, R_CSA, R_VI, R_FVB = range(12)
N_REC = 12


@njit(cache=True)
def _vi(m, p, limiter):
    if (limiter == LIM_VI or limiter == LIM_HCL) and m > p[ITH]:
        x = p[KPR] * p[SXR] * (m - p[ITH])
        return complex(x / p[SXR], x)
    return 0j


@njit(cache=True)
def _algebra(x, dv, zff, zgf, prm, limiter, out_is, out_vf, out_vg, out_mode, out_iref):
    """Solve the network for the current states.

    Fills the filter current, bus-f and bus-g voltages (network frame), the
    active mode and the (saturated) dq current reference of each converter.
    """
    n = x.shape[0]
    e_src = np.empty(n, dtype=np.complex128)
    z_src = np.empty(n, dtype=np.complex128)
    j_src = np.zeros(n, dtype=np.complex128)
    rot = np.empty(n, dtype=np.complex128)
    mode = np.zeros(n, dtype=np.int64)
    for k in range(n):
        p = prm[k]
        rot[k] = np.exp(1j * x[k, S_DELTA])
        zvi = _vi(x[k, S_M], p, limiter)
        w = complex(x[k, S_WD], x[k, S_WQ])
        xv = complex(x[k, S_XVD], x[k, S_XVQ])
        xc = complex(x[k, S_XCD], x[k, S_XCQ])
        den = complex(p[KVP], p[CF])
        e_src[k] = (p[KVP] * (p[VREF] + dv[k] + p[RV] * w) + xv + xc / p[KCP]) / den * rot[k]
        z_src[k] = (p[KVP] * (p[RV] + zvi) + p[RF] / p[KCP]) / den
        out_iref[k] = 0j

    use_csa = limiter == LIM_CSA or limiter == LIM_HCL
    cur = np.empty(n, dtype=np.complex128)
    for _ in range(2 * n + 1):
        # voltage-type sources form the unknowns, current sources are injections
        vidx = np.empty(n, dtype=np.int64)
        nv = 0
        for k in range(n):
            if mode[k] != MODE_CURRENT:
                vidx[nv] = k
                nv += 1
        for k in range(n):
            if mode[k] == MODE_CURRENT:
                cur[k] = j_src[k]
        if nv > 0:
            a = np.empty((nv, nv), dtype=np.complex128)
            b = np.empty(nv, dtype=np.complex128)
            for r in range(nv):
                kr = vidx[r]
                acc = e_src[kr]
                for k in range(n):
                    if mode[k] == MODE_CURRENT:
                        acc -= zff[kr, k] * j_src[k]
                b[r] = acc
                for c in range(nv):
                    a[r, c] = zff[kr, vidx[c]]
                a[r, r] += z_src[kr]
            sol = np.linalg.solve(a, b)
            for r in range(nv):
                cur[vidx[r]] = sol[r]
        changed = False
        for k in range(n):
            p = prm[k]
            vf = 0j
            for c in range(n):
                vf += zff[k, c] * cur[c]
            zf = complex(p[RF], p[XF])
            em = vf + zf * cur[k]
            if use_csa and mode[k] == MODE_THEVENIN:
                isd = cur[k] / rot[k]
                xc = complex(x[k, S_XCD], x[k, S_XCQ])
                iref = isd + (p[RF] * isd - xc) / p[KCP]
                if abs(iref) > p[IMAX]:
                    iref = iref * (p[IMAX] / abs(iref))
                    out_iref[k] = iref
                    mode[k] = MODE_CURRENT
                    j_src[k] = (p[KCP] * iref + xc) / (p[KCP] + p[RF]) * rot[k]
                    changed = True
                    break
            if mode[k] != MODE_MODULATION and abs(em) > p[MMAX]:
                mode[k] = MODE_MODULATION
                e_src[k] = p[MMAX] * em / abs(em)
                z_src[k] = zf
                changed = True
                break
        if not changed:
            break

    for k in range(n):
        vf = 0j
        vg = 0j
        for c in range(n):
            vf += zff[k, c] * cur[c]
            vg += zgf[k, c] * cur[c]
        out_is[k] = cur[k]
        out_vf[k] = vf
        out_vg[k] = vg
        out_mode[k] = mode[k]


@njit(cache=True)
def _wacs_dv(x, g):
    n = x.shape[0]
    dv = np.empty(n)
    for k in range(n):
        v = -g[G_KF] * x[k, S_XL]
        dv[k] = min(max(v, -g[G_DVW]), g[G_DVW])
    return dv


@njit(cache=True)
def _coi_error(x, prm, err):
    n = x.shape[0]
    htot = 0.0
    acc = 0.0
    for k in range(n):
        htot += prm[k, H]
        acc += prm[k, H] * x[k, S_DW]
    coi = acc / htot
    for k in range(n):
        err[k] = coi - x[k, S_DW]


@njit(cache=True)
def _delayed(hist, kstep, h, t_query, current, k):
    """History value of channel ``k`` at ``t_query`` by linear interpolation on
    the step grid; samples beyond the latest recorded step use ``current``."""
    if t_query <= 0.0:
        return hist[0, k]
    pos = t_query / h
    i0 = int(np.floor(pos))
    frac = pos - i0
    if i0 >= kstep:
        return current
    lo = hist[i0, k]
    hi = current if i0 + 1 > kstep else hist[i0 + 1, k]
    return lo + frac * (hi - lo)


@njit(cache=True)
def _rhs(x, t, kstep, h, dv_local, zff, zgf, prm, g, limiter, fvb, hist, w0, dx,
         o_is, o_vf, o_vg, o_mode, o_iref):
    n = x.shape[0]
    if fvb == FVB_WACS:
        dv = _wacs_dv(x, g)
    else:
        dv = dv_local
    _algebra(x, dv, zff, zgf, prm, limiter, o_is, o_vf, o_vg, o_mode, o_iref)
    err = np.empty(n)
    if fvb == FVB_WACS:
        _coi_error(x, prm, err)
    for k in range(n):
        p = prm[k]
        rot = np.exp(-1j * x[k, S_DELTA])
        isd = o_is[k] * rot
        vfd = o_vf[k] * rot
        zc = complex(p[RC], p[XC])
        ig = (o_vf[k] - o_vg[k]) / zc
        pg = (o_vg[k] * np.conj(ig)).real
        w = complex(x[k, S_WD], x[k, S_WQ])
        xc = complex(x[k, S_XCD], x[k, S_XCQ])
        zvi = _vi(x[k, S_M], p, limiter)
        vref_eff = p[VREF] + dv[k] + p[RV] * (w - isd) - zvi * isd

        dx[k, S_DELTA] = w0 * x[k, S_DW]
        dx[k, S_DW] = (p[PG0] - pg - p[D] * x[k, S_DW]) / (2.0 * p[H])
        m = o_mode[k]
        if m == MODE_THEVENIN:
            dxv = p[KVI] * (vref_eff - vfd)
            dxc = p[KCI] * (p[RF] * isd - xc) / p[KCP]
        elif m == MODE_CURRENT:
            dxv = 0j
            dxc = p[KCI] * (p[RF] * o_iref[k] - xc) / (p[KCP] + p[RF])
        else:
            dxv = 0j
            dxc = 0j
        dx[k, S_XVD] = dxv.real
        dx[k, S_XVQ] = dxv.imag
        dx[k, S_XCD] = dxc.real
        dx[k, S_XCQ] = dxc.imag
        dw = (isd - w) / p[TVR]
        dx[k, S_WD] = dw.real
        dx[k, S_WQ] = dw.imag
        dx[k, S_M] = (abs(o_is[k]) - x[k, S_M]) / p[TFILT]
        if fvb == FVB_WACS:
            if g[G_TAU] > 0.0:
                u = _delayed(hist, kstep, h, t - g[G_TAU], err[k], k)
            else:
                u = err[k]
            if abs(u) < g[G_EPS]:
                u = 0.0
            hp = u - x[k, S_XW]
            dx[k, S_XW] = (u - x[k, S_XW]) / g[G_TW]
            dx[k, S_XL] = (hp - x[k, S_XL]) / g[G_TF]
        else:
            dx[k, S_XW] = 0.0
            dx[k, S_XL] = 0.0
    return dv


@njit(cache=True)
def integrate(x0, prm, g, zff, zgf, k_fault, k_clear, n_steps, h, w0, limiter, fvb,
              record_every, los_threshold, stop_at_los):
    """Run the simulation.

    ``zff``/``zgf`` hold one transfer-impedance matrix per phase (pre-fault,
    fault-on, post-fault). Returns the recorded samples, the number of rows
    filled, the LOS step and pair (-1 if none), the peak pairwise angle
    difference, the final state and a divergence flag.
    """
    n = x0.shape[0]
    x = x0.copy()
    n_rec = n_steps // record_every + 1
    rec = np.zeros((n_rec, n, N_REC))
    rec_t = np.zeros(n_rec)
    hist = np.zeros((n_steps + 1, n))
    latch = np.zeros(n, dtype=np.bool_)
    dv_local = np.zeros(n)
    k1 = np.empty_like(x)
    k2 = np.empty_like(x)
    k3 = np.empty_like(x)
    k4 = np.empty_like(x)
    o_is = np.empty(n, dtype=np.complex128)
    o_vf = np.empty(n, dtype=np.complex128)
    o_vg = np.empty(n, dtype=np.complex128)
    o_mode = np.empty(n, dtype=np.int64)
    o_iref = np.empty(n, dtype=np.complex128)
    err = np.empty(n)
    los_step = -1
    los_i = -1
    los_j = -1
    peak = 0.0
    diverged = False
    filled = 0

    for step in range(n_steps + 1):
        t = step * h
        if step < k_fault:
            ph = 0
        elif step < k_clear:
            ph = 1
        else:
            ph = 2
        zf_ = zff[ph]
        zg_ = zgf[ph]

        if fvb == FVB_WACS:
            _coi_error(x, prm, err)
            for k in range(n):
                hist[step, k] = err[k]

        dv = _rhs(x, t, step, h, dv_local, zf_, zg_, prm, g, limiter, fvb, hist, w0, k1,
                  o_is, o_vf, o_vg, o_mode, o_iref)

        if fvb == FVB_LOCAL:
            for k in range(n):
                vg = abs(o_vg[k])
                if vg < g[G_VA]:
                    latch[k] = True
                elif latch[k] and vg > g[G_VB] and abs(x[k, S_DW]) < g[G_WTH]:
                    latch[k] = False
                dv_local[k] = g[G_DVL] if latch[k] else 0.0
            dv = _rhs(x, t, step, h, dv_local, zf_, zg_, prm, g, limiter, fvb, hist, w0, k1,
                      o_is, o_vf, o_vg, o_mode, o_iref)

        if step % record_every == 0:
            r = step // record_every
            rec_t[r] = t
            for k in range(n):
                p = prm[k]
                zc = complex(p[RC], p[XC])
                ig = (o_vf[k] - o_vg[k]) / zc
                s = o_vg[k] * np.conj(ig)
                rec[r, k, R_DELTA] = x[k, S_DELTA]
                rec[r, k, R_DW] = x[k, S_DW]
                rec[r, k, R_PG] = s.real
                rec[r, k, R_QG] = s.imag
                rec[r, k, R_IS] = abs(o_is[k])
                rec[r, k, R_IG] = abs(ig)
                rec[r, k, R_VF] = abs(o_vf[k])
                rec[r, k, R_VG] = abs(o_vg[k])
                rec[r, k, R_DV] = dv[k]
                rec[r, k, R_CSA] = 1.0 if o_mode[k] == MODE_CURRENT else 0.0
                rec[r, k, R_VI] = 1.0 if _vi(x[k, S_M], p, limiter) != 0j else 0.0
                rec[r, k, R_FVB] = 1.0 if dv[k] != 0.0 else 0.0
            filled = r + 1

        # angle check on the state at this grid time
        for i in range(n):
            if not np.isfinite(x[i, S_DELTA]) or not np.isfinite(x[i, S_DW]):
                diverged = True
        if diverged:
            if los_step < 0:
                los_step = step
            break
        for i in range(n):
            for j in range(i + 1, n):
                diff = abs(x[i, S_DELTA] - x[j, S_DELTA])
                if diff > peak:
                    peak = diff
                if los_step < 0 and diff > los_threshold:
                    los_step = step
                    los_i = i
                    los_j = j
        if los_step >= 0 and stop_at_los:
            break
        if step == n_steps:
            break

        _rhs(x + 0.5 * h * k1, t + 0.5 * h, step, h, dv_local, zf_, zg_, prm, g, limiter, fvb,
             hist, w0, k2, o_is, o_vf, o_vg, o_mode, o_iref)
        _rhs(x + 0.5 * h * k2, t + 0.5 * h, step, h, dv_local, zf_, zg_, prm, g, limiter, fvb,
             hist, w0, k3, o_is, o_vf, o_vg, o_mode, o_iref)
        _rhs(x + h * k3, t + h, step, h, dv_local, zf_, zg_, prm, g, limiter, fvb,
             hist, w0, k4, o_is, o_vf, o_vg, o_mode, o_iref)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    return rec, rec_t, filled, los_step, los_i, los_j, peak, x, diverged
