"""Fast voltage boosters.

The local booster latches a constant voltage-reference increment when the
connection-point voltage collapses. The wide-area booster drives the
increment from the converter's frequency error to the centre of inertia,
received through a (possibly delayed) communication link.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigError

FVB_KINDS = ("none", "local", "wacs")


@dataclass(frozen=True)
class FvbLocalConfig:
    v_a: float = 0.5
    v_b: float = 0.9
    omega_thres: float = 1e-3
    delta_v_max: float = 0.15

    def __post_init__(self):
        if not 0.0 < self.v_a < self.v_b < 1.0:
            raise ConfigError("local booster thresholds need 0 < v_a < v_b < 1")
        if not self.omega_thres > 0 or not self.delta_v_max > 0:
            raise ConfigError("omega_thres and delta_v_max must be positive")


@dataclass(frozen=True)
class FvbLocalState:
    latched: bool = False


@dataclass(frozen=True)
class FvbWacsConfig:
    k_fvb: float = 50.0
    t_f: float = 0.1
    t_w: float = 10.0
    delta_v_max: float = 0.15
    epsilon: float = 1e-3
    tau: float = 0.0

    def __post_init__(self):
        for name in ("k_fvb", "t_f", "t_w", "delta_v_max", "epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tau < 0:
            raise ConfigError("tau must be non-negative")


@dataclass(frozen=True)
class FvbMode:
    kind: str = "none"
    local: FvbLocalConfig = FvbLocalConfig()
    wacs: FvbWacsConfig = FvbWacsConfig()

    def __post_init__(self):
        if self.kind not in FVB_KINDS:
            raise ConfigError(f"fvb must be one of {', '.join(FVB_KINDS)}; got {self.kind!r}")


@dataclass(frozen=True)
class CoiAggregate:
    omega_coi: float
    h_tot: float


def coi_frequency(omegas: Sequence[float], inertias: Sequence[float]) -> CoiAggregate:
    """Inertia-weighted mean frequency."""
    w = np.asarray(omegas, dtype=float)
    h = np.asarray(inertias, dtype=float)
    if w.shape != h.shape or w.size == 0:
        raise ConfigError("need one inertia per frequency")
    if np.any(h <= 0):
        raise ConfigError("inertias must be positive")
    h_tot = float(h.sum())
    return CoiAggregate(float(np.dot(h, w) / h_tot), h_tot)


def fvb_local_step(
    v_g: float, delta_omega: float, state: FvbLocalState, cfg: FvbLocalConfig
) -> tuple[float, FvbLocalState]:
    """Latch on a voltage dip; release once the voltage has recovered and the
    frequency has settled. Setting wins if both conditions hold."""
    latched = state.latched
    if v_g < cfg.v_a:
        latched = True
    elif latched and v_g > cfg.v_b and abs(delta_omega) < cfg.omega_thres:
        latched = False
    return (cfg.delta_v_max if latched else 0.0), FvbLocalState(latched)


class DelayBuffer:
    """Time-stamped history returning the input delayed by a fixed amount,
    linearly interpolated between stored samples."""

    def __init__(self, initial: float = 0.0):
        self.initial = initial
        self._t: list[float] = []
        self._v: list[float] = []

    def push(self, t: float, value: float) -> None:
        if self._t and t < self._t[-1]:
            raise ConfigError(f"non-monotone time stamp {t} after {self._t[-1]}")
        if self._t and t == self._t[-1]:
            self._v[-1] = value
            return
        self._t.append(t)
        self._v.append(value)

    def sample(self, t: float) -> float:
        if not self._t or t < self._t[0]:
            return self.initial
        k = bisect.bisect_right(self._t, t)
        if k >= len(self._t):
            return self._v[-1]
        t0, t1 = self._t[k - 1], self._t[k]
        v0, v1 = self._v[k - 1], self._v[k]
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0)


def delay_sample(buffer: DelayBuffer, value: float, t: float, tau: float) -> tuple[float, DelayBuffer]:
    """Store ``value`` at ``t`` and read the value at ``t - tau``; before
    ``tau`` has elapsed the buffer's initial value is returned."""
    if tau < 0:
        raise ConfigError("tau must be non-negative")
    buffer.push(t, value)
    if not buffer._t or t - tau < buffer._t[0]:
        return buffer.initial, buffer
    return buffer.sample(t - tau), buffer


@dataclass
class FvbWacsState:
    washout_state: float = 0.0
    lowpass_state: float = 0.0
    t: float | None = None
    delay_buffer: DelayBuffer = field(default_factory=DelayBuffer)


def _advance(x_w: float, x_l: float, u: float, dt: float, t_w: float, t_f: float) -> tuple[float, float]:
    """Exact update of the washout/low-pass cascade over ``dt`` with ``u`` held."""
    a = x_w - u
    ew = math.exp(-dt / t_w)
    ef = math.exp(-dt / t_f)
    if abs(1.0 / t_f - 1.0 / t_w) < 1e-12:
        coupling = dt * ef
    else:
        coupling = (ew - ef) / (1.0 / t_f - 1.0 / t_w)
    return u + a * ew, x_l * ef - a / t_f * coupling


def fvb_wacs_step(
    omega_i: float, omega_coi_remote: float, t: float, state: FvbWacsState, cfg: FvbWacsConfig
) -> tuple[float, FvbWacsState]:
    """Advance the wide-area booster to time ``t`` and return its output."""
    u, buf = delay_sample(state.delay_buffer, omega_coi_remote - omega_i, t, cfg.tau)
    if abs(u) < cfg.epsilon:
        u = 0.0
    x_w, x_l = state.washout_state, state.lowpass_state
    if state.t is not None:
        dt = t - state.t
        if dt < 0:
            raise ConfigError("time must not decrease")
        x_w, x_l = _advance(x_w, x_l, u, dt, cfg.t_w, cfg.t_f)
    new = replace(state, washout_state=x_w, lowpass_state=x_l, t=t, delay_buffer=buf)
    dv = -cfg.k_fvb * x_l
    return min(max(dv, -cfg.delta_v_max), cfg.delta_v_max), new
