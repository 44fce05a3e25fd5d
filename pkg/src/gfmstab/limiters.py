"""Current limiters: saturation clamp (CSA), virtual impedance (VI) and the
hybrid of both (HCL)."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError

LIMITER_KINDS = ("none", "csa", "vi", "hcl")


@dataclass(frozen=True)
class CsaConfig:
    i_max: float = 1.25

    def __post_init__(self):
        if not self.i_max > 0:
            raise ConfigError("i_max must be positive")


@dataclass(frozen=True)
class ViConfig:
    i_thres: float = 1.0
    k_p_rvi: float = 0.098
    sigma_xr: float = 5.0
    t_filter: float = 0.005

    def __post_init__(self):
        if not self.i_thres > 0:
            raise ConfigError("i_thres must be positive")
        if not self.sigma_xr > 0:
            raise ConfigError("sigma_xr must be positive")
        if self.k_p_rvi < 0:
            raise ConfigError("k_p_rvi must be non-negative")
        if not self.t_filter > 0:
            raise ConfigError("t_filter must be positive")


@dataclass(frozen=True)
class LimiterMode:
    kind: str = "none"
    csa: CsaConfig = CsaConfig()
    vi: ViConfig = ViConfig()

    def __post_init__(self):
        if self.kind not in LIMITER_KINDS:
            raise ConfigError(f"limiter must be one of {', '.join(LIMITER_KINDS)}; got {self.kind!r}")
        if self.kind == "hcl" and not self.vi.i_thres < self.csa.i_max:
            raise ConfigError(
                f"hybrid limiter requires i_thres < i_max "
                f"(got i_thres={self.vi.i_thres}, i_max={self.csa.i_max})"
            )

    @property
    def uses_csa(self) -> bool:
        return self.kind in ("csa", "hcl")

    @property
    def uses_vi(self) -> bool:
        return self.kind in ("vi", "hcl")


def csa_clamp(i_ref: complex, cfg: CsaConfig) -> tuple[complex, bool]:
    """Scale the reference down to ``i_max`` keeping its angle (equal d/q priority)."""
    mag = abs(i_ref)
    if mag <= cfg.i_max:
        return i_ref, False
    return i_ref * (cfg.i_max / mag), True


def vi_impedance(i_s_mag: float, cfg: ViConfig) -> tuple[float, float]:
    """Return ``(r_vi, x_vi)`` for the measured current magnitude."""
    if i_s_mag <= cfg.i_thres:
        return 0.0, 0.0
    x_vi = cfg.k_p_rvi * cfg.sigma_xr * (i_s_mag - cfg.i_thres)
    return x_vi / cfg.sigma_xr, x_vi


def vi_voltage_drop(i_s: complex, r_vi: float, x_vi: float) -> complex:
    """Voltage drop ``(r + jx) i`` in dq, subtracted from the voltage reference."""
    return complex(r_vi, x_vi) * i_s


@dataclass(frozen=True)
class HclFlags:
    vi_active: bool
    csa_active: bool


def hcl_step(
    i_ref: complex, i_s: complex, csa: CsaConfig, vi: ViConfig
) -> tuple[complex, complex, HclFlags]:
    """Apply both limiters to one controller evaluation.

    ``i_s`` is the measured dq current; its magnitude drives the VI path and
    the returned drop is meant for the next voltage-controller evaluation.
    """
    if not vi.i_thres < csa.i_max:
        raise ConfigError("hybrid limiter requires i_thres < i_max")
    r_vi, x_vi = vi_impedance(abs(i_s), vi)
    drop = vi_voltage_drop(i_s, r_vi, x_vi)
    limited, saturated = csa_clamp(i_ref, csa)
    return limited, drop, HclFlags(x_vi > 0.0, saturated)
