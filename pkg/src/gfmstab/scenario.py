"""Scenario files: YAML schema, validation, overrides and serialization.

Two kinds of scenario exist. ``simulation`` scenarios describe a network
with grid-forming converters, the limiter and booster selection, an optional
fault and the integration settings. ``eac`` scenarios describe the
single-converter infinite-bus setup used for equal-area analysis.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .converter import ConverterParams
from .eac import EacCase
from .errors import ConfigError
from .fvb import FvbLocalConfig, FvbMode, FvbWacsConfig
from .limiters import CsaConfig, LimiterMode, ViConfig
from .system import Branch, Bus, Load, SystemBase

BUNDLED = ("smib_eac", "kundur_two_area", "kundur_fault1", "kundur_fault2", "kundur_fault3",
           "kundur_fault4")

ALIASES = {
    "clear_ms": "fault.clear_ms",
    "t_fault_s": "fault.t_fault_s",
    "horizon_s": "simulation.horizon_s",
    "step_us": "simulation.step_us",
    "limiter": "limiter.mode",
    "fvb": "fvb.mode",
    "tau_ms": "fvb.wacs.tau_ms",
    "i_max": "limiter.i_max",
    "i_thres": "limiter.i_thres",
    "resolution_ms": "cct.resolution_ms",
}


@dataclass(frozen=True)
class ConverterSpec:
    name: str
    bus: str
    connect: str
    control: str
    p_mw: float = 0.0
    q_mvar: float = 0.0
    v_pu: float = 1.0
    angle_deg: float = 0.0
    params: ConverterParams = ConverterParams()

    def __post_init__(self):
        if self.control not in ("slack", "pv", "pq"):
            raise ConfigError(f"converter {self.name}: control must be slack, pv or pq")


@dataclass(frozen=True)
class GridSpec:
    base: SystemBase
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    loads: tuple[Load, ...]
    converters: tuple[ConverterSpec, ...]


@dataclass(frozen=True)
class FaultEvent:
    location: str
    near: str | None = None
    distance: float = 0.01
    admittance: float = 1.0e6
    t_fault_s: float = 0.1
    clear_ms: float = 100.0
    action: str = "clear"

    def __post_init__(self):
        if self.action not in ("clear", "disconnect"):
            raise ConfigError("fault.action must be 'clear' or 'disconnect'")
        if self.t_fault_s < 0:
            raise ConfigError("fault.t_fault_s must be non-negative")
        if self.clear_ms < 0:
            raise ConfigError("fault.clear_ms must be non-negative")

    @property
    def duration(self) -> float:
        return self.clear_ms / 1000.0

    @property
    def t_clear(self) -> float:
        return self.t_fault_s + self.duration


@dataclass(frozen=True)
class CctSettings:
    resolution_ms: int = 10
    start_ms: int = 100
    cap_ms: int = 2000

    def __post_init__(self):
        if self.resolution_ms <= 0 or self.start_ms <= 0 or self.cap_ms <= 0:
            raise ConfigError("cct settings must be positive")


@dataclass(frozen=True)
class Scenario:
    name: str
    grid: GridSpec
    limiter: LimiterMode = LimiterMode()
    fvb: FvbMode = FvbMode()
    fault: FaultEvent | None = None
    horizon_s: float = 5.0
    step_us: float = 100.0
    los_threshold_deg: float = 180.0
    record_every: int = 10
    cct: CctSettings = CctSettings()

    def __post_init__(self):
        if not self.step_us > 0:
            raise ConfigError("simulation.step_us must be positive")
        if not self.horizon_s > 0:
            raise ConfigError("simulation.horizon_s must be positive")
        if self.record_every < 1:
            raise ConfigError("simulation.record_every must be at least 1")
        if self.fault is not None and not self.fault.t_clear < self.horizon_s:
            raise ConfigError("fault must be cleared before the horizon ends")

    @property
    def step(self) -> float:
        return self.step_us * 1e-6

    def with_clearing(self, clear_ms: float) -> "Scenario":
        if self.fault is None:
            raise ConfigError("scenario has no fault")
        return replace(self, fault=replace(self.fault, clear_ms=clear_ms))


@dataclass(frozen=True)
class EacScenario:
    name: str
    v_e: float
    x_e: float
    x_c: float
    p_g0: float
    q_g0: float
    cases: tuple[EacCase, ...] = field(default_factory=tuple)


# ------------------------------------------------------------------- parsing


def _get(d: Mapping, key: str, where: str, default: Any = ..., kind: type | tuple = (int, float)):
    if key not in d:
        if default is ...:
            raise ConfigError(f"{where}: missing field {key!r}")
        return default
    val = d[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind != bool:
        what = "a number" if kind == (int, float) else getattr(kind, "__name__", str(kind))
        raise ConfigError(f"{where}.{key}: expected {what}, got {val!r}")
    return val


def _num(d, key, where, default=...):
    v = _get(d, key, where, default)
    if v is not default and not math.isfinite(v):
        raise ConfigError(f"{where}.{key}: must be finite")
    return float(v) if isinstance(v, (int, float)) else v


def _check_keys(d: Mapping, allowed: set[str], where: str) -> None:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected a mapping")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(sorted(map(str, extra)))}")


def _params(d: Mapping, where: str, base: ConverterParams) -> ConverterParams:
    names = set(ConverterParams.field_names())
    kw = {}
    for k, v in d.items():
        if k not in names:
            continue
        kw[k] = _num(d, k, where)
    try:
        return replace(base, **kw)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _grid(raw: Mapping) -> GridSpec:
    where = "network"
    allowed = {"name", "s_base_mva", "f_nominal_hz", "voltage_bases_kv", "per_km", "buses",
               "branches", "loads", "converters", "converter_defaults"}
    _check_keys(raw, allowed, where)
    kv = raw.get("voltage_bases_kv", {"network": 230.0, "converter": 300.0})
    base = SystemBase(_num(raw, "s_base_mva", where, 900.0), _num(raw, "f_nominal_hz", where, 50.0),
                      {str(k): float(v) for k, v in kv.items()})
    per_km = raw.get("per_km")
    buses = []
    for i, b in enumerate(raw.get("buses", [])):
        w = f"{where}.buses[{i}]"
        _check_keys(b, {"name", "zone", "shunt_mvar", "shunt_pu"}, w)
        shunt = 0j
        if "shunt_pu" in b:
            re_im = b["shunt_pu"]
            shunt = complex(float(re_im[0]), float(re_im[1]))
        elif "shunt_mvar" in b:
            shunt = 1j * _num(b, "shunt_mvar", w) / base.s_base
        buses.append(Bus(str(_get(b, "name", w, kind=(str, int))), str(b.get("zone", "network")), shunt))
    branches = []
    for i, b in enumerate(raw.get("branches", [])):
        w = f"{where}.branches[{i}]"
        _check_keys(b, {"name", "from", "to", "r", "x", "b", "length_km", "status"}, w)
        if "length_km" in b:
            if per_km is None:
                raise ConfigError(f"{w}: length_km given but network.per_km is missing")
            length = _num(b, "length_km", w)
            r, x, bsh = (per_km["r"] * length, per_km["x"] * length, per_km["b"] * length)
        else:
            r, x, bsh = _num(b, "r", w), _num(b, "x", w), _num(b, "b", w, 0.0)
        branches.append(Branch(str(_get(b, "name", w, kind=(str, int))), str(b["from"]), str(b["to"]),
                               float(r), float(x), float(bsh), bool(b.get("status", True))))
    loads = []
    for i, ld in enumerate(raw.get("loads", [])):
        w = f"{where}.loads[{i}]"
        _check_keys(ld, {"bus", "p_mw", "q_mvar"}, w)
        loads.append(Load(str(ld["bus"]), _num(ld, "p_mw", w), _num(ld, "q_mvar", w, 0.0)))
    defaults = _params(raw.get("converter_defaults", {}), f"{where}.converter_defaults",
                       ConverterParams())
    convs = []
    conv_keys = {"name", "bus", "connect", "control", "p_mw", "q_mvar", "v_pu", "angle_deg"}
    for i, c in enumerate(raw.get("converters", [])):
        w = f"{where}.converters[{i}]"
        _check_keys(c, conv_keys | set(ConverterParams.field_names()), w)
        convs.append(ConverterSpec(
            str(_get(c, "name", w, kind=str)), str(c["bus"]), str(c["connect"]),
            str(_get(c, "control", w, kind=str)), _num(c, "p_mw", w, 0.0), _num(c, "q_mvar", w, 0.0),
            _num(c, "v_pu", w, 1.0), _num(c, "angle_deg", w, 0.0), _params(c, w, defaults)))
    if not convs:
        raise ConfigError(f"{where}: at least one converter is required")
    return GridSpec(base, tuple(buses), tuple(branches), tuple(loads), tuple(convs))


def _limiter(raw: Mapping) -> LimiterMode:
    w = "limiter"
    _check_keys(raw, {"mode", "i_max", "i_thres", "k_p_rvi", "sigma_xr", "t_filter"}, w)
    try:
        csa = CsaConfig(_num(raw, "i_max", w, 1.25))
        vi = ViConfig(_num(raw, "i_thres", w, 1.0), _num(raw, "k_p_rvi", w, 0.098),
                      _num(raw, "sigma_xr", w, 5.0), _num(raw, "t_filter", w, 0.005))
        return LimiterMode(str(raw.get("mode", "none")), csa, vi)
    except ConfigError as exc:
        raise ConfigError(f"limiter: {exc}") from None


def _fvb(raw: Mapping) -> FvbMode:
    w = "fvb"
    _check_keys(raw, {"mode", "local", "wacs"}, w)
    loc = raw.get("local", {})
    _check_keys(loc, {"v_a", "v_b", "omega_thres", "delta_v_max"}, "fvb.local")
    wa = raw.get("wacs", {})
    _check_keys(wa, {"k_fvb", "t_f", "t_w", "delta_v_max", "epsilon", "tau_s", "tau_ms"}, "fvb.wacs")
    if "tau_ms" in wa:
        tau = _num(wa, "tau_ms", "fvb.wacs") / 1000.0
    else:
        tau = _num(wa, "tau_s", "fvb.wacs", 0.0)
    try:
        local = FvbLocalConfig(_num(loc, "v_a", "fvb.local", 0.5), _num(loc, "v_b", "fvb.local", 0.9),
                               _num(loc, "omega_thres", "fvb.local", 1e-3),
                               _num(loc, "delta_v_max", "fvb.local", 0.15))
        wacs = FvbWacsConfig(_num(wa, "k_fvb", "fvb.wacs", 50.0), _num(wa, "t_f", "fvb.wacs", 0.1),
                             _num(wa, "t_w", "fvb.wacs", 10.0), _num(wa, "delta_v_max", "fvb.wacs", 0.15),
                             _num(wa, "epsilon", "fvb.wacs", 1e-3), tau)
        return FvbMode(str(raw.get("mode", "none")), local, wacs)
    except ConfigError as exc:
        raise ConfigError(f"fvb: {exc}") from None


def _fault(raw: Mapping | None) -> FaultEvent | None:
    if raw is None:
        return None
    w = "fault"
    _check_keys(raw, {"location", "near", "distance", "admittance", "t_fault_s", "clear_ms", "action"}, w)
    near = raw.get("near")
    return FaultEvent(str(_get(raw, "location", w, kind=(str, int))), None if near is None else str(near),
                      _num(raw, "distance", w, 0.01), _num(raw, "admittance", w, 1.0e6),
                      _num(raw, "t_fault_s", w, 0.1), _num(raw, "clear_ms", w, 100.0),
                      str(raw.get("action", "clear")))


def _load_dataset(name: str) -> dict:
    try:
        text = resources.files("gfmstab.data").joinpath(f"network_{name}.yaml").read_text()
    except FileNotFoundError:
        raise ConfigError(f"unknown network dataset {name!r}") from None
    return yaml.safe_load(text)


def from_dict(raw: Mapping) -> Scenario | EacScenario:
    """Validate a raw mapping (as read from YAML) into a scenario object."""
    if not isinstance(raw, Mapping):
        raise ConfigError("scenario file must contain a mapping")
    kind = raw.get("kind", "simulation")
    name = str(raw.get("name", "scenario"))
    if kind == "eac":
        _check_keys(raw, {"kind", "name", "smib", "limiter", "fvb_boost_pu", "virtual_voltage"}, "scenario")
        smib = raw.get("smib", {})
        _check_keys(smib, {"v_e", "x_e", "x_c", "p_g0", "q_g0"}, "smib")
        lim = _limiter({k: v for k, v in raw.get("limiter", {}).items() if k != "mode"})
        dv = _num(raw, "fvb_boost_pu", "scenario", 0.1)
        vv = str(raw.get("virtual_voltage", "reference"))
        cases = tuple(EacCase(l, f, dv, lim.csa, lim.vi, vv)
                      for f in (False, True) for l in ("none", "csa", "hcl"))
        return EacScenario(name, _num(smib, "v_e", "smib", 1.0), _num(smib, "x_e", "smib"),
                           _num(smib, "x_c", "smib"), _num(smib, "p_g0", "smib"),
                           _num(smib, "q_g0", "smib"), cases)
    if kind != "simulation":
        raise ConfigError(f"scenario kind must be 'simulation' or 'eac'; got {kind!r}")
    _check_keys(raw, {"kind", "name", "network", "limiter", "fvb", "fault", "simulation", "cct"}, "scenario")
    net = raw.get("network")
    if isinstance(net, str):
        net = _load_dataset(net)
    if net is None:
        raise ConfigError("scenario: missing field 'network'")
    sim = raw.get("simulation", {})
    _check_keys(sim, {"horizon_s", "step_us", "los_threshold_deg", "record_every"}, "simulation")
    cct = raw.get("cct", {})
    _check_keys(cct, {"resolution_ms", "start_ms", "cap_ms"}, "cct")
    return Scenario(
        name=name,
        grid=_grid(net),
        limiter=_limiter(raw.get("limiter", {})),
        fvb=_fvb(raw.get("fvb", {})),
        fault=_fault(raw.get("fault")),
        horizon_s=_num(sim, "horizon_s", "simulation", 5.0),
        step_us=_num(sim, "step_us", "simulation", 100.0),
        los_threshold_deg=_num(sim, "los_threshold_deg", "simulation", 180.0),
        record_every=int(_get(sim, "record_every", "simulation", 10, kind=int)),
        cct=CctSettings(int(_get(cct, "resolution_ms", "cct", 10, kind=int)),
                        int(_get(cct, "start_ms", "cct", 100, kind=int)),
                        int(_get(cct, "cap_ms", "cct", 2000, kind=int))),
    )


def resolve_path(name_or_path: str | Path) -> Path | None:
    p = Path(name_or_path)
    if p.exists():
        return p
    if str(name_or_path) in BUNDLED:
        return None
    raise ConfigError(f"scenario {str(name_or_path)!r} is neither a file nor a bundled scenario "
                      f"({', '.join(BUNDLED)})")


def load_raw(name_or_path: str | Path) -> dict:
    path = resolve_path(name_or_path)
    if path is None:
        text = resources.files("gfmstab.data").joinpath(f"{name_or_path}.yaml").read_text()
    else:
        text = path.read_text()
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{name_or_path}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{name_or_path}: scenario file must contain a mapping")
    return raw


def apply_overrides(raw: Mapping, overrides: list[str] | tuple[str, ...]) -> dict:
    """Apply ``key=value`` overrides to a raw scenario mapping. Keys are dotted
    paths or one of the short aliases; values are parsed as YAML scalars."""
    out = copy.deepcopy(dict(raw))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, text = item.split("=", 1)
        key = ALIASES.get(key.strip(), key.strip())
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError:
            raise ConfigError(f"override {item!r}: cannot parse value") from None
        if isinstance(value, str):
            # YAML 1.1 reads exponents without a dot (1e-9) as strings
            try:
                value = float(value)
            except ValueError:
                pass
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            nxt = node.get(p)
            if nxt is None:
                nxt = node[p] = {}
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r}: {p!r} is not a section")
            node = nxt
        leaf = parts[-1]
        for suffix, other in (("_ms", "_s"), ("_s", "_ms")):
            if leaf.endswith(suffix):
                node.pop(leaf[: -len(suffix)] + other, None)
        node[leaf] = value
    return out


def parse_scenario(name_or_path: str | Path, overrides: list[str] | tuple[str, ...] = ()) -> Scenario | EacScenario:
    return from_dict(apply_overrides(load_raw(name_or_path), overrides))


# ------------------------------------------------------------- serializing


def _dc_dict(obj, skip=()) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj) if f.name not in skip}


def to_dict(scn: Scenario | EacScenario) -> dict:
    """Canonical mapping that re-parses to an equal scenario."""
    if isinstance(scn, EacScenario):
        first = scn.cases[0] if scn.cases else EacCase()
        return {
            "kind": "eac",
            "name": scn.name,
            "smib": {"v_e": scn.v_e, "x_e": scn.x_e, "x_c": scn.x_c, "p_g0": scn.p_g0, "q_g0": scn.q_g0},
            "limiter": {"i_max": first.csa.i_max, **_dc_dict(first.vi)},
            "fvb_boost_pu": first.dv,
            "virtual_voltage": first.virtual_voltage,
        }
    g = scn.grid
    net = {
        "s_base_mva": g.base.s_base,
        "f_nominal_hz": g.base.f_nominal,
        "voltage_bases_kv": dict(g.base.v_base_per_zone),
        "buses": [{"name": b.name, "zone": b.zone, "shunt_pu": [b.shunt.real, b.shunt.imag]}
                  for b in g.buses],
        "branches": [{"name": b.name, "from": b.from_bus, "to": b.to_bus, "r": b.r, "x": b.x,
                      "b": b.b_shunt, "status": b.status} for b in g.branches],
        "loads": [{"bus": ld.bus, "p_mw": ld.p, "q_mvar": ld.q} for ld in g.loads],
        "converters": [
            {"name": c.name, "bus": c.bus, "connect": c.connect, "control": c.control,
             "p_mw": c.p_mw, "q_mvar": c.q_mvar, "v_pu": c.v_pu, "angle_deg": c.angle_deg,
             **_dc_dict(c.params)}
            for c in g.converters
        ],
    }
    wacs = _dc_dict(scn.fvb.wacs, skip=("tau",))
    wacs["tau_s"] = scn.fvb.wacs.tau
    out = {
        "kind": "simulation",
        "name": scn.name,
        "network": net,
        "limiter": {"mode": scn.limiter.kind, "i_max": scn.limiter.csa.i_max, **_dc_dict(scn.limiter.vi)},
        "fvb": {"mode": scn.fvb.kind, "local": _dc_dict(scn.fvb.local), "wacs": wacs},
        "simulation": {"horizon_s": scn.horizon_s, "step_us": scn.step_us,
                       "los_threshold_deg": scn.los_threshold_deg, "record_every": scn.record_every},
        "cct": _dc_dict(scn.cct),
    }
    if scn.fault is not None:
        out["fault"] = _dc_dict(scn.fault)
    return out


def dump_scenario(scn: Scenario | EacScenario) -> str:
    return yaml.safe_dump(to_dict(scn), sort_keys=False)
