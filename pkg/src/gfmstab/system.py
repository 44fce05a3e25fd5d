"""Per-unit bases, network admittance assembly, power flow and fault overlays.

Sign convention: complex power and current injections are positive into the
network. Phasors are plain Python/numpy complex numbers in per unit on the
system base, angles in radians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, NetworkError, NumericalError

FAULT_ADMITTANCE = 1.0e6


@dataclass(frozen=True)
class SystemBase:
    s_base: float = 900.0
    f_nominal: float = 50.0
    v_base_per_zone: Mapping[str, float] = field(
        default_factory=lambda: {"network": 230.0, "converter": 300.0}
    )

    def __post_init__(self):
        if not (self.s_base > 0 and self.f_nominal > 0):
            raise NetworkError("system bases must be strictly positive")
        for zone, kv in self.v_base_per_zone.items():
            if not kv > 0:
                raise NetworkError(f"voltage base of zone {zone!r} must be positive")

    @property
    def omega_0(self) -> float:
        return 2.0 * math.pi * self.f_nominal

    def z_base(self, zone: str) -> float:
        return self.v_base_per_zone[zone] ** 2 / self.s_base


@dataclass(frozen=True)
class Bus:
    name: str
    zone: str = "network"
    shunt: complex = 0j


@dataclass(frozen=True)
class Branch:
    name: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    b_shunt: float = 0.0
    status: bool = True

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise NetworkError(f"branch {self.name!r} connects bus {self.from_bus!r} to itself")
        if self.r == 0.0 and self.x == 0.0:
            raise NetworkError(f"branch {self.name!r} has zero impedance")

    @property
    def y_series(self) -> complex:
        return 1.0 / complex(self.r, self.x)


@dataclass(frozen=True)
class Load:
    """Load given in MW/MVAr, modelled as a constant impedance once the
    pre-disturbance voltage is known."""

    bus: str
    p: float
    q: float

    def power_pu(self, s_base: float) -> complex:
        return complex(self.p, self.q) / s_base

    def admittance(self, v_mag: float, s_base: float) -> complex:
        return self.power_pu(s_base).conjugate() / v_mag**2


@dataclass(frozen=True)
class FaultSpec:
    """Three-phase fault at a bus, or on a branch at ``distance`` (fraction of
    its length) from the end bus ``near``."""

    location: str
    near: str | None = None
    distance: float = 0.01
    admittance: complex = complex(FAULT_ADMITTANCE)

    def __post_init__(self):
        if not 0.0 < self.distance < 1.0:
            raise NetworkError("fault distance must lie strictly between 0 and 1")


def _assemble(nodes: Sequence[str], branches, shunts: Mapping[str, complex]) -> np.ndarray:
    index = {n: i for i, n in enumerate(nodes)}
    y = np.zeros((len(nodes), len(nodes)), dtype=complex)
    for br in branches:
        if not br.status:
            continue
        i, j = index[br.from_bus], index[br.to_bus]
        ys = br.y_series
        half = 0.5j * br.b_shunt
        y[i, i] += ys + half
        y[j, j] += ys + half
        y[i, j] -= ys
        y[j, i] -= ys
    for name, ysh in shunts.items():
        y[index[name], index[name]] += ysh
    return y


def _check_connected(nodes: Sequence[str], branches) -> None:
    index = {n: i for i, n in enumerate(nodes)}
    rows, cols = [], []
    for br in branches:
        if br.status:
            rows.append(index[br.from_bus])
            cols.append(index[br.to_bus])
    n = len(nodes)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    if count > 1:
        main = np.bincount(labels).argmax()
        isolated = [nodes[i] for i in range(n) if labels[i] != main]
        raise NetworkError(f"network is disconnected; isolated buses: {', '.join(isolated)}")


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    loads: tuple[Load, ...] = ()
    base: SystemBase = field(default_factory=SystemBase)
    load_voltages: tuple[tuple[str, float], ...] | None = None
    fault: FaultSpec | None = None

    def __post_init__(self):
        names = [b.name for b in self.buses]
        if len(set(names)) != len(names):
            raise NetworkError("duplicate bus names")
        known = set(names)
        br_names = [b.name for b in self.branches]
        if len(set(br_names)) != len(br_names):
            raise NetworkError("duplicate branch names")
        for br in self.branches:
            for end in (br.from_bus, br.to_bus):
                if end not in known:
                    raise NetworkError(f"branch {br.name!r} references unknown bus {end!r}")
        for ld in self.loads:
            if ld.bus not in known:
                raise NetworkError(f"load references unknown bus {ld.bus!r}")
        if self.fault is not None:
            self._fault_topology()
        _check_connected(self.nodes, self._effective_branches())

    @property
    def bus_names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.buses)

    @property
    def nodes(self) -> tuple[str, ...]:
        """Bus names plus the internal fault node when a branch fault is applied."""
        names = self.bus_names
        if self.fault is not None and self.fault.location not in names:
            return names + (self.fault_node,)
        return names

    @property
    def fault_node(self) -> str | None:
        if self.fault is None:
            return None
        if self.fault.location in self.bus_names:
            return self.fault.location
        return f"{self.fault.location}@{self.fault.distance:g}"

    def index(self, name: str) -> int:
        try:
            return self.nodes.index(name)
        except ValueError:
            raise NetworkError(f"unknown bus {name!r}") from None

    def branch(self, name: str) -> Branch:
        for br in self.branches:
            if br.name == name:
                return br
        raise NetworkError(f"unknown branch {name!r}")

    @property
    def loads_frozen(self) -> bool:
        return self.load_voltages is not None

    def _fault_topology(self):
        f = self.fault
        if f.location in self.bus_names:
            return None
        br = self.branch(f.location)
        if not br.status:
            raise NetworkError(f"cannot fault out-of-service branch {br.name!r}")
        near = br.from_bus if f.near is None else f.near
        if near not in (br.from_bus, br.to_bus):
            raise NetworkError(f"bus {near!r} is not an end of branch {br.name!r}")
        far = br.to_bus if near == br.from_bus else br.from_bus
        d = f.distance
        node = self.fault_node
        first = Branch(f"{br.name}/near", near, node, br.r * d, br.x * d, br.b_shunt * d)
        second = Branch(
            f"{br.name}/far", node, far, br.r * (1 - d), br.x * (1 - d), br.b_shunt * (1 - d)
        )
        return br, first, second

    def _effective_branches(self) -> list[Branch]:
        branches = list(self.branches)
        if self.fault is not None:
            split = self._fault_topology()
            if split is not None:
                original, first, second = split
                branches = [b for b in branches if b.name != original.name] + [first, second]
        return branches

    def _shunts(self) -> dict[str, complex]:
        shunts: dict[str, complex] = {}
        for b in self.buses:
            if b.shunt:
                shunts[b.name] = shunts.get(b.name, 0j) + b.shunt
        if self.load_voltages is not None:
            vmag = dict(self.load_voltages)
            for ld in self.loads:
                y = ld.admittance(vmag[ld.bus], self.base.s_base)
                shunts[ld.bus] = shunts.get(ld.bus, 0j) + y
        if self.fault is not None:
            node = self.fault_node
            shunts[node] = shunts.get(node, 0j) + self.fault.admittance
        return shunts

    @cached_property
    def y_bus(self) -> np.ndarray:
        y = _assemble(self.nodes, self._effective_branches(), self._shunts())
        y.setflags(write=False)
        return y

    def with_frozen_loads(self, voltages: Mapping[str, complex]) -> "NetworkModel":
        """Convert every load to a constant admittance at the given bus voltages."""
        frozen = tuple(sorted((ld.bus, float(abs(voltages[ld.bus]))) for ld in self.loads))
        return replace(self, load_voltages=frozen)


def build_ybus(
    buses: Sequence[Bus],
    branches: Sequence[Branch],
    loads: Sequence[Load] = (),
    base: SystemBase | None = None,
    load_voltages: Mapping[str, complex] | None = None,
) -> NetworkModel:
    """Assemble and validate a network; loads are included in ``y_bus`` only
    when ``load_voltages`` is given."""
    net = NetworkModel(tuple(buses), tuple(branches), tuple(loads), base or SystemBase())
    if load_voltages is not None:
        net = net.with_frozen_loads(load_voltages)
    net.y_bus  # noqa: B018  (assemble eagerly so errors surface here)
    return net


def apply_fault(network: NetworkModel, fault: FaultSpec) -> NetworkModel:
    if network.fault is not None:
        raise NetworkError("network already carries a fault")
    if fault.location not in network.bus_names:
        network.branch(fault.location)
    return replace(network, fault=fault)


def clear_fault(network: NetworkModel, action: str = "clear") -> NetworkModel:
    """Remove the fault. ``action='disconnect'`` also trips the faulted branch."""
    if action not in ("clear", "disconnect"):
        raise NetworkError(f"unknown clearing action {action!r}")
    if network.fault is None:
        return network
    cleared = replace(network, fault=None)
    if action == "disconnect":
        loc = network.fault.location
        if loc in network.bus_names:
            raise NetworkError("a bus fault cannot be cleared by disconnecting a branch")
        branches = tuple(replace(b, status=False) if b.name == loc else b for b in network.branches)
        cleared = replace(cleared, branches=branches)
    return cleared


# ---------------------------------------------------------------- power flow


@dataclass(frozen=True)
class Dispatch:
    """Power-flow specification of a source bus.

    ``kind`` is ``slack`` (fixed V and angle), ``pv`` (active power and
    voltage magnitude) or ``pq``. Powers are in pu on the system base and
    are metered at ``metered_at`` when given: the power delivered into that
    bus through the branch joining it to ``bus``.
    """

    bus: str
    kind: str
    p: float = 0.0
    q: float = 0.0
    v: float = 1.0
    angle: float = 0.0
    metered_at: str | None = None

    def __post_init__(self):
        if self.kind not in ("slack", "pv", "pq"):
            raise NetworkError(f"unknown dispatch kind {self.kind!r}")


@dataclass(frozen=True)
class SourceSetpoint:
    p_g0: float
    q_g0: float
    v_f0: float
    delta_f0: float


@dataclass(frozen=True)
class OperatingPoint:
    network: NetworkModel
    bus_voltages: Mapping[str, complex]
    setpoints: Mapping[str, SourceSetpoint]
    mismatch: float
    iterations: int

    def voltage_vector(self) -> np.ndarray:
        return np.array([self.bus_voltages[n] for n in self.network.bus_names])


def _metered_power(net: NetworkModel, v: np.ndarray, d: Dispatch, s_bus: np.ndarray,
                   s_load: np.ndarray) -> complex:
    i = net.index(d.bus)
    if d.metered_at is None or d.metered_at == d.bus:
        return s_bus[i] + s_load[i]
    m = net.index(d.metered_at)
    link = [b for b in net.branches if b.status and {b.from_bus, b.to_bus} == {d.bus, d.metered_at}]
    if len(link) != 1:
        raise NetworkError(f"buses {d.bus!r} and {d.metered_at!r} must share exactly one branch")
    br = link[0]
    current = br.y_series * (v[i] - v[m]) - 0.5j * br.b_shunt * v[m]
    return v[m] * np.conj(current)


def solve_power_flow(
    network: NetworkModel,
    dispatch: Sequence[Dispatch],
    tol: float = 1e-10,
    max_iter: int = 30,
) -> OperatingPoint:
    """Newton power flow with constant-power loads.

    Returns voltages, the per-source setpoints metered as requested, and the
    network with loads frozen to constant admittances at the solution.
    """
    if network.fault is not None:
        raise NetworkError("power flow requires an unfaulted network")
    net = replace(network, load_voltages=None)
    names = net.bus_names
    n = len(names)
    y = net.y_bus
    by_bus = {d.bus: d for d in dispatch}
    if len(by_bus) != len(dispatch):
        raise NetworkError("more than one dispatch entry on a bus")
    for d in dispatch:
        net.index(d.bus)
        if d.metered_at is not None:
            net.index(d.metered_at)
    if not any(d.kind == "slack" for d in dispatch):
        raise NetworkError("power flow needs at least one slack (angle reference) source")

    s_load = np.zeros(n, dtype=complex)
    for ld in net.loads:
        s_load[net.index(ld.bus)] += ld.power_pu(net.base.s_base)

    ang_idx = [i for i, b in enumerate(names) if by_bus.get(b, Dispatch(b, "pq")).kind != "slack"]
    mag_idx = [i for i, b in enumerate(names) if by_bus.get(b, Dispatch(b, "pq")).kind == "pq"]
    vm0 = np.ones(n)
    va0 = np.zeros(n)
    for d in dispatch:
        i = net.index(d.bus)
        if d.kind in ("slack", "pv"):
            vm0[i] = d.v
        if d.kind == "slack":
            va0[i] = d.angle
    slack_angle = np.mean([d.angle for d in dispatch if d.kind == "slack"])

    def unpack(xv):
        vm, va = vm0.copy(), va0.copy()
        va[ang_idx] = xv[: len(ang_idx)]
        vm[mag_idx] = xv[len(ang_idx):]
        return vm * np.exp(1j * va)

    def residual(xv):
        v = unpack(xv)
        s_bus = v * np.conj(y @ v)
        out = []
        for i, b in enumerate(names):
            d = by_bus.get(b)
            if d is None:
                mis = s_bus[i] + s_load[i]
                out += [mis.real, mis.imag]
            elif d.kind == "pv":
                out.append(_metered_power(net, v, d, s_bus, s_load).real - d.p)
            elif d.kind == "pq":
                s = _metered_power(net, v, d, s_bus, s_load)
                out += [s.real - d.p, s.imag - d.q]
        return np.array(out)

    xv = np.concatenate([np.full(len(ang_idx), slack_angle), np.ones(len(mag_idx))])
    eps = 1e-7
    f = residual(xv)
    it = 0
    while np.max(np.abs(f), initial=0.0) > tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"power flow did not converge in {max_iter} iterations "
                f"(max mismatch {np.max(np.abs(f)):.3e} pu)",
                float(np.max(np.abs(f))),
            )
        jac = np.empty((f.size, xv.size))
        for k in range(xv.size):
            step = np.zeros_like(xv)
            step[k] = eps
            jac[:, k] = (residual(xv + step) - residual(xv - step)) / (2 * eps)
        try:
            xv = xv - np.linalg.solve(jac, f)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular power-flow Jacobian") from exc
        f = residual(xv)
        it += 1

    v = unpack(xv)
    s_bus = v * np.conj(y @ v)
    voltages = {b: complex(v[i]) for i, b in enumerate(names)}
    setpoints = {}
    for d in dispatch:
        s = _metered_power(net, v, d, s_bus, s_load)
        vf = v[net.index(d.bus)]
        setpoints[d.bus] = SourceSetpoint(float(s.real), float(s.imag), float(abs(vf)),
                                          float(np.angle(vf)))
    frozen = net.with_frozen_loads(voltages)
    return OperatingPoint(frozen, voltages, setpoints, float(np.max(np.abs(f), initial=0.0)), it)


# ------------------------------------------------------------ network solve


@dataclass(frozen=True)
class NetworkSolution:
    voltages: Mapping[str, complex]
    source_currents: Mapping[str, complex]
    residual: float


def solve_network(
    network: NetworkModel,
    sources: Mapping[str, tuple[complex, complex]],
) -> NetworkSolution:
    """Solve bus voltages for Thevenin sources ``{bus: (e, z)}`` attached to
    the network. Source currents are positive into the network."""
    y = np.array(network.y_bus)
    inj = np.zeros(len(network.nodes), dtype=complex)
    for bus, (e, z) in sources.items():
        i = network.index(bus)
        y[i, i] += 1.0 / z
        inj[i] += e / z
    try:
        v = np.linalg.solve(y, inj)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular network matrix") from exc
    if not np.all(np.isfinite(v)):
        raise NumericalError("singular network matrix")
    scale = max(1.0, float(np.max(np.abs(inj), initial=0.0)))
    residual = float(np.max(np.abs(y @ v - inj), initial=0.0)) / scale
    voltages = {name: complex(v[i]) for i, name in enumerate(network.nodes)}
    currents = {bus: complex((e - v[network.index(bus)]) / z) for bus, (e, z) in sources.items()}
    return NetworkSolution(voltages, currents, residual)


def transfer_impedance(
    network: NetworkModel, inject: Sequence[str], observe: Sequence[str]
) -> np.ndarray:
    """Columns of the bus impedance matrix: voltage at ``observe`` per unit
    current injected at ``inject``."""
    y = network.y_bus
    rhs = np.zeros((len(network.nodes), len(inject)), dtype=complex)
    for k, bus in enumerate(inject):
        rhs[network.index(bus), k] = 1.0
    try:
        z = np.linalg.solve(y, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular network matrix") from exc
    rows = [network.index(b) for b in observe]
    return z[rows, :]
