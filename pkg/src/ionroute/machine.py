"""Trap topology, physical cost model, and the mutable ion placement state."""
from __future__ import annotations

import configparser
import math
from collections import deque
from dataclasses import dataclass, field, fields
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .circuit import Gate


class MachineError(Exception):
    """A primitive was issued against a state that does not permit it."""


class CapacityError(MachineError):
    pass


class InvariantViolation(AssertionError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    num_traps: int
    edges: tuple[tuple[int, int], ...]
    total_capacity: tuple[int, ...]
    communication_capacity: tuple[int, ...]
    _adj: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _dist: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.num_traps
        if n < 1:
            raise ValueError("need at least one trap")
        if len(self.total_capacity) != n or len(self.communication_capacity) != n:
            raise ValueError("per-trap capacity lists must have num_traps entries")
        adj: list[set[int]] = [set() for _ in range(n)]
        for a, b in self.edges:
            if a == b:
                raise ValueError(f"self-loop on trap {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) out of range")
            adj[a].add(b)
            adj[b].add(a)
        for t in range(n):
            if not 0 <= self.communication_capacity[t] < self.total_capacity[t]:
                raise ValueError(f"trap {t}: need 0 <= communication_capacity < total_capacity")
        object.__setattr__(self, "_adj", tuple(tuple(sorted(s)) for s in adj))
        dist = tuple(tuple(self._bfs(t)) for t in range(n))
        if any(d < 0 for row in dist for d in row):
            raise ValueError("trap topology is not connected")
        object.__setattr__(self, "_dist", dist)

    @classmethod
    def linear(cls, num_traps: int = 6, total_capacity: int = 17,
               communication_capacity: int = 2) -> "Topology":
        return cls(
            num_traps,
            tuple((i, i + 1) for i in range(num_traps - 1)),
            (total_capacity,) * num_traps,
            (communication_capacity,) * num_traps,
        )

    def _bfs(self, src: int) -> list[int]:
        dist = [-1] * self.num_traps
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def neighbors(self, trap: int) -> tuple[int, ...]:
        return self._adj[trap]

    def is_edge(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def distance(self, a: int, b: int) -> int:
        return self._dist[a][b]

    def shortest_path(self, src: int, dst: int) -> list[int]:
        """Trap sequence from src to dst inclusive; at each step the lowest-index neighbor closer to dst."""
        path = [src]
        while path[-1] != dst:
            here = path[-1]
            path.append(next(v for v in self._adj[here]
                             if self._dist[v][dst] == self._dist[here][dst] - 1))
        return path

    @property
    def mapping_capacity(self) -> int:
        return sum(t - c for t, c in zip(self.total_capacity, self.communication_capacity))


@dataclass(frozen=True)
class PhysicalParams:
    # Order-of-magnitude placeholders; override per experiment.
    gamma: float = 1.0
    tau_2q: float = 100e-6
    tau_1q: float = 10e-6
    a0: float = 0.001
    shuttle_move_time: float = 100e-6
    split_time: float = 80e-6
    merge_time: float = 80e-6
    merge_heating: float = 3.0
    nbar_initial: float = 0.5
    background_heating_rate: float = 0.1

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    @property
    def hop_time(self) -> float:
        return self.split_time + self.shuttle_move_time + self.merge_time


@dataclass(frozen=True)
class Machine:
    topology: Topology = field(default_factory=Topology.linear)
    params: PhysicalParams = field(default_factory=PhysicalParams)

    @property
    def num_traps(self) -> int:
        return self.topology.num_traps


def chain_scale(params: PhysicalParams, chain_length: int) -> float:
    """A(k) = a0 * k / ln k, pinned to a0 for a single ion."""
    if chain_length <= 1:
        return params.a0
    return params.a0 * chain_length / math.log(chain_length)


def gate_fidelity(params: PhysicalParams, num_qubits_in_chain: int, nbar: float, tau: float) -> float:
    f = 1.0 - params.gamma * tau - chain_scale(params, num_qubits_in_chain) * (2.0 * nbar + 1.0)
    return min(1.0, max(0.0, f))


class OpKind(Enum):
    GATE = "GATE"
    SPLIT = "SPLIT"
    MOVE = "MOVE"
    MERGE = "MERGE"


@dataclass(frozen=True)
class TracedOp:
    kind: OpKind
    start: float
    duration: float
    gate: int | None = None
    trap: int | None = None
    ion: int | None = None
    src: int | None = None
    dst: int | None = None
    fidelity: float | None = None

    @property
    def end(self) -> float:
        return self.start + self.duration

    def format(self) -> str:
        head = f"t={self.start:.9f} {self.kind.value}"
        if self.kind is OpKind.GATE:
            return f"{head} gate={self.gate} trap={self.trap} dur={self.duration:.9f} fid={self.fidelity:.12f}"
        if self.kind is OpKind.MOVE:
            return f"{head} ion={self.ion} from={self.src} to={self.dst} dur={self.duration:.9f}"
        return f"{head} ion={self.ion} trap={self.trap} dur={self.duration:.9f}"


def program_fidelity(trace: Iterable[TracedOp]) -> float:
    result = 1.0
    for op in trace:
        if op.kind is OpKind.GATE:
            result *= op.fidelity
    return result


class MachineState:
    """Ion placement, per-trap motional mode and clocks. One compilation owns one state."""

    def __init__(self, machine: Machine, chains: Sequence[Sequence[int]]):
        topo = machine.topology
        if len(chains) != topo.num_traps:
            raise ValueError(f"expected {topo.num_traps} chains, got {len(chains)}")
        self.machine = machine
        self.chains: list[list[int]] = [list(c) for c in chains]
        ions = [i for c in self.chains for i in c]
        if len(set(ions)) != len(ions):
            raise ValueError("an ion appears in more than one chain slot")
        num_ions = max(ions, default=-1) + 1
        self.trap_of: list[int] = [-1] * num_ions
        for t, chain in enumerate(self.chains):
            if len(chain) > topo.total_capacity[t]:
                raise CapacityError(f"trap {t} loaded beyond capacity")
            for ion in chain:
                self.trap_of[ion] = t
        if -1 in self.trap_of:
            raise ValueError("ion indices must be dense from 0")
        p = machine.params
        self.nbar: list[float] = [p.nbar_initial] * topo.num_traps
        self.clock: list[float] = [0.0] * topo.num_traps
        self.shuttle_count = 0

    @property
    def topology(self) -> Topology:
        return self.machine.topology

    @property
    def num_ions(self) -> int:
        return len(self.trap_of)

    def copy(self) -> "MachineState":
        other = MachineState.__new__(MachineState)
        other.machine = self.machine
        other.chains = [list(c) for c in self.chains]
        other.trap_of = list(self.trap_of)
        other.nbar = list(self.nbar)
        other.clock = list(self.clock)
        other.shuttle_count = self.shuttle_count
        return other

    def excess_capacity(self, trap: int) -> int:
        if not 0 <= trap < self.topology.num_traps:
            raise IndexError(f"trap {trap} out of range")
        return self.topology.total_capacity[trap] - len(self.chains[trap])

    def co_located(self, gate: Gate) -> bool:
        return len({self.trap_of[q] for q in gate.operands}) == 1

    @property
    def makespan(self) -> float:
        return max(self.clock)

    def apply_gate(self, gate: Gate) -> TracedOp:
        if not self.co_located(gate):
            raise MachineError(f"gate {gate.id}: operands in different traps")
        p = self.machine.params
        trap = self.trap_of[gate.operands[0]]
        tau = p.tau_2q if gate.is_two_qubit else p.tau_1q
        fid = gate_fidelity(p, len(self.chains[trap]), self.nbar[trap], tau)
        op = TracedOp(OpKind.GATE, self.clock[trap], tau, gate=gate.id, trap=trap, fidelity=fid)
        self.clock[trap] += tau
        self.nbar[trap] += p.background_heating_rate * tau
        return op

    def apply_shuttle_hop(self, ion: int, src: int, dst: int) -> list[TracedOp]:
        if not self.topology.is_edge(src, dst):
            raise MachineError(f"traps {src} and {dst} are not adjacent")
        if self.trap_of[ion] != src:
            raise MachineError(f"ion {ion} is not in trap {src}")
        if self.excess_capacity(dst) <= 0:
            raise CapacityError(f"trap {dst} is full")
        p = self.machine.params
        t0 = max(self.clock[src], self.clock[dst])
        t1 = t0 + p.split_time
        t2 = t1 + p.shuttle_move_time
        ops = [
            TracedOp(OpKind.SPLIT, t0, p.split_time, trap=src, ion=ion),
            TracedOp(OpKind.MOVE, t1, p.shuttle_move_time, ion=ion, src=src, dst=dst),
            TracedOp(OpKind.MERGE, t2, p.merge_time, trap=dst, ion=ion),
        ]
        self.chains[src].remove(ion)
        self.chains[dst].append(ion)
        self.trap_of[ion] = dst
        self.nbar[dst] += p.merge_heating
        self.clock[src] = self.clock[dst] = t2 + p.merge_time
        self.shuttle_count += 1
        return ops

    def audit(self, num_ions: int | None = None) -> None:
        """Raise InvariantViolation if placement bookkeeping or capacity is broken."""
        topo = self.topology
        expected = self.num_ions if num_ions is None else num_ions
        seen = sorted(i for c in self.chains for i in c)
        if seen != list(range(expected)):
            raise InvariantViolation("ion set not conserved")
        for t, chain in enumerate(self.chains):
            if len(chain) > topo.total_capacity[t]:
                raise InvariantViolation(f"trap {t} over capacity")
            for ion in chain:
                if self.trap_of[ion] != t:
                    raise InvariantViolation(f"trap_of[{ion}] disagrees with chains")
            if self.nbar[t] < 0 or self.clock[t] < 0:
                raise InvariantViolation(f"trap {t}: negative nbar or clock")


# --- machine config files -------------------------------------------------

def _int_list(value: str, n: int, key: str) -> tuple[int, ...]:
    parts = [p.strip() for p in value.split(",") if p.strip()]
    try:
        nums = [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected integer(s), got {value!r}") from exc
    if len(nums) == 1:
        return tuple(nums) * n
    if len(nums) != n:
        raise ConfigError(f"{key}: expected 1 or {n} values, got {len(nums)}")
    return tuple(nums)


def _parse_edges(value: str, n: int) -> tuple[tuple[int, int], ...]:
    value = value.strip().lower()
    if value == "linear":
        return tuple((i, i + 1) for i in range(n - 1))
    if value == "ring":
        return tuple((i, (i + 1) % n) for i in range(n)) if n > 2 else tuple((i, i + 1) for i in range(n - 1))
    edges = []
    for item in value.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            a, b = (int(x) for x in item.split("-"))
        except ValueError as exc:
            raise ConfigError(f"edges: bad pair {item!r}, expected 'a-b'") from exc
        edges.append((a, b))
    return tuple(edges)


def parse_machine_config(text: str) -> Machine:
    """Parse an INI-style machine description with [topology] and [physics] sections.

    Missing keys fall back to the L6 machine (6 linear traps, capacity 17,
    communication capacity 2) and the default PhysicalParams.
    """
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    topo = cp["topology"] if cp.has_section("topology") else {}
    try:
        n = int(topo.get("traps", 6))
    except ValueError as exc:
        raise ConfigError("traps: expected an integer") from exc
    try:
        topology = Topology(
            n,
            _parse_edges(topo.get("edges", "linear"), n),
            _int_list(topo.get("total_capacity", "17"), n, "total_capacity"),
            _int_list(topo.get("communication_capacity", "2"), n, "communication_capacity"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    kwargs = {}
    if cp.has_section("physics"):
        known = {f.name for f in fields(PhysicalParams)}
        for key, value in cp["physics"].items():
            if key not in known:
                raise ConfigError(f"unknown physics parameter {key!r}")
            try:
                kwargs[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: expected a number, got {value!r}") from exc
    try:
        params = PhysicalParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return Machine(topology, params)


def load_machine(path: str | Path) -> Machine:
    return parse_machine_config(Path(path).read_text(encoding="utf-8"))


def format_machine_config(machine: Machine) -> str:
    topo = machine.topology
    lines = [
        "[topology]",
        f"traps = {topo.num_traps}",
        "edges = " + ", ".join(f"{a}-{b}" for a, b in topo.edges),
        "total_capacity = " + ", ".join(map(str, topo.total_capacity)),
        "communication_capacity = " + ", ".join(map(str, topo.communication_capacity)),
        "",
        "[physics]",
    ]
    lines += [f"{f.name} = {getattr(machine.params, f.name)!r}" for f in fields(PhysicalParams)]
    return "\n".join(lines) + "\n"
