"""End-to-end compilation: initial mapping, the active-gate loop, and shuttle routing."""
from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Collection, Iterator, Sequence

from .circuit import Circuit, DependencyDag, Gate, build_dag, is_valid_order, topo_order
from .machine import (
    InvariantViolation,
    Machine,
    MachineError,
    MachineState,
    OpKind,
    TracedOp,
    program_fidelity,
)
from .policy import (
    Direction,
    PolicyConfig,
    choose_direction,
    rebalance_destination,
    reorder_gates,
    select_eviction_ion,
)


class InfeasibleMachineError(MachineError):
    """The circuit does not fit the machine's initial-load capacity."""


class RoutingError(MachineError):
    pass


@dataclass
class CompiledProgram:
    trace: list[TracedOp]
    shuttle_count: int
    program_fidelity: float
    makespan: float
    compile_time: float
    final_order: list[int]
    config: PolicyConfig
    num_qubits: int
    num_gates: int
    reorders: int = 0
    rebalances: int = 0

    def report(self, omit_timing: bool = False) -> dict:
        return {
            "config": self.config.to_dict(),
            "shuttles": self.shuttle_count,
            "fidelity": self.program_fidelity,
            "makespan_s": self.makespan,
            "compile_time_s": None if omit_timing else self.compile_time,
            "gates": self.num_gates,
            "qubits": self.num_qubits,
            "reorders": self.reorders,
            "rebalances": self.rebalances,
        }

    def format_trace(self) -> str:
        return "".join(op.format() + "\n" for op in self.trace)


def initial_map(circuit: Circuit, machine: Machine, balanced: bool = True) -> MachineState:
    """Greedy partition of qubits into traps, leaving communication capacity free.

    Qubits are placed in order of descending 2-qubit gate count. Each goes to
    the trap holding most of its already-placed partners, breaking ties by
    lighter load and then lower trap index. With ``balanced`` no trap takes
    more than ceil(qubits / traps), so every trap starts populated; otherwise
    traps fill up to total minus communication capacity.
    """
    topo = machine.topology
    n = circuit.num_qubits
    if n > topo.mapping_capacity:
        raise InfeasibleMachineError(
            f"{n} qubits exceed initial-load capacity {topo.mapping_capacity}")
    degree = [0] * n
    partners: list[set[int]] = [set() for _ in range(n)]
    for g in circuit.gates:
        if g.is_two_qubit:
            a, b = g.operands
            degree[a] += 1
            degree[b] += 1
            partners[a].add(b)
            partners[b].add(a)
    limit = [t - c for t, c in zip(topo.total_capacity, topo.communication_capacity)]
    if balanced:
        share = -(-n // topo.num_traps)
        limit = [min(cap, share) for cap in limit]
        # heterogeneous capacities can leave the even share short
        while sum(limit) < n:
            share += 1
            limit = [min(t - c, share) for t, c in zip(topo.total_capacity, topo.communication_capacity)]
    chains: list[list[int]] = [[] for _ in range(topo.num_traps)]
    where: dict[int, int] = {}
    for q in sorted(range(n), key=lambda q: (-degree[q], q)):
        together = defaultdict(int)
        for p in partners[q]:
            if p in where:
                together[where[p]] += 1
        open_traps = [t for t in range(topo.num_traps) if len(chains[t]) < limit[t]]
        best = min(open_traps, key=lambda t: (-together[t], len(chains[t]), t))
        chains[best].append(q)
        where[q] = best
    return MachineState(machine, chains)


class _Upcoming(Sequence):
    """Lazy gate view over ``order[start:]``."""

    def __init__(self, gates: Sequence[Gate], order: list[int], start: int, skip: int | None = None):
        self._gates = gates
        self._order = order
        self._start = start
        self._skip = skip

    def __iter__(self) -> Iterator[Gate]:
        gates, order, skip = self._gates, self._order, self._skip
        for i in range(self._start, len(order)):
            gid = order[i]
            if gid != skip:
                yield gates[gid]

    def __len__(self) -> int:
        return sum(1 for _ in self)

    def __getitem__(self, idx):
        return list(self)[idx]


class _Compilation:
    def __init__(self, circuit: Circuit, machine: Machine, config: PolicyConfig,
                 state: MachineState, audit: bool):
        self.circuit = circuit
        self.gates = circuit.gates
        self.machine = machine
        self.config = config
        self.state = state
        self.audit = audit
        self.dag: DependencyDag = build_dag(circuit)
        self.order: list[int] = topo_order(self.dag)
        self.pos = 0
        self.executed: set[int] = set()
        self.trace: list[TracedOp] = []
        self.reorders = 0
        self.rebalances = 0
        self.num_ions = state.num_ions
        self._last_clock = list(state.clock)

    def upcoming(self, start: int | None = None) -> _Upcoming:
        return _Upcoming(self.gates, self.order, self.pos if start is None else start)

    def run(self) -> None:
        promoted = False
        while self.pos < len(self.order):
            gate = self.gates[self.order[self.pos]]
            if not gate.is_two_qubit or self.state.co_located(gate):
                self.execute(gate)
                promoted = False
                continue
            direction = choose_direction(self.state, gate, self.upcoming(self.pos + 1), self.config)
            if self.state.excess_capacity(direction.dst) == 0:
                if self.config.reorder_enabled and not promoted:
                    new_order, cand = reorder_gates(
                        gate, direction.dst, self.dag, self.order, self.upcoming(),
                        self.state, self.config, self.executed)
                    if cand is not None:
                        self.order = new_order
                        self.reorders += 1
                        # the promoted gate is now active; do not cascade further re-ordering
                        promoted = True
                        continue
                if self.config.fallback_flip:
                    a, b = gate.operands
                    other = b if direction.ion == a else a
                    flipped = Direction(other, direction.dst, direction.src)
                    if self.state.excess_capacity(flipped.dst) > 0:
                        direction = flipped
            self.route_ion(direction.ion, direction.dst, protected=set(gate.operands),
                           reserved={direction.dst})
            self.execute(gate)
            promoted = False

    def execute(self, gate: Gate) -> None:
        self.trace.append(self.state.apply_gate(gate))
        self.executed.add(gate.id)
        self.pos += 1
        self.check()

    def hop(self, ion: int, src: int, dst: int) -> None:
        self.trace.extend(self.state.apply_shuttle_hop(ion, src, dst))
        self.check()

    def check(self) -> None:
        if not self.audit:
            return
        self.state.audit(self.num_ions)
        for t, (old, new) in enumerate(zip(self._last_clock, self.state.clock)):
            if new < old:
                raise InvariantViolation(f"clock of trap {t} went backwards")
        self._last_clock = list(self.state.clock)
        op = self.trace[-1]
        if op.kind is OpKind.GATE and not 0.0 <= op.fidelity <= 1.0:
            raise InvariantViolation(f"gate {op.gate} fidelity {op.fidelity} outside [0, 1]")

    def route_ion(self, ion: int, dst: int, protected: Collection[int], reserved: Collection[int]) -> None:
        """Walk ``ion`` hop by hop along a shortest path, clearing full traps on the way."""
        state = self.state
        topo = state.topology
        protected = set(protected) | {ion}
        while state.trap_of[ion] != dst:
            here = state.trap_of[ion]
            nxt = topo.shortest_path(here, dst)[1]
            if state.excess_capacity(nxt) == 0:
                self.clear_block(nxt, protected, set(reserved) | {nxt})
            self.hop(ion, here, nxt)

    def clear_block(self, blocked: int, protected: set[int], reserved: set[int]) -> None:
        """Free one slot in the full trap ``blocked`` by evicting towards a rebalance destination.

        Full traps along the eviction path each pass one ion on to the next
        full trap (or the destination). Segments run from the far end first,
        so every hop lands in a trap with room and nothing re-enters
        ``blocked``. Hop count equals the path length either way.
        """
        state = self.state
        topo = state.topology
        dest = rebalance_destination(state, blocked, self.config, exclude=reserved)
        path = topo.shortest_path(blocked, dest)
        stops = [0] + [i for i in range(1, len(path) - 1) if state.excess_capacity(path[i]) == 0]
        stops.append(len(path) - 1)
        upcoming = self.upcoming()
        for s in range(len(stops) - 2, -1, -1):
            src, seg_dst = path[stops[s]], path[stops[s + 1]]
            ion = select_eviction_ion(state, src, seg_dst, upcoming, self.config, protected)
            self.rebalances += 1
            for i in range(stops[s], stops[s + 1]):
                self.hop(ion, path[i], path[i + 1])
        if state.excess_capacity(blocked) == 0:
            raise RoutingError(f"trap {blocked} still full after eviction")


def compile_circuit(circuit: Circuit, machine: Machine | None = None,
                    config: PolicyConfig | None = None,
                    initial_state: MachineState | None = None,
                    audit: bool = False, balanced_mapping: bool = True) -> CompiledProgram:
    """Schedule ``circuit`` on ``machine``, inserting shuttles as the policy dictates.

    ``initial_state`` overrides the greedy initial mapping (it is copied, not
    mutated). With ``audit`` every primitive is followed by an invariant check.
    """
    machine = machine or Machine()
    config = config or PolicyConfig()
    started = time.perf_counter()
    if initial_state is None:
        state = initial_map(circuit, machine, balanced=balanced_mapping)
    else:
        state = initial_state.copy()
        if state.num_ions < circuit.num_qubits:
            raise InfeasibleMachineError("initial state holds fewer ions than the circuit has qubits")
    comp = _Compilation(circuit, machine, config, state, audit)
    comp.run()
    elapsed = time.perf_counter() - started
    if audit:
        if sorted(op.gate for op in comp.trace if op.kind is OpKind.GATE) != list(range(len(circuit))):
            raise InvariantViolation("trace does not execute every gate exactly once")
        if not is_valid_order(comp.dag, comp.order):
            raise InvariantViolation("final order violates gate dependencies")
        if sum(op.kind is OpKind.MOVE for op in comp.trace) != state.shuttle_count:
            raise InvariantViolation("shuttle counter disagrees with MOVE ops")
    return CompiledProgram(
        trace=comp.trace,
        shuttle_count=state.shuttle_count,
        program_fidelity=program_fidelity(comp.trace),
        makespan=state.makespan,
        compile_time=elapsed,
        final_order=list(comp.order),
        config=config,
        num_qubits=circuit.num_qubits,
        num_gates=len(circuit),
        reorders=comp.reorders,
        rebalances=comp.rebalances,
    )


def route_ion(state: MachineState, ion: int, dst_trap: int, config: PolicyConfig | None = None,
              remaining: Sequence[Gate] = (), protected: Collection[int] = ()) -> list[TracedOp]:
    """Move ``ion`` to ``dst_trap`` on ``state`` in place, resolving traffic blocks.

    ``remaining`` feeds max-score eviction choices. Returns the emitted primitives.
    """
    if state.trap_of[ion] == dst_trap:
        raise MachineError(f"ion {ion} is already in trap {dst_trap}")
    gates = tuple(remaining)
    circuit = Circuit(max([state.num_ions] + [q + 1 for g in gates for q in g.operands]),
                      tuple(Gate(i, g.kind, g.operands) for i, g in enumerate(gates)))
    comp = _Compilation(circuit, state.machine, config or PolicyConfig(), state, audit=False)
    comp.route_ion(ion, dst_trap, protected=set(protected), reserved={dst_trap})
    return comp.trace


@dataclass
class Comparison:
    """Per-config results on one circuit, with deltas of every config against the first."""

    labels: list[str]
    results: list[CompiledProgram]
    name: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def baseline(self) -> CompiledProgram:
        return self.results[0]

    def deltas(self) -> list[dict]:
        base = self.baseline
        out = []
        for label, r in zip(self.labels[1:], self.results[1:]):
            delta = base.shuttle_count - r.shuttle_count
            out.append({
                "config": label,
                "delta_shuttles": delta,
                "pct_delta": 100.0 * delta / base.shuttle_count if base.shuttle_count else 0.0,
                "fidelity_ratio": (r.program_fidelity / base.program_fidelity
                                   if base.program_fidelity > 0 else None),
                "compile_time_delta_s": r.compile_time - base.compile_time,
            })
        return out


def compare(circuit: Circuit, machine: Machine, configs: Sequence[PolicyConfig],
            labels: Sequence[str] | None = None, name: str = "",
            initial_state: MachineState | None = None, balanced_mapping: bool = True) -> Comparison:
    if len(configs) < 2:
        raise ValueError("compare needs at least two configs")
    labels = list(labels) if labels is not None else [f"config{i}" for i in range(len(configs))]
    results = [compile_circuit(circuit, machine, c, initial_state=initial_state,
                               balanced_mapping=balanced_mapping) for c in configs]
    return Comparison(labels, results, name=name)
