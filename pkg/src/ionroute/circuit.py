"""Circuit representation, text format, and the layered gate dependency DAG.

Circuit text format::

    # comment
    qubits 6
    ms q[0], q[1]
    sq q[4]
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence


class GateKind(Enum):
    MS = "ms"
    SQ = "sq"

    @property
    def arity(self) -> int:
        return 2 if self is GateKind.MS else 1


class CircuitParseError(ValueError):
    """Malformed circuit text. ``lineno`` is 1-based, or None for whole-file errors."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        prefix = f"line {lineno}: " if lineno is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Gate:
    id: int
    kind: GateKind
    operands: tuple[int, ...]

    @property
    def is_two_qubit(self) -> bool:
        return self.kind is GateKind.MS

    def partner(self, qubit: int) -> int:
        a, b = self.operands
        return b if qubit == a else a

    def __str__(self) -> str:
        args = ", ".join(f"q[{q}]" for q in self.operands)
        return f"{self.kind.value} {args}"


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.num_qubits < 0:
            raise ValueError("num_qubits must be non-negative")
        for pos, g in enumerate(self.gates):
            if g.id != pos:
                raise ValueError(f"gate id {g.id} at position {pos}")
            if len(g.operands) != g.kind.arity:
                raise ValueError(f"gate {g.id}: {g.kind.name} takes {g.kind.arity} operand(s)")
            if len(set(g.operands)) != len(g.operands):
                raise ValueError(f"gate {g.id}: duplicate operand")
            for q in g.operands:
                if not 0 <= q < self.num_qubits:
                    raise ValueError(f"gate {g.id}: qubit {q} out of range")

    @classmethod
    def from_pairs(cls, num_qubits: int, ops: Iterable[Sequence[int] | int]) -> "Circuit":
        """Build a circuit from operand tuples; a 2-tuple is MS, a bare int or 1-tuple is SQ."""
        gates = []
        for i, op in enumerate(ops):
            operands = (op,) if isinstance(op, int) else tuple(op)
            kind = GateKind.MS if len(operands) == 2 else GateKind.SQ
            gates.append(Gate(i, kind, operands))
        return cls(num_qubits, tuple(gates))

    @property
    def num_two_qubit_gates(self) -> int:
        return sum(1 for g in self.gates if g.is_two_qubit)

    def __len__(self) -> int:
        return len(self.gates)


_HEADER = re.compile(r"^qubits\s+(\d+)$", re.IGNORECASE)
_GATE = re.compile(r"^(ms|sq)\s+(.*)$", re.IGNORECASE)
_OPERAND = re.compile(r"^q\s*\[\s*(\d+)\s*\]$", re.IGNORECASE)


def parse_circuit(text: str) -> Circuit:
    num_qubits: int | None = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if num_qubits is None:
            m = _HEADER.match(line)
            if not m:
                raise CircuitParseError("expected 'qubits N' header", lineno)
            num_qubits = int(m.group(1))
            continue
        m = _GATE.match(line)
        if not m:
            raise CircuitParseError(f"unrecognized statement {line!r}", lineno)
        kind = GateKind(m.group(1).lower())
        args = [a.strip() for a in m.group(2).split(",")]
        if len(args) != kind.arity:
            raise CircuitParseError(f"{kind.name} takes {kind.arity} operand(s), got {len(args)}", lineno)
        operands = []
        for a in args:
            om = _OPERAND.match(a)
            if not om:
                raise CircuitParseError(f"bad operand {a!r}", lineno)
            q = int(om.group(1))
            if q >= num_qubits:
                raise CircuitParseError(f"qubit {q} out of range for {num_qubits} qubits", lineno)
            operands.append(q)
        if len(set(operands)) != len(operands):
            raise CircuitParseError("duplicate operand", lineno)
        gates.append(Gate(len(gates), kind, tuple(operands)))
    if num_qubits is None:
        raise CircuitParseError("missing 'qubits N' header")
    return Circuit(num_qubits, tuple(gates))


def serialize_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.num_qubits}"]
    lines.extend(str(g) for g in circuit.gates)
    return "\n".join(lines) + "\n"


def load_circuit(path: str | Path) -> Circuit:
    return parse_circuit(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class DependencyDag:
    layers: tuple[tuple[int, ...], ...]
    preds: tuple[frozenset[int], ...]
    layer_of: tuple[int, ...]

    @property
    def num_gates(self) -> int:
        return len(self.layer_of)


def build_dag(circuit: Circuit) -> DependencyDag:
    """ASAP layering: a gate sits one layer below its deepest predecessor."""
    last_on: dict[int, int] = {}
    preds: list[frozenset[int]] = []
    layer_of: list[int] = []
    for g in circuit.gates:
        p = frozenset(last_on[q] for q in g.operands if q in last_on)
        preds.append(p)
        layer_of.append(1 + max((layer_of[i] for i in p), default=-1))
        for q in g.operands:
            last_on[q] = g.id
    layers: list[list[int]] = [[] for _ in range(max(layer_of, default=-1) + 1)]
    for gid, layer in enumerate(layer_of):
        layers[layer].append(gid)
    return DependencyDag(
        layers=tuple(tuple(layer) for layer in layers),
        preds=tuple(preds),
        layer_of=tuple(layer_of),
    )


def topo_order(dag: DependencyDag) -> list[int]:
    """Earliest-ready-first order: layer by layer, ascending gate id inside a layer."""
    return [gid for layer in dag.layers for gid in sorted(layer)]


def is_valid_order(dag: DependencyDag, order: Sequence[int]) -> bool:
    n = dag.num_gates
    if len(order) != n or sorted(order) != list(range(n)):
        raise ValueError("order is not a permutation of the gate ids")
    position = [0] * n
    for pos, gid in enumerate(order):
        position[gid] = pos
    return all(position[p] < position[g] for g in range(n) for p in dag.preds[g])
