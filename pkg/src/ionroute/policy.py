"""Shuttle decision heuristics.

Two shuttle-direction policies (excess capacity, future-ops move score),
opportunistic gate re-ordering, two rebalancing destination rules and two
eviction ion selectors.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Collection, Iterable, Iterator, Sequence

from .circuit import DependencyDag, Gate
from .machine import MachineError, MachineState, Topology


class DirectionPolicy(Enum):
    EXCESS_CAPACITY = "baseline"
    FUTURE_OPS = "futureops"


class RebalancePolicy(Enum):
    FROM_TRAP_ZERO = "trap0"
    NEAREST_NEIGHBOR_FIRST = "nnf"


class IonSelection(Enum):
    FIRST = "first"
    MAX_SCORE = "maxscore"


class NoFreeTrapError(MachineError):
    pass


@dataclass(frozen=True)
class PolicyConfig:
    direction_policy: DirectionPolicy = DirectionPolicy.FUTURE_OPS
    proximity_threshold: int = 6
    reorder_enabled: bool = True
    rebalance_policy: RebalancePolicy = RebalancePolicy.NEAREST_NEIGHBOR_FIRST
    ion_selection: IonSelection = IonSelection.MAX_SCORE
    wd: float = 0.5
    ws: float = 0.5
    tie_wd: float = 0.49
    tie_ws: float = 0.51
    # apply the proximity window when scoring eviction candidates
    ion_selection_proximity: bool = True
    # when the favourable destination is full and no reorder applies, move the other ion if it can
    fallback_flip: bool = False

    def __post_init__(self):
        if self.proximity_threshold < 0:
            raise ValueError("proximity_threshold must be >= 0")
        if min(self.wd, self.ws, self.tie_wd, self.tie_ws) < 0:
            raise ValueError("score weights must be >= 0")

    @classmethod
    def baseline(cls) -> "PolicyConfig":
        return cls(
            direction_policy=DirectionPolicy.EXCESS_CAPACITY,
            reorder_enabled=False,
            rebalance_policy=RebalancePolicy.FROM_TRAP_ZERO,
            ion_selection=IonSelection.FIRST,
        )

    @classmethod
    def optimized(cls) -> "PolicyConfig":
        return cls()

    def replace(self, **changes) -> "PolicyConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {k: (v.value if isinstance(v, Enum) else v) for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        enums = {
            "direction_policy": DirectionPolicy,
            "rebalance_policy": RebalancePolicy,
            "ion_selection": IonSelection,
        }
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown policy keys: {sorted(unknown)}")
        kwargs = {k: (enums[k](v) if k in enums else v) for k, v in data.items()}
        return cls(**kwargs)


@dataclass(frozen=True)
class Direction:
    ion: int
    src: int
    dst: int


def _hosting_traps(state: MachineState, gate: Gate) -> tuple[int, int]:
    a, b = gate.operands
    ta, tb = state.trap_of[a], state.trap_of[b]
    if ta == tb:
        raise MachineError(f"gate {gate.id}: operands already co-located in trap {ta}")
    return ta, tb


def baseline_direction(state: MachineState, gate: Gate) -> Direction:
    """Move towards the trap with more free space; on a tie move the first operand."""
    ta, tb = _hosting_traps(state, gate)
    a, b = gate.operands
    if state.excess_capacity(ta) <= state.excess_capacity(tb):
        return Direction(a, ta, tb)
    return Direction(b, tb, ta)


def proximity_window(remaining: Iterable[Gate], ions: Collection[int], proximity: int) -> Iterator[Gate]:
    """Yield upcoming 2-qubit gates touching ``ions``.

    The first related gate is always taken; after that the scan stops once
    more than ``proximity`` unrelated 2-qubit gates separate two related ones.
    """
    distance = 0
    started = False
    for g in remaining:
        if not g.is_two_qubit:
            continue
        a, b = g.operands
        if a in ions or b in ions:
            distance = 0
            started = True
            yield g
        elif started:
            distance += 1
            if distance > proximity:
                return


def move_score(state: MachineState, gate: Gate, candidate: Direction,
               remaining: Iterable[Gate], proximity: int) -> int:
    """Near-future gates of either operand whose partner currently sits in the candidate destination."""
    ops = gate.operands
    trap_of = state.trap_of
    score = 0
    for g in proximity_window(remaining, ops, proximity):
        for ion in ops:
            if ion in g.operands and trap_of[g.partner(ion)] == candidate.dst:
                score += 1
    return score


def future_ops_direction(state: MachineState, gate: Gate, remaining: Sequence[Gate],
                         config: PolicyConfig) -> Direction:
    ta, tb = _hosting_traps(state, gate)
    a, b = gate.operands
    move_a = Direction(a, ta, tb)
    move_b = Direction(b, tb, ta)
    score_a = move_score(state, gate, move_a, remaining, config.proximity_threshold)
    score_b = move_score(state, gate, move_b, remaining, config.proximity_threshold)
    if score_a > score_b:
        return move_a
    if score_b > score_a:
        return move_b
    return baseline_direction(state, gate)


def choose_direction(state: MachineState, gate: Gate, remaining: Sequence[Gate],
                     config: PolicyConfig) -> Direction:
    if config.direction_policy is DirectionPolicy.FUTURE_OPS:
        return future_ops_direction(state, gate, remaining, config)
    return baseline_direction(state, gate)


def reorder_gates(active_gate: Gate, old_destination: int, dag: DependencyDag,
                  order: Sequence[int], remaining: Sequence[Gate], state: MachineState,
                  config: PolicyConfig, executed: Collection[int] | None = None) -> tuple[list[int], int | None]:
    """Promote a pending gate that would shuttle an ion out of ``old_destination``.

    ``remaining`` is the pending gate sequence starting at ``active_gate``.
    Returns ``(new_order, promoted_gate_id)``; when nothing qualifies the
    order is returned unchanged with ``None``.
    """
    pending = {g.id: g for g in remaining}
    active_layer = dag.layer_of[active_gate.id]
    candidates = []
    for layer in dag.layers[:active_layer + 1]:
        for gid in sorted(layer):
            if gid == active_gate.id or gid not in pending:
                continue
            # Pending gates in lower layers are normally ready; guard anyway.
            if executed is not None and not all(p in executed for p in dag.preds[gid]):
                continue
            candidates.append(pending[gid])
    for cand in candidates:
        if state.co_located(cand) or not cand.is_two_qubit:
            continue
        rest = [g for g in remaining if g.id != cand.id]
        direction = future_ops_direction(state, cand, rest, config)
        if direction.src == old_destination:
            new_order = [gid for gid in order if gid != cand.id]
            new_order.insert(new_order.index(active_gate.id), cand.id)
            return new_order, cand.id
    return list(order), None


def _free_traps(state: MachineState, blocking_trap: int, exclude: Collection[int]) -> list[int]:
    free = [t for t in range(state.topology.num_traps)
            if t != blocking_trap and state.excess_capacity(t) > 0]
    preferred = [t for t in free if t not in exclude]
    if preferred:
        return preferred
    if free:
        return free
    raise NoFreeTrapError(f"no trap can take an ion evicted from trap {blocking_trap}")


def rebalance_from_trap_zero(state: MachineState, blocking_trap: int,
                             exclude: Collection[int] = ()) -> int:
    return _free_traps(state, blocking_trap, exclude)[0]


def rebalance_nearest_neighbor(state: MachineState, blocking_trap: int, topology: Topology | None = None,
                               exclude: Collection[int] = ()) -> int:
    topology = topology or state.topology
    candidate_dist = {t: topology.distance(blocking_trap, t)
                      for t in _free_traps(state, blocking_trap, exclude)}
    return min(candidate_dist, key=lambda t: (candidate_dist[t], t))


def rebalance_destination(state: MachineState, blocking_trap: int, config: PolicyConfig,
                          exclude: Collection[int] = ()) -> int:
    if config.rebalance_policy is RebalancePolicy.NEAREST_NEIGHBOR_FIRST:
        return rebalance_nearest_neighbor(state, blocking_trap, exclude=exclude)
    return rebalance_from_trap_zero(state, blocking_trap, exclude=exclude)


def ion_score(state: MachineState, ion: int, source_trap: int, destination_trap: int,
              remaining: Iterable[Gate], config: PolicyConfig) -> float:
    if config.ion_selection_proximity:
        gates = proximity_window(remaining, (ion,), config.proximity_threshold)
    else:
        gates = (g for g in remaining if g.is_two_qubit and ion in g.operands)
    in_dst = in_src = 0
    for g in gates:
        where = state.trap_of[g.partner(ion)]
        if where == destination_trap:
            in_dst += 1
        elif where == source_trap:
            in_src += 1
    if in_dst == in_src:
        return config.tie_wd * in_dst - config.tie_ws * in_src
    return config.wd * in_dst - config.ws * in_src


def max_score_ion(state: MachineState, source_trap: int, destination_trap: int,
                  remaining: Sequence[Gate], config: PolicyConfig,
                  protected: Collection[int] = ()) -> int:
    chain = [i for i in state.chains[source_trap] if i not in protected]
    if not chain:
        raise MachineError(f"no movable ion in trap {source_trap}")
    scores = {ion: ion_score(state, ion, source_trap, destination_trap, remaining, config)
              for ion in chain}
    return max(sorted(chain), key=lambda ion: scores[ion])


def first_ion(state: MachineState, source_trap: int, protected: Collection[int] = ()) -> int:
    for ion in state.chains[source_trap]:
        if ion not in protected:
            return ion
    raise MachineError(f"no movable ion in trap {source_trap}")


def select_eviction_ion(state: MachineState, source_trap: int, destination_trap: int,
                        remaining: Sequence[Gate], config: PolicyConfig,
                        protected: Collection[int] = ()) -> int:
    if config.ion_selection is IonSelection.MAX_SCORE:
        return max_score_ion(state, source_trap, destination_trap, remaining, config, protected)
    return first_ion(state, source_trap, protected)
