"""Shuttle-aware compiler and cost simulator for multi-trap trapped-ion machines."""
from .circuit import Circuit, DependencyDag, Gate, GateKind, build_dag, is_valid_order, parse_circuit, topo_order
from .compiler import CompiledProgram, compare, compile_circuit, initial_map, route_ion
from .machine import Machine, MachineState, PhysicalParams, Topology, gate_fidelity, program_fidelity
from .policy import DirectionPolicy, IonSelection, PolicyConfig, RebalancePolicy

__all__ = [
    "Circuit", "CompiledProgram", "DependencyDag", "DirectionPolicy", "Gate", "GateKind", "IonSelection",
    "Machine", "MachineState", "PhysicalParams", "PolicyConfig", "RebalancePolicy", "Topology",
    "build_dag", "compare", "compile_circuit", "gate_fidelity", "initial_map", "is_valid_order",
    "parse_circuit", "program_fidelity", "route_ion", "topo_order",
]
