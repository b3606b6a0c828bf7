import pytest

from ionroute.circuit import Circuit
from ionroute.machine import Machine, MachineState, Topology


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """Record one acceptance line, then assert it."""
    def check(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        print(line)
        assert ok, line
    return check


def two_trap_machine(capacity=4, comm=1):
    return Machine(Topology.linear(2, capacity, comm))


def pingpong_setup():
    """Two traps of capacity 4; ions {0,1} in T0 and {2,3,4} in T1.

    Gates A..D: MS(1,2), MS(2,3), MS(1,2), MS(2,4). Ion 2 ping-pongs under the
    excess-capacity rule.
    """
    machine = two_trap_machine()
    state = MachineState(machine, [[0, 1], [2, 3, 4]])
    circuit = Circuit.from_pairs(5, [(1, 2), (2, 3), (1, 2), (2, 4)])
    return machine, state, circuit


def reorder_setup():
    """T1 full. gA = MS(2,3) wants ion 2 into T1; gB = MS(4,0) in the same layer moves ion 4 out of T1."""
    machine = two_trap_machine()
    state = MachineState(machine, [[0, 1, 2], [3, 4, 5, 6]])
    circuit = Circuit.from_pairs(7, [(2, 3), (4, 0), (2, 5), (4, 1), (2, 6)])
    return machine, state, circuit


def blocked_setup():
    """L6 with capacity 4: T4 full, T0..T3 and T5 have room; ion 6 sits in T3."""
    machine = Machine(Topology.linear(6, 4, 1))
    chains = [[0, 1], [2, 3], [4, 5], [6, 7, 8], [9, 10, 11, 12], [13, 14, 15]]
    return machine, MachineState(machine, chains)


def layered_circuit():
    # ions and layers are 0-based
    return Circuit.from_pairs(6, [(0, 1), (2, 3), (4, 5), (1, 2), (3, 4), (5, 0), (0, 1), (2, 3)])


@pytest.fixture
def pingpong():
    return pingpong_setup()


@pytest.fixture
def reorder_case():
    return reorder_setup()


@pytest.fixture
def blocked():
    return blocked_setup()
