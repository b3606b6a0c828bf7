"""Seeded generators for the benchmark interaction patterns.

Random circuits draw uniformly random distinct qubit pairs from
``random.Random(seed)`` (Mersenne Twister, seeded with the 64-bit seed).
The structured families are deterministic and ignore the seed.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .circuit import Circuit


class Family(Enum):
    RANDOM = "random"
    ALL_TO_ALL = "alltoall"
    NEAREST_NEIGHBOR = "nn"
    SHORT_LONG_RANGE = "shortlong"


@dataclass(frozen=True)
class BenchSpec:
    family: Family
    num_qubits: int
    num_2q_gates: int = 0
    seed: int = 0
    rounds: int = 1

    def __post_init__(self):
        if self.num_qubits < 2:
            raise ValueError("num_qubits must be >= 2")
        if self.num_2q_gates < 0:
            raise ValueError("num_2q_gates must be >= 0")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")

    @property
    def name(self) -> str:
        if self.family is Family.RANDOM:
            return f"random-q{self.num_qubits}-g{self.num_2q_gates}-s{self.seed}"
        return f"{self.family.value}-q{self.num_qubits}-r{self.rounds}"


def random_pairs(num_qubits: int, num_gates: int, seed: int) -> list[tuple[int, int]]:
    rng = random.Random(seed)
    return [tuple(rng.sample(range(num_qubits), 2)) for _ in range(num_gates)]


def all_to_all_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def nearest_neighbor_pairs(n: int, rounds: int) -> list[tuple[int, int]]:
    one_round = [(i, i + 1) for i in range(0, n - 1, 2)] + [(i, i + 1) for i in range(1, n - 1, 2)]
    return one_round * rounds


def short_long_range_pairs(n: int, rounds: int) -> list[tuple[int, int]]:
    half = n // 2
    sweep = [(i, i + 1) for i in range(n - 1)]
    sweep += [(i, (i + half) % n) for i in range(n) if (i + half) % n != i]
    return sweep * rounds


def generate(spec: BenchSpec) -> Circuit:
    n = spec.num_qubits
    if spec.family is Family.RANDOM:
        pairs = random_pairs(n, spec.num_2q_gates, spec.seed)
    elif spec.family is Family.ALL_TO_ALL:
        pairs = all_to_all_pairs(n)
    elif spec.family is Family.NEAREST_NEIGHBOR:
        pairs = nearest_neighbor_pairs(n, spec.rounds)
    else:
        pairs = short_long_range_pairs(n, spec.rounds)
    return Circuit.from_pairs(n, pairs)
