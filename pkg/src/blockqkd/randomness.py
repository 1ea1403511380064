"""Single randomness source for a session: a seeded PRNG behind a bit ledger.

Every random bit a party consumes is drawn through :class:`BitSource` and
charged to a (party, stage) ledger entry, so randomness consumption is an
exact measured quantity rather than an estimate. Sampling primitives are
bit-exact:

- ``randbelow(n)`` draws ceil(log2 n) bits and rejects out-of-range values,
  re-drawing until accepted; every drawn bit is counted, rejected or not.
- ``bernoulli(p)`` refines a uniform binary expansion one bit at a time and
  stops as soon as the outcome is decided. A deterministic branch
  (p within 1e-12 of 0 or 1) consumes no bits; p = 1/2 consumes exactly one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import random

import numpy as np

PARTIES = ("alice", "bob", "eve", "shared")
STAGES = (
    "alice_basis",
    "alice_bits",
    "bob_basis",
    "bob_measurement",
    "sampling",
    "ec_permutation",
    "pa_seed",
    "attack",
)

DETERMINISTIC_EPS = 1e-12


@dataclass
class RandomnessLedger:
    """Bit counts per (party, stage). Counts never decrease within a session."""

    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def record(self, party: str, stage: str, bits: int) -> None:
        if party not in PARTIES:
            raise ValueError(f"unknown party {party!r}")
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        if bits < 0:
            raise ValueError("bit count must be non-negative")
        key = (party, stage)
        self.counts[key] = self.counts.get(key, 0) + bits

    def get(self, party: str, stage: str) -> int:
        return self.counts.get((party, stage), 0)

    def stage_total(self, stage: str) -> int:
        return sum(v for (_, s), v in self.counts.items() if s == stage)

    def total(self) -> int:
        return sum(self.counts.values())

    def copy(self) -> "RandomnessLedger":
        return RandomnessLedger(dict(self.counts))

    def as_dict(self) -> dict[str, int]:
        """Stage totals in fixed stage order, for serialization."""
        return {stage: self.stage_total(stage) for stage in STAGES}


class StageSource:
    """View of a BitSource bound to one (party, stage) ledger entry.

    This is the ``coin`` handed to measurement code: anything with
    ``bit()``, ``bits(count)`` and ``bernoulli(p)``.
    """

    def __init__(self, source: "BitSource", party: str, stage: str):
        self._source = source
        self.party = party
        self.stage = stage

    def bit(self) -> int:
        return int(self._source.draw_bits(self.party, self.stage, 1)[0])

    def bits(self, count: int) -> np.ndarray:
        return self._source.draw_bits(self.party, self.stage, count)

    def bernoulli(self, p: float) -> int:
        return self._source.bernoulli(self.party, self.stage, p)

    def randbelow(self, n: int) -> int:
        return self._source.randbelow(self.party, self.stage, n)


class BitSource:
    """Seeded deterministic generator wrapped in a RandomnessLedger.

    The underlying generator is ``random.Random(seed)`` (Mersenne Twister),
    whose bit stream is stable across platforms and Python versions. Replaying
    the same seed and draw sequence reproduces both the bits and the ledger.
    """

    def __init__(self, seed: int):
        self._rng = random.Random(seed)
        self.seed = seed
        self.ledger = RandomnessLedger()

    def for_stage(self, party: str, stage: str) -> StageSource:
        return StageSource(self, party, stage)

    def draw_bits(self, party: str, stage: str, count: int) -> np.ndarray:
        """Draw `count` bits, charging the ledger by exactly `count`."""
        if count < 0:
            raise ValueError("count must be non-negative")
        self.ledger.record(party, stage, count)
        if count == 0:
            return np.zeros(0, dtype=np.uint8)
        value = self._rng.getrandbits(count)
        return _int_to_bits(value, count)

    def randbelow(self, party: str, stage: str, n: int) -> int:
        """Uniform integer in [0, n) from ceil(log2 n)-bit draws with rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        width = (n - 1).bit_length()
        while True:
            self.ledger.record(party, stage, width)
            value = self._rng.getrandbits(width)
            if value < n:
                return value

    def bernoulli(self, party: str, stage: str, p: float) -> int:
        """Return 1 with probability p, consuming the minimum number of bits.

        Builds a uniform X in [0,1) one binary digit at a time and answers
        X < p as soon as the remaining interval lies on one side of p.
        """
        if not 0.0 <= p <= 1.0:
            raise ValueError("probability must lie in [0, 1]")
        if p < DETERMINISTIC_EPS:
            return 0
        if p > 1.0 - DETERMINISTIC_EPS:
            return 1
        lo = 0.0
        half = 0.5
        while True:
            self.ledger.record(party, stage, 1)
            if self._rng.getrandbits(1):
                lo += half
            if lo >= p:
                return 0
            if lo + half <= p:
                return 1
            half *= 0.5


def _int_to_bits(value: int, count: int) -> np.ndarray:
    nbytes = (count + 7) // 8
    raw = value.to_bytes(nbytes, "big")
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))
    return bits[-count:].copy()


@dataclass(frozen=True)
class ConsumptionReport:
    """Randomness consumption of one session, grouped for ratio comparisons.

    quantum_phase_alice covers the bits Alice needs before any qubit leaves
    her lab (basis choices plus data bits); quantum_phase_bob covers Bob's
    basis choices. Born-rule sampling (bob_measurement) is simulation
    machinery, not protocol randomness, and is excluded from both.
    """

    raw_qubits: int
    stage_bits: dict[str, int]

    @classmethod
    def from_ledger(cls, ledger: RandomnessLedger, raw_qubits: int) -> "ConsumptionReport":
        return cls(raw_qubits=raw_qubits, stage_bits=ledger.as_dict())

    @property
    def quantum_phase_alice(self) -> int:
        return self.stage_bits["alice_basis"] + self.stage_bits["alice_bits"]

    @property
    def quantum_phase_bob(self) -> int:
        return self.stage_bits["bob_basis"]

    @property
    def quantum_phase_total(self) -> int:
        return self.quantum_phase_alice + self.quantum_phase_bob


@dataclass(frozen=True)
class ConsumptionRatios:
    """Exact per-stage and per-phase ratios between two consumption reports."""

    stage_ratios: dict[str, Fraction | None]
    quantum_phase_alice: Fraction
    quantum_phase_bob: Fraction
    quantum_phase_total: Fraction


def consumption_ratio(
    report: ConsumptionReport, baseline: ConsumptionReport
) -> ConsumptionRatios:
    """Ratios of `report` over `baseline`, as exact rationals.

    Both reports must describe sessions with the same raw-qubit count;
    a stage the baseline never drew from gets ratio None.
    """
    if report.raw_qubits != baseline.raw_qubits:
        raise ValueError(
            f"raw-qubit counts differ: {report.raw_qubits} vs {baseline.raw_qubits}"
        )
    stage_ratios: dict[str, Fraction | None] = {}
    for stage in STAGES:
        denom = baseline.stage_bits[stage]
        num = report.stage_bits[stage]
        stage_ratios[stage] = Fraction(num, denom) if denom else None
    return ConsumptionRatios(
        stage_ratios=stage_ratios,
        quantum_phase_alice=Fraction(
            report.quantum_phase_alice, baseline.quantum_phase_alice
        ),
        quantum_phase_bob=Fraction(report.quantum_phase_bob, baseline.quantum_phase_bob),
        quantum_phase_total=Fraction(
            report.quantum_phase_total, baseline.quantum_phase_total
        ),
    )
