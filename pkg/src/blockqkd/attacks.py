"""Eavesdropping models on qubit blocks.

Three attack families:

- intercept_resend: Eve measures chosen qubits in a random basis (fresh per
  qubit, or one basis per block) and forwards the collapsed state.
- unitary_block: Eve entangles the whole n-qubit block with m ancillas
  through an arbitrary unitary, forwards the block, and measures her
  ancillas either immediately in a guessed basis or after the basis
  announcement.
- singlet simulation: instead of touching n real qubits, Eve attacks a
  register built from one real qubit plus n-1 singlet halves, keeps the
  partner halves, and measures them in the announced basis afterwards.
  verify_reduction checks numerically that this reproduces, branch by
  branch, the exact ensemble a real-block attack would produce.

Eve's kept quantum state is anti-correlated with the simulated qubits
(singlet in every basis), so her recorded bit for a simulated slot is the
complement of her kept-half outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .quantum import (
    CNOT,
    Basis,
    StateVector,
    UnitarySpec,
    apply_unitary,
    bb84_rows,
    embed,
    measure,
    measure_rows,
    permute_qubits,
    prepare_singlet,
    project,
    random_unitary,
    reduced_density,
    rows_to_state,
    tensor,
)
from .randomness import StageSource

ATTACK_VARIANTS = ("none", "intercept_resend", "unitary_block")
GRANULARITIES = ("per_qubit", "per_block")

REDUCTION_TOL = 1e-9
MAX_ATTACK_QUBITS = 10


@dataclass(frozen=True)
class BlockAttackSpec:
    """Immutable description of Eve's per-block strategy.

    fraction/granularity apply to intercept_resend; u, num_block_qubits,
    num_ancillas to unitary_block. delayed=True keeps Eve's ancillas
    unmeasured until the basis announcement.
    """

    variant: str = "none"
    fraction: float = 0.0
    granularity: str = "per_qubit"
    u: UnitarySpec | None = None
    num_block_qubits: int = 0
    num_ancillas: int = 0
    delayed: bool = False

    def __post_init__(self):
        if self.variant not in ATTACK_VARIANTS:
            raise ValueError(f"unknown attack variant {self.variant!r}")
        if self.variant == "intercept_resend":
            if not 0.0 <= self.fraction <= 1.0:
                raise ValueError("fraction must lie in [0, 1]")
            if self.granularity not in GRANULARITIES:
                raise ValueError(f"unknown granularity {self.granularity!r}")
            if self.delayed:
                raise ValueError(
                    "intercept_resend measures before forwarding; it cannot be delayed"
                )
        if self.variant == "unitary_block":
            if self.u is None:
                raise ValueError("unitary_block needs a unitary")
            n, m = self.num_block_qubits, self.num_ancillas
            if n < 1 or m < 0:
                raise ValueError("need num_block_qubits >= 1 and num_ancillas >= 0")
            if n + m > MAX_ATTACK_QUBITS:
                raise ValueError(
                    f"block plus ancillas capped at {MAX_ATTACK_QUBITS} qubits"
                )
            if self.u.dimension != 2 ** (n + m):
                raise ValueError(
                    f"unitary dimension {self.u.dimension} does not match "
                    f"{n} block qubits + {m} ancillas"
                )

    @classmethod
    def none(cls) -> "BlockAttackSpec":
        return cls()

    @classmethod
    def intercept(
        cls, fraction: float, granularity: str = "per_qubit"
    ) -> "BlockAttackSpec":
        return cls(
            variant="intercept_resend", fraction=fraction, granularity=granularity
        )

    @classmethod
    def unitary(
        cls,
        u: UnitarySpec,
        num_block_qubits: int,
        num_ancillas: int,
        delayed: bool = True,
    ) -> "BlockAttackSpec":
        return cls(
            variant="unitary_block",
            u=u,
            num_block_qubits=num_block_qubits,
            num_ancillas=num_ancillas,
            delayed=delayed,
        )

    @property
    def label(self) -> str:
        if self.variant == "intercept_resend":
            return f"intercept_resend(p={self.fraction:g},{self.granularity})"
        if self.variant == "unitary_block":
            tag = "delayed" if self.delayed else "immediate"
            return (
                f"unitary_block(n={self.num_block_qubits},"
                f"m={self.num_ancillas},{tag})"
            )
        return "none"


@dataclass
class EveRecord:
    """What Eve holds for one block.

    For intercept_resend: per-qubit mask, bases and outcomes. For
    unitary_block: either immediate guessed-basis results or a kept
    register measured at announcement. `symbols` is filled in at
    announcement processing; afterwards no unmeasured state remains.
    """

    attacked: np.ndarray | None = None
    bases: np.ndarray | None = None
    bits: np.ndarray | None = None
    guess_basis: int | None = None
    kept: "EntangledBlock | SimulatedBlock | None" = None
    symbols: tuple | None = None


@dataclass
class EntangledBlock:
    """Block qubits 0..n-1 plus Eve's ancillas n..n+m-1 in one register.

    prep_bases keeps the sender's encoding basis per block qubit; channel
    flips act in that basis even after Eve's unitary.
    """

    state: StateVector
    prep_bases: np.ndarray
    num_block_qubits: int
    kept_slots: tuple[int, ...] = ()
    ancilla_slots: tuple[int, ...] = ()
    eve_measured: bool = False

    @property
    def block_slots(self) -> tuple[int, ...]:
        return tuple(range(self.num_block_qubits))


@dataclass
class SimulatedBlock:
    """Register layout of the singlet-built block.

    Slots 0..n-1 are the simulated block qubits (Alice's real qubit sits at
    alice_slot, every other slot holds one singlet half); kept_slots hold
    Eve's partner halves, in the same order as partner_slots; ancilla_slots
    follow.
    """

    state: StateVector
    num_block_qubits: int
    alice_slot: int
    partner_slots: tuple[int, ...]
    kept_slots: tuple[int, ...]
    ancilla_slots: tuple[int, ...]
    eve_measured: bool = False

    @property
    def block_slots(self) -> tuple[int, ...]:
        return tuple(range(self.num_block_qubits))


def intercept_resend(
    rows: np.ndarray,
    prep_bases: np.ndarray,
    spec: BlockAttackSpec,
    coin: StageSource,
) -> tuple[np.ndarray, np.ndarray, EveRecord]:
    """Measure-and-resend on a product block.

    Each qubit is attacked independently with probability spec.fraction.
    Eve's basis is fresh per attacked qubit, or one draw for the whole
    block when granularity is per_block. Attacked qubits leave re-prepared
    in Eve's basis (their new preparation basis for channel purposes).
    """
    if spec.variant != "intercept_resend":
        raise ValueError("spec is not an intercept_resend attack")
    n = len(rows)
    attacked = np.array([bool(coin.bernoulli(spec.fraction)) for _ in range(n)])
    if not attacked.any():
        return rows, prep_bases, EveRecord(attacked=attacked)
    count = int(attacked.sum())
    if spec.granularity == "per_block":
        eve_bases = np.full(count, coin.bit(), dtype=np.int64)
    else:
        eve_bases = coin.bits(count).astype(np.int64)
    outcomes, resent = measure_rows(rows[attacked], eve_bases, coin)
    new_rows = rows.copy()
    new_rows[attacked] = resent
    new_bases = prep_bases.copy()
    new_bases[attacked] = eve_bases
    bases_full = np.full(n, -1, dtype=np.int64)
    bases_full[attacked] = eve_bases
    bits_full = np.zeros(n, dtype=np.uint8)
    bits_full[attacked] = outcomes
    record = EveRecord(attacked=attacked, bases=bases_full, bits=bits_full)
    return new_rows, new_bases, record


def unitary_block_attack(
    rows: np.ndarray,
    prep_bases: np.ndarray,
    spec: BlockAttackSpec,
    coin: StageSource,
) -> tuple[EntangledBlock, EveRecord]:
    """Entangle the block with Eve's ancillas through spec.u.

    delayed=True leaves the ancillas unmeasured inside the returned
    register; delayed=False measures them immediately in a guessed basis
    (one coin bit), before the block travels on.
    """
    if spec.variant != "unitary_block":
        raise ValueError("spec is not a unitary_block attack")
    n, m = spec.num_block_qubits, spec.num_ancillas
    if len(rows) != n:
        raise ValueError(f"attack expects {n} block qubits, got {len(rows)}")
    state = rows_to_state(rows)
    if m:
        ancillas = np.zeros(2**m, dtype=complex)
        ancillas[0] = 1.0
        state = tensor(state, StateVector(m, ancillas))
    state = apply_unitary(state, spec.u, range(n + m))
    block = EntangledBlock(
        state=state,
        prep_bases=prep_bases.copy(),
        num_block_qubits=n,
        ancilla_slots=tuple(range(n, n + m)),
    )
    if spec.delayed:
        return block, EveRecord(kept=block)
    guess = coin.bit()
    bits = []
    for q in block.ancilla_slots:
        outcome, post = measure(block.state, q, Basis(guess), coin)
        block.state = post
        bits.append(outcome)
    block.eve_measured = True
    record = EveRecord(guess_basis=guess, bits=np.array(bits, dtype=np.uint8))
    return block, record


def singlet_simulation(
    alice_qubit: StateVector,
    n: int,
    u: UnitarySpec,
    num_ancillas: int,
    alice_slot: int = 0,
) -> SimulatedBlock:
    """Build Eve's stand-in for an n-qubit block and attack it with `u`.

    The register holds Alice's one real qubit at alice_slot, one singlet
    half in every other simulated slot, Eve's kept partner halves, and
    num_ancillas fresh ancillas. `u` (on the n simulated qubits plus the
    ancillas) is applied; the kept halves stay untouched, which is what
    lets Eve defer measuring them until the basis announcement.
    """
    if alice_qubit.num_qubits != 1:
        raise ValueError("alice_qubit must be a single qubit")
    if n < 1:
        raise ValueError("block size must be >= 1")
    if not 0 <= alice_slot < n:
        raise ValueError(f"alice_slot must lie in [0, {n})")
    m = num_ancillas
    if u.dimension != 2 ** (n + m):
        raise ValueError(
            f"unitary dimension {u.dimension} does not match n={n}, m={m}"
        )
    total = 2 * n - 1 + m
    # Assemble as [alice, (sim_0, kept_0), ..., (sim_{n-2}, kept_{n-2}), anc...]
    # then permute into [simulated slots | kept halves | ancillas].
    parts = [alice_qubit]
    for _ in range(n - 1):
        parts.append(prepare_singlet())
    if m:
        anc = np.zeros(2**m, dtype=complex)
        anc[0] = 1.0
        parts.append(StateVector(m, anc))
    state = tensor(*parts)
    sim_order = [s for s in range(n) if s != alice_slot]
    destinations = [alice_slot]
    for j in range(n - 1):
        destinations.append(sim_order[j])  # singlet half j -> simulated slot
        destinations.append(n + j)  # partner half j -> kept slot
    destinations.extend(range(2 * n - 1, total))
    state = permute_qubits(state, destinations)
    state = apply_unitary(state, u, list(range(n)) + list(range(2 * n - 1, total)))
    return SimulatedBlock(
        state=state,
        num_block_qubits=n,
        alice_slot=alice_slot,
        partner_slots=tuple(sim_order),
        kept_slots=tuple(range(n, 2 * n - 1)),
        ancilla_slots=tuple(range(2 * n - 1, total)),
    )


def delayed_measurement(
    register: EntangledBlock | SimulatedBlock,
    announced_basis: Basis,
    coin: StageSource,
) -> tuple[np.ndarray, np.ndarray]:
    """Measure Eve's kept qubits once the basis is public.

    Returns (simulated-slot bits, ancilla bits). Each kept singlet half is
    measured in announced_basis and recorded as the complement of the
    outcome; ancillas are measured in announced_basis as well (the default
    policy). A register can only be measured once.
    """
    if register.eve_measured:
        raise RuntimeError("kept register was already measured")
    state = register.state
    slot_bits = []
    for q in register.kept_slots:
        outcome, state = measure(state, q, announced_basis, coin)
        slot_bits.append(1 - outcome)
    ancilla_bits = []
    for q in register.ancilla_slots:
        outcome, state = measure(state, q, announced_basis, coin)
        ancilla_bits.append(outcome)
    register.state = state
    register.eve_measured = True
    return np.array(slot_bits, dtype=np.uint8), np.array(ancilla_bits, dtype=np.uint8)


@dataclass(frozen=True)
class EquivalenceReport:
    """Outcome of the real-block vs singlet-simulation comparison."""

    passed: bool
    max_deviation: float
    max_weight_deviation: float
    cases_checked: int
    branches_checked: int
    tolerance: float = REDUCTION_TOL


def verify_reduction(
    u: UnitarySpec,
    n: int,
    m: int,
    alice_input_distribution: dict[int, float] | None = None,
) -> EquivalenceReport:
    """Check that attacking the singlet-built block equals attacking a real one.

    For every basis, Alice bit (with positive weight in
    alice_input_distribution, default uniform), slot placement, and
    kept-half outcome pattern: conditioning the simulated register on the
    pattern must leave the forwarded block + ancillas in exactly the state
    `u` produces from the real bit pattern (Alice's bit at her slot, the
    complement of each kept outcome elsewhere), with every branch weight
    exactly 2^-(n-1). Passes iff all density-matrix entries agree within
    1e-9 and all weights do too.
    """
    if n not in (2, 3):
        raise ValueError("block size must be 2 or 3")
    if m < 0 or n + m > 8:
        raise ValueError("need num_ancillas >= 0 and n + m <= 8")
    u = UnitarySpec.from_matrix(u)
    if u.dimension != 2 ** (n + m):
        raise ValueError(
            f"unitary dimension {u.dimension} does not match n={n}, m={m}"
        )
    weights = alice_input_distribution or {0: 0.5, 1: 0.5}
    alice_bits = [bit for bit, w in sorted(weights.items()) if w > 0.0]
    if any(bit not in (0, 1) for bit in weights):
        raise ValueError("alice_input_distribution is over a single bit")
    expected_weight = 2.0 ** -(n - 1)
    max_dev = 0.0
    max_weight_dev = 0.0
    cases = 0
    branches = 0
    for basis, alice_bit, alice_slot in product(
        (Basis.Z, Basis.X), alice_bits, range(n)
    ):
        cases += 1
        sim = singlet_simulation(
            _bb84_state(alice_bit, basis), n, u, m, alice_slot=alice_slot
        )
        eval_slots = list(sim.block_slots) + list(sim.ancilla_slots)
        for pattern in product((0, 1), repeat=n - 1):
            branches += 1
            weight = 1.0
            state = sim.state
            for q, outcome in zip(sim.kept_slots, pattern):
                prob, state = project(state, q, basis, outcome)
                weight *= prob
                if state is None:
                    break
            max_weight_dev = max(max_weight_dev, abs(weight - expected_weight))
            if state is None:
                max_dev = math.inf
                continue
            rho_sim = reduced_density(state, eval_slots).entries
            bits = np.empty(n, dtype=np.int64)
            bits[alice_slot] = alice_bit
            for slot, outcome in zip(sim.partner_slots, pattern):
                bits[slot] = 1 - outcome
            rho_real = _real_block_density(u, bits, basis, m)
            max_dev = max(max_dev, float(np.max(np.abs(rho_sim - rho_real))))
    passed = max_dev < REDUCTION_TOL and max_weight_dev < REDUCTION_TOL
    return EquivalenceReport(
        passed=passed,
        max_deviation=max_dev,
        max_weight_deviation=max_weight_dev,
        cases_checked=cases,
        branches_checked=branches,
    )


def _bb84_state(bit: int, basis: Basis) -> StateVector:
    return StateVector(1, bb84_rows(np.array([bit]), basis)[0])


def _real_block_density(
    u: UnitarySpec, bits: np.ndarray, basis: Basis, m: int
) -> np.ndarray:
    state = rows_to_state(bb84_rows(bits, basis))
    if m:
        anc = np.zeros(2**m, dtype=complex)
        anc[0] = 1.0
        state = tensor(state, StateVector(m, anc))
    state = apply_unitary(state, u, range(state.num_qubits))
    return np.outer(state.amplitudes, state.amplitudes.conj())


# --- reproducible verification corpus ------------------------------------


@dataclass(frozen=True)
class CorpusCase:
    name: str
    u: UnitarySpec
    n: int
    m: int


def cnot_entangler() -> UnitarySpec:
    """CNOT from block qubit 0 onto the ancilla, in a 2+1 qubit register."""
    return embed(3, UnitarySpec(4, CNOT), (0, 2))


def reduction_corpus(
    random_count: int = 20,
    seed: int = 1234,
    block_sizes: tuple[int, ...] = (2, 3),
    ancillas: tuple[int, ...] = (0, 1, 2),
) -> list[CorpusCase]:
    """Deterministic test corpus: identities, the CNOT entangler, and
    seeded Haar-random unitaries cycling over the (n, m) grid."""
    cases = []
    combos = [(n, m) for n in block_sizes for m in ancillas]
    if not combos:
        raise ValueError("corpus needs at least one (block size, ancillas) pair")
    for n, m in combos:
        dim = 2 ** (n + m)
        cases.append(
            CorpusCase(f"identity(n={n},m={m})", UnitarySpec(dim, np.eye(dim)), n, m)
        )
    if (2, 1) in combos:
        cases.append(CorpusCase("cnot_entangler(n=2,m=1)", cnot_entangler(), 2, 1))
    for i in range(random_count):
        n, m = combos[i % len(combos)]
        cases.append(
            CorpusCase(
                f"random(seed={seed + i},n={n},m={m})",
                random_unitary(n + m, seed + i),
                n,
                m,
            )
        )
    return cases


# --- unitary matrix file format -------------------------------------------
#
# First line: "dim d". Then d rows, each d entries "re,im" separated by
# whitespace. Parsed strictly; UnitarySpec validation rejects non-unitaries.


def save_unitary(path, u: UnitarySpec) -> None:
    lines = [f"dim {u.dimension}"]
    for row in u.entries:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_unitary(path) -> UnitarySpec:
    with open(path, encoding="utf-8") as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw or not raw[0].startswith("dim "):
        raise ValueError("first line must be 'dim d'")
    try:
        dim = int(raw[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValueError("first line must be 'dim d'") from exc
    if len(raw) != dim + 1:
        raise ValueError(f"expected {dim} matrix rows, found {len(raw) - 1}")
    entries = np.empty((dim, dim), dtype=complex)
    for i, line in enumerate(raw[1:]):
        cells = line.split()
        if len(cells) != dim:
            raise ValueError(f"row {i} has {len(cells)} entries, expected {dim}")
        for j, cell in enumerate(cells):
            re_s, sep, im_s = cell.partition(",")
            if not sep:
                raise ValueError(f"entry ({i},{j}) is not 're,im'")
            entries[i, j] = complex(float(re_s), float(im_s))
    return UnitarySpec(dim, entries)
