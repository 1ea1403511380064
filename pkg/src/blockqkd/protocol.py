"""BB84 sessions with block-wise or per-qubit basis choices.

per_block mode is the protocol variant under study: Alice draws one basis
bit for a whole n-qubit block (plus n data bits) and Bob draws one basis
bit to measure it, so a block costs n+1 random bits on Alice's side instead
of the per_qubit baseline's 2n. Sifting is all-or-nothing per block: a
basis mismatch discards the entire block.

A session is deterministic given (config, attack): protocol randomness
comes from one ledgered BitSource seeded with config.seed, channel noise
from a separate plain stream seeded with "{seed}/channel" (noise is the
environment's randomness, not a bit any party paid for).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from . import attacks as attacks_mod
from .attacks import BlockAttackSpec, EntangledBlock, EveRecord
from .infotheory import RateReport, ck_rate, empirical_joint, mutual_information
from .quantum import (
    PAULI_X,
    PAULI_Z,
    Basis,
    UnitarySpec,
    apply_unitary,
    bb84_rows,
    measure,
    measure_rows,
    flip_rows,
)
from .randomness import BitSource, ConsumptionReport, RandomnessLedger

MODES = ("per_block", "per_qubit")

_FLIP_GATES = {
    0: UnitarySpec(2, PAULI_X),  # swaps the Z-basis eigenstates
    1: UnitarySpec(2, PAULI_Z),  # swaps the X-basis eigenstates
}


@dataclass(frozen=True)
class ProtocolConfig:
    block_size: int
    num_blocks: int
    mode: str = "per_block"
    channel_flip_prob: float = 0.0
    sample_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.channel_flip_prob <= 1.0:
            raise ValueError("channel_flip_prob must lie in [0, 1]")
        if not 0.0 < self.sample_fraction < 1.0:
            raise ValueError("sample_fraction must lie in (0, 1)")

    @property
    def raw_qubits(self) -> int:
        return self.block_size * self.num_blocks


@dataclass
class ProductBlock:
    """An unentangled block in flight: one (amplitude pair, basis) per qubit.

    prep_bases tracks the basis each qubit is currently prepared in (Alice's
    choice, or Eve's after a resend); channel flips act in that basis.
    """

    rows: np.ndarray
    prep_bases: np.ndarray


@dataclass
class BlockRecord:
    """Everything both ends know about one block after announcement."""

    alice_bits: np.ndarray
    alice_bases: np.ndarray
    bob_bases: np.ndarray
    bob_outcomes: np.ndarray
    sifted: bool | np.ndarray
    eve_record: EveRecord | None = None


@dataclass
class SessionReport:
    """Outcome of one session; everything downstream processing needs.

    alice_key/bob_key are the full sifted keys (disclosed estimation
    positions included, so qber_true is computed over all sifted bits);
    downstream consumers must drop disclosed_indices. eve_symbols aligns
    with the sifted keys, one opaque symbol per position, None when no
    attack was configured. `source` keeps the session's randomness source
    alive so post-processing continues the same ledger.
    """

    config: ProtocolConfig
    attack: BlockAttackSpec
    raw_qubits: int
    kept_blocks: int
    sifted_bits: int
    qber_true: float
    qber_estimated: float
    disclosed_indices: tuple[int, ...]
    alice_key: np.ndarray
    bob_key: np.ndarray
    eve_symbols: tuple | None
    ledger: RandomnessLedger
    source: BitSource = field(repr=False, default=None)

    @property
    def sifted_keys(self) -> tuple[np.ndarray, np.ndarray]:
        return self.alice_key, self.bob_key

    @property
    def consumption(self) -> ConsumptionReport:
        return ConsumptionReport.from_ledger(self.ledger, self.raw_qubits)


def alice_prepare_block(
    config: ProtocolConfig,
    source: BitSource,
    forced_value: int | None = None,
) -> tuple[np.ndarray, np.ndarray, ProductBlock]:
    """Draw basis and data bits for one block and encode the qubits.

    per_block charges 1 basis bit + n data bits; per_qubit charges n + n.
    forced_value (test hook) replaces the drawn basis values after the
    draw, before encoding.
    """
    n = config.block_size
    if config.mode == "per_block":
        bases = np.full(n, source.draw_bits("alice", "alice_basis", 1)[0])
    else:
        bases = source.draw_bits("alice", "alice_basis", n)
    bases = bases.astype(np.int64)
    if forced_value is not None:
        bases[:] = forced_value
    bits = source.draw_bits("alice", "alice_bits", n)
    rows = bb84_rows(bits, bases)
    return bases, bits, ProductBlock(rows=rows, prep_bases=bases.copy())


def bob_measure_block(
    block: ProductBlock | EntangledBlock,
    config: ProtocolConfig,
    source: BitSource,
    forced_value: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw Bob's basis (1 bit per block, or n) and measure the block.

    Basis bits are charged to bob_basis; Born-rule sampling to
    bob_measurement. An entangled block is measured in place so Eve's
    ancillas keep the collapsed state. forced_value (test hook) replaces
    the drawn basis values after the draw, before measuring.
    """
    n = config.block_size
    if config.mode == "per_block":
        bases = np.full(n, source.draw_bits("bob", "bob_basis", 1)[0])
    else:
        bases = source.draw_bits("bob", "bob_basis", n)
    bases = bases.astype(np.int64)
    if forced_value is not None:
        bases[:] = forced_value
    coin = source.for_stage("bob", "bob_measurement")
    if isinstance(block, ProductBlock):
        outcomes, _ = measure_rows(block.rows, bases, coin)
        return bases, outcomes
    outcomes = np.empty(n, dtype=np.uint8)
    for i in range(n):
        outcome, post = measure(block.state, i, Basis(int(bases[i])), coin)
        block.state = post
        outcomes[i] = outcome
    return bases, outcomes


def transmit(
    block: ProductBlock | EntangledBlock,
    channel_flip_prob: float,
    rng: random.Random,
) -> ProductBlock | EntangledBlock:
    """Independent bit-flip noise on each qubit, in its preparation basis.

    A flip swaps the two eigenstates of the basis the qubit was last
    prepared in (X gate for Z-prepared, Z gate for X-prepared qubits);
    entangled blocks use the sender's encoding basis per qubit.
    """
    if channel_flip_prob <= 0.0:
        return block
    if isinstance(block, ProductBlock):
        n = len(block.rows)
        mask = np.array([rng.random() < channel_flip_prob for _ in range(n)])
        block.rows = flip_rows(block.rows, mask, block.prep_bases)
        return block
    for i in range(block.num_block_qubits):
        if rng.random() < channel_flip_prob:
            gate = _FLIP_GATES[int(block.prep_bases[i])]
            block.state = apply_unitary(block.state, gate, (i,))
    return block


def sift(
    records: list[BlockRecord], mode: str
) -> tuple[np.ndarray, np.ndarray, int]:
    """Keep matching-basis data: whole blocks in per_block mode (a block
    with mismatched bases contributes nothing), positions in per_qubit
    mode. Returns (alice key, bob key, contributing block count)."""
    alice_parts: list[np.ndarray] = []
    bob_parts: list[np.ndarray] = []
    kept = 0
    for record in records:
        if mode == "per_block":
            if record.sifted:
                kept += 1
                alice_parts.append(record.alice_bits)
                bob_parts.append(record.bob_outcomes)
        else:
            mask = record.sifted
            if mask.any():
                kept += 1
                alice_parts.append(record.alice_bits[mask])
                bob_parts.append(record.bob_outcomes[mask])
    if not alice_parts:
        empty = np.zeros(0, dtype=np.uint8)
        return empty, empty.copy(), 0
    return np.concatenate(alice_parts), np.concatenate(bob_parts), kept


def estimate_qber(
    alice_key: np.ndarray,
    bob_key: np.ndarray,
    sample_fraction: float,
    source: BitSource,
) -> tuple[float, tuple[int, ...]]:
    """Disclose a uniform random sample of positions and compare them.

    Sample size is round(sample_fraction * length), at least 1; selection
    randomness is charged to (shared, sampling). The disclosed indices must
    be excluded from any key material used afterwards.
    """
    length = len(alice_key)
    if length != len(bob_key):
        raise ValueError("keys must have equal length")
    if length < math.ceil(1.0 / sample_fraction):
        raise ValueError(
            f"key of {length} bits is too short to sample at fraction {sample_fraction}"
        )
    k = max(1, round(sample_fraction * length))
    indices = np.arange(length)
    for i in range(k):
        j = i + source.randbelow("shared", "sampling", length - i)
        indices[i], indices[j] = indices[j], indices[i]
    disclosed = np.sort(indices[:k])
    mismatches = int(np.count_nonzero(alice_key[disclosed] != bob_key[disclosed]))
    return mismatches / k, tuple(int(i) for i in disclosed)


def run_session(
    config: ProtocolConfig,
    attack: BlockAttackSpec | None = None,
    force_shared_basis: Basis | None = None,
) -> SessionReport:
    """Execute prepare -> attack -> transmit -> measure -> sift -> estimate.

    Announcement is processed per block, after Bob measured it: both bases
    become public, Eve finishes any delayed measurement in the announced
    basis, and the block is kept or discarded. force_shared_basis is a test
    hook that overrides every drawn basis value after the draw (ledger
    counts are unchanged), forcing all blocks to be kept.
    """
    attack = attack or BlockAttackSpec.none()
    if attack.variant == "unitary_block":
        if config.mode != "per_block":
            raise ValueError("unitary_block attacks need per_block mode")
        if attack.num_block_qubits != config.block_size:
            raise ValueError(
                f"attack is sized for {attack.num_block_qubits}-qubit blocks, "
                f"config uses {config.block_size}"
            )
    source = BitSource(config.seed)
    channel_rng = random.Random(f"{config.seed}/channel")
    eve_coin = source.for_stage("eve", "attack")
    forced = None if force_shared_basis is None else force_shared_basis.value

    records: list[BlockRecord] = []
    for _ in range(config.num_blocks):
        alice_bases, alice_bits, block = alice_prepare_block(
            config, source, forced_value=forced
        )
        record_eve: EveRecord | None = None
        carrier: ProductBlock | EntangledBlock = block
        if attack.variant == "intercept_resend":
            rows, bases, record_eve = attacks_mod.intercept_resend(
                block.rows, block.prep_bases, attack, eve_coin
            )
            carrier = ProductBlock(rows=rows, prep_bases=bases)
        elif attack.variant == "unitary_block":
            carrier, record_eve = attacks_mod.unitary_block_attack(
                block.rows, block.prep_bases, attack, eve_coin
            )
        carrier = transmit(carrier, config.channel_flip_prob, channel_rng)
        bob_bases, outcomes = bob_measure_block(
            carrier, config, source, forced_value=forced
        )
        if config.mode == "per_block":
            sifted: bool | np.ndarray = bool(alice_bases[0] == bob_bases[0])
        else:
            sifted = alice_bases == bob_bases
        record = BlockRecord(
            alice_bits=alice_bits,
            alice_bases=alice_bases,
            bob_bases=bob_bases,
            bob_outcomes=outcomes,
            sifted=sifted,
            eve_record=record_eve,
        )
        _process_announcement(record, attack, eve_coin)
        records.append(record)

    alice_key, bob_key, kept_blocks = sift(records, config.mode)
    eve_symbols = _sifted_symbols(records, config.mode, attack)
    sifted_bits = len(alice_key)
    if sifted_bits:
        qber_true = int(np.count_nonzero(alice_key != bob_key)) / sifted_bits
    else:
        qber_true = 0.0
    min_len = math.ceil(1.0 / config.sample_fraction)
    if sifted_bits >= min_len:
        qber_estimated, disclosed = estimate_qber(
            alice_key, bob_key, config.sample_fraction, source
        )
    else:
        # Too short to sample; report no estimate rather than fabricate one.
        qber_estimated, disclosed = 0.0, ()
    return SessionReport(
        config=config,
        attack=attack,
        raw_qubits=config.raw_qubits,
        kept_blocks=kept_blocks,
        sifted_bits=sifted_bits,
        qber_true=qber_true,
        qber_estimated=qber_estimated,
        disclosed_indices=disclosed,
        alice_key=alice_key,
        bob_key=bob_key,
        eve_symbols=eve_symbols,
        ledger=source.ledger,
        source=source,
    )


def _process_announcement(
    record: BlockRecord, attack: BlockAttackSpec, eve_coin
) -> None:
    """Fill Eve's post-announcement view of one block.

    Intercept symbols are per qubit: '?' where she stayed out, otherwise
    (her bit, whether her basis matched the announced one). unitary_block
    symbols are one per block: the announced basis (or guess-match flag)
    plus her ancilla outcome tuple.
    """
    rec = record.eve_record
    if rec is None:
        return
    if attack.variant == "intercept_resend":
        symbols = []
        for i in range(len(record.alice_bits)):
            if rec.attacked[i]:
                matched = bool(rec.bases[i] == record.alice_bases[i])
                symbols.append((int(rec.bits[i]), matched))
            else:
                symbols.append("?")
        rec.symbols = tuple(symbols)
        return
    announced = Basis(int(record.alice_bases[0]))
    if attack.delayed:
        _, ancilla_bits = attacks_mod.delayed_measurement(rec.kept, announced, eve_coin)
        rec.bits = ancilla_bits
        rec.kept = None
        rec.symbols = ((announced.value, tuple(int(b) for b in ancilla_bits)),)
    else:
        matched = bool(rec.guess_basis == announced.value)
        rec.symbols = ((matched, tuple(int(b) for b in rec.bits)),)


def _sifted_symbols(
    records: list[BlockRecord], mode: str, attack: BlockAttackSpec
) -> tuple | None:
    """Eve's symbol stream aligned with the sifted key positions."""
    if attack.variant == "none":
        return None
    out: list = []
    for record in records:
        rec = record.eve_record
        if mode == "per_block":
            if not record.sifted:
                continue
            if attack.variant == "intercept_resend":
                out.extend(rec.symbols)
            else:
                out.extend(rec.symbols * len(record.alice_bits))
        else:
            mask = record.sifted
            for i in np.flatnonzero(mask):
                out.append(rec.symbols[i])
    return tuple(out)


def empirical_rates(report: SessionReport) -> RateReport:
    """Plug-in information rates from the sifted (Alice, Bob, Eve) stream.

    With no attack Eve's channels carry nothing, so i_ea = i_eb = 0 and the
    rate is i_ab alone. An empty sifted key yields a zero, non-distillable
    report.
    """
    if report.sifted_bits == 0:
        return RateReport(0.0, 0.0, 0.0, 0.0, False)
    a = [int(b) for b in report.alice_key]
    b = [int(b) for b in report.bob_key]
    if report.eve_symbols is None:
        joint = empirical_joint(list(zip(a, b)), ("alice", "bob"))
        i_ab = mutual_information(joint, "alice", "bob")
        return ck_rate(i_ab, 0.0, 0.0)
    joint = empirical_joint(
        list(zip(a, b, report.eve_symbols)), ("alice", "bob", "eve")
    )
    return ck_rate(
        mutual_information(joint, "alice", "bob"),
        mutual_information(joint, "eve", "alice"),
        mutual_information(joint, "eve", "bob"),
    )
