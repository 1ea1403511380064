"""Classical post-processing: parity reconciliation and hash compression.

Reconciliation is the interactive block-parity protocol: pass 1 splits the
key into blocks of about 0.73/QBER bits, later passes shuffle with a fresh
ledgered permutation and double the block length, and every mismatched
block is binary-searched at a cost of one disclosed parity per halving.
Fixing a bit flips the parity of the blocks that contain it in every other
pass, which re-queues them; those follow-up searches are what lets one
disclosed error correct several. Both parties remember every parity already
exchanged, so a re-searched block only pays for segments never disclosed
before; the disclosed count is the number of distinct parities, which is
what the eavesdropper actually learns.

Compression multiplies the reconciled key by a random Toeplitz matrix: a
(key + output - 1)-bit seed defines rows that slide along it one bit at a
time. Output length is the key length minus everything an eavesdropper
may know: disclosed parities, the attack-model information estimate, and
a safety margin.

Every random draw (permutations, hash seed) is charged to the session
ledger, continued through the report's live source.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .infotheory import RateReport
from .protocol import SessionReport
from .randomness import BitSource

CASCADE_PASSES = 4
CASCADE_BLOCK_FACTOR = 0.73
QBER_FLOOR = 0.01
MIN_KEY_LENGTH = 64
DEFAULT_SAFETY_MARGIN = 32


@dataclass(frozen=True)
class ReconciliationResult:
    """corrected_key is Bob's key after correction; residual_mismatches
    counts remaining disagreements with Alice (knowable here because the
    simulator holds both keys; a deployment would exchange a hash)."""

    corrected_key: np.ndarray
    disclosed_parities: int
    passes: int
    residual_mismatches: int


@dataclass(frozen=True)
class AmplificationResult:
    final_key: np.ndarray
    input_length: int
    output_length: int
    seed_bits_consumed: int


@dataclass(frozen=True)
class PipelineResult:
    """Final key plus the stage results and the reason the run ended.

    reason is 'ok' for a nonempty key, else one of 'not_distillable',
    'qber_too_high', 'key_too_short', 'reconciliation_failed',
    'key_exhausted'.
    """

    final_key: np.ndarray
    reconciliation: ReconciliationResult | None
    amplification: AmplificationResult | None
    eve_info_bits: float
    reason: str
    # wall seconds per stage; informational, never serialized
    timings: dict[str, float] = field(default_factory=dict, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.reason == "ok"


def _ledgered_permutation(n: int, source: BitSource) -> np.ndarray:
    """Uniform shuffle whose index draws are charged to ec_permutation."""
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = source.randbelow("shared", "ec_permutation", i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def _parity(key: np.ndarray, idx: np.ndarray) -> int:
    return int(np.bitwise_xor.reduce(key[idx]))


def cascade(
    alice_key: np.ndarray,
    bob_key: np.ndarray,
    qber_estimate: float,
    source: BitSource,
    passes: int = CASCADE_PASSES,
    block_factor: float = CASCADE_BLOCK_FACTOR,
) -> ReconciliationResult:
    """Correct bob_key toward alice_key, counting every disclosed parity.

    Estimates below 0.01 are floored (a zero estimate would ask for
    unbounded blocks); estimates at or above 0.5 are outside the protocol's
    working range and rejected. Pass-1 blocks hold round(block_factor/qber)
    bits, clamped to [4, key length]; each later pass applies a fresh
    ledgered permutation and doubles the block length.
    """
    alice = np.asarray(alice_key, dtype=np.uint8)
    working = np.asarray(bob_key, dtype=np.uint8).copy()
    n = len(alice)
    if n != len(working):
        raise ValueError("keys must have equal length")
    if n < MIN_KEY_LENGTH:
        raise ValueError(f"reconciliation needs at least {MIN_KEY_LENGTH} bits")
    q = max(float(qber_estimate), QBER_FLOOR)
    if q >= 0.5:
        raise ValueError("QBER estimate must be below 0.5")
    first_block = min(max(round(block_factor / q), 4), n)
    disclosed = 0

    pass_blocks: list[list[np.ndarray]] = []
    block_of: list[np.ndarray] = []
    queue: list[tuple[int, int]] = []
    # Alice's parities, once disclosed, are remembered by both parties and
    # never change, so a segment costs a disclosure at most once; keyed by
    # (pass, block, lo, hi) over the block's position array.
    told: dict[tuple[int, int, int, int], int] = {}

    def alice_parity(p: int, b: int, lo: int, hi: int) -> int:
        nonlocal disclosed
        key = (p, b, lo, hi)
        if key not in told:
            disclosed += 1
            told[key] = _parity(alice, pass_blocks[p][b][lo:hi])
        return told[key]

    def mismatched(p: int, b: int) -> bool:
        idx = pass_blocks[p][b]
        return alice_parity(p, b, 0, len(idx)) != _parity(working, idx)

    def search(p: int, b: int) -> int:
        # Binary search over a block with an odd number of errors: compare
        # the left half's parities and recurse into the differing half. The
        # right half never needs disclosure (parent XOR left), so a fresh
        # segment costs exactly one parity per halving step.
        idx = pass_blocks[p][b]
        lo, hi = 0, len(idx)
        while hi - lo > 1:
            mid = lo + (hi - lo + 1) // 2
            if alice_parity(p, b, lo, mid) != _parity(working, idx[lo:mid]):
                hi = mid
            else:
                lo = mid
        return int(idx[lo])

    def drain() -> None:
        while queue:
            p, b = queue.pop()
            if not mismatched(p, b):
                continue
            error = search(p, b)
            working[error] ^= 1
            for p2 in range(len(pass_blocks)):
                b2 = int(block_of[p2][error])
                if mismatched(p2, b2):
                    queue.append((p2, b2))

    for p in range(passes):
        if p == 0:
            perm = np.arange(n)
        else:
            perm = _ledgered_permutation(n, source)
        size = min(first_block << p, n)
        blocks = [perm[s : s + size] for s in range(0, n, size)]
        pass_blocks.append(blocks)
        owner = np.empty(n, dtype=np.int64)
        for b, idx in enumerate(blocks):
            owner[idx] = b
        block_of.append(owner)
        # mismatched() discloses each block's top-level parity here, once.
        queue.extend((p, b) for b in range(len(blocks)) if mismatched(p, b))
        drain()

    residual = int(np.count_nonzero(alice != working))
    return ReconciliationResult(
        corrected_key=working,
        disclosed_parities=disclosed,
        passes=passes,
        residual_mismatches=residual,
    )


def toeplitz_pa(
    key: np.ndarray,
    leaked_bits: int,
    eve_info_bits: float,
    safety_margin: int,
    source: BitSource,
) -> AmplificationResult:
    """Compress `key` with a seeded Toeplitz hash.

    Output length is max(0, len - leaked_bits - ceil(eve_info_bits) -
    safety_margin). The (len + output - 1)-bit seed is charged to pa_seed;
    output bit j is the parity of key AND seed[j : j + len]. A zero-length
    output applies no hash and draws no seed.
    """
    key = np.asarray(key, dtype=np.uint8)
    length = len(key)
    if length == 0:
        raise ValueError("key must be nonempty")
    target = length - int(leaked_bits) - math.ceil(eve_info_bits) - int(safety_margin)
    out_len = max(0, target)
    if out_len == 0:
        return AmplificationResult(
            final_key=np.zeros(0, dtype=np.uint8),
            input_length=length,
            output_length=0,
            seed_bits_consumed=0,
        )
    seed_bits = length + out_len - 1
    seed = source.draw_bits("shared", "pa_seed", seed_bits)
    sums = np.correlate(seed.astype(np.int64), key.astype(np.int64), mode="valid")
    final = (sums & 1).astype(np.uint8)
    return AmplificationResult(
        final_key=final,
        input_length=length,
        output_length=out_len,
        seed_bits_consumed=seed_bits,
    )


def pipeline(
    report: SessionReport,
    rates: RateReport,
    safety_margin: int = DEFAULT_SAFETY_MARGIN,
) -> PipelineResult:
    """Estimation disclosures out, reconciliation, then compression.

    Eve's credited information is min(i_ea, i_eb) bits per sifted symbol
    times the undisclosed key length. The final key is nonempty only when
    the rate report says a key is distillable, reconciliation ends with
    zero residual mismatches, and the length budget stays positive.
    """
    if report.sifted_bits == 0:
        raise ValueError("session produced an empty sifted key")
    if report.source is None:
        raise ValueError("report carries no randomness source to continue")
    empty = np.zeros(0, dtype=np.uint8)
    disclosed = np.asarray(report.disclosed_indices, dtype=np.int64)
    alice = np.delete(report.alice_key, disclosed)
    bob = np.delete(report.bob_key, disclosed)
    eve_info = min(rates.i_ea, rates.i_eb) * len(alice)
    if not rates.distillable:
        return PipelineResult(empty, None, None, eve_info, "not_distillable")
    if max(report.qber_estimated, QBER_FLOOR) >= 0.5:
        return PipelineResult(empty, None, None, eve_info, "qber_too_high")
    if len(alice) < MIN_KEY_LENGTH:
        return PipelineResult(empty, None, None, eve_info, "key_too_short")
    started = time.perf_counter()
    rec = cascade(alice, bob, report.qber_estimated, report.source)
    cascade_time = time.perf_counter() - started
    if rec.residual_mismatches:
        return PipelineResult(
            empty, rec, None, eve_info, "reconciliation_failed",
            timings={"cascade": cascade_time},
        )
    started = time.perf_counter()
    amp = toeplitz_pa(
        rec.corrected_key, rec.disclosed_parities, eve_info, safety_margin, report.source
    )
    timings = {"cascade": cascade_time, "toeplitz_pa": time.perf_counter() - started}
    reason = "ok" if amp.output_length else "key_exhausted"
    return PipelineResult(amp.final_key, rec, amp, eve_info, reason, timings=timings)
