import math

import numpy as np
import pytest

from blockqkd.attacks import BlockAttackSpec, cnot_entangler
from blockqkd.infotheory import JointDistribution
from blockqkd.protocol import (
    ProtocolConfig,
    alice_prepare_block,
    bob_measure_block,
    estimate_qber,
    run_session,
    sift,
    transmit,
    empirical_rates,
)
from blockqkd.quantum import (
    Apply,
    Basis,
    Circuit,
    Measure,
    Prep,
    UnitarySpec,
    enumerate_outcomes,
)
from blockqkd.randomness import BitSource

X_GATE = UnitarySpec(2, np.array([[0, 1], [1, 0]], dtype=complex))
Z_GATE = UnitarySpec(2, np.array([[1, 0], [0, -1]], dtype=complex))
FLIP_GATES = {Basis.Z: X_GATE, Basis.X: Z_GATE}


def intercept_qber_oracle(p: float, c: float) -> float:
    """Exact sifted error rate under intercept fraction p and flip prob c.

    Built by enumerating the one-qubit circuit for each (Eve basis, flip)
    branch; never assumes a closed form. Symmetric in Alice's bit and
    basis, so one preparation suffices.
    """
    err_attacked = 0.0
    for eve_basis in (Basis.Z, Basis.X):
        for flipped, weight in ((0, 1.0 - c), (1, c)):
            ops: list = [Prep(0, 0, Basis.Z), Measure(0, eve_basis, "eve")]
            if flipped:
                ops.append(Apply(FLIP_GATES[eve_basis], (0,)))
            ops.append(Measure(0, Basis.Z, "bob"))
            dist = enumerate_outcomes(Circuit(1, ops))
            err = dist.marginal(("bob",)).prob((1,))
            err_attacked += 0.5 * weight * err
    return p * err_attacked + (1.0 - p) * c


# --- configuration ------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(block_size=0, num_blocks=10)
    with pytest.raises(ValueError):
        ProtocolConfig(block_size=4, num_blocks=0)
    with pytest.raises(ValueError):
        ProtocolConfig(block_size=4, num_blocks=10, mode="per_photon")
    with pytest.raises(ValueError):
        ProtocolConfig(block_size=4, num_blocks=10, channel_flip_prob=1.5)
    with pytest.raises(ValueError):
        ProtocolConfig(block_size=4, num_blocks=10, sample_fraction=0.0)
    assert ProtocolConfig(block_size=4, num_blocks=10).raw_qubits == 40


# --- preparation --------------------------------------------------------------


def test_prepare_ledger_per_block():
    source = BitSource(1)
    config = ProtocolConfig(block_size=4, num_blocks=1, mode="per_block")
    bases, bits, block = alice_prepare_block(config, source)
    assert source.ledger.get("alice", "alice_basis") == 1
    assert source.ledger.get("alice", "alice_bits") == 4
    assert len(set(bases.tolist())) == 1
    assert block.rows.shape == (4, 2)


def test_prepare_ledger_per_qubit():
    source = BitSource(2)
    config = ProtocolConfig(block_size=4, num_blocks=1, mode="per_qubit")
    alice_prepare_block(config, source)
    assert source.ledger.get("alice", "alice_basis") == 4
    assert source.ledger.get("alice", "alice_bits") == 4


@pytest.mark.parametrize("mode", ["per_block", "per_qubit"])
def test_prepare_ledger_single_qubit_modes_coincide(mode):
    source = BitSource(3)
    config = ProtocolConfig(block_size=1, num_blocks=1, mode=mode)
    alice_prepare_block(config, source)
    assert source.ledger.get("alice", "alice_basis") == 1
    assert source.ledger.get("alice", "alice_bits") == 1


# --- measurement --------------------------------------------------------------


def test_measure_ledger_per_block():
    source = BitSource(4)
    config = ProtocolConfig(block_size=8, num_blocks=1, mode="per_block")
    _, _, block = alice_prepare_block(config, source)
    before = source.ledger.get("bob", "bob_basis")
    bob_measure_block(block, config, source)
    assert source.ledger.get("bob", "bob_basis") - before == 1


def test_matched_basis_reads_alice_bits_exactly():
    source = BitSource(5)
    config = ProtocolConfig(block_size=64, num_blocks=1, mode="per_block")
    _, bits, block = alice_prepare_block(config, source, forced_value=0)
    _, outcomes = bob_measure_block(block, config, source, forced_value=0)
    assert np.array_equal(outcomes, bits)
    assert source.ledger.get("bob", "bob_measurement") == 0


def test_mismatched_basis_outcomes_uniform():
    # Enumeration oracle: a Z eigenstate measured in X is uniform.
    dist = enumerate_outcomes(
        Circuit(1, [Prep(0, 0, Basis.Z), Measure(0, Basis.X, "bob")])
    )
    assert dist.prob((0,)) == pytest.approx(0.5, abs=1e-12)
    source = BitSource(6)
    config = ProtocolConfig(block_size=4000, num_blocks=1, mode="per_block")
    _, _, block = alice_prepare_block(config, source, forced_value=0)
    _, outcomes = bob_measure_block(block, config, source, forced_value=1)
    mean = outcomes.mean()
    sigma = math.sqrt(0.25 / 4000)
    assert abs(mean - 0.5) <= 5 * sigma
    assert source.ledger.get("bob", "bob_measurement") == 4000


# --- channel ------------------------------------------------------------------


def test_transmit_zero_keeps_rows():
    import random as pyrandom

    source = BitSource(7)
    config = ProtocolConfig(block_size=16, num_blocks=1)
    _, _, block = alice_prepare_block(config, source)
    before = block.rows.copy()
    transmit(block, 0.0, pyrandom.Random(0))
    assert np.array_equal(block.rows, before)


def test_full_noise_flips_everything():
    config = ProtocolConfig(
        block_size=8, num_blocks=20, mode="per_block", channel_flip_prob=1.0, seed=8
    )
    report = run_session(config, force_shared_basis=Basis.Z)
    assert report.qber_true == 1.0


def test_partial_noise_matches_rate():
    config = ProtocolConfig(
        block_size=10,
        num_blocks=1000,
        mode="per_block",
        channel_flip_prob=0.05,
        seed=9,
    )
    report = run_session(config, force_shared_basis=Basis.X)
    assert report.sifted_bits == 10_000
    assert abs(report.qber_true - 0.05) <= 0.01


# --- sifting ------------------------------------------------------------------


def test_sift_block_fraction():
    config = ProtocolConfig(block_size=4, num_blocks=1000, mode="per_block", seed=10)
    report = run_session(config)
    sigma = math.sqrt(1000 * 0.25)
    assert abs(report.kept_blocks - 500) <= 5 * sigma
    assert report.sifted_bits == 4 * report.kept_blocks


def test_forced_bases_keep_everything():
    config = ProtocolConfig(block_size=4, num_blocks=50, mode="per_block", seed=11)
    report = run_session(config, force_shared_basis=Basis.Z)
    assert report.kept_blocks == 50
    assert report.sifted_bits == 200


def test_sift_per_qubit_fraction():
    config = ProtocolConfig(
        block_size=100, num_blocks=100, mode="per_qubit", seed=12
    )
    report = run_session(config)
    sigma = math.sqrt(10_000 * 0.25)
    assert abs(report.sifted_bits - 5000) <= 5 * sigma


def test_sift_empty_records():
    alice, bob, kept = sift([], "per_block")
    assert len(alice) == 0 and len(bob) == 0 and kept == 0


# --- estimation ---------------------------------------------------------------


def test_estimate_identical_keys():
    source = BitSource(13)
    key = np.ones(100, dtype=np.uint8)
    estimate, disclosed = estimate_qber(key, key.copy(), 0.2, source)
    assert estimate == 0.0
    assert len(disclosed) == 20
    assert source.ledger.get("shared", "sampling") > 0


def test_estimate_complementary_keys():
    source = BitSource(14)
    key = np.zeros(50, dtype=np.uint8)
    estimate, _ = estimate_qber(key, 1 - key, 0.2, source)
    assert estimate == 1.0


def test_estimate_converges():
    rng = np.random.default_rng(15)
    alice = rng.integers(0, 2, 10_000).astype(np.uint8)
    flips = rng.random(10_000) < 0.25
    bob = (alice ^ flips).astype(np.uint8)
    source = BitSource(16)
    estimate, disclosed = estimate_qber(alice, bob, 0.2, source)
    assert abs(estimate - 0.25) <= 0.05
    assert list(disclosed) == sorted(set(disclosed))


def test_estimate_rejects_short_or_unequal():
    source = BitSource(17)
    with pytest.raises(ValueError):
        estimate_qber(np.zeros(3, np.uint8), np.zeros(3, np.uint8), 0.2, source)
    with pytest.raises(ValueError):
        estimate_qber(np.zeros(10, np.uint8), np.zeros(9, np.uint8), 0.2, source)


# --- full sessions ------------------------------------------------------------


def test_clean_session_agrees_exactly():
    config = ProtocolConfig(block_size=6, num_blocks=100, mode="per_block", seed=18)
    report = run_session(config)
    assert report.qber_true == 0.0
    assert report.qber_estimated == 0.0
    assert np.array_equal(report.alice_key, report.bob_key)
    assert report.eve_symbols is None


def test_full_intercept_qber():
    config = ProtocolConfig(
        block_size=4, num_blocks=6000, mode="per_block", seed=19
    )
    attack = BlockAttackSpec.intercept(1.0, "per_qubit")
    report = run_session(config, attack)
    assert report.sifted_bits >= 10_000
    assert abs(report.qber_true - 0.25) <= 0.02
    assert report.eve_symbols is not None
    assert len(report.eve_symbols) == report.sifted_bits


def test_same_seed_identical_reports():
    config = ProtocolConfig(
        block_size=4,
        num_blocks=200,
        mode="per_block",
        channel_flip_prob=0.03,
        seed=20,
    )
    attack = BlockAttackSpec.intercept(0.5, "per_block")
    r1 = run_session(config, attack)
    r2 = run_session(config, attack)
    assert np.array_equal(r1.alice_key, r2.alice_key)
    assert np.array_equal(r1.bob_key, r2.bob_key)
    assert r1.qber_true == r2.qber_true
    assert r1.qber_estimated == r2.qber_estimated
    assert r1.disclosed_indices == r2.disclosed_indices
    assert r1.eve_symbols == r2.eve_symbols
    assert r1.ledger.as_dict() == r2.ledger.as_dict()


def test_report_invariants():
    config = ProtocolConfig(
        block_size=5, num_blocks=400, mode="per_block", channel_flip_prob=0.02, seed=21
    )
    report = run_session(config)
    assert report.raw_qubits == 2000
    recomputed = np.count_nonzero(report.alice_key != report.bob_key)
    assert report.qber_true == recomputed / report.sifted_bits
    assert all(0 <= i < report.sifted_bits for i in report.disclosed_indices)
    ledger = report.ledger
    assert ledger.get("alice", "alice_basis") == 400
    assert ledger.get("alice", "alice_bits") == 2000
    assert ledger.get("bob", "bob_basis") == 400
    assert ledger.get("shared", "sampling") > 0


@pytest.mark.parametrize("p,c", [(0.5, 0.02), (1.0, 0.05), (0.3, 0.0)])
def test_qber_composition_oracle(p, c):
    expected = intercept_qber_oracle(p, c)
    config = ProtocolConfig(
        block_size=4,
        num_blocks=5000,
        mode="per_block",
        channel_flip_prob=c,
        seed=22,
    )
    attack = BlockAttackSpec.intercept(p, "per_qubit")
    report = run_session(config, attack)
    sigma = math.sqrt(expected * (1 - expected) / report.sifted_bits)
    assert abs(report.qber_true - expected) <= 5 * sigma + 1e-9


def test_mode_equivalence_single_qubit_blocks():
    kwargs = dict(block_size=1, num_blocks=500, channel_flip_prob=0.04, seed=23)
    r_block = run_session(ProtocolConfig(mode="per_block", **kwargs))
    r_qubit = run_session(ProtocolConfig(mode="per_qubit", **kwargs))
    assert np.array_equal(r_block.alice_key, r_qubit.alice_key)
    assert np.array_equal(r_block.bob_key, r_qubit.bob_key)
    assert r_block.qber_true == r_qubit.qber_true
    assert r_block.qber_estimated == r_qubit.qber_estimated
    assert r_block.disclosed_indices == r_qubit.disclosed_indices
    assert r_block.ledger.as_dict() == r_qubit.ledger.as_dict()


def test_unitary_attack_requires_matching_shape():
    attack = BlockAttackSpec.unitary(cnot_entangler(), 2, 1, delayed=True)
    with pytest.raises(ValueError):
        run_session(ProtocolConfig(block_size=3, num_blocks=2, seed=24), attack)
    with pytest.raises(ValueError):
        run_session(
            ProtocolConfig(block_size=2, num_blocks=2, mode="per_qubit", seed=24),
            attack,
        )


def test_unitary_attack_session_runs():
    attack = BlockAttackSpec.unitary(cnot_entangler(), 2, 1, delayed=True)
    config = ProtocolConfig(block_size=2, num_blocks=300, mode="per_block", seed=25)
    report = run_session(config, attack)
    assert report.sifted_bits == 2 * report.kept_blocks
    assert len(report.eve_symbols) == report.sifted_bits
    # every kept register was measured out at announcement
    for symbol in report.eve_symbols:
        basis_value, ancilla_bits = symbol
        assert basis_value in (0, 1)
        assert len(ancilla_bits) == 1


# --- empirical rates ----------------------------------------------------------


def test_rates_without_attack():
    config = ProtocolConfig(block_size=4, num_blocks=500, seed=26)
    rates = empirical_rates(run_session(config))
    assert rates.i_ea == 0.0 and rates.i_eb == 0.0
    # identical keys: plug-in I(A:B) = H(A) = h(empirical bias), near 1
    assert 0.99 <= rates.i_ab <= 1.0
    assert rates.ck_rate == rates.i_ab
    assert rates.distillable


def test_rates_full_intercept_negative():
    config = ProtocolConfig(block_size=4, num_blocks=4000, seed=27)
    attack = BlockAttackSpec.intercept(1.0, "per_qubit")
    rates = empirical_rates(run_session(config, attack))
    assert 0.4 <= rates.i_ea <= 0.6
    assert rates.ck_rate < 0.0
    assert not rates.distillable


def test_rates_empty_session():
    # A single per_block block is discarded half the time; find such a seed.
    for seed in range(100):
        config = ProtocolConfig(block_size=4, num_blocks=1, seed=seed)
        report = run_session(config)
        if report.sifted_bits == 0:
            rates = empirical_rates(report)
            assert rates.ck_rate == 0.0
            assert not rates.distillable
            return
    pytest.fail("no discarded block in 100 seeds")
