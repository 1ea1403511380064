"""Exact statevector simulation of small qubit registers.

Conventions, fixed across the package:

- Qubit 0 is the most significant bit of the amplitude index, so
  ``amplitudes.reshape([2] * n)`` puts qubit k on axis k.
- Registers are capped at 12 qubits; everything is dense complex128.
- Global phase is never compared directly: state equivalence goes through
  density matrices or outcome distributions.
- Measurement probabilities within 1e-12 of 0 or 1 are treated as
  deterministic and consume no randomness; probabilities within 1e-12 of
  1/2 are decided by a single fair bit. Anything else falls back to the
  coin's exact bit-by-bit sampler.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Sequence

import numpy as np

from .infotheory import JointDistribution
from .randomness import DETERMINISTIC_EPS

MAX_REGISTER_QUBITS = 12

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
# Branches thinner than this are numerically extinct and are not explored.
BRANCH_CUTOFF = 1e-15

_SQRT_HALF = 1.0 / math.sqrt(2.0)


class Basis(Enum):
    """The two conjugate encoding bases: Z eigenstates and their uniform
    superpositions."""

    Z = 0
    X = 1


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state of `num_qubits` qubits.

    Treat as immutable: operations return new values and never write to
    `amplitudes` in place.
    """

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_qubits < 1:
            raise ValueError("num_qubits must be >= 1")
        if self.num_qubits > MAX_REGISTER_QUBITS:
            raise ValueError(f"registers are capped at {MAX_REGISTER_QUBITS} qubits")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.num_qubits,):
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, got shape {amps.shape}"
            )
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > 1e-10:
            raise ValueError(f"state norm^2 is {norm_sq}, not 1")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_error(self) -> float:
        return abs(float(np.sum(np.abs(self.amplitudes) ** 2)) - 1.0)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix on `num_qubits`."""

    num_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        dim = 2**self.num_qubits
        rho = np.asarray(self.entries, dtype=complex)
        if rho.shape != (dim, dim):
            raise ValueError(f"expected {dim}x{dim} matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-10:
            raise ValueError(f"trace is {np.trace(rho)}, not 1")
        if np.min(np.linalg.eigvalsh(rho)) < EIGENVALUE_FLOOR:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "entries", rho)


@dataclass(frozen=True)
class UnitarySpec:
    """Unitary matrix on a power-of-2 dimension, checked at construction."""

    dimension: int
    entries: np.ndarray

    def __post_init__(self):
        if self.dimension < 2 or self.dimension & (self.dimension - 1):
            raise ValueError(f"dimension {self.dimension} is not a power of 2 >= 2")
        u = np.asarray(self.entries, dtype=complex)
        if u.shape != (self.dimension, self.dimension):
            raise ValueError(f"expected shape {(self.dimension, self.dimension)}")
        deviation = np.max(np.abs(u @ u.conj().T - np.eye(self.dimension)))
        if deviation > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (max |UU+ - I| = {deviation:.3e})")
        object.__setattr__(self, "entries", u)

    @property
    def num_qubits(self) -> int:
        return self.dimension.bit_length() - 1

    @classmethod
    def from_matrix(cls, matrix) -> "UnitarySpec":
        if isinstance(matrix, UnitarySpec):
            return matrix
        array = np.asarray(matrix, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {array.shape}")
        return cls(array.shape[0], array)


# 1-qubit amplitude pairs of the four BB84 states, indexed [basis][bit].
_BB84_AMPS = np.array(
    [
        [[1.0, 0.0], [0.0, 1.0]],
        [[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]],
    ],
    dtype=complex,
)

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) * _SQRT_HALF
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)

# Unitaries taking |0> to each BB84 state, for in-circuit preparation.
_PREP_UNITARIES = {
    (Basis.Z, 0): np.eye(2, dtype=complex),
    (Basis.Z, 1): PAULI_X,
    (Basis.X, 0): HADAMARD,
    (Basis.X, 1): HADAMARD @ PAULI_X,
}

# Takes |00> to the singlet (|01> - |10>)/sqrt(2); remaining columns complete
# it to a unitary.
_SINGLET_PREP = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [_SQRT_HALF, 0.0, _SQRT_HALF, 0.0],
        [-_SQRT_HALF, 0.0, _SQRT_HALF, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ],
    dtype=complex,
)


def prepare_bb84(bit: int, basis: Basis) -> StateVector:
    """Single-qubit BB84 encoding of `bit` in `basis`."""
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    return StateVector(1, _BB84_AMPS[basis.value, bit].copy())


def prepare_singlet() -> StateVector:
    """Two-qubit singlet (|01> - |10>)/sqrt(2)."""
    return StateVector(2, np.array([0.0, _SQRT_HALF, -_SQRT_HALF, 0.0], dtype=complex))


def _snap_probability(p: float) -> float:
    """Collapse float noise around the decision points 0, 1/2 and 1."""
    if p < DETERMINISTIC_EPS:
        return 0.0
    if p > 1.0 - DETERMINISTIC_EPS:
        return 1.0
    if abs(p - 0.5) < DETERMINISTIC_EPS:
        return 0.5
    return p


def measure(
    state: StateVector, qubit_index: int, basis: Basis, coin
) -> tuple[int, StateVector]:
    """Projective measurement of one qubit; returns (outcome, post state).

    `coin` is any object with ``bernoulli(p) -> 0|1``; it is consulted only
    when both outcomes have nonzero probability.
    """
    n = state.num_qubits
    if not 0 <= qubit_index < n:
        raise IndexError(f"qubit {qubit_index} out of range for {n} qubits")
    amps = state.amplitudes
    if basis is Basis.X:
        amps = _apply_matrix(amps, HADAMARD, (qubit_index,), n)
    psi = amps.reshape([2] * n)
    moved = np.moveaxis(psi, qubit_index, 0)
    p1 = _snap_probability(float(np.sum(np.abs(moved[1]) ** 2)))
    if p1 == 0.0:
        outcome = 0
    elif p1 == 1.0:
        outcome = 1
    else:
        outcome = coin.bernoulli(p1)
    prob = p1 if outcome == 1 else 1.0 - p1
    projected = np.zeros_like(moved)
    projected[outcome] = moved[outcome]
    post = np.moveaxis(projected, 0, qubit_index).reshape(-1) / math.sqrt(prob)
    if basis is Basis.X:
        post = _apply_matrix(post, HADAMARD, (qubit_index,), n)
    return outcome, StateVector(n, post)


def project(
    state: StateVector, qubit_index: int, basis: Basis, outcome: int
) -> tuple[float, StateVector | None]:
    """Condition on a chosen measurement outcome without sampling.

    Returns (branch probability, normalized post state); the post state is
    None when the branch probability is below the numerical cutoff.
    """
    n = state.num_qubits
    if not 0 <= qubit_index < n:
        raise IndexError(f"qubit {qubit_index} out of range for {n} qubits")
    if outcome not in (0, 1):
        raise ValueError("outcome must be 0 or 1")
    amps = state.amplitudes
    if basis is Basis.X:
        amps = _apply_matrix(amps, HADAMARD, (qubit_index,), n)
    moved = np.moveaxis(amps.reshape([2] * n), qubit_index, 0)
    prob = float(np.sum(np.abs(moved[outcome]) ** 2))
    if prob <= BRANCH_CUTOFF:
        return 0.0, None
    projected = np.zeros_like(moved)
    projected[outcome] = moved[outcome]
    post = np.moveaxis(projected, 0, qubit_index).reshape(-1) / math.sqrt(prob)
    if basis is Basis.X:
        post = _apply_matrix(post, HADAMARD, (qubit_index,), n)
    return prob, StateVector(n, post)


def embed(num_qubits: int, u: UnitarySpec, targets: Sequence[int]) -> UnitarySpec:
    """Full 2^num_qubits matrix acting as `u` on `targets`, identity elsewhere."""
    targets = tuple(targets)
    dim = 2**num_qubits
    if u.dimension != 2 ** len(targets):
        raise ValueError("unitary dimension does not match targets")
    columns = np.empty((dim, dim), dtype=complex)
    for col in range(dim):
        basis_vec = np.zeros(dim, dtype=complex)
        basis_vec[col] = 1.0
        columns[:, col] = _apply_matrix(basis_vec, u.entries, targets, num_qubits)
    return UnitarySpec(dim, columns)


def apply_unitary(
    state: StateVector, u: UnitarySpec, targets: Sequence[int]
) -> StateVector:
    """Apply `u` to the ordered `targets`, identity on the rest."""
    targets = tuple(targets)
    n = state.num_qubits
    if len(set(targets)) != len(targets):
        raise ValueError("target qubits must be distinct")
    if any(not 0 <= t < n for t in targets):
        raise IndexError(f"targets {targets} out of range for {n} qubits")
    if u.dimension != 2 ** len(targets):
        raise ValueError(
            f"unitary dimension {u.dimension} does not match {len(targets)} targets"
        )
    return StateVector(n, _apply_matrix(state.amplitudes, u.entries, targets, n))


def _apply_matrix(
    amps: np.ndarray, matrix: np.ndarray, targets: tuple[int, ...], n: int
) -> np.ndarray:
    t = len(targets)
    psi = amps.reshape([2] * n)
    op = matrix.reshape([2] * (2 * t))
    psi = np.tensordot(op, psi, axes=(list(range(t, 2 * t)), list(targets)))
    return np.moveaxis(psi, range(t), targets).reshape(-1)


def permute_qubits(state: StateVector, destinations: Sequence[int]) -> StateVector:
    """Relabel qubits: current qubit i becomes qubit destinations[i]."""
    n = state.num_qubits
    if sorted(destinations) != list(range(n)):
        raise ValueError("destinations must be a permutation of all qubit indices")
    psi = state.amplitudes.reshape([2] * n)
    return StateVector(n, np.moveaxis(psi, range(n), destinations).reshape(-1))


def tensor(*states: StateVector) -> StateVector:
    """Tensor product, qubits ordered left to right."""
    amps = reduce(np.kron, (s.amplitudes for s in states))
    return StateVector(sum(s.num_qubits for s in states), amps)


def reduced_density(state: StateVector, keep: Sequence[int]) -> DensityMatrix:
    """Partial trace keeping `keep` (row/column index ordered by ascending
    qubit index)."""
    kept = sorted(set(keep))
    if not kept:
        raise ValueError("keep set must be nonempty")
    n = state.num_qubits
    if any(not 0 <= q < n for q in kept):
        raise IndexError(f"keep set {kept} out of range for {n} qubits")
    traced = [q for q in range(n) if q not in kept]
    psi = state.amplitudes.reshape([2] * n)
    if traced:
        rho = np.tensordot(psi, psi.conj(), axes=(traced, traced))
    else:
        rho = np.tensordot(psi, psi.conj(), axes=0)
    dim = 2 ** len(kept)
    return DensityMatrix(len(kept), rho.reshape(dim, dim))


def random_unitary(num_qubits: int, seed: int) -> UnitarySpec:
    """Haar-distributed unitary from seeded Gaussian orthogonalization."""
    rng = np.random.default_rng(seed)
    dim = 2**num_qubits
    ginibre = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(ginibre)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return UnitarySpec(dim, q * phases)


# --- circuit description and exhaustive enumeration ---------------------


@dataclass(frozen=True)
class Prep:
    """Set `qubit` (assumed fresh in |0>) to the BB84 state (bit, basis)."""

    qubit: int
    bit: int
    basis: Basis


@dataclass(frozen=True)
class PrepSinglet:
    """Set the fresh pair (qubit_a, qubit_b) to the singlet."""

    qubit_a: int
    qubit_b: int


@dataclass(frozen=True)
class Apply:
    u: UnitarySpec
    targets: tuple[int, ...]


@dataclass(frozen=True)
class Measure:
    qubit: int
    basis: Basis
    label: str | None = None


@dataclass(frozen=True)
class Circuit:
    """Straight-line program over a fixed register, starting from |0...0>."""

    num_qubits: int
    ops: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def measurement_labels(self) -> tuple[str, ...]:
        labels = []
        for i, op in enumerate(o for o in self.ops if isinstance(o, Measure)):
            labels.append(op.label if op.label is not None else f"m{i}")
        return tuple(labels)


def _initial_state(circuit: Circuit) -> np.ndarray:
    amps = np.zeros(2**circuit.num_qubits, dtype=complex)
    amps[0] = 1.0
    return amps


def _apply_op(amps: np.ndarray, op, n: int) -> np.ndarray:
    if isinstance(op, Prep):
        return _apply_matrix(amps, _PREP_UNITARIES[(op.basis, op.bit)], (op.qubit,), n)
    if isinstance(op, PrepSinglet):
        return _apply_matrix(amps, _SINGLET_PREP, (op.qubit_a, op.qubit_b), n)
    if isinstance(op, Apply):
        if op.u.dimension != 2 ** len(op.targets):
            raise ValueError("unitary dimension does not match targets")
        return _apply_matrix(amps, op.u.entries, tuple(op.targets), n)
    raise TypeError(f"not a unitary circuit op: {op!r}")


def enumerate_outcomes(circuit: Circuit) -> JointDistribution:
    """Exact joint distribution of all measurement outcomes.

    Walks every measurement branch with its Born weight; no sampling is
    involved, so this is the oracle the statistical paths are checked
    against. Probabilities sum to 1 within 1e-10.
    """
    n = circuit.num_qubits
    if n > MAX_REGISTER_QUBITS:
        raise ValueError(f"registers are capped at {MAX_REGISTER_QUBITS} qubits")
    table: dict[tuple, float] = {}

    def walk(amps: np.ndarray, op_index: int, outcomes: tuple, weight: float) -> None:
        for i in range(op_index, len(circuit.ops)):
            op = circuit.ops[i]
            if not isinstance(op, Measure):
                amps = _apply_op(amps, op, n)
                continue
            work = amps
            if op.basis is Basis.X:
                work = _apply_matrix(work, HADAMARD, (op.qubit,), n)
            moved = np.moveaxis(work.reshape([2] * n), op.qubit, 0)
            for outcome in (0, 1):
                prob = float(np.sum(np.abs(moved[outcome]) ** 2))
                if prob <= BRANCH_CUTOFF:
                    continue
                projected = np.zeros_like(moved)
                projected[outcome] = moved[outcome]
                branch = np.moveaxis(projected, 0, op.qubit).reshape(-1)
                branch = branch / math.sqrt(prob)
                if op.basis is Basis.X:
                    branch = _apply_matrix(branch, HADAMARD, (op.qubit,), n)
                walk(branch, i + 1, outcomes + (outcome,), weight * prob)
            return
        table[outcomes] = table.get(outcomes, 0.0) + weight

    walk(_initial_state(circuit), 0, (), 1.0)
    return JointDistribution(circuit.measurement_labels(), table)


class RandomCoin:
    """Born sampling from a plain PRNG; for Monte Carlo checks, not ledgered."""

    def __init__(self, rng: random.Random):
        self._rng = rng

    def bernoulli(self, p: float) -> int:
        return 1 if self._rng.random() < p else 0


def sample_circuit(circuit: Circuit, shots: int, coin) -> list[tuple]:
    """Sample the circuit `shots` times through the measurement path.

    Independent of enumerate_outcomes: every shot runs real projective
    measurements driven by `coin`.
    """
    n = circuit.num_qubits
    results = []
    for _ in range(shots):
        amps = _initial_state(circuit)
        outcomes = []
        for op in circuit.ops:
            if isinstance(op, Measure):
                outcome, post = measure(StateVector(n, amps), op.qubit, op.basis, coin)
                outcomes.append(outcome)
                amps = post.amplitudes
            else:
                amps = _apply_op(amps, op, n)
        results.append(tuple(outcomes))
    return results


# --- vectorized product-state blocks -------------------------------------
#
# A block that no attack has entangled is a product of 1-qubit states and
# is stored as an (n, 2) amplitude array, one row per qubit. The math is
# identical to the register path, just batched.


def bb84_rows(bits: np.ndarray, bases) -> np.ndarray:
    """(n, 2) amplitudes for per-qubit BB84 preparations."""
    bits = np.asarray(bits, dtype=np.int64)
    basis_vals = _basis_values(bases, len(bits))
    return _BB84_AMPS[basis_vals, bits].copy()


def measure_rows(rows: np.ndarray, bases, coin) -> tuple[np.ndarray, np.ndarray]:
    """Measure each row-qubit independently; returns (outcomes, post rows).

    Deterministic rows consume nothing; uniform rows are decided by one
    batched fair bit each (index order); any other probability falls back
    to coin.bernoulli per row, after the batch.
    """
    n = len(rows)
    basis_vals = _basis_values(bases, n)
    work = rows.copy()
    xsel = basis_vals == 1
    if np.any(xsel):
        work[xsel] = work[xsel] @ HADAMARD
    p1 = np.abs(work[:, 1]) ** 2
    outcomes = np.zeros(n, dtype=np.uint8)
    det1 = p1 > 1.0 - DETERMINISTIC_EPS
    uniform = np.abs(p1 - 0.5) < DETERMINISTIC_EPS
    other = ~det1 & ~uniform & (p1 >= DETERMINISTIC_EPS)
    outcomes[det1] = 1
    count = int(np.count_nonzero(uniform))
    if count:
        outcomes[uniform] = coin.bits(count)
    for i in np.flatnonzero(other):
        outcomes[i] = coin.bernoulli(float(p1[i]))
    post = _BB84_AMPS[basis_vals, outcomes].copy()
    return outcomes, post


def flip_rows(rows: np.ndarray, mask: np.ndarray, bases) -> np.ndarray:
    """Bit-flip each masked row in its own preparation basis.

    In Z this swaps the computational amplitudes (Pauli X); in X it swaps
    the +/- components (Pauli Z). Rows outside the mask are untouched.
    """
    n = len(rows)
    basis_vals = _basis_values(bases, n)
    out = rows.copy()
    z_flip = mask & (basis_vals == 0)
    x_flip = mask & (basis_vals == 1)
    out[z_flip] = out[z_flip][:, ::-1]
    out[x_flip] = out[x_flip] * np.array([1.0, -1.0])
    return out


def rows_to_state(rows: np.ndarray) -> StateVector:
    """Promote an (n, 2) product block to a full register state."""
    amps = reduce(np.kron, list(rows))
    return StateVector(len(rows), amps)


def _basis_values(bases, n: int) -> np.ndarray:
    if isinstance(bases, Basis):
        return np.full(n, bases.value, dtype=np.int64)
    values = np.asarray(
        [b.value if isinstance(b, Basis) else int(b) for b in np.atleast_1d(bases)],
        dtype=np.int64,
    )
    if len(values) != n:
        raise ValueError(f"expected {n} basis values, got {len(values)}")
    return values
