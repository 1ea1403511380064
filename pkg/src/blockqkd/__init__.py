"""Exact BB84 simulator with block-wise basis choices.

One random basis covers a whole n-qubit block, so a session consumes
(n + 1)/(2n) of the sender's baseline randomness and 1/n of the
receiver's. Every random bit is drawn through a ledgered source, every
quantum state is tracked exactly, and the classical pipeline (error
reconciliation plus Toeplitz hashing) turns sifted bits into a final key.
"""

__version__ = "0.1.0"

from .attacks import (
    BlockAttackSpec,
    EquivalenceReport,
    delayed_measurement,
    intercept_resend,
    load_unitary,
    reduction_corpus,
    save_unitary,
    singlet_simulation,
    unitary_block_attack,
    verify_reduction,
)
from .infotheory import (
    JointDistribution,
    RateReport,
    binary_entropy,
    ck_rate,
    empirical_joint,
    entropy,
    mutual_information,
)
from .postprocess import (
    AmplificationResult,
    PipelineResult,
    ReconciliationResult,
    cascade,
    pipeline,
    toeplitz_pa,
)
from .protocol import (
    ProtocolConfig,
    SessionReport,
    empirical_rates,
    run_session,
)
from .quantum import (
    Basis,
    Circuit,
    DensityMatrix,
    StateVector,
    UnitarySpec,
    enumerate_outcomes,
    random_unitary,
    sample_circuit,
)
from .randomness import (
    BitSource,
    ConsumptionReport,
    RandomnessLedger,
    consumption_ratio,
)

__all__ = [
    "__version__",
    "AmplificationResult",
    "Basis",
    "BitSource",
    "BlockAttackSpec",
    "Circuit",
    "ConsumptionReport",
    "DensityMatrix",
    "EquivalenceReport",
    "JointDistribution",
    "PipelineResult",
    "ProtocolConfig",
    "RandomnessLedger",
    "RateReport",
    "ReconciliationResult",
    "SessionReport",
    "StateVector",
    "UnitarySpec",
    "binary_entropy",
    "cascade",
    "ck_rate",
    "consumption_ratio",
    "delayed_measurement",
    "empirical_joint",
    "empirical_rates",
    "entropy",
    "enumerate_outcomes",
    "intercept_resend",
    "load_unitary",
    "mutual_information",
    "pipeline",
    "random_unitary",
    "reduction_corpus",
    "run_session",
    "sample_circuit",
    "save_unitary",
    "singlet_simulation",
    "toeplitz_pa",
    "unitary_block_attack",
    "verify_reduction",
]
