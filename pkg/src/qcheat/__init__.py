"""Simulator and attack synthesis for two-party quantum protocols.

The package mechanizes two classic impossibility arguments.  For bit
commitment it builds Alice's EPR cheating unitary explicitly: whenever the
commit phase hides the bit from Bob, the Uhlmann rotation on her own
holding switches her commitment with success bounded only by the hiding
defect.  For coin tossing it runs the backward induction that peels an
"ideal" protocol round by round until the zero-round remnant contradicts
the no-communication bound on mutual information.
"""

from .qcore import (
    MAX_QUBITS,
    MAX_SIDE_QUBITS,
    DensityMatrix,
    GateOp,
    InvariantViolation,
    Partition,
    PureState,
    apply_gate,
    apply_unitary,
    gate_matrix,
    is_unitary,
    matrix_sqrt_psd,
    mutual_information,
    partial_trace,
    reduce_density,
    von_neumann_entropy,
    zero_state,
)
from .fidelity import (
    Povm,
    fidelity_povm,
    fidelity_purification,
    fidelity_trace,
    povm_overlap,
    random_povm,
)
from .schmidt import (
    SchmidtDecomposition,
    cheating_unitary_ideal,
    reduction_fidelity,
    schmidt_decompose,
    uhlmann_unitary,
)
from .protocol import (
    BUILTIN_NAMES,
    MeasureOp,
    Projector,
    Protocol,
    ProtocolError,
    Round,
    alice_side,
    bob_holding,
    commit_custody,
    commit_delta,
    document_to_yaml,
    enumerate_acceptance,
    enumerate_branches,
    load_protocol,
    parse_protocol,
    protocol_to_document,
    purify_protocol,
    resolve_document,
    run_commit,
    run_open,
)
from .attack import AttackReport, SweepPoint, attack_sweep, epr_attack
from .cointoss import (
    CoinProtocol,
    FidelityTriple,
    InductionVerdict,
    NotIdealError,
    TruncationStep,
    WalkResult,
    coin_to_document,
    induction_report,
    last_round_fidelities,
    load_coin_protocol,
    min_rounds,
    outcome_distribution,
    parse_coin_protocol,
    run_rounds,
    truncate_last_round,
    validate_walk,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_QUBITS",
    "MAX_SIDE_QUBITS",
    "DensityMatrix",
    "GateOp",
    "InvariantViolation",
    "Partition",
    "PureState",
    "apply_gate",
    "apply_unitary",
    "gate_matrix",
    "is_unitary",
    "matrix_sqrt_psd",
    "mutual_information",
    "partial_trace",
    "reduce_density",
    "von_neumann_entropy",
    "zero_state",
    "Povm",
    "fidelity_povm",
    "fidelity_purification",
    "fidelity_trace",
    "povm_overlap",
    "random_povm",
    "SchmidtDecomposition",
    "cheating_unitary_ideal",
    "reduction_fidelity",
    "schmidt_decompose",
    "uhlmann_unitary",
    "BUILTIN_NAMES",
    "MeasureOp",
    "Projector",
    "Protocol",
    "ProtocolError",
    "Round",
    "alice_side",
    "bob_holding",
    "commit_custody",
    "commit_delta",
    "document_to_yaml",
    "enumerate_acceptance",
    "enumerate_branches",
    "load_protocol",
    "parse_protocol",
    "protocol_to_document",
    "purify_protocol",
    "resolve_document",
    "run_commit",
    "run_open",
    "AttackReport",
    "SweepPoint",
    "attack_sweep",
    "epr_attack",
    "CoinProtocol",
    "FidelityTriple",
    "InductionVerdict",
    "NotIdealError",
    "TruncationStep",
    "WalkResult",
    "coin_to_document",
    "induction_report",
    "last_round_fidelities",
    "load_coin_protocol",
    "min_rounds",
    "outcome_distribution",
    "parse_coin_protocol",
    "run_rounds",
    "truncate_last_round",
    "validate_walk",
    "__version__",
]
