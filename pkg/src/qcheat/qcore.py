"""Dense statevector primitives for small quantum registers.

Conventions used throughout the package:

* Qubit 0 is the MOST significant bit of an amplitude index, so the basis
  state |q0 q1 ... q_{n-1}> sits at index q0*2^(n-1) + ... + q_{n-1}.
  Reshaping an amplitude vector to shape (2,)*n therefore maps qubit k to
  tensor axis k.
* Registers are capped at 24 qubits; any operation that materialises a
  2^a x 2^b coefficient matrix requires each side to stay at or below
  12 qubits.
* All values are immutable.  Operations return fresh values and never
  mutate their inputs, so everything here is safe to share across threads.
* Nothing in this module reads ambient entropy; randomness, where needed,
  always arrives as an explicit generator or seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 24
MAX_SIDE_QUBITS = 12

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
EIGENVALUE_TOL = 1e-10
TRACE_TOL = 1e-10
UNITARY_TOL = 1e-8
SQRT_CLAMP_TOL = 1e-8
SQRT_KERNEL_CUTOFF = 1e-12
ENTROPY_CUTOFF = 1e-12

GATE_NAMES = ("H", "X", "Y", "Z", "S", "T", "RY", "RZ", "CX", "CZ", "SWAP", "RAW")
_PARAM_GATES = ("RY", "RZ")
_GATE_ARITY = {"H": 1, "X": 1, "Y": 1, "Z": 1, "S": 1, "T": 1,
               "RY": 1, "RZ": 1, "CX": 2, "CZ": 2, "SWAP": 2}
MAX_RAW_TARGETS = 3


class InvariantViolation(Exception):
    """A numerical invariant of a core value was broken.

    Raised when construction-time checks fail (norms, hermiticity,
    positivity, unitarity).  Distinct from ValueError so that callers can
    tell internal inconsistencies apart from bad user input.
    """


def _frozen_array(values, dtype=np.complex128) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PureState:
    """Normalised statevector on ``num_qubits`` qubits."""

    amplitudes: np.ndarray
    num_qubits: int = field(init=False)

    def __post_init__(self):
        amps = _frozen_array(self.amplitudes)
        if amps.ndim != 1:
            raise InvariantViolation("amplitudes must be a 1-D vector")
        n = int(math.log2(amps.size)) if amps.size > 0 else 0
        if amps.size != 2 ** n or n < 1:
            raise InvariantViolation(
                f"amplitude vector length {amps.size} is not 2^n for n >= 1")
        if n > MAX_QUBITS:
            raise InvariantViolation(f"register of {n} qubits exceeds the cap of {MAX_QUBITS}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise InvariantViolation(f"state norm {norm!r} deviates from 1 beyond {NORM_TOL}")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "num_qubits", n)

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per qubit."""
        return self.amplitudes.reshape((2,) * self.num_qubits)


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    entries: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        entries = _frozen_array(self.entries)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise InvariantViolation("density matrix must be square")
        if np.max(np.abs(entries - entries.conj().T)) > HERMITIAN_TOL:
            raise InvariantViolation(
                f"density matrix is not Hermitian within {HERMITIAN_TOL}")
        trace = entries.trace()
        if abs(trace - 1.0) > TRACE_TOL:
            raise InvariantViolation(f"trace {trace!r} deviates from 1 beyond {TRACE_TOL}")
        lo = float(np.linalg.eigvalsh(entries)[0])
        if lo < -EIGENVALUE_TOL:
            raise InvariantViolation(
                f"smallest eigenvalue {lo!r} is below -{EIGENVALUE_TOL}")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "dim", entries.shape[0])

    @property
    def num_qubits(self) -> int:
        n = int(math.log2(self.dim))
        if 2 ** n != self.dim:
            raise InvariantViolation(f"dimension {self.dim} is not a power of two")
        return n


@dataclass(frozen=True)
class Partition:
    """Disjoint ownership of register indices by Alice, Bob and the channel."""

    alice_qubits: frozenset
    bob_qubits: frozenset
    channel_qubits: frozenset

    def __post_init__(self):
        a = frozenset(int(q) for q in self.alice_qubits)
        b = frozenset(int(q) for q in self.bob_qubits)
        c = frozenset(int(q) for q in self.channel_qubits)
        total = len(a) + len(b) + len(c)
        union = a | b | c
        if len(union) != total:
            raise InvariantViolation("partition sides overlap")
        if union != set(range(total)):
            raise InvariantViolation(
                f"partition must cover exactly 0..{total - 1}, got {sorted(union)}")
        object.__setattr__(self, "alice_qubits", a)
        object.__setattr__(self, "bob_qubits", b)
        object.__setattr__(self, "channel_qubits", c)

    @property
    def num_qubits(self) -> int:
        return len(self.alice_qubits) + len(self.bob_qubits) + len(self.channel_qubits)

    def owner(self, qubit: int) -> str:
        if qubit in self.alice_qubits:
            return "alice"
        if qubit in self.bob_qubits:
            return "bob"
        if qubit in self.channel_qubits:
            return "channel"
        raise ValueError(f"qubit {qubit} is outside the partition")

    def machine(self, actor: str) -> frozenset:
        if actor == "alice":
            return self.alice_qubits
        if actor == "bob":
            return self.bob_qubits
        raise ValueError(f"unknown actor {actor!r}")

    def add_ancilla(self, owner: str) -> "Partition":
        """Append one fresh qubit at the end of the register, owned by ``owner``."""
        idx = self.num_qubits
        if owner == "alice":
            return Partition(self.alice_qubits | {idx}, self.bob_qubits, self.channel_qubits)
        if owner == "bob":
            return Partition(self.alice_qubits, self.bob_qubits | {idx}, self.channel_qubits)
        raise ValueError(f"ancilla owner must be alice or bob, got {owner!r}")


_SQ2 = 1.0 / math.sqrt(2.0)
_FIXED_GATES = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        return False
    eye = np.eye(matrix.shape[0])
    return bool(np.max(np.abs(matrix.conj().T @ matrix - eye)) <= tol)


@dataclass(frozen=True)
class GateOp:
    """One gate from the fixed basis, applied to explicit target qubits.

    ``kind`` is one of H, X, Y, Z, S, T, RY, RZ, CX, CZ, SWAP, RAW.  RY/RZ
    carry an angle in ``param``; RAW carries an explicit unitary ``matrix``
    on at most three targets.  ``control_classical`` names a measurement
    result that must be all ones for the gate to fire; it only appears in
    protocols that have not been compiled to unitary form yet.
    """

    kind: str
    targets: tuple
    param: float | None = None
    matrix: np.ndarray | None = None
    control_classical: str | None = None

    def __post_init__(self):
        if self.kind not in GATE_NAMES:
            raise InvariantViolation(f"unknown gate kind {self.kind!r}")
        targets = tuple(int(t) for t in self.targets)
        if len(set(targets)) != len(targets):
            raise InvariantViolation(f"gate targets repeat: {targets}")
        object.__setattr__(self, "targets", targets)
        if self.kind == "RAW":
            if self.matrix is None:
                raise InvariantViolation("RAW gate requires a matrix")
            if not 1 <= len(targets) <= MAX_RAW_TARGETS:
                raise InvariantViolation(
                    f"RAW gate takes 1..{MAX_RAW_TARGETS} targets, got {len(targets)}")
            mat = _frozen_array(self.matrix)
            want = 2 ** len(targets)
            if mat.shape != (want, want):
                raise InvariantViolation(
                    f"RAW matrix shape {mat.shape} does not match {len(targets)} targets")
            if not is_unitary(mat):
                raise InvariantViolation(f"RAW matrix is not unitary within {UNITARY_TOL}")
            object.__setattr__(self, "matrix", mat)
            if self.param is not None:
                raise InvariantViolation("RAW gate takes no angle parameter")
        else:
            if self.matrix is not None:
                raise InvariantViolation(f"{self.kind} gate takes no matrix")
            if len(targets) != _GATE_ARITY[self.kind]:
                raise InvariantViolation(
                    f"{self.kind} takes {_GATE_ARITY[self.kind]} target(s), got {len(targets)}")
            if self.kind in _PARAM_GATES:
                if self.param is None:
                    raise InvariantViolation(f"{self.kind} requires an angle parameter")
                object.__setattr__(self, "param", float(self.param))
            elif self.param is not None:
                raise InvariantViolation(f"{self.kind} takes no angle parameter")


def gate_matrix(op: GateOp) -> np.ndarray:
    """Unitary matrix of ``op`` on its own targets, qubit order as listed."""
    if op.kind == "RAW":
        return op.matrix
    if op.kind == "RY":
        c, s = math.cos(op.param / 2.0), math.sin(op.param / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if op.kind == "RZ":
        return np.diag([np.exp(-0.5j * op.param), np.exp(0.5j * op.param)])
    return _FIXED_GATES[op.kind]


def _check_targets(qubits, num_qubits, what="target") -> tuple:
    qubits = tuple(int(q) for q in qubits)
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"{what} qubits repeat: {qubits}")
    for q in qubits:
        if not 0 <= q < num_qubits:
            raise ValueError(f"{what} qubit {q} outside register of {num_qubits} qubits")
    return qubits


def _apply_matrix(amps: np.ndarray, matrix: np.ndarray, qubits, num_qubits) -> np.ndarray:
    """Contract ``matrix`` (2^k x 2^k) into axes ``qubits`` of the state tensor.

    Does not require unitarity; used for projectors as well as gates.
    """
    k = len(qubits)
    op = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * k))
    psi = amps.reshape((2,) * num_qubits)
    out = np.tensordot(op, psi, axes=(tuple(range(k, 2 * k)), qubits))
    out = np.moveaxis(out, tuple(range(k)), qubits)
    return out.reshape(-1)


def apply_unitary(state: PureState, matrix: np.ndarray, qubits) -> PureState:
    """Apply a unitary on an arbitrary subset of qubits.

    Parameters
    ----------
    state : PureState
    matrix : (2^k, 2^k) unitary; the first qubit in ``qubits`` is the most
        significant bit of the matrix index.
    qubits : ordered sequence of k distinct register indices.
    """
    qubits = _check_targets(qubits, state.num_qubits)
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (2 ** len(qubits), 2 ** len(qubits)):
        raise ValueError(
            f"matrix shape {matrix.shape} does not match {len(qubits)} qubits")
    if not is_unitary(matrix):
        raise InvariantViolation(f"matrix is not unitary within {UNITARY_TOL}")
    return PureState(_apply_matrix(state.amplitudes, matrix, qubits, state.num_qubits))


def apply_gate(state: PureState, op: GateOp) -> PureState:
    """Apply one GateOp; classical controls must have been compiled away."""
    if op.control_classical is not None:
        raise ValueError(
            f"gate still carries classical control {op.control_classical!r}; "
            "compile the protocol to unitary form first")
    qubits = _check_targets(op.targets, state.num_qubits)
    return PureState(_apply_matrix(state.amplitudes, gate_matrix(op), qubits, state.num_qubits))


def partial_trace(state: PureState, keep) -> DensityMatrix:
    """Reduced density matrix of ``state`` on the ``keep`` qubits.

    Implemented by permuting the kept axes to the front, flattening to the
    2^k x 2^(n-k) coefficient matrix M and forming M M^dagger.
    """
    keep = tuple(sorted(_check_targets(keep, state.num_qubits, "keep")))
    if len(keep) == 0:
        raise ValueError("keep set must be nonempty")
    if len(keep) > MAX_SIDE_QUBITS:
        raise ValueError(
            f"cannot keep {len(keep)} qubits; sides are capped at {MAX_SIDE_QUBITS}")
    rest = tuple(q for q in range(state.num_qubits) if q not in keep)
    mat = state.tensor().transpose(keep + rest).reshape(2 ** len(keep), -1)
    return DensityMatrix(mat @ mat.conj().T)


def reduce_density(rho: DensityMatrix, keep) -> DensityMatrix:
    """Partial trace of a density matrix down to the ``keep`` qubits."""
    n = rho.num_qubits
    keep = tuple(sorted(_check_targets(keep, n, "keep")))
    if len(keep) == 0:
        raise ValueError("keep set must be nonempty")
    tensor = rho.entries.reshape((2,) * (2 * n))
    # trace out the dropped axes highest-first so earlier positions stay valid
    dropped = [q for q in range(n) if q not in keep]
    remaining = n
    for q in sorted(dropped, reverse=True):
        tensor = np.trace(tensor, axis1=q, axis2=q + remaining)
        remaining -= 1
    d = 2 ** len(keep)
    return DensityMatrix(tensor.reshape(d, d))


def matrix_sqrt_psd(matrix) -> np.ndarray:
    """Principal square root of a PSD matrix via eigendecomposition.

    Eigenvalues in [-1e-8, 0) are clamped to zero; anything lower is an
    error rather than silently truncated.  Eigenvalues below 1e-12 of the
    largest are also zeroed: they are indistinguishable from exact kernel
    at machine precision, and sqrt would inflate that noise to 1e-8.
    """
    mat = matrix.entries if isinstance(matrix, DensityMatrix) else np.asarray(matrix, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("matrix must be square")
    if np.max(np.abs(mat - mat.conj().T)) > SQRT_CLAMP_TOL:
        raise ValueError(f"matrix is not Hermitian within {SQRT_CLAMP_TOL}")
    vals, vecs = np.linalg.eigh(mat)
    if vals[0] < -SQRT_CLAMP_TOL:
        raise ValueError(
            f"eigenvalue {vals[0]!r} below -{SQRT_CLAMP_TOL}; matrix is not PSD")
    vals = np.maximum(vals, 0.0)
    vals[vals < vals[-1] * SQRT_KERNEL_CUTOFF] = 0.0
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def von_neumann_entropy(rho) -> float:
    """Entropy in bits; eigenvalues below 1e-12 contribute zero."""
    mat = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    vals = np.linalg.eigvalsh(mat)
    vals = vals[vals > ENTROPY_CUTOFF]
    return float(-np.sum(vals * np.log2(vals))) + 0.0  # never -0.0


def mutual_information(state, a_side) -> float:
    """Quantum mutual information I(A:B) = S(A) + S(B) - S(AB) in bits.

    ``state`` may be a PureState or a DensityMatrix on the full register;
    ``a_side`` lists the qubits of side A, the rest form side B.
    """
    if isinstance(state, PureState):
        n = state.num_qubits
        a = tuple(sorted(_check_targets(a_side, n, "a_side")))
        b = tuple(q for q in range(n) if q not in a)
        if not a or not b:
            raise ValueError("both sides of the split must be nonempty")
        s_a = von_neumann_entropy(partial_trace(state, a))
        s_b = von_neumann_entropy(partial_trace(state, b))
        return s_a + s_b  # pure joint state has S(AB) = 0
    if isinstance(state, DensityMatrix):
        n = state.num_qubits
        a = tuple(sorted(_check_targets(a_side, n, "a_side")))
        b = tuple(q for q in range(n) if q not in a)
        if not a or not b:
            raise ValueError("both sides of the split must be nonempty")
        s_a = von_neumann_entropy(reduce_density(state, a))
        s_b = von_neumann_entropy(reduce_density(state, b))
        return s_a + s_b - von_neumann_entropy(state)
    raise TypeError(f"expected PureState or DensityMatrix, got {type(state).__name__}")


def zero_state(num_qubits: int) -> PureState:
    """|0...0> on ``num_qubits`` qubits."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be 1..{MAX_QUBITS}, got {num_qubits}")
    amps = np.zeros(2 ** num_qubits, dtype=complex)
    amps[0] = 1.0
    return PureState(amps)
