"""Schmidt decompositions and local cheating-unitary synthesis.

A bipartite pure state whose two halves give Alice the same reduced state
on Bob's side for two different inputs can be rotated from one to the
other by a unitary acting on Alice's side alone.  This module builds that
rotation, and its best-effort generalisation when the reduced states
merely overlap: the synthesized local unitary maximises the overlap with
the target state, and the achieved overlap equals the fidelity of the two
Bob-side reductions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fidelity import fidelity_trace
from .qcore import (
    MAX_SIDE_QUBITS,
    InvariantViolation,
    PureState,
    _check_targets,
    partial_trace,
)

COEFF_CUTOFF = 1e-10
BASIS_TOL = 1e-8
WEIGHT_TOL = 1e-9
IDEAL_REDUCTION_TOL = 1e-8


def _split_matrix(state: PureState, a_side) -> tuple:
    """Coefficient matrix of ``state`` with the A-side indices as rows."""
    n = state.num_qubits
    a = tuple(sorted(_check_targets(a_side, n, "a_side")))
    b = tuple(q for q in range(n) if q not in a)
    if not a or not b:
        raise ValueError("both sides of the bipartition must be nonempty")
    if len(a) > MAX_SIDE_QUBITS or len(b) > MAX_SIDE_QUBITS:
        raise ValueError(f"bipartition sides are capped at {MAX_SIDE_QUBITS} qubits")
    mat = state.tensor().transpose(a + b).reshape(2 ** len(a), 2 ** len(b))
    return a, b, mat


@dataclass(frozen=True)
class SchmidtDecomposition:
    """state = sum_k coefficients[k] * a_basis[k] (x) b_basis[k].

    Coefficients are positive, sorted in nonincreasing order, and their
    squares sum to one.  Basis rows are orthonormal vectors on the sorted
    A-side / B-side qubit index order.
    """

    a_qubits: tuple
    b_qubits: tuple
    coefficients: np.ndarray
    a_basis: np.ndarray          # shape (rank, 2^|A|), rows are vectors
    b_basis: np.ndarray          # shape (rank, 2^|B|)
    num_qubits: int = field(init=False)

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=float)
        a_basis = np.array(self.a_basis, dtype=complex)
        b_basis = np.array(self.b_basis, dtype=complex)
        rank = coeffs.size
        if a_basis.shape[0] != rank or b_basis.shape[0] != rank:
            raise InvariantViolation("basis row count does not match coefficient count")
        if np.any(coeffs <= 0) or np.any(np.diff(coeffs) > 0):
            raise InvariantViolation("coefficients must be positive and nonincreasing")
        if abs(float(np.sum(coeffs ** 2)) - 1.0) > WEIGHT_TOL:
            raise InvariantViolation(f"squared coefficients must sum to 1 within {WEIGHT_TOL}")
        for name, basis in (("a", a_basis), ("b", b_basis)):
            gram = basis @ basis.conj().T
            if np.max(np.abs(gram - np.eye(rank))) > BASIS_TOL:
                raise InvariantViolation(f"{name}-side basis is not orthonormal within {BASIS_TOL}")
        for arr in (coeffs, a_basis, b_basis):
            arr.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "a_basis", a_basis)
        object.__setattr__(self, "b_basis", b_basis)
        object.__setattr__(self, "a_qubits", tuple(int(q) for q in self.a_qubits))
        object.__setattr__(self, "b_qubits", tuple(int(q) for q in self.b_qubits))
        object.__setattr__(self, "num_qubits", len(self.a_qubits) + len(self.b_qubits))

    @property
    def rank(self) -> int:
        return self.coefficients.size

    def reconstruct(self) -> PureState:
        """Reassemble the state on the original qubit ordering."""
        mat = (self.a_basis.T * self.coefficients) @ self.b_basis
        tensor = mat.reshape((2,) * self.num_qubits)
        order = self.a_qubits + self.b_qubits
        inverse = np.argsort(order)
        return PureState(tensor.transpose(inverse).reshape(-1))


def schmidt_decompose(state: PureState, a_side) -> SchmidtDecomposition:
    """Schmidt decomposition across the (a_side, rest) bipartition.

    Coefficients below 1e-10 are dropped; the squares of the survivors
    are exactly the nonzero eigenvalues of either reduced state.
    """
    a, b, mat = _split_matrix(state, a_side)
    left, coeffs, right = np.linalg.svd(mat, full_matrices=False)
    keep = coeffs > COEFF_CUTOFF
    return SchmidtDecomposition(
        a_qubits=a,
        b_qubits=b,
        coefficients=coeffs[keep],
        a_basis=left[:, keep].T,
        b_basis=right[keep, :],
    )


def _polar_rotation(state0: PureState, state1: PureState, a_side) -> np.ndarray:
    """Polar unitary of the A-side cross-Gram matrix M1 M0^dagger.

    The full SVD supplies a deterministic orthonormal completion on the
    kernel, so the result is always a genuine unitary.
    """
    a0, _, m0 = _split_matrix(state0, a_side)
    a1, _, m1 = _split_matrix(state1, a_side)
    if a0 != a1 or state0.num_qubits != state1.num_qubits:
        raise ValueError("states must live on the same register and bipartition")
    gram = m1 @ m0.conj().T
    left, _, right = np.linalg.svd(gram)
    return left @ right


def uhlmann_unitary(state0: PureState, state1: PureState, a_side):
    """Best A-side rotation of ``state0`` toward ``state1``.

    Returns
    -------
    (unitary, achieved_overlap) : the 2^|A| x 2^|A| unitary U and
        |<state1| (U x I) |state0>|, which equals the fidelity of the two
        B-side reductions.  Applying U never changes the B-side reduction
    of any state.
    """
    a = tuple(sorted(_check_targets(a_side, state0.num_qubits, "a_side")))
    unitary = _polar_rotation(state0, state1, a)
    rotated = _split_matrix(state0, a)[2]
    achieved = float(abs(np.trace(
        _split_matrix(state1, a)[2].conj().T @ (unitary @ rotated))))
    return unitary, achieved


def cheating_unitary_ideal(state0: PureState, state1: PureState, a_side) -> np.ndarray:
    """A-side unitary mapping state0 to state1 exactly, up to global phase.

    Requires the B-side reductions of the two states to agree entrywise
    within 1e-8; when they merely overlap, use ``uhlmann_unitary`` for the
    optimal approximate rotation instead.
    """
    n = state0.num_qubits
    a = tuple(sorted(_check_targets(a_side, n, "a_side")))
    b = tuple(q for q in range(n) if q not in a)
    if not b:
        raise ValueError("both sides of the bipartition must be nonempty")
    red0 = partial_trace(state0, b).entries
    red1 = partial_trace(state1, b).entries
    gap = float(np.max(np.abs(red0 - red1)))
    if gap > IDEAL_REDUCTION_TOL:
        raise ValueError(
            f"B-side reductions differ by {gap:.3e} entrywise (tolerance "
            f"{IDEAL_REDUCTION_TOL}); the states are not locally equivalent -- "
            "use uhlmann_unitary for the optimal approximate rotation")
    return _polar_rotation(state0, state1, a)


def reduction_fidelity(state0: PureState, state1: PureState, a_side) -> float:
    """Fidelity of the B-side reductions; the ceiling for any A-side rotation."""
    n = state0.num_qubits
    a = tuple(sorted(_check_targets(a_side, n, "a_side")))
    b = tuple(q for q in range(n) if q not in a)
    return fidelity_trace(partial_trace(state0, b), partial_trace(state1, b))
