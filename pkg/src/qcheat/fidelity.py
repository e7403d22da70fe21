"""Three equivalent fidelity computations for density matrices.

The same quantity F(rho0, rho1) is exposed through three routes:

* the trace form  F = Tr sqrt(sqrt(rho1) rho0 sqrt(rho1)),
* the largest overlap between purifications of the two states, and
* the smallest Bhattacharyya overlap sum over complete measurements.

Cross-checking the three against each other is the package's main guard
against silent numerical drift, so each route is implemented
independently rather than delegating to a shared kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qcore import (
    DensityMatrix,
    InvariantViolation,
    PureState,
    matrix_sqrt_psd,
)

SUPPORT_CUTOFF = 1e-10
POVM_PSD_TOL = 1e-10
POVM_COMPLETE_TOL = 1e-8


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return DensityMatrix(np.asarray(rho, dtype=complex)).entries


@dataclass(frozen=True)
class Povm:
    """Complete positive-operator-valued measurement.

    Elements must be PSD within 1e-10 and sum to the identity within 1e-8.
    """

    elements: tuple

    def __post_init__(self):
        if len(self.elements) == 0:
            raise InvariantViolation("a POVM needs at least one element")
        dim = np.asarray(self.elements[0]).shape[0]
        frozen = []
        total = np.zeros((dim, dim), dtype=complex)
        for i, el in enumerate(self.elements):
            mat = np.array(el, dtype=complex)
            if mat.shape != (dim, dim):
                raise InvariantViolation(f"element {i} has shape {mat.shape}, want ({dim}, {dim})")
            if np.max(np.abs(mat - mat.conj().T)) > POVM_PSD_TOL:
                raise InvariantViolation(f"element {i} is not Hermitian within {POVM_PSD_TOL}")
            lo = float(np.linalg.eigvalsh(mat)[0])
            if lo < -POVM_PSD_TOL:
                raise InvariantViolation(
                    f"element {i} has eigenvalue {lo!r} below -{POVM_PSD_TOL}")
            total += mat
            mat.setflags(write=False)
            frozen.append(mat)
        if np.max(np.abs(total - np.eye(dim))) > POVM_COMPLETE_TOL:
            raise InvariantViolation(
                f"elements do not sum to the identity within {POVM_COMPLETE_TOL}")
        object.__setattr__(self, "elements", tuple(frozen))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def num_outcomes(self) -> int:
        return len(self.elements)


def fidelity_trace(rho0, rho1) -> float:
    """F = Tr sqrt(sqrt(rho1) rho0 sqrt(rho1))."""
    r0 = _as_matrix(rho0)
    r1 = _as_matrix(rho1)
    if r0.shape != r1.shape:
        raise ValueError(f"dimension mismatch: {r0.shape} vs {r1.shape}")
    root1 = matrix_sqrt_psd(r1)
    inner = root1 @ r0 @ root1
    inner = 0.5 * (inner + inner.conj().T)  # squash rounding asymmetry
    return float(np.real(np.trace(matrix_sqrt_psd(inner))))


def fidelity_purification(rho0, rho1):
    """Maximal overlap between purifications, with witnesses.

    Purifies both states with an ancilla of the same dimension d as the
    system, aligning the second purification so the overlap is maximal.

    Returns
    -------
    (value, (psi0, psi1)) : the achieved overlap and the two purifying
        PureStates on 2k qubits (system qubits first, ancilla after),
        whose system reductions reproduce rho0 and rho1.
    """
    r0 = _as_matrix(rho0)
    r1 = _as_matrix(rho1)
    if r0.shape != r1.shape:
        raise ValueError(f"dimension mismatch: {r0.shape} vs {r1.shape}")
    d = r0.shape[0]
    if 2 ** int(np.log2(d)) != d:
        raise ValueError(f"dimension {d} is not a power of two; cannot emit qubit registers")
    root0 = matrix_sqrt_psd(r0)
    root1 = matrix_sqrt_psd(r1)
    # coefficient matrices M with M M^dagger = rho purify rho; rotating M
    # on the right moves the ancilla only.  Align via the SVD of
    # sqrt(rho0) sqrt(rho1): the polar phase makes Tr(M0^dagger M1) the
    # sum of singular values, which no other alignment exceeds.
    left, _, right = np.linalg.svd(root0 @ root1)
    m0 = root0
    m1 = root1 @ right.conj().T @ left.conj().T
    psi0 = PureState(m0.reshape(-1))
    psi1 = PureState(m1.reshape(-1))
    value = float(abs(np.vdot(psi0.amplitudes, psi1.amplitudes)))
    return value, (psi0, psi1)


def fidelity_povm(rho0, rho1):
    """Smallest Bhattacharyya coefficient over complete measurements.

    Builds the minimising POVM explicitly: on the support of rho1, measure
    the eigenbasis of rho1^{-1/2} sqrt(sqrt(rho1) rho0 sqrt(rho1)) rho1^{-1/2}
    (inverses taken on the support); the kernel of rho1, if any, is kept
    as one extra outcome so the POVM stays complete.

    Returns
    -------
    (value, povm) : sum_b sqrt(Tr rho0 E_b) sqrt(Tr rho1 E_b) and the
        measurement that attains it.
    """
    r0 = _as_matrix(rho0)
    r1 = _as_matrix(rho1)
    if r0.shape != r1.shape:
        raise ValueError(f"dimension mismatch: {r0.shape} vs {r1.shape}")
    d = r0.shape[0]
    vals, vecs = np.linalg.eigh(r1)
    support = vals > SUPPORT_CUTOFF
    basis = vecs[:, support]                       # d x r isometry onto supp(rho1)
    sup_vals = vals[support]
    r0_s = basis.conj().T @ r0 @ basis
    root1_s = np.diag(np.sqrt(sup_vals))
    inv_root1_s = np.diag(1.0 / np.sqrt(sup_vals))
    mid = matrix_sqrt_psd(root1_s @ r0_s @ root1_s)
    geo = inv_root1_s @ mid @ inv_root1_s
    geo = 0.5 * (geo + geo.conj().T)
    _, geo_vecs = np.linalg.eigh(geo)
    elements = []
    for k in range(geo_vecs.shape[1]):
        v = basis @ geo_vecs[:, k]
        elements.append(np.outer(v, v.conj()))
    if np.count_nonzero(support) < d:
        elements.append(np.eye(d) - basis @ basis.conj().T)
    povm = Povm(tuple(elements))
    return povm_overlap(r0, r1, povm), povm


def povm_overlap(rho0, rho1, povm: Povm) -> float:
    """sum_b sqrt(Tr rho0 E_b) sqrt(Tr rho1 E_b) for one measurement."""
    r0 = _as_matrix(rho0)
    r1 = _as_matrix(rho1)
    total = 0.0
    for el in povm.elements:
        p0 = max(float(np.real(np.trace(r0 @ el))), 0.0)
        p1 = max(float(np.real(np.trace(r1 @ el))), 0.0)
        total += np.sqrt(p0) * np.sqrt(p1)
    return float(total)


def random_povm(dim: int, num_outcomes: int, rng) -> Povm:
    """Random complete POVM with ``num_outcomes`` elements.

    Draws Wishart-style PSD blocks A_k = G_k G_k^dagger and whitens by the
    total: E_k = S^{-1/2} A_k S^{-1/2} with S = sum A_k.  ``rng`` is an
    integer seed or a numpy Generator; no ambient entropy is used.
    """
    if dim < 1 or num_outcomes < 1:
        raise ValueError("dim and num_outcomes must be positive")
    gen = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    blocks = []
    for _ in range(num_outcomes):
        g = gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))
        blocks.append(g @ g.conj().T)
    total = np.sum(blocks, axis=0)
    vals, vecs = np.linalg.eigh(total)
    whiten = (vecs / np.sqrt(vals)) @ vecs.conj().T
    return Povm(tuple(whiten @ a @ whiten for a in blocks))
