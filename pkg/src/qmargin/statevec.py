"""Dense statevector engine.

Wire 1 occupies the most significant bit of the amplitude index, so an
n-qubit state splits into blocks ``[upper; lower]`` with the lower half
carrying the first-qubit-excited amplitudes.  All wire arguments are
1-based.  Operations return fresh states unless ``in_place=True``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NormalizationError, SizeError, UnitarityError, WireError

MAX_QUBITS = 20
MAX_ORACLE_QUBITS = 10

UNITARITY_ATOL = 1e-12
NORM_ATOL = 1e-9


@dataclass(eq=False)
class StateVector:
    """Normalized complex amplitudes of an ``n_qubits``-qubit pure state."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2**self.n_qubits,):
            raise SizeError(
                f"amplitude array has shape {amps.shape}, expected ({2**self.n_qubits},)"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise NormalizationError(f"state norm {norm!r} deviates from 1 by more than {NORM_ATOL}")
        self.amplitudes = amps

    def copy(self) -> "StateVector":
        return StateVector(self.n_qubits, self.amplitudes.copy())


@dataclass(frozen=True, eq=False)
class Gate:
    """A 2x2 (single-qubit) or 4x4 (two-qubit) unitary, optionally with wires."""

    matrix: np.ndarray
    wires: int | tuple[int, int] | None = None

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        if mat.shape not in ((2, 2), (4, 4)):
            raise SizeError(f"gate matrix must be 2x2 or 4x4, got shape {mat.shape}")
        _check_unitary(mat)
        object.__setattr__(self, "matrix", mat)


def _check_unitary(mat: np.ndarray) -> None:
    dev = np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])).max()
    if dev > UNITARITY_ATOL:
        raise UnitarityError(f"matrix deviates from unitarity by {dev:.3e}")


def _as_matrix(gate: Gate | np.ndarray, dim: int) -> np.ndarray:
    mat = gate.matrix if isinstance(gate, Gate) else np.asarray(gate, dtype=np.complex128)
    if mat.shape != (dim, dim):
        raise SizeError(f"expected a {dim}x{dim} gate, got shape {mat.shape}")
    if not isinstance(gate, Gate):
        _check_unitary(mat)
    return mat


def basis_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` wires."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def _apply_1q(amps: np.ndarray, mat: np.ndarray, wire: int, n: int) -> np.ndarray:
    """Apply a 2x2 matrix on ``wire`` of ``amps`` (last axis = 2**n; leading axes batch)."""
    shaped = amps.reshape(amps.shape[:-1] + (2,) * n)
    axis = shaped.ndim - n + (wire - 1)
    out = np.tensordot(mat, shaped, axes=([1], [axis]))
    return np.moveaxis(out, 0, axis).reshape(amps.shape)


def _apply_2q(amps: np.ndarray, mat: np.ndarray, wires: tuple[int, int], n: int) -> np.ndarray:
    shaped = amps.reshape(amps.shape[:-1] + (2,) * n)
    a1 = shaped.ndim - n + (wires[0] - 1)
    a2 = shaped.ndim - n + (wires[1] - 1)
    out = np.tensordot(mat.reshape(2, 2, 2, 2), shaped, axes=([2, 3], [a1, a2]))
    return np.moveaxis(out, [0, 1], [a1, a2]).reshape(amps.shape)


def _check_wire(wire: int, n: int) -> None:
    if not 1 <= wire <= n:
        raise WireError(f"wire {wire} out of range [1, {n}]")


def apply_single(state: StateVector, gate: Gate | np.ndarray, wire: int,
                 in_place: bool = False) -> StateVector:
    """Apply a single-qubit gate on ``wire``; norm is preserved."""
    mat = _as_matrix(gate, 2)
    _check_wire(wire, state.n_qubits)
    out = _apply_1q(state.amplitudes, mat, wire, state.n_qubits)
    if in_place:
        state.amplitudes[:] = out
        return state
    return StateVector(state.n_qubits, out)


def apply_two(state: StateVector, gate: Gate | np.ndarray, wires: tuple[int, int],
              in_place: bool = False) -> StateVector:
    """Apply a two-qubit gate on the ordered wire pair."""
    mat = _as_matrix(gate, 4)
    w1, w2 = wires
    _check_wire(w1, state.n_qubits)
    _check_wire(w2, state.n_qubits)
    if w1 == w2:
        raise WireError(f"two-qubit gate needs distinct wires, got ({w1}, {w2})")
    out = _apply_2q(state.amplitudes, mat, (w1, w2), state.n_qubits)
    if in_place:
        state.amplitudes[:] = out
        return state
    return StateVector(state.n_qubits, out)


def kron_product(gates) -> np.ndarray:
    """Explicit Kronecker product of 2x2 gates, wire 1 outermost (oracle path)."""
    mats = [_as_matrix(g, 2) for g in gates]
    if not mats:
        raise SizeError("kron_product needs at least one gate")
    if len(mats) > MAX_ORACLE_QUBITS:
        raise SizeError(f"explicit matrices limited to {MAX_ORACLE_QUBITS} qubits, got {len(mats)}")
    full = mats[0]
    for mat in mats[1:]:
        full = np.kron(full, mat)
    return full


def first_qubit_projector(n_qubits: int) -> np.ndarray:
    """M projecting onto the first-qubit-excited half (explicit, oracle path)."""
    if not 1 <= n_qubits <= MAX_ORACLE_QUBITS:
        raise SizeError(f"explicit projector limited to {MAX_ORACLE_QUBITS} qubits")
    diag = np.zeros(2**n_qubits)
    diag[2 ** (n_qubits - 1):] = 1.0
    return np.diag(diag).astype(np.complex128)


def _prob_lower_half(amps: np.ndarray) -> np.ndarray:
    """Probability of the first-qubit-excited block (last axis = amplitudes)."""
    half = amps.shape[-1] // 2
    return np.sum(np.abs(amps[..., half:]) ** 2, axis=-1)


def prob_first_qubit_one(state: StateVector) -> float:
    """Probability of reading 1 on the first qubit."""
    norm = np.linalg.norm(state.amplitudes)
    if abs(norm - 1.0) > NORM_ATOL:
        raise NormalizationError(f"state norm {norm!r} deviates from 1 by more than {NORM_ATOL}")
    return float(_prob_lower_half(state.amplitudes))


def inner_product(a: StateVector | np.ndarray, b: StateVector | np.ndarray) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    va = a.amplitudes if isinstance(a, StateVector) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, StateVector) else np.asarray(b)
    if va.shape != vb.shape:
        raise SizeError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    return complex(np.vdot(va, vb))


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Gaussian matrix."""
    a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    v = rng.standard_normal(2**n_qubits) + 1j * rng.standard_normal(2**n_qubits)
    return StateVector(n_qubits, v / np.linalg.norm(v))
