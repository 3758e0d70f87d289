"""Encoder, product-form ansatz, and the first-qubit margin classifier.

The classifier output is ``sign(margin)`` where the margin is the
first-qubit excitation probability minus 1/2.  The ansatz applies one
Euler triple Rz(a)Ry(b)Rz(c) per wire (parameters laid out wire-major as
``[a1, b1, c1, a2, ...]``), optionally followed by CNOT layers that are
only used in entanglement experiments, never in the trained classifier.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    NormalizationError,
    ShapeError,
    SizeError,
    UnsupportedConfigurationError,
    WireError,
)
from .noise import coherent_matrix, pauli_matrix
from .statevec import StateVector, _apply_1q, _apply_2q, _prob_lower_half

CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0]],
    dtype=np.complex128,
)

ENCODER_KINDS = ("per-qubit-angle", "raw-state")


@dataclass(frozen=True)
class EncoderSpec:
    """How classical input becomes a state: per-wire Ry angles, or a raw statevector."""

    kind: str
    n_qubits: int
    wire_map: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"encoder kind must be one of {ENCODER_KINDS}, got {self.kind!r}")
        if self.n_qubits < 1:
            raise SizeError(f"n_qubits must be positive, got {self.n_qubits}")
        if self.wire_map is not None:
            wm = tuple(self.wire_map)
            if sorted(wm) != list(range(1, self.n_qubits + 1)):
                raise WireError(f"wire_map must be a permutation of 1..{self.n_qubits}, got {wm}")
            object.__setattr__(self, "wire_map", wm)


def encode(x, spec: EncoderSpec) -> StateVector:
    """Encode features (or a raw statevector) per ``spec``."""
    if spec.kind == "raw-state":
        amps = np.asarray(x, dtype=np.complex128)
        if amps.shape != (2**spec.n_qubits,):
            raise SizeError(f"raw state has shape {amps.shape}, expected ({2**spec.n_qubits},)")
        return StateVector(spec.n_qubits, amps)  # norm checked by the constructor
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n_qubits,):
        raise SizeError(f"feature vector has shape {x.shape}, expected ({spec.n_qubits},)")
    angles = np.empty(spec.n_qubits)
    wire_map = spec.wire_map or tuple(range(1, spec.n_qubits + 1))
    for feature, wire in enumerate(wire_map):
        angles[wire - 1] = x[feature]
    amps = np.array([1.0 + 0j])
    for ang in angles:  # Ry(ang)|0> per wire, wire 1 outermost
        amps = np.kron(amps, np.array([np.cos(ang / 2), np.sin(ang / 2)], dtype=np.complex128))
    return StateVector(spec.n_qubits, amps)


@dataclass(frozen=True)
class Ansatz:
    """Per-wire Euler triples, optionally followed by CNOT layers."""

    n_qubits: int
    entangling_layers: tuple[tuple[tuple[int, int], ...], ...] = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SizeError(f"n_qubits must be positive, got {self.n_qubits}")
        layers = tuple(tuple(tuple(int(w) for w in pair) for pair in layer)
                       for layer in self.entangling_layers)
        for layer in layers:
            for ctrl, tgt in layer:
                if not (1 <= ctrl <= self.n_qubits and 1 <= tgt <= self.n_qubits):
                    raise WireError(f"CNOT pair ({ctrl}, {tgt}) out of range [1, {self.n_qubits}]")
                if ctrl == tgt:
                    raise WireError(f"CNOT control and target must differ, got ({ctrl}, {tgt})")
        object.__setattr__(self, "entangling_layers", layers)

    @property
    def n_params(self) -> int:
        return 3 * self.n_qubits

    @property
    def is_product(self) -> bool:
        return not self.entangling_layers


def _check_theta(ansatz: Ansatz, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (ansatz.n_params,):
        raise ShapeError(
            f"theta has shape {theta.shape}, expected ({ansatz.n_params},) for "
            f"{ansatz.n_qubits} qubits"
        )
    return theta


def wire_matrices(theta: np.ndarray, n_qubits: int) -> list[np.ndarray]:
    """The combined 2x2 Rz(a)Ry(b)Rz(c) per wire."""
    mats = []
    for k in range(n_qubits):
        a, b, c = theta[3 * k: 3 * k + 3]
        mats.append(coherent_matrix(3, a) @ coherent_matrix(2, b) @ coherent_matrix(3, c))
    return mats


def _apply_ansatz_amps(ansatz: Ansatz, theta: np.ndarray, amps: np.ndarray) -> np.ndarray:
    """Apply the circuit to raw amplitudes (last axis 2**n; leading axes batch)."""
    n = ansatz.n_qubits
    for wire, mat in enumerate(wire_matrices(theta, n), start=1):
        amps = _apply_1q(amps, mat, wire, n)
    for layer in ansatz.entangling_layers:
        for pair in layer:
            amps = _apply_2q(amps, CNOT, pair, n)
    return amps


def apply_ansatz(ansatz: Ansatz, theta, state: StateVector) -> StateVector:
    """W(theta)|state>."""
    theta = _check_theta(ansatz, theta)
    if state.n_qubits != ansatz.n_qubits:
        raise SizeError(f"state has {state.n_qubits} qubits, ansatz expects {ansatz.n_qubits}")
    return StateVector(state.n_qubits, _apply_ansatz_amps(ansatz, theta, state.amplitudes))


def margin(ansatz: Ansatz, theta, state: StateVector) -> float:
    """P{first qubit reads 1 after W(theta)} - 1/2, in [-1/2, 1/2]."""
    out = apply_ansatz(ansatz, theta, state)
    return float(_prob_lower_half(out.amplitudes)) - 0.5


def margins_batch(ansatz: Ansatz, theta, states: np.ndarray) -> np.ndarray:
    """Margins for a (batch, 2**n) array of statevectors."""
    theta = _check_theta(ansatz, theta)
    out = _apply_ansatz_amps(ansatz, theta, np.asarray(states, dtype=np.complex128))
    return _prob_lower_half(out) - 0.5


def classify(margin_value: float) -> int:
    """sign(margin) with the fixed tie-break sign(0) = -1."""
    if not np.isfinite(margin_value):
        raise ValueError(f"margin must be finite, got {margin_value}")
    return 1 if margin_value > 0 else -1


def conjugated_amps(j: int, amps: np.ndarray) -> np.ndarray:
    """(sigma_j on wire 1) applied to raw amplitudes."""
    n = int(np.log2(amps.shape[-1]))
    if j == 0:
        return amps
    return _apply_1q(amps, pauli_matrix(j), 1, n)


def margin_conjugated(ansatz: Ansatz, theta, state: StateVector, j: int) -> float:
    """Margin of the state pre-corrupted by sigma_j on wire 1.

    Defined for product-form circuits only; the four values over j sum to
    zero there, which is what makes the corrupted-risk decomposition work.
    """
    if not ansatz.is_product:
        raise UnsupportedConfigurationError(
            "conjugated margins require a product-form ansatz (no entangling layers)"
        )
    if j not in (0, 1, 2, 3):
        raise WireError(f"Pauli index must be in {{0,1,2,3}}, got {j}")
    theta = _check_theta(ansatz, theta)
    if state.n_qubits != ansatz.n_qubits:
        raise SizeError(f"state has {state.n_qubits} qubits, ansatz expects {ansatz.n_qubits}")
    amps = conjugated_amps(j, state.amplitudes)
    out = _apply_ansatz_amps(ansatz, theta, amps)
    return float(_prob_lower_half(out)) - 0.5
