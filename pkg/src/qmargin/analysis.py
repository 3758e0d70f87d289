"""Exact and Monte Carlo analysis of the corrupted classifier margin.

The corrupted margin is the expectation of the first-qubit margin over the
bit-flip outcome, the rotation axis, and the Gaussian angle jitter.  The
exact path enumerates the 4 x 4 discrete outcomes and integrates the jitter
analytically through the damped trig moments; the Monte Carlo path samples
every component per trial and applies the sampled gates, so the two routes
share no averaging code.  Invariance reports check that first-qubit
statistics ignore single-qubit noise on the other wires, draw by draw.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import CNOT, Ansatz, _apply_ansatz_amps, _check_theta, conjugated_amps
from .exceptions import DegenerateShrinkageError, SizeError, UnsupportedConfigurationError
from .noise import (
    BitflipChannel,
    CoherentChannel,
    gaussian_trig_expectations,
    pauli_matrix,
    sample_bitflip,
    sample_coherent,
)
from .rng import rng_from
from .statevec import (
    StateVector,
    _apply_1q,
    _apply_2q,
    _prob_lower_half,
    random_unitary,
)

MC_CHUNK = 16384


@dataclass(frozen=True)
class Theorem2Constants:
    """Shrinkage factor and boundary half-width of the corrupted margin interval."""

    eta: float
    delta: float


def theorem2_constants(p: float, q: float, mu: float, tau: float) -> Theorem2Constants:
    """eta = (1-4p)(1-2q(1-cos(mu) e^{-tau^2/2})), delta = 2q|sin(mu)|e^{-tau^2/2}/eta."""
    BitflipChannel(p)  # validate ranges (may warn near the sign-preservation edge)
    CoherentChannel(mu, tau, q)
    cos_damped, sin_damped = gaussian_trig_expectations(mu, tau)
    eta = (1.0 - 4.0 * p) * (1.0 - 2.0 * q * (1.0 - cos_damped))
    if eta == 0.0:
        raise DegenerateShrinkageError("eta is zero; the interval half-width is undefined")
    delta = 2.0 * q * abs(sin_damped) / eta
    return Theorem2Constants(eta=eta, delta=delta)


def _block_quantities(ansatz: Ansatz, theta: np.ndarray, state: StateVector):
    """Per bit-flip outcome j: margin of W sigma_j psi and the block overlap.

    Returns (margins[4], overlaps[4]) where overlaps[j] is the inner product
    of the upper and lower halves of W (sigma_j on wire 1) psi.
    """
    half = 2 ** (state.n_qubits - 1)
    margins = np.empty(4)
    overlaps = np.empty(4, dtype=np.complex128)
    for j in range(4):
        amps = _apply_ansatz_amps(ansatz, theta, conjugated_amps(j, state.amplitudes))
        margins[j] = float(_prob_lower_half(amps)) - 0.5
        overlaps[j] = np.vdot(amps[:half], amps[half:])
    return margins, overlaps


def conjugated_margin_table(ansatz: Ansatz, theta, state: StateVector,
                            mu: float, tau: float) -> np.ndarray:
    """4x4 array of conditional margins, rows = bit-flip outcome, cols = rotation axis.

    The Gaussian jitter is integrated analytically: a transverse rotation about
    axis 1 (resp. 2) mixes the block margin with the imaginary (resp. real)
    part of the block overlap, both damped by e^{-tau^2/2}; axes 0 and 3 leave
    the first-qubit distribution untouched.
    """
    if not ansatz.is_product:
        raise UnsupportedConfigurationError(
            "the conditional margin table requires a product-form ansatz"
        )
    theta = _check_theta(ansatz, theta)
    cos_damped, sin_damped = gaussian_trig_expectations(mu, tau)
    margins, overlaps = _block_quantities(ansatz, theta, state)
    table = np.empty((4, 4))
    table[:, 0] = margins
    table[:, 3] = margins
    table[:, 1] = cos_damped * margins - sin_damped * overlaps.imag
    table[:, 2] = cos_damped * margins + sin_damped * overlaps.real
    return table


@dataclass(eq=False)
class LemmaOneReport:
    """Residuals of the conditional-margin identities for one configuration."""

    table: np.ndarray           # 4x4 m^{jl}
    margin: float               # noiseless margin m
    column_sums: np.ndarray     # should vanish for every axis
    eq_m00_residual: float      # m^{00} - m
    eq_m03_residual: float      # m^{03} - m
    eq_transverse_residual: float  # m^{01} - m^{02}
    bound_slack: float          # (1/2)|sin mu| e^{-tau^2/2} - |m^{01} - cos mu e^{-tau^2/2} m|
    overlap_imag: float         # Im of the block overlap of W psi; |.| <= 1/2


def lemma1_table(ansatz: Ansatz, theta, state: StateVector,
                 mu: float, tau: float) -> LemmaOneReport:
    """Compute the conditional-margin table and the identity residuals."""
    table = conjugated_margin_table(ansatz, theta, state, mu, tau)
    theta = _check_theta(ansatz, theta)
    margins, overlaps = _block_quantities(ansatz, theta, state)
    m = margins[0]
    cos_damped, sin_damped = gaussian_trig_expectations(mu, tau)
    return LemmaOneReport(
        table=table,
        margin=m,
        column_sums=table.sum(axis=0),
        eq_m00_residual=table[0, 0] - m,
        eq_m03_residual=table[0, 3] - m,
        eq_transverse_residual=table[0, 1] - table[0, 2],
        bound_slack=0.5 * abs(sin_damped) - abs(table[0, 1] - cos_damped * m),
        overlap_imag=float(overlaps[0].imag),
    )


def corrupted_margin_exact(ansatz: Ansatz, theta, state: StateVector,
                           bitflip: BitflipChannel, coherent: CoherentChannel) -> float:
    """Exact expectation of the corrupted margin (no sampling error)."""
    table = conjugated_margin_table(ansatz, theta, state, coherent.mu, coherent.tau)
    return float(bitflip.weights() @ table @ coherent.weights())


def corrupted_margin_mc(ansatz: Ansatz, theta, state: StateVector,
                        bitflip: BitflipChannel, coherent: CoherentChannel,
                        trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of the corrupted margin.

    Per trial a fresh (bit-flip outcome, axis, jitter) is drawn and the
    sampled gates are applied to the state; returns (mean - 1/2, stderr).
    Deterministic given the seed; trials are processed in draw order.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not ansatz.is_product:
        raise UnsupportedConfigurationError("the corrupted margin requires a product-form ansatz")
    theta = _check_theta(ansatz, theta)
    rng = rng_from(seed)
    flips = sample_bitflip(bitflip, rng, size=trials)
    axes, jitters = sample_coherent(coherent, rng, size=trials)

    half = 2 ** (state.n_qubits - 1)
    bases = []
    for j in range(4):
        amps = _apply_ansatz_amps(ansatz, theta, conjugated_amps(j, state.amplitudes))
        bases.append(amps.reshape(2, half))

    probs = np.empty(trials)
    angles = coherent.mu + jitters
    for j in range(4):
        upper, lower = bases[j]
        for axis in range(4):
            mask = np.flatnonzero((flips == j) & (axes == axis))
            if mask.size == 0:
                continue
            for start in range(0, mask.size, MC_CHUNK):
                idx = mask[start: start + MC_CHUNK]
                u21, u22 = _rotation_lower_row(axis, angles[idx])
                new_lower = np.outer(u21, upper) + np.outer(u22, lower)
                probs[idx] = np.sum(np.abs(new_lower) ** 2, axis=1)

    estimate = float(np.mean(probs)) - 0.5
    stderr = 0.0 if trials == 1 else float(np.std(probs, ddof=1) / np.sqrt(trials))
    return estimate, stderr


def _rotation_lower_row(axis: int, angles: np.ndarray):
    """Second row (u21, u22) of exp(-i angle/2 sigma_axis) for an array of angles."""
    half = angles / 2.0
    c, s = np.cos(half), np.sin(half)
    if axis == 0:
        return np.zeros_like(angles, dtype=np.complex128), np.ones_like(angles, dtype=np.complex128)
    if axis == 1:
        return -1j * s, c + 0j
    if axis == 2:
        return s + 0j, c + 0j
    return np.zeros_like(angles, dtype=np.complex128), c + 1j * s


# --- first-qubit invariance (entanglement-robustness) checks ---------------


@dataclass(frozen=True, eq=False)
class CircuitOp:
    """One gate placement: a 2x2 matrix on a wire, or a 4x4 on a wire pair."""

    wires: tuple[int, ...]
    matrix: np.ndarray


def apply_circuit(amps: np.ndarray, ops, n_qubits: int) -> np.ndarray:
    for op in ops:
        if len(op.wires) == 1:
            amps = _apply_1q(amps, op.matrix, op.wires[0], n_qubits)
        else:
            amps = _apply_2q(amps, op.matrix, op.wires, n_qubits)
    return amps


def random_layered_circuit(n_qubits: int, n_entangling_layers: int,
                           rng: np.random.Generator) -> list[CircuitOp]:
    """Haar single-qubit layer, then (CNOT chain + fresh single layer) per entangling layer."""
    ops = [CircuitOp((w,), random_unitary(2, rng)) for w in range(1, n_qubits + 1)]
    for _ in range(n_entangling_layers):
        ops += [CircuitOp((w, w + 1), CNOT) for w in range(1, n_qubits)]
        ops += [CircuitOp((w,), random_unitary(2, rng)) for w in range(1, n_qubits + 1)]
    return ops


@dataclass(eq=False)
class InvarianceReport:
    """Per-draw first-qubit probability deviations between noisy and reference circuits."""

    label: str
    deviations: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max()) if self.deviations.size else 0.0


def _require_multiqubit(state: StateVector) -> int:
    if state.n_qubits < 2:
        raise SizeError("invariance checks need at least 2 qubits")
    return state.n_qubits


def theorem1_clause1_report(circuit, state: StateVector, n_draws: int = 100,
                            seed: int = 0, entangled_tail: bool = False) -> InvarianceReport:
    """Noise after an arbitrary circuit: wires 2..n noise vs identity there.

    Per draw, fixed Haar unitaries are applied on every wire after the
    circuit; the reference keeps only the wire-1 unitary.  The comparison is
    exact per draw.  With ``entangled_tail`` a Haar 4x4 acting inside wires
    2..n joins the noise, which must not break the invariance either.
    """
    n = _require_multiqubit(state)
    base = apply_circuit(state.amplitudes, circuit, n)
    deviations = np.empty(n_draws)
    for d in range(n_draws):
        rng = rng_from(seed, d)
        ref = _apply_1q(base, random_unitary(2, rng), 1, n)
        full = ref
        for k in range(2, n + 1):
            full = _apply_1q(full, random_unitary(2, rng), k, n)
        if entangled_tail and n >= 3:
            pair = tuple(rng.choice(np.arange(2, n + 1), size=2, replace=False))
            full = _apply_2q(full, random_unitary(4, rng), pair, n)
        deviations[d] = abs(float(_prob_lower_half(full)) - float(_prob_lower_half(ref)))
    return InvarianceReport(label="clause1", deviations=deviations)


def theorem1_clause2_report(ansatz: Ansatz, theta, state: StateVector,
                            n_draws: int = 100, seed: int = 0) -> InvarianceReport:
    """Product-form circuit with noise both before and after it.

    Per draw, Haar unitaries act on every wire before and after the circuit;
    the reference keeps only the wire-1 pair.
    """
    if not ansatz.is_product:
        raise UnsupportedConfigurationError(
            "clause 2 requires a product-form ansatz; use the negative control for entangled ones"
        )
    theta = _check_theta(ansatz, theta)
    n = _require_multiqubit(state)
    deviations = np.empty(n_draws)
    for d in range(n_draws):
        rng = rng_from(seed, d)
        pre = [random_unitary(2, rng) for _ in range(n)]
        post = [random_unitary(2, rng) for _ in range(n)]

        full = state.amplitudes
        for k in range(1, n + 1):
            full = _apply_1q(full, pre[k - 1], k, n)
        full = _apply_ansatz_amps(ansatz, theta, full)
        for k in range(1, n + 1):
            full = _apply_1q(full, post[k - 1], k, n)

        ref = _apply_1q(state.amplitudes, pre[0], 1, n)
        ref = _apply_ansatz_amps(ansatz, theta, ref)
        ref = _apply_1q(ref, post[0], 1, n)

        deviations[d] = abs(float(_prob_lower_half(full)) - float(_prob_lower_half(ref)))
    return InvarianceReport(label="clause2", deviations=deviations)


def negative_control_wire1_entangling(circuit, state: StateVector, n_draws: int = 20,
                                      seed: int = 0) -> InvarianceReport:
    """Noise that entangles wire 1 with wire 2; the invariance is expected to break."""
    n = _require_multiqubit(state)
    base = apply_circuit(state.amplitudes, circuit, n)
    deviations = np.empty(n_draws)
    for d in range(n_draws):
        rng = rng_from(seed, d)
        ref = _apply_1q(base, random_unitary(2, rng), 1, n)
        full = ref
        for k in range(2, n + 1):
            full = _apply_1q(full, random_unitary(2, rng), k, n)
        full = _apply_2q(full, random_unitary(4, rng), (2, 1), n)
        deviations[d] = abs(float(_prob_lower_half(full)) - float(_prob_lower_half(ref)))
    return InvarianceReport(label="negative-wire1-entangling", deviations=deviations)


def negative_control_entangled_circuit(circuit, state: StateVector, n_draws: int = 20,
                                       seed: int = 0) -> InvarianceReport:
    """Encoder-side noise with an entangled circuit; clause 2 is expected to break."""
    n = _require_multiqubit(state)
    deviations = np.empty(n_draws)
    for d in range(n_draws):
        rng = rng_from(seed, d)
        pre = [random_unitary(2, rng) for _ in range(n)]

        full = state.amplitudes
        for k in range(1, n + 1):
            full = _apply_1q(full, pre[k - 1], k, n)
        full = apply_circuit(full, circuit, n)

        ref = _apply_1q(state.amplitudes, pre[0], 1, n)
        ref = apply_circuit(ref, circuit, n)

        deviations[d] = abs(float(_prob_lower_half(full)) - float(_prob_lower_half(ref)))
    return InvarianceReport(label="negative-entangled-circuit", deviations=deviations)
