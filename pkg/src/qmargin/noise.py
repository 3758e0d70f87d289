"""Single-qubit noise channels.

Two channels act on the first qubit: a bit-flip channel that inserts a
uniformly weighted Pauli gate with probability ``3p``, and a coherent
channel that applies a rotation ``exp(-i (mu+eps)/2 sigma)`` about a random
axis with Gaussian-jittered angle.  Both come with samplers, exact outcome
enumeration, and the Gaussian trigonometric moments that let the jitter be
integrated analytically.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import WireError
from .statevec import Gate

SIGN_PRESERVATION_P = 0.25

_PAULIS = (
    np.eye(2, dtype=np.complex128),
    np.array([[0, 1], [1, 0]], dtype=np.complex128),
    np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    np.array([[1, 0], [0, -1]], dtype=np.complex128),
)


@dataclass(frozen=True)
class BitflipChannel:
    """Random Pauli insertion: outcome j=0 keeps the state, j=1,2,3 each with probability p."""

    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1 / 3:
            raise ValueError(f"p must be in [0, 1/3], got {self.p}")
        if self.p >= SIGN_PRESERVATION_P:
            warnings.warn(
                f"p={self.p} >= 1/4: the shrinkage factor 1-4p is nonpositive and the "
                "classifier sign is no longer guaranteed to survive the noise",
                stacklevel=2,
            )

    def weights(self) -> np.ndarray:
        return np.array([1 - 3 * self.p, self.p, self.p, self.p])


@dataclass(frozen=True)
class CoherentChannel:
    """Rotation exp(-i(mu+eps)/2 sigma_axis), eps ~ N(0, tau^2), axis 0 with prob 1-3q."""

    mu: float
    tau: float
    q: float

    def __post_init__(self):
        if not -np.pi <= self.mu <= np.pi:
            raise ValueError(f"mu must be in [-pi, pi], got {self.mu}")
        if self.tau < 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if not 0.0 <= self.q <= 1 / 3:
            raise ValueError(f"q must be in [0, 1/3], got {self.q}")

    def weights(self) -> np.ndarray:
        return np.array([1 - 3 * self.q, self.q, self.q, self.q])


@dataclass(frozen=True)
class NoiseRealization:
    """One sampled draw: Pauli outcome, rotation axis, and angle jitter."""

    pauli_index: int
    axis_index: int
    jitter: float


def pauli_gate(j: int) -> Gate:
    """sigma_j as a gate; j=0 is the identity."""
    if j not in (0, 1, 2, 3):
        raise WireError(f"Pauli index must be in {{0,1,2,3}}, got {j}")
    return Gate(_PAULIS[j])


def pauli_matrix(j: int) -> np.ndarray:
    """Raw 2x2 array for sigma_j (read-only view of the module constant)."""
    if j not in (0, 1, 2, 3):
        raise WireError(f"Pauli index must be in {{0,1,2,3}}, got {j}")
    return _PAULIS[j]


def coherent_gate(axis: int, angle: float) -> Gate:
    """exp(-i angle/2 sigma_axis).

    Axis 0 would only contribute a global phase, so the identity is returned
    exactly; phases never reach any probability computed here.
    """
    mat = coherent_matrix(axis, angle)
    return Gate(mat)


def coherent_matrix(axis: int, angle: float) -> np.ndarray:
    if axis not in (0, 1, 2, 3):
        raise WireError(f"rotation axis must be in {{0,1,2,3}}, got {axis}")
    if axis == 0:
        return np.eye(2, dtype=np.complex128)
    half = angle / 2.0
    return np.cos(half) * _PAULIS[0] - 1j * np.sin(half) * _PAULIS[axis]


def sample_bitflip(channel: BitflipChannel, rng: np.random.Generator,
                   size: int | None = None) -> int | np.ndarray:
    """Draw Pauli outcome indices with masses (1-3p, p, p, p)."""
    out = rng.choice(4, size=size, p=channel.weights())
    return int(out) if size is None else out


def sample_coherent(channel: CoherentChannel, rng: np.random.Generator,
                    size: int | None = None):
    """Draw (axis, jitter) with axis masses (1-3q, q, q, q) and jitter ~ N(0, tau^2).

    The axis and the jitter are drawn independently; the axis is drawn first.
    """
    axis = rng.choice(4, size=size, p=channel.weights())
    jitter = rng.normal(0.0, channel.tau, size=size)
    if size is None:
        return int(axis), float(jitter)
    return axis, jitter


def sample_realization(bitflip: BitflipChannel, coherent: CoherentChannel,
                       rng: np.random.Generator) -> NoiseRealization:
    """One full draw (C, C', eps), in that order on the stream."""
    j = sample_bitflip(bitflip, rng)
    axis, jitter = sample_coherent(coherent, rng)
    return NoiseRealization(j, axis, jitter)


def enumerate_bitflip(channel: BitflipChannel) -> list[tuple[float, Gate]]:
    """The four (weight, gate) outcomes of the bit-flip channel; weights sum to 1."""
    w = channel.weights()
    return [(float(w[j]), pauli_gate(j)) for j in range(4)]


def gaussian_trig_expectations(mu: float, tau: float) -> tuple[float, float]:
    """(E[cos(mu+eps)], E[sin(mu+eps)]) for eps ~ N(0, tau^2).

    Both equal the noiseless value damped by exp(-tau^2/2).
    """
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    damp = np.exp(-0.5 * tau * tau)
    return float(np.cos(mu) * damp), float(np.sin(mu) * damp)
