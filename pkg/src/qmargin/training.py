"""Risk minimization on quantum datasets with bit-flip data corruption.

A dataset pairs statevectors with labels in {-1, +1}.  Fitting minimizes
the mean loss of margin * label by plain gradient descent with restarts,
with gradients from the parameter-shift rule (rotation angles only appear
inside exp(-i theta sigma / 2) gates, so the +-pi/2 shifts are exact).
Corrupting the data with the bit-flip channel turns the expected risk into
the clean risk plus a margin-shrinking penalty, which this module computes
exactly and checks against per-seed corruption replays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import CNOT, Ansatz, classify, conjugated_amps, margins_batch
from .exceptions import (
    DomainError,
    EmptyDatasetError,
    InfeasibleSpecError,
    LambdaDegenerateError,
    NormalizationError,
    OptimizationError,
    SizeError,
    UnsupportedConfigurationError,
)
from .noise import BitflipChannel, pauli_matrix, sample_bitflip
from .rng import rng_from
from .statevec import StateVector, _apply_1q, _apply_2q, random_unitary

LOSS_KINDS = ("hinge", "logistic")
DOMAIN_HALF_WIDTH = 0.5
_DOMAIN_SLACK = 1e-12
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class LossFn:
    """Convex, monotone nonincreasing loss on [-1/2, 1/2] with loss(0) = 1."""

    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")


HINGE = LossFn("hinge")
LOGISTIC = LossFn("logistic")


def _check_domain(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > DOMAIN_HALF_WIDTH + _DOMAIN_SLACK):
        worst = float(np.abs(t).max())
        raise DomainError(f"loss argument {worst} outside [-1/2, 1/2]")
    return t


def loss(fn: LossFn, t):
    """Evaluate the loss; accepts scalars or arrays."""
    t = _check_domain(t)
    if fn.kind == "hinge":
        out = np.maximum(1.0 - t, 0.0)
    else:
        out = np.log1p(np.exp(-t)) / _LOG2
    return float(out) if out.ndim == 0 else out


def loss_derivative(fn: LossFn, t):
    """d loss / dt; the hinge kink at t=1 uses subgradient 0 (unreachable on this domain)."""
    t = _check_domain(t)
    if fn.kind == "hinge":
        out = np.where(t < 1.0, -1.0, 0.0)
    else:
        out = -1.0 / ((1.0 + np.exp(t)) * _LOG2)
    return float(out) if out.ndim == 0 else out


@dataclass(eq=False)
class QuantumDataset:
    """States (N, 2**n) with labels in {-1, +1}; realizations record applied bit flips."""

    states: np.ndarray
    labels: np.ndarray
    realizations: np.ndarray | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.complex128)
        if states.ndim != 2 or states.shape[1] & (states.shape[1] - 1) or states.shape[1] < 2:
            raise SizeError(f"states must be (N, 2**n) with n >= 1, got shape {states.shape}")
        labels = np.asarray(self.labels, dtype=int)
        if labels.shape != (states.shape[0],):
            raise SizeError(f"labels shape {labels.shape} does not match {states.shape[0]} states")
        if labels.size and not np.all(np.isin(labels, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        if states.shape[0]:
            norms = np.linalg.norm(states, axis=1)
            worst = float(np.abs(norms - 1.0).max())
            if worst > 1e-9:
                raise NormalizationError(f"state norms deviate from 1 by up to {worst:.3e}")
        self.states = states
        self.labels = labels
        if self.realizations is not None:
            self.realizations = np.asarray(self.realizations, dtype=int)

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.states.shape[1]))

    def __len__(self) -> int:
        return self.states.shape[0]

    def items(self):
        for amps, label in zip(self.states, self.labels):
            yield StateVector(self.n_qubits, amps.copy()), int(label)

    @classmethod
    def from_items(cls, pairs) -> "QuantumDataset":
        states = np.array([sv.amplitudes for sv, _ in pairs])
        labels = np.array([label for _, label in pairs])
        return cls(states, labels)


def empirical_risk(ansatz: Ansatz, theta, dataset: QuantumDataset, fn: LossFn) -> float:
    """Mean loss of margin * label over the dataset."""
    if len(dataset) == 0:
        raise EmptyDatasetError("empirical risk of an empty dataset")
    margins = margins_batch(ansatz, theta, dataset.states)
    return float(np.mean(loss(fn, margins * dataset.labels)))


def corrupt_dataset(dataset: QuantumDataset, channel: BitflipChannel, seed: int) -> QuantumDataset:
    """Apply an i.i.d. bit-flip draw to every state (on wire 1); records the outcomes."""
    rng = rng_from(seed)
    outcomes = sample_bitflip(channel, rng, size=len(dataset))
    states = dataset.states.copy()
    n = dataset.n_qubits
    for j in (1, 2, 3):
        mask = outcomes == j
        if np.any(mask):
            states[mask] = _apply_1q(states[mask], pauli_matrix(j), 1, n)
    return QuantumDataset(states, dataset.labels.copy(), realizations=outcomes)


def corrupted_empirical_risk(ansatz: Ansatz, theta, dataset: QuantumDataset, fn: LossFn) -> float:
    """Empirical risk on a corrupted dataset (must carry its noise realizations)."""
    if dataset.realizations is None:
        raise ValueError("dataset carries no noise realizations; corrupt it first")
    return empirical_risk(ansatz, theta, dataset, fn)


@dataclass
class RiskReport:
    """Exact conditional expectation of the corrupted risk and its decomposition."""

    empirical: float
    expected_corrupted: float
    penalty: float
    penalty_lower_bound: float
    lam: float
    corrupted: float | None = None


def conjugated_margin_matrix(ansatz: Ansatz, theta, dataset: QuantumDataset) -> np.ndarray:
    """(4, N) margins of sigma_j-conjugated states; rows sum to zero columnwise."""
    if not ansatz.is_product:
        raise UnsupportedConfigurationError("conjugated margins require a product-form ansatz")
    out = np.empty((4, len(dataset)))
    for j in range(4):
        out[j] = margins_batch(ansatz, theta, conjugated_amps(j, dataset.states))
    return out


def expected_corrupted_risk(ansatz: Ansatz, theta, dataset: QuantumDataset,
                            fn: LossFn, p: float) -> RiskReport:
    """E[corrupted risk | data] via exact weighting of the four bit-flip outcomes.

    Fills the penalty (mean quarter-sum of conjugated losses), its lower
    bound, and lambda = 4p/(1-4p), and verifies the decomposition
    expected = (1-4p)(empirical + lambda * penalty) to 1e-10.
    """
    if not 0.0 <= p < 0.25:
        raise LambdaDegenerateError(f"p must be in [0, 1/4) for the penalty weight, got {p}")
    if len(dataset) == 0:
        raise EmptyDatasetError("expected corrupted risk of an empty dataset")
    m = conjugated_margin_matrix(ansatz, theta, dataset)
    losses = loss(fn, m * dataset.labels[None, :])
    empirical = float(np.mean(losses[0]))
    expected = float(np.mean((1 - 3 * p) * losses[0] + p * losses[1:].sum(axis=0)))
    penalty = float(np.mean(losses.mean(axis=0)))
    lam = 4 * p / (1 - 4 * p)
    abs_m = np.abs(m[0])
    lower = float(np.mean((loss(fn, abs_m / 3) + loss(fn, -abs_m / 3)) / 2))
    residual = abs(expected - (1 - 4 * p) * (empirical + lam * penalty))
    if residual > 1e-10:
        raise ArithmeticError(f"risk decomposition failed to close: residual {residual:.3e}")
    return RiskReport(
        empirical=empirical,
        expected_corrupted=expected,
        penalty=penalty,
        penalty_lower_bound=lower,
        lam=lam,
    )


def corrupted_risk_mc(ansatz: Ansatz, theta, dataset: QuantumDataset, fn: LossFn,
                      channel: BitflipChannel, n_seeds: int, seed: int) -> tuple[float, float]:
    """Mean corrupted risk over fresh corruption draws, with its standard error.

    The per-item losses under each of the four outcomes are evaluated once
    through the engine; each replicate then draws i.i.d. outcomes per item
    and averages the corresponding losses, which reproduces
    corrupt_dataset + corrupted_empirical_risk for the same realizations.
    """
    if n_seeds < 1:
        raise ValueError(f"n_seeds must be >= 1, got {n_seeds}")
    m = conjugated_margin_matrix(ansatz, theta, dataset)
    losses = loss(fn, m * dataset.labels[None, :])
    rng = rng_from(seed)
    outcomes = rng.choice(4, size=(n_seeds, len(dataset)), p=channel.weights())
    per_seed = losses[outcomes, np.arange(len(dataset))[None, :]].mean(axis=1)
    mean = float(per_seed.mean())
    stderr = 0.0 if n_seeds == 1 else float(per_seed.std(ddof=1) / np.sqrt(n_seeds))
    return mean, stderr


def risk_for_realizations(ansatz: Ansatz, theta, dataset: QuantumDataset, fn: LossFn,
                          outcomes: np.ndarray) -> float:
    """Corrupted risk for explicitly given per-item bit-flip outcomes."""
    states = dataset.states.copy()
    n = dataset.n_qubits
    outcomes = np.asarray(outcomes, dtype=int)
    for j in (1, 2, 3):
        mask = outcomes == j
        if np.any(mask):
            states[mask] = _apply_1q(states[mask], pauli_matrix(j), 1, n)
    corrupted = QuantumDataset(states, dataset.labels.copy(), realizations=outcomes)
    return corrupted_empirical_risk(ansatz, theta, corrupted, fn)


# --- objectives, gradients, fitting ----------------------------------------


class RiskObjective:
    """A weighted sum of mean losses over groups of (states, labels).

    The empirical risk is a single unit-weight group; the penalty-regularized
    objective adds the conjugated-state groups with weight lambda/4 each.
    """

    def __init__(self, ansatz: Ansatz, fn: LossFn, groups):
        self.ansatz = ansatz
        self.fn = fn
        self.groups = [(float(w), np.asarray(s, dtype=np.complex128), np.asarray(y, dtype=int))
                       for w, s, y in groups]
        if not self.groups or any(s.shape[0] == 0 for _, s, _ in self.groups):
            raise EmptyDatasetError("objective needs at least one nonempty group")

    @property
    def n_params(self) -> int:
        return self.ansatz.n_params

    def _group_margins(self, theta) -> list[np.ndarray]:
        return [margins_batch(self.ansatz, theta, s) for _, s, _ in self.groups]

    def value(self, theta) -> float:
        total = 0.0
        for (w, _, y), m in zip(self.groups, self._group_margins(theta)):
            total += w * float(np.mean(loss(self.fn, m * y)))
        return total


def empirical_objective(ansatz: Ansatz, dataset: QuantumDataset, fn: LossFn) -> RiskObjective:
    return RiskObjective(ansatz, fn, [(1.0, dataset.states, dataset.labels)])


def regularized_objective(ansatz: Ansatz, dataset: QuantumDataset, fn: LossFn,
                          lam: float) -> RiskObjective:
    """empirical risk + lambda * penalty, as weighted conjugated-state groups."""
    if not ansatz.is_product:
        raise UnsupportedConfigurationError("the penalty requires a product-form ansatz")
    groups = [(1.0 + lam / 4, dataset.states, dataset.labels)]
    for j in (1, 2, 3):
        groups.append((lam / 4, conjugated_amps(j, dataset.states), dataset.labels))
    return RiskObjective(ansatz, fn, groups)


def gradient(objective: RiskObjective, theta, method: str = "parameter-shift",
             fd_step: float = 1e-5) -> np.ndarray:
    """Gradient of a risk objective.

    ``parameter-shift`` differentiates each margin exactly via +-pi/2 angle
    shifts and chains through the loss derivative at the unshifted margins;
    ``finite-difference`` central-differences the objective value.
    """
    theta = np.asarray(theta, dtype=float)
    if method == "finite-difference":
        grad = np.empty_like(theta)
        for i in range(theta.size):
            shift = np.zeros_like(theta)
            shift[i] = fd_step
            grad[i] = (objective.value(theta + shift) - objective.value(theta - shift)) / (2 * fd_step)
        return grad
    if method != "parameter-shift":
        raise ValueError(f"unknown gradient method {method!r}")

    chains = []
    for (w, _, y), m in zip(objective.groups, objective._group_margins(theta)):
        chains.append(w * loss_derivative(objective.fn, m * y) * y / y.size)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        shift = np.zeros_like(theta)
        shift[i] = np.pi / 2
        plus = objective._group_margins(theta + shift)
        minus = objective._group_margins(theta - shift)
        total = 0.0
        for chain, mp, mm in zip(chains, plus, minus):
            total += float(np.sum(chain * (mp - mm) / 2.0))
        grad[i] = total
    return grad


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings; the seed drives restart initializations."""

    step_size: float = 0.25
    n_iters: int = 200
    gradient_method: str = "parameter-shift"
    restarts: int = 1
    seed: int = 0
    init_scale: float = 0.5

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError(f"step_size must be positive, got {self.step_size}")
        if self.n_iters < 1:
            raise ValueError(f"n_iters must be >= 1, got {self.n_iters}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")


@dataclass(eq=False)
class FitResult:
    theta: np.ndarray
    objective_value: float
    trace: list[float]             # winning restart, value at init then after each step
    all_traces: list[list[float]]
    restart_index: int


def fit_objective(objective: RiskObjective, config: FitConfig) -> FitResult:
    """Plain gradient descent with random restarts; best final value wins."""
    best = None
    traces = []
    for r in range(config.restarts):
        rng = rng_from(config.seed, r)
        theta = rng.normal(0.0, config.init_scale, size=objective.n_params)
        trace = [objective.value(theta)]
        for _ in range(config.n_iters):
            theta = theta - config.step_size * gradient(objective, theta, config.gradient_method)
            value = objective.value(theta)
            if not np.isfinite(value):
                raise OptimizationError(
                    f"objective diverged at restart {r}, iteration {len(trace)}", trace=trace
                )
            trace.append(value)
        traces.append(trace)
        if best is None or trace[-1] < best[1]:
            best = (theta, trace[-1], trace, r)
    theta, value, trace, r = best
    return FitResult(theta=theta, objective_value=value, trace=trace,
                     all_traces=traces, restart_index=r)


def fit(dataset: QuantumDataset, fn: LossFn, config: FitConfig,
        ansatz: Ansatz | None = None) -> FitResult:
    """Minimize the empirical risk on the dataset."""
    if ansatz is None:
        ansatz = Ansatz(dataset.n_qubits)
    return fit_objective(empirical_objective(ansatz, dataset, fn), config)


# --- synthetic data ---------------------------------------------------------


@dataclass(frozen=True)
class DatasetSpec:
    """Random states labeled by a planted product classifier."""

    n_qubits: int
    n_items: int
    planted_theta: tuple[float, ...] | None = None
    margin_gap: float = 0.0
    entangle: bool = False

    def __post_init__(self):
        if self.n_qubits < 1:
            raise SizeError(f"n_qubits must be positive, got {self.n_qubits}")
        if self.n_items < 1:
            raise SizeError(f"n_items must be positive, got {self.n_items}")
        if not 0.0 <= self.margin_gap < 0.5:
            raise ValueError(f"margin_gap must be in [0, 1/2), got {self.margin_gap}")
        if self.planted_theta is not None:
            object.__setattr__(self, "planted_theta", tuple(float(v) for v in self.planted_theta))


def _random_product_states(n_qubits: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, 2**n) Haar-random product states."""
    amps = np.ones((count, 1), dtype=np.complex128)
    for _ in range(n_qubits):
        cos_theta = rng.uniform(-1.0, 1.0, size=count)
        half = np.arccos(cos_theta) / 2.0
        phase = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=count))
        qubit = np.stack([np.cos(half) + 0j, phase * np.sin(half)], axis=1)
        amps = np.einsum("bi,bj->bij", amps, qubit).reshape(count, -1)
    return amps


def generate_dataset(spec: DatasetSpec, seed: int) -> tuple[QuantumDataset, np.ndarray]:
    """Sample states, label them with the planted classifier, reject small margins.

    Returns (dataset, planted_theta).  Raises if more than 99% of candidate
    draws fall inside the margin gap.
    """
    rng = rng_from(seed)
    ansatz = Ansatz(spec.n_qubits)
    if spec.planted_theta is not None:
        theta_star = np.asarray(spec.planted_theta, dtype=float)
        if theta_star.shape != (ansatz.n_params,):
            raise SizeError(
                f"planted_theta has shape {theta_star.shape}, expected ({ansatz.n_params},)"
            )
    else:
        theta_star = rng.uniform(-np.pi, np.pi, size=ansatz.n_params)

    entangler_singles = None
    if spec.entangle:
        entangler_singles = [random_unitary(2, rng) for _ in range(spec.n_qubits)]

    collected_states = []
    attempts = 0
    accepted = 0
    batch = max(64, 2 * spec.n_items)
    while accepted < spec.n_items:
        states = _random_product_states(spec.n_qubits, batch, rng)
        if spec.entangle:
            for w, mat in enumerate(entangler_singles, start=1):
                states = _apply_1q(states, mat, w, spec.n_qubits)
            for w in range(1, spec.n_qubits):
                states = _apply_2q(states, CNOT, (w, w + 1), spec.n_qubits)
        margins = margins_batch(ansatz, theta_star, states)
        keep = np.abs(margins) >= spec.margin_gap
        attempts += batch
        accepted += int(keep.sum())
        collected_states.append(states[keep])
        if attempts >= 200 and accepted < 0.01 * attempts:
            raise InfeasibleSpecError(
                f"margin gap {spec.margin_gap} rejects more than 99% of draws "
                f"({accepted}/{attempts} accepted)"
            )
    states = np.concatenate(collected_states)[: spec.n_items]
    margins = margins_batch(ansatz, theta_star, states)
    labels = np.array([classify(v) for v in margins])
    return QuantumDataset(states, labels), theta_star


# --- convexity inequality for the penalty bound ------------------------------


@dataclass(frozen=True)
class Lemma2Report:
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs


def lemma2_check(a: float, b: float, c: float, d: float, fn: LossFn) -> Lemma2Report:
    """Mean loss of a zero-sum quadruple vs the symmetrized loss at |a|/3."""
    if abs(a + b + c + d) > 1e-9:
        raise ValueError(f"quadruple must sum to zero, got {a + b + c + d}")
    lhs = float((loss(fn, a) + loss(fn, b) + loss(fn, c) + loss(fn, d)) / 4)
    rhs = float((loss(fn, abs(a) / 3) + loss(fn, -abs(a) / 3)) / 2)
    return Lemma2Report(lhs=lhs, rhs=rhs)


# --- text serialization -----------------------------------------------------


def save_dataset(dataset: QuantumDataset, path) -> None:
    """One line per item: label, n_qubits, then (real, imag) pairs at 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("# qmargin dataset: label n_qubits re im re im ...\n")
        for amps, label in zip(dataset.states, dataset.labels):
            parts = [f"{int(label):+d}", str(dataset.n_qubits)]
            for v in amps:
                parts.append(f"{v.real:.17g}")
                parts.append(f"{v.imag:.17g}")
            fh.write(" ".join(parts) + "\n")


def load_dataset(path) -> QuantumDataset:
    states = []
    labels = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            label = int(tokens[0])
            n = int(tokens[1])
            values = np.array([float(tok) for tok in tokens[2:]])
            if values.size != 2 ** (n + 1):
                raise SizeError(
                    f"record declares {n} qubits but carries {values.size // 2} amplitudes"
                )
            states.append(values[0::2] + 1j * values[1::2])
            labels.append(label)
    if not states:
        raise EmptyDatasetError(f"no records found in {path}")
    return QuantumDataset(np.array(states), np.array(labels))
