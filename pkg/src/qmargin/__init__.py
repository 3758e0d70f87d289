"""Statevector simulation of single-qubit noise in quantum binary classifiers."""

from .analysis import (
    InvarianceReport,
    LemmaOneReport,
    Theorem2Constants,
    conjugated_margin_table,
    corrupted_margin_exact,
    corrupted_margin_mc,
    lemma1_table,
    negative_control_entangled_circuit,
    negative_control_wire1_entangling,
    random_layered_circuit,
    theorem1_clause1_report,
    theorem1_clause2_report,
    theorem2_constants,
)
from .classifier import (
    Ansatz,
    EncoderSpec,
    apply_ansatz,
    classify,
    encode,
    margin,
    margin_conjugated,
    margins_batch,
)
from .estimator import QuantumMarginClassifier, RyAngleEncoder
from .exceptions import (
    DegenerateShrinkageError,
    DomainError,
    EmptyDatasetError,
    InfeasibleSpecError,
    LambdaDegenerateError,
    NormalizationError,
    OptimizationError,
    QmarginError,
    ShapeError,
    SizeError,
    UnitarityError,
    UnsupportedConfigurationError,
    WireError,
)
from .noise import (
    BitflipChannel,
    CoherentChannel,
    NoiseRealization,
    coherent_gate,
    enumerate_bitflip,
    gaussian_trig_expectations,
    pauli_gate,
    sample_bitflip,
    sample_coherent,
    sample_realization,
)
from .rng import rng_from
from .statevec import (
    Gate,
    StateVector,
    apply_single,
    apply_two,
    basis_state,
    first_qubit_projector,
    inner_product,
    kron_product,
    prob_first_qubit_one,
    random_state,
    random_unitary,
)
from .training import (
    HINGE,
    LOGISTIC,
    DatasetSpec,
    FitConfig,
    FitResult,
    Lemma2Report,
    LossFn,
    QuantumDataset,
    RiskObjective,
    RiskReport,
    corrupt_dataset,
    corrupted_empirical_risk,
    corrupted_risk_mc,
    empirical_objective,
    empirical_risk,
    expected_corrupted_risk,
    fit,
    fit_objective,
    generate_dataset,
    gradient,
    lemma2_check,
    load_dataset,
    loss,
    loss_derivative,
    regularized_objective,
    save_dataset,
)

__version__ = "0.1.0"
