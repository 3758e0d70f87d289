"""scikit-learn compatible wrappers around the margin classifier.

``QuantumMarginClassifier`` exposes the trained product-form circuit through
the usual fit / decision_function / predict surface so it composes with
pipelines, grid search, and metrics.  ``RyAngleEncoder`` maps real feature
rows to statevector rows with one Ry rotation per wire.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from .classifier import Ansatz, margins_batch
from .exceptions import NormalizationError, SizeError
from .training import (
    FitConfig,
    LossFn,
    QuantumDataset,
    empirical_objective,
    fit_objective,
    regularized_objective,
)


def check_statevector_array(X) -> np.ndarray:
    """Validate a (N, 2**n) array of normalized statevectors."""
    X = np.asarray(X, dtype=np.complex128)
    if X.ndim != 2 or X.shape[0] == 0:
        raise SizeError(f"expected a nonempty 2D array of statevectors, got shape {X.shape}")
    cols = X.shape[1]
    if cols < 2 or cols & (cols - 1):
        raise SizeError(f"statevector length {cols} is not a power of two >= 2")
    norms = np.linalg.norm(X, axis=1)
    worst = float(np.abs(norms - 1.0).max())
    if worst > 1e-9:
        raise NormalizationError(f"rows deviate from unit norm by up to {worst:.3e}")
    return X


def check_feature_array(X) -> np.ndarray:
    """Validate a (N, n) real feature array of per-wire angles."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise SizeError(f"expected a nonempty 2D feature array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


class RyAngleEncoder(TransformerMixin, BaseEstimator):
    """Encode feature rows as product states, one Ry(angle) per wire."""

    def fit(self, X, y=None):
        X = check_feature_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = check_feature_array(X)
        half = X / 2.0
        states = np.ones((X.shape[0], 1), dtype=np.complex128)
        for k in range(X.shape[1]):
            qubit = np.stack([np.cos(half[:, k]) + 0j, np.sin(half[:, k]) + 0j], axis=1)
            states = np.einsum("bi,bj->bij", states, qubit).reshape(X.shape[0], -1)
        return states


class QuantumMarginClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier reading the sign of the first-qubit margin.

    Parameters
    ----------
    loss : {"hinge", "logistic"}
        Training loss on margin * label.
    penalty_weight : float
        Weight on the margin-shrinking penalty term; 0 trains the plain
        empirical risk.
    step_size, n_iters, restarts, init_scale : gradient-descent settings.
    gradient_method : {"parameter-shift", "finite-difference"}
    encoding : {"raw-state", "per-qubit-angle"}
        With "raw-state", X rows are complex statevectors of length 2**n;
        with "per-qubit-angle", X rows are real angles, one per wire.
    random_state : int
        Master seed for restart initializations.

    Attributes
    ----------
    classes_ : the two class labels; the first maps to a nonpositive margin.
    theta_ : fitted rotation angles, three per wire.
    n_qubits_ : wire count inferred from the input width.
    """

    def __init__(self, loss="hinge", penalty_weight=0.0, step_size=0.25, n_iters=150,
                 restarts=2, init_scale=0.5, gradient_method="parameter-shift",
                 encoding="raw-state", random_state=0):
        self.loss = loss
        self.penalty_weight = penalty_weight
        self.step_size = step_size
        self.n_iters = n_iters
        self.restarts = restarts
        self.init_scale = init_scale
        self.gradient_method = gradient_method
        self.encoding = encoding
        self.random_state = random_state

    def _encode(self, X) -> np.ndarray:
        if self.encoding == "per-qubit-angle":
            return RyAngleEncoder().fit(X).transform(X)
        if self.encoding == "raw-state":
            return check_statevector_array(X)
        raise ValueError(f"unknown encoding {self.encoding!r}")

    def fit(self, X, y):
        states = self._encode(X)
        y = np.asarray(y)
        if y.shape != (states.shape[0],):
            raise SizeError(f"y has shape {y.shape}, expected ({states.shape[0]},)")
        classes = np.unique(y)
        if classes.size != 2:
            raise ValueError(f"exactly two classes required, got {classes.tolist()}")
        labels = np.where(y == classes[1], 1, -1)

        dataset = QuantumDataset(states, labels)
        ansatz = Ansatz(dataset.n_qubits)
        fn = LossFn(self.loss)
        if self.penalty_weight > 0:
            objective = regularized_objective(ansatz, dataset, fn, self.penalty_weight)
        else:
            objective = empirical_objective(ansatz, dataset, fn)
        config = FitConfig(
            step_size=self.step_size,
            n_iters=self.n_iters,
            gradient_method=self.gradient_method,
            restarts=self.restarts,
            seed=self.random_state,
            init_scale=self.init_scale,
        )
        result = fit_objective(objective, config)

        self.classes_ = classes
        self.n_qubits_ = dataset.n_qubits
        self.ansatz_ = ansatz
        self.theta_ = result.theta
        self.fit_result_ = result
        return self

    def decision_function(self, X) -> np.ndarray:
        """Margins in [-1/2, 1/2]; positive means the second class."""
        if not hasattr(self, "theta_"):
            raise NotFittedError("this QuantumMarginClassifier instance is not fitted yet")
        states = self._encode(X)
        if states.shape[1] != 2**self.n_qubits_:
            raise SizeError(
                f"X width {states.shape[1]} does not match the fitted {self.n_qubits_}-qubit circuit"
            )
        return margins_batch(self.ansatz_, self.theta_, states)

    def predict(self, X) -> np.ndarray:
        margins = self.decision_function(X)
        return self.classes_[(margins > 0).astype(int)]
