"""From-scratch probe classifiers on numpy: multinomial linear and one-hidden-
layer ReLU MLP, trained with Adam on softmax cross-entropy.

Training is bit-deterministic for a fixed config: parameter init and batch
shuffling come from one seeded generator, everything runs in float64, and no
early stopping or learning-rate schedule is applied. Inputs are standardized
with statistics of the training split; the fitted model carries them.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import TrainingDivergedError, ValidationError

LINEAR = "linear"
MLP = "mlp"
PROBE_KINDS = (LINEAR, MLP)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization hyperparameters for probe training."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 75
    hidden_units: int = 256
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValidationError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")
        if self.epochs < 1 or self.hidden_units < 1 or self.batch_size < 1:
            raise ValidationError("epochs, hidden_units, and batch_size must be >= 1")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class ProbeModel:
    """Fitted probe: weights plus the train-split standardization."""

    kind: str
    n_classes: int
    mu: np.ndarray
    sigma: np.ndarray
    weights: dict[str, np.ndarray]
    config: TrainConfig

    def _standardize(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.mu.shape[0]:
            raise ValidationError(
                f"expected features with {self.mu.shape[0]} columns, got shape {features.shape}"
            )
        return (features - self.mu) / self.sigma

    def logits(self, features: np.ndarray) -> np.ndarray:
        return _forward(self.weights, self.kind, self._standardize(features))[0]

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """Class probabilities; each row sums to 1 within 1e-9."""
        return _softmax(self.logits(features))

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Most likely class per row; argmax ties go to the lowest index."""
        return np.argmax(self.logits(features), axis=1).astype(np.int64)


def train_probe(
    features: np.ndarray,
    labels: Sequence[int] | np.ndarray,
    kind: str = MLP,
    config: TrainConfig | None = None,
    n_classes: int | None = None,
) -> ProbeModel:
    """Fit a probe of the given kind; deterministic for a fixed config.

    Args:
        features: N x d float matrix (finite).
        labels: N integer class ids in [0, n_classes).
        kind: "linear" or "mlp".
        config: optimizer settings; defaults to TrainConfig().
        n_classes: output size; inferred as max(labels) + 1 when omitted.

    Raises:
        ValidationError: bad shapes, non-finite features, fewer than two
            classes present in labels.
        TrainingDivergedError: a batch produced a non-finite loss (names the
            epoch it happened in).
    """
    config = config or TrainConfig()
    if kind not in PROBE_KINDS:
        raise ValidationError(f"unknown probe kind {kind!r}, expected one of {PROBE_KINDS}")
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValidationError("features must be a non-empty N x d matrix")
    if not np.all(np.isfinite(X)):
        raise ValidationError("features must be finite")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise ValidationError("labels must be 1-D and match the feature rows")
    if not np.issubdtype(y.dtype, np.integer):
        as_int = y.astype(np.int64)
        if not np.array_equal(as_int, y):
            raise ValidationError("labels must be integers")
        y = as_int
    y = y.astype(np.int64)
    if y.min() < 0:
        raise ValidationError("labels must be non-negative")
    present = np.unique(y)
    if present.size < 2:
        raise ValidationError(f"need at least two classes present in labels, got {present.size}")
    k = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if k < int(y.max()) + 1:
        raise ValidationError(f"n_classes={k} too small for max label {int(y.max())}")

    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma < 1e-12, 1.0, sigma)
    Xs = (X - mu) / sigma

    rng = np.random.default_rng(config.seed)
    d = X.shape[1]
    weights = _init_weights(kind, d, k, config.hidden_units, rng)

    n = X.shape[0]
    batch_size = min(config.batch_size, n)
    adam_m = {key: np.zeros_like(w) for key, w in weights.items()}
    adam_v = {key: np.zeros_like(w) for key, w in weights.items()}
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            loss, grads = probe_loss_and_gradients(weights, kind, Xs[batch], y[batch])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, float(loss))
            step += 1
            bc1 = 1.0 - config.beta1**step
            bc2 = 1.0 - config.beta2**step
            for key, g in grads.items():
                adam_m[key] = config.beta1 * adam_m[key] + (1.0 - config.beta1) * g
                adam_v[key] = config.beta2 * adam_v[key] + (1.0 - config.beta2) * g * g
                m_hat = adam_m[key] / bc1
                v_hat = adam_v[key] / bc2
                weights[key] = weights[key] - config.learning_rate * m_hat / (
                    np.sqrt(v_hat) + config.epsilon
                )

    mu_frozen = mu.copy()
    sigma_frozen = sigma.copy()
    mu_frozen.setflags(write=False)
    sigma_frozen.setflags(write=False)
    for w in weights.values():
        w.setflags(write=False)
    return ProbeModel(
        kind=kind, n_classes=k, mu=mu_frozen, sigma=sigma_frozen, weights=weights, config=config
    )


def probe_loss_and_gradients(
    weights: dict[str, np.ndarray],
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its analytic gradients.

    Exposed so gradient-check tests can compare against finite differences.
    """
    logits, hidden = _forward(weights, kind, X)
    b = X.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    loss = float(-log_probs[np.arange(b), y].mean())

    probs = np.exp(log_probs)
    delta = probs.copy()
    delta[np.arange(b), y] -= 1.0
    delta /= b

    grads: dict[str, np.ndarray] = {}
    if kind == LINEAR:
        grads["W"] = X.T @ delta
        grads["b"] = delta.sum(axis=0)
    else:
        grads["W2"] = hidden.T @ delta
        grads["b2"] = delta.sum(axis=0)
        dhidden = delta @ weights["W2"].T
        dhidden[hidden <= 0] = 0.0
        grads["W1"] = X.T @ dhidden
        grads["b1"] = dhidden.sum(axis=0)
    return loss, grads


def accuracy(model: ProbeModel, features: np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    """Fraction of rows whose predicted class equals the label."""
    y = np.asarray(labels, dtype=np.int64)
    preds = model.predict(features)
    if preds.shape != y.shape:
        raise ValidationError("labels must match the number of feature rows")
    return float(np.mean(preds == y))


def chance_rate(labels: Sequence[int] | np.ndarray) -> float:
    """Agreement rate of a label-frequency-matched random guesser.

    Sum over classes of squared empirical frequency; in (0, 1], and exactly
    1 only when all labels are identical.
    """
    y = np.asarray(labels)
    if y.ndim != 1 or y.size == 0:
        raise ValidationError("labels must be a non-empty 1-D array")
    _, counts = np.unique(y, return_counts=True)
    freqs = counts / y.size
    return float((freqs**2).sum())


def adjusted_accuracy(acc: float, chance: float) -> float:
    """Chance-adjusted accuracy max(0, (a - r) / (1 - r)).

    A chance rate of 1 (single-class labels) makes the adjustment undefined;
    that returns 0.0 with a warning instead of dividing by zero.
    """
    if not 0.0 <= acc <= 1.0 + 1e-12:
        raise ValidationError(f"accuracy must lie in [0, 1], got {acc!r}")
    if not 0.0 < chance <= 1.0:
        raise ValidationError(f"chance rate must lie in (0, 1], got {chance!r}")
    if chance >= 1.0:
        warnings.warn(
            "chance rate is 1 (single-class labels); adjusted accuracy defined as 0.0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    return max(0.0, (acc - chance) / (1.0 - chance))


def _init_weights(
    kind: str, d: int, k: int, hidden: int, rng: np.random.Generator
) -> dict[str, np.ndarray]:
    """Kaiming-style uniform init for the MLP, bound sqrt(6 / fan_in); zero
    biases. The linear head starts at zero: its objective is convex, so no
    symmetry breaking is needed, and a large random start can sit farther
    from the optimum than the epoch budget reaches."""
    if kind == LINEAR:
        return {
            "W": np.zeros((d, k)),
            "b": np.zeros(k),
        }
    bound1 = np.sqrt(6.0 / d)
    bound2 = np.sqrt(6.0 / hidden)
    return {
        "W1": rng.uniform(-bound1, bound1, size=(d, hidden)),
        "b1": np.zeros(hidden),
        "W2": rng.uniform(-bound2, bound2, size=(hidden, k)),
        "b2": np.zeros(k),
    }


def _forward(
    weights: dict[str, np.ndarray], kind: str, X: np.ndarray
) -> tuple[np.ndarray, np.ndarray | None]:
    if kind == LINEAR:
        return X @ weights["W"] + weights["b"], None
    hidden = np.maximum(X @ weights["W1"] + weights["b1"], 0.0)
    return hidden @ weights["W2"] + weights["b2"], hidden


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)
