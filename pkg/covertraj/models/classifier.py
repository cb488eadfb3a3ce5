"""
Softmax Classifier over a Trajectory Set

A linear model maps agent-state features to one logit per set mode; the
probability of mode k is the softmax of the logits. Training minimizes mean
cross-entropy against the mode closest to the ground truth.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from covertraj.errors import DataError, DimensionMismatch, EmptyDataset, InvalidState
from covertraj.metrics import PredictionResult
from covertraj.models.trajectory import (
    DistanceKind,
    Trajectory,
    TrajectorySet,
    closest_index,
)
from covertraj.utils.features import StateFeatureExtractor

logger = logging.getLogger(__name__)

DEFAULT_LR = 1e-2
DEFAULT_BATCH_SIZE = 32
GRADIENT_CHECK_STEP = 1e-5


def softmax(logits: np.ndarray) -> np.ndarray:
    """Softmax along the last axis, shifted by the max logit"""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


@dataclass
class SoftmaxModel:
    """Weights of shape (num_modes, feature_dim), rows aligned with set modes"""

    weights: np.ndarray
    feature_names: List[str] = field(default_factory=lambda: list(StateFeatureExtractor.FEATURE_NAMES))
    set_fingerprint: Optional[str] = None
    trajectory_set: Optional[TrajectorySet] = None
    label_kind: DistanceKind = DistanceKind.AVG_L2
    loss_curve: List[float] = field(default_factory=list)

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise InvalidState(f"weights must be a matrix, got shape {self.weights.shape}")
        if self.weights.shape[1] != len(self.feature_names):
            raise DimensionMismatch(
                f"{self.weights.shape[1]} weight columns for {len(self.feature_names)} features"
            )
        self.label_kind = DistanceKind(self.label_kind)
        if self.trajectory_set is not None:
            self.bind(self.trajectory_set)

    @classmethod
    def zeros(
        cls, trajectory_set: TrajectorySet, feature_names: Sequence[str] = StateFeatureExtractor.FEATURE_NAMES
    ) -> "SoftmaxModel":
        return cls(
            weights=np.zeros((len(trajectory_set), len(feature_names))),
            feature_names=list(feature_names),
            trajectory_set=trajectory_set,
        )

    @property
    def n_modes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def bind(self, trajectory_set: TrajectorySet):
        """Attach the set whose modes the weight rows describe"""
        if len(trajectory_set) != self.n_modes:
            raise DimensionMismatch(
                f"model has {self.n_modes} modes, set has {len(trajectory_set)}"
            )
        fingerprint = trajectory_set.fingerprint()
        if self.set_fingerprint is not None and self.set_fingerprint != fingerprint:
            raise DataError("model was trained against a different trajectory set")
        self.set_fingerprint = fingerprint
        self.trajectory_set = trajectory_set

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.shape[-1] != self.feature_dim:
            raise DimensionMismatch(
                f"expected {self.feature_dim} features, got {features.shape[-1]}"
            )
        if not np.all(np.isfinite(features)):
            raise InvalidState("features must be finite")
        return features @ self.weights.T

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return softmax(self.logits(features))

    def save_model(self, path: Union[str, Path]):
        """Write weights, feature names and set fingerprint as JSON"""
        from covertraj.utils.io import atomic_write_text

        payload = {
            "weights": self.weights.tolist(),
            "feature_names": self.feature_names,
            "set_fingerprint": self.set_fingerprint,
            "label_kind": self.label_kind.value,
            "loss_curve": [float(v) for v in self.loss_curve],
        }
        atomic_write_text(Path(path), json.dumps(payload, indent=2) + "\n")
        logger.info("Model saved to %s", path)

    @classmethod
    def load_model(
        cls, path: Union[str, Path], trajectory_set: Optional[TrajectorySet] = None
    ) -> "SoftmaxModel":
        """
        Load a model saved by save_model

        Raises:
            FileNotFoundError: if the file does not exist
            DataError: if the file is malformed or ``trajectory_set`` does not
                match the fingerprint recorded at training time
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Model file not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        try:
            model = cls(
                weights=data["weights"],
                feature_names=data["feature_names"],
                set_fingerprint=data.get("set_fingerprint"),
                label_kind=data.get("label_kind", DistanceKind.AVG_L2.value),
                loss_curve=list(data.get("loss_curve", [])),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model file {path}: {exc}") from exc
        if trajectory_set is not None:
            model.bind(trajectory_set)
        return model


def predict(
    model: SoftmaxModel, features: np.ndarray, trajectory_set: Optional[TrajectorySet] = None
) -> PredictionResult:
    """
    Mode probabilities for one feature vector

    ``trajectory_set`` overrides the bound set, e.g. with a per-instance
    expansion of a dynamic set; it must have the same number of modes.
    """
    target = trajectory_set if trajectory_set is not None else model.trajectory_set
    if target is None:
        raise InvalidState("model is not bound to a trajectory set")
    if len(target) != model.n_modes:
        raise DimensionMismatch(f"model has {model.n_modes} modes, set has {len(target)}")
    features = np.asarray(features, dtype=np.float64).reshape(-1)
    return PredictionResult(trajectory_set=target, probs=model.predict_proba(features))


def label(
    truth: Trajectory, trajectory_set: TrajectorySet, kind: DistanceKind = DistanceKind.AVG_L2
) -> int:
    """Index of the mode closest to the ground truth"""
    return closest_index(truth, trajectory_set, kind)


def loss_and_gradient(
    weights: np.ndarray, features: np.ndarray, labels: np.ndarray
) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy and its gradient with respect to the weights

    Args:
        weights: (K, D)
        features: (B, D)
        labels: (B,) mode indices
    """
    features = np.atleast_2d(features)
    labels = np.atleast_1d(labels).astype(np.int64)
    batch = features.shape[0]
    logits = features @ weights.T
    log_probs = log_softmax(logits)
    loss = -float(np.mean(log_probs[np.arange(batch), labels]))
    delta = np.exp(log_probs)
    delta[np.arange(batch), labels] -= 1.0
    return loss, delta.T @ features / batch


def train(
    dataset: Sequence[Tuple[np.ndarray, Trajectory]],
    trajectory_set: TrajectorySet,
    epochs: int,
    lr: float = DEFAULT_LR,
    rng_seed: int = 0,
    batch_size: int = DEFAULT_BATCH_SIZE,
    label_kind: DistanceKind = DistanceKind.AVG_L2,
    labels: Optional[Sequence[int]] = None,
    feature_names: Sequence[str] = StateFeatureExtractor.FEATURE_NAMES,
    progress=None,
) -> SoftmaxModel:
    """
    Fit a softmax model by mini-batch gradient descent from zero weights

    Args:
        dataset: (feature vector, ground-truth trajectory) pairs
        trajectory_set: Label space
        epochs: Passes over the data; 0 returns the zero-weight model
        lr: Fixed learning rate
        rng_seed: Seed of the per-epoch shuffling
        batch_size: Mini-batch size
        label_kind: Distance used to pick each example's label
        labels: Precomputed labels, e.g. against per-instance expansions of
            a dynamic set; computed from ``trajectory_set`` when omitted
        progress: Optional callable wrapping the epoch iterator (tqdm)

    Returns:
        Model bound to ``trajectory_set``; ``loss_curve`` holds the full
        training loss before training and after every epoch
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if epochs < 0 or batch_size < 1 or not lr > 0:
        raise InvalidState(f"invalid training parameters: epochs={epochs}, lr={lr}, batch={batch_size}")

    model = SoftmaxModel.zeros(trajectory_set, feature_names)
    model.label_kind = DistanceKind(label_kind)
    x = np.stack([np.asarray(f, dtype=np.float64).reshape(-1) for f, _ in dataset])
    if x.shape[1] != model.feature_dim:
        raise DimensionMismatch(f"expected {model.feature_dim} features, got {x.shape[1]}")
    if labels is None:
        y = np.array([label(truth, trajectory_set, model.label_kind) for _, truth in dataset])
    else:
        y = np.asarray(labels, dtype=np.int64)
        if y.shape[0] != x.shape[0]:
            raise InvalidState(f"{y.shape[0]} labels for {x.shape[0]} examples")

    rng = np.random.Generator(np.random.PCG64(rng_seed))
    loss, _ = loss_and_gradient(model.weights, x, y)
    model.loss_curve = [loss]
    epoch_iter = range(epochs) if progress is None else progress(range(epochs))
    for epoch in epoch_iter:
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], batch_size):
            batch = order[start:start + batch_size]
            _, grad = loss_and_gradient(model.weights, x[batch], y[batch])
            model.weights -= lr * grad
        loss, _ = loss_and_gradient(model.weights, x, y)
        model.loss_curve.append(loss)
        logger.debug("Epoch %d: loss %.6f", epoch + 1, loss)

    logger.info(
        "Trained %d-mode model on %d examples for %d epochs (loss %.4f -> %.4f)",
        model.n_modes, x.shape[0], epochs, model.loss_curve[0], model.loss_curve[-1],
    )
    return model


def gradient_check(model: SoftmaxModel, example: Tuple[np.ndarray, int]) -> float:
    """
    Max relative error between the analytic gradient and central differences

    The relative error of each weight is |a - n| / max(|a| + |n|, 1e-4).
    """
    features, target = example
    features = np.asarray(features, dtype=np.float64).reshape(1, -1)
    target = np.array([int(target)])
    _, analytic = loss_and_gradient(model.weights, features, target)

    numeric = np.zeros_like(model.weights)
    weights = model.weights.copy()
    for idx in np.ndindex(*weights.shape):
        saved = weights[idx]
        weights[idx] = saved + GRADIENT_CHECK_STEP
        plus, _ = loss_and_gradient(weights, features, target)
        weights[idx] = saved - GRADIENT_CHECK_STEP
        minus, _ = loss_and_gradient(weights, features, target)
        weights[idx] = saved
        numeric[idx] = (plus - minus) / (2 * GRADIENT_CHECK_STEP)

    scale = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-4)
    return float(np.max(np.abs(analytic - numeric) / scale))
