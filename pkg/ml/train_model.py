"""
Set Classifier Training Script

Trains the softmax classifier over a trajectory set on a corpus, with a
hold-out split for validation accuracy and top-5 accuracy.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.metrics import accuracy_score, top_k_accuracy_score
from sklearn.model_selection import train_test_split
from tqdm import tqdm

from covertraj.config import get_settings
from covertraj.dynamics import instantiate_set, rollout_settings
from covertraj.models.classifier import DEFAULT_LR, SoftmaxModel, label, train
from covertraj.models.trajectory import DistanceKind, TrajectoryCorpus, TrajectorySet
from covertraj.utils.features import StateFeatureExtractor
from covertraj.utils.io import read_set

from ml.prepare_data import load_corpus

logger = logging.getLogger(__name__)


def corpus_labels(
    corpus: TrajectoryCorpus, trajectory_set: TrajectorySet, kind: DistanceKind = DistanceKind.AVG_L2
) -> np.ndarray:
    """
    Closest-mode label of every corpus sample

    Sets with control profiles are expanded from each sample's own seed
    state first, so label k always means mode k of the instance's set.
    """
    if not trajectory_set.n_dynamic:
        return np.array([label(t, trajectory_set, kind) for t in corpus.items])
    params, cfg = rollout_settings(trajectory_set, corpus)
    return np.array([
        label(truth, instantiate_set(trajectory_set, seed, params, cfg), kind)
        for truth, seed in zip(corpus.items, corpus.seed_states)
    ])


class SetClassifierTrainer:
    """Trajectory-set classifier trainer"""

    def __init__(
        self,
        trajectory_set: TrajectorySet,
        epochs: int = 50,
        lr: float = DEFAULT_LR,
        rng_seed: int = 0,
        label_kind: DistanceKind = DistanceKind.AVG_L2,
        show_progress: bool = True,
    ):
        self.trajectory_set = trajectory_set
        self.epochs = epochs
        self.lr = lr
        self.rng_seed = rng_seed
        self.label_kind = DistanceKind(label_kind)
        self.show_progress = show_progress
        self.feature_extractor = StateFeatureExtractor()
        self.model: Optional[SoftmaxModel] = None

    def prepare_features(self, corpus: TrajectoryCorpus) -> np.ndarray:
        return self.feature_extractor.to_matrix(corpus.seed_states or ())

    def fit(self, corpus: TrajectoryCorpus, labels: Optional[Sequence[int]] = None) -> SoftmaxModel:
        features = self.prepare_features(corpus)
        if labels is None:
            labels = corpus_labels(corpus, self.trajectory_set, self.label_kind)
        progress = None
        if self.show_progress:
            progress = lambda it: tqdm(it, desc="epochs", leave=False, disable=None)  # noqa: E731
        self.model = train(
            list(zip(features, corpus.items)),
            self.trajectory_set,
            epochs=self.epochs,
            lr=self.lr,
            rng_seed=self.rng_seed,
            label_kind=self.label_kind,
            labels=labels,
            progress=progress,
        )
        return self.model

    def evaluate(self, corpus: TrajectoryCorpus, labels: Optional[Sequence[int]] = None) -> Dict[str, float]:
        """Accuracy and top-5 accuracy of the closest-mode labels"""
        if self.model is None:
            raise RuntimeError("model has not been trained")
        features = self.prepare_features(corpus)
        if labels is None:
            labels = corpus_labels(corpus, self.trajectory_set, self.label_kind)
        probs = self.model.predict_proba(features)
        all_modes = np.arange(self.model.n_modes)
        top_k = min(5, self.model.n_modes)
        metrics = {
            "accuracy": float(accuracy_score(labels, np.argmax(probs, axis=1))),
            f"top{top_k}_accuracy": float(
                top_k_accuracy_score(labels, probs, k=top_k, labels=all_modes)
            ) if self.model.n_modes > 2 else float(accuracy_score(labels, np.argmax(probs, axis=1))),
            "final_loss": float(self.model.loss_curve[-1]),
        }
        return metrics


def split_corpus(corpus: TrajectoryCorpus, test_size: float, rng_seed: int):
    indices = np.arange(len(corpus))
    train_idx, test_idx = train_test_split(indices, test_size=test_size, random_state=rng_seed)
    return corpus.subset(np.sort(train_idx)), corpus.subset(np.sort(test_idx))


def main(corpus_path: Optional[Path] = None, set_path: Optional[Path] = None, epochs: int = 50):
    """Main training pipeline"""
    settings = get_settings()
    logging.basicConfig(level=settings.log_level)
    print("=" * 70)
    print("TRAJECTORY SET CLASSIFIER TRAINING")
    print("=" * 70)

    print("\n📂 Step 1: Loading corpus and trajectory set...")
    corpus = load_corpus(corpus_path)
    trajectory_set = read_set(set_path or settings.resolved_set_path())
    print(f"   Set: {len(trajectory_set)} modes ({trajectory_set.provenance.value})")

    print("\n✂️  Step 2: Splitting data...")
    train_corpus, test_corpus = split_corpus(corpus, test_size=0.2, rng_seed=42)
    print(f"   Training set: {len(train_corpus)} samples")
    print(f"   Test set: {len(test_corpus)} samples")

    print("\n🚀 Step 3: Training...")
    trainer = SetClassifierTrainer(trajectory_set, epochs=epochs)
    model = trainer.fit(train_corpus)

    print("\n📊 Step 4: Evaluating...")
    results: List[str] = []
    for name, part in (("train", train_corpus), ("test", test_corpus)):
        metrics = trainer.evaluate(part)
        results.append(f"   {name:5s} " + "  ".join(f"{k}={v:.4f}" for k, v in metrics.items()))
    print("\n".join(results))

    model_path = settings.resolved_model_path()
    model.save_model(model_path)
    print(f"\n✅ Model saved to: {model_path}")


if __name__ == "__main__":
    main()
