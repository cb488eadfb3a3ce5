"""
Predictors

Callables mapping an evaluation instance to a PredictionResult, used by the
CLI evaluation commands and the prediction service. Sets with control
profiles are re-rolled from each instance's own state before scoring.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from covertraj.baselines import PhysicsModelKind, physics_oracle, physics_rollout, single_mode_set
from covertraj.config import get_settings
from covertraj.dynamics import IntegrationConfig, VehicleParams, instantiate_set, rollout_settings
from covertraj.metrics import EvalInstance, PredictionResult, one_hot_prediction
from covertraj.models.classifier import SoftmaxModel, predict
from covertraj.models.trajectory import AgentState, DistanceKind, TrajectorySet, closest_index
from covertraj.utils.features import StateFeatureExtractor
from covertraj.utils.io import read_set

logger = logging.getLogger(__name__)


class SetPredictor:
    """Softmax classifier over a (possibly per-instance) trajectory set"""

    def __init__(
        self,
        trajectory_set: TrajectorySet,
        model: SoftmaxModel,
        params: Optional[VehicleParams] = None,
        cfg: Optional[IntegrationConfig] = None,
    ):
        model.bind(trajectory_set)
        self.trajectory_set = trajectory_set
        self.model = model
        self.params, self.cfg = rollout_settings(trajectory_set, None, params, cfg)
        self.feature_extractor = StateFeatureExtractor(model.feature_names)

    @classmethod
    def from_files(cls, set_path: Path, model_path: Path) -> "SetPredictor":
        trajectory_set = read_set(set_path)
        model = SoftmaxModel.load_model(model_path, trajectory_set)
        logger.info("Loaded %d-mode set from %s and model from %s", len(trajectory_set), set_path, model_path)
        return cls(trajectory_set, model)

    def instance_set(self, state: AgentState) -> TrajectorySet:
        return instantiate_set(self.trajectory_set, state, self.params, self.cfg)

    def predict_state(self, state: AgentState) -> PredictionResult:
        features = self.feature_extractor.to_vector(state)
        return predict(self.model, features, self.instance_set(state))

    def __call__(self, instance: EvalInstance) -> PredictionResult:
        return self.predict_state(instance.state)

    def describe(self, state: AgentState, top_k: int = 5) -> Dict[str, Any]:
        """Top-k modes with probabilities, for the HTTP surface"""
        result = self.predict_state(state)
        top = result.top_k(min(top_k, result.n_modes))
        return {
            "modes": [
                {
                    "index": int(i),
                    "probability": float(result.probs[i]),
                    "points": result.trajectory_set.modes[i].points.tolist(),
                }
                for i in top
            ],
            "most_likely": result.most_likely,
            "set_size": result.n_modes,
        }


class OraclePredictor:
    """Upper-bound predictor: probability 1 on the mode closest to the truth"""

    def __init__(
        self,
        trajectory_set: TrajectorySet,
        kind: Optional[DistanceKind] = None,
        params: Optional[VehicleParams] = None,
        cfg: Optional[IntegrationConfig] = None,
    ):
        self.trajectory_set = trajectory_set
        # the set's own cover distance keeps its epsilon guarantee
        self.kind = DistanceKind(kind or trajectory_set.kind or DistanceKind.AVG_L2)
        self.params, self.cfg = rollout_settings(trajectory_set, None, params, cfg)

    def __call__(self, instance: EvalInstance) -> PredictionResult:
        inst_set = instantiate_set(self.trajectory_set, instance.state, self.params, self.cfg)
        return one_hot_prediction(inst_set, closest_index(instance.truth, inst_set, self.kind))


class PhysicsPredictor:
    """Single-mode prediction from one physics model"""

    def __init__(self, kind: PhysicsModelKind, cfg: IntegrationConfig):
        self.kind = PhysicsModelKind(kind)
        self.cfg = cfg

    def __call__(self, instance: EvalInstance) -> PredictionResult:
        rollout = physics_rollout(instance.state, self.kind, self.cfg)
        return PredictionResult(trajectory_set=single_mode_set(rollout), probs=np.ones(1))


class PhysicsOraclePredictor:
    """Single-mode prediction from the best physics model for each instance"""

    def __init__(self, cfg: IntegrationConfig):
        self.cfg = cfg

    def __call__(self, instance: EvalInstance) -> PredictionResult:
        kind, _ = physics_oracle(instance.state, instance.truth, self.cfg)
        rollout = physics_rollout(instance.state, kind, self.cfg)
        return PredictionResult(trajectory_set=single_mode_set(rollout), probs=np.ones(1))


# Global predictor instance (loaded once at startup)
_predictor_instance: Optional[SetPredictor] = None


def get_predictor() -> SetPredictor:
    """Get or create the global predictor from the configured set and model files"""
    global _predictor_instance
    if _predictor_instance is None:
        settings = get_settings()
        _predictor_instance = SetPredictor.from_files(
            settings.resolved_set_path(), settings.resolved_model_path()
        )
    return _predictor_instance


def reset_predictor():
    global _predictor_instance
    _predictor_instance = None
