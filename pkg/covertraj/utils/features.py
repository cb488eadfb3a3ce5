"""
Agent State Feature Extraction

Turns an agent state into the fixed-length feature vector consumed by the
softmax classifier: speed, longitudinal acceleration, yaw rate and a constant
bias term.
"""

from typing import Dict, List, Sequence

import numpy as np

from covertraj.models.trajectory import AgentState


class StateFeatureExtractor:
    """Extract classifier features from agent states"""

    FEATURE_NAMES = ("speed", "accel", "yaw_rate", "bias")

    def __init__(self, feature_names: Sequence[str] = FEATURE_NAMES, bias: float = 1.0):
        unknown = [name for name in feature_names if name not in self.FEATURE_NAMES]
        if unknown:
            raise ValueError(f"unknown features: {unknown}")
        self.feature_names = list(feature_names)
        self.bias = float(bias)

    def extract_features(self, state: AgentState) -> Dict[str, float]:
        """
        Extract all features from a state

        Args:
            state: Agent state at prediction time

        Returns:
            Dictionary of feature name to value, in model order
        """
        available = {
            "speed": float(state.speed),
            "accel": float(state.accel),
            "yaw_rate": float(state.yaw_rate),
            "bias": self.bias,
        }
        return {name: available[name] for name in self.feature_names}

    def to_vector(self, state: AgentState) -> np.ndarray:
        return np.array(list(self.extract_features(state).values()), dtype=np.float64)

    def to_matrix(self, states: Sequence[AgentState]) -> np.ndarray:
        """Feature matrix of shape (len(states), feature_dim)"""
        if not states:
            return np.zeros((0, len(self.feature_names)))
        return np.stack([self.to_vector(s) for s in states])

    def get_feature_names(self) -> List[str]:
        return list(self.feature_names)
