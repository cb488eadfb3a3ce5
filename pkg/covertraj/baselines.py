"""
Physics Baselines

Four classical extrapolation models driven by the track's current speed,
acceleration and yaw rate, and the per-instance oracle that picks the best
of them under average point-wise distance.
"""

from enum import Enum
from typing import Dict, Tuple

import numpy as np

from covertraj.dynamics import IntegrationConfig, rollout_arrays
from covertraj.errors import LengthMismatch
from covertraj.models.trajectory import (
    AgentState,
    DistanceKind,
    Provenance,
    Trajectory,
    TrajectorySet,
    distance,
)


class PhysicsModelKind(str, Enum):
    CONST_VEL_YAW = "const_vel_yaw"
    CONST_VEL_YAW_RATE = "const_vel_yaw_rate"
    CONST_ACCEL_YAW = "const_accel_yaw"
    CONST_ACCEL_YAW_RATE = "const_accel_yaw_rate"

    @property
    def uses_accel(self) -> bool:
        return self in (PhysicsModelKind.CONST_ACCEL_YAW, PhysicsModelKind.CONST_ACCEL_YAW_RATE)

    @property
    def uses_yaw_rate(self) -> bool:
        return self in (PhysicsModelKind.CONST_VEL_YAW_RATE, PhysicsModelKind.CONST_ACCEL_YAW_RATE)


def physics_rollout(s0: AgentState, kind: PhysicsModelKind, cfg: IntegrationConfig) -> Trajectory:
    """
    Extrapolate ``s0`` with one physics model, in the agent frame

    Constant-velocity models hold the speed; constant-acceleration models
    apply s0.accel with speed clamped at 0. Yaw-rate models turn at the
    measured s0.yaw_rate, the others keep the heading.
    """
    kind = PhysicsModelKind(kind)
    origin = s0.at_origin()
    accel = origin.accel if kind.uses_accel else 0.0
    yaw_rate = origin.yaw_rate if kind.uses_yaw_rate else 0.0

    points = rollout_arrays(
        x=np.array([origin.x]),
        y=np.array([origin.y]),
        theta=np.array([origin.heading]),
        v=np.array([origin.speed]),
        accel=np.array([accel]),
        yaw_rate_fn=lambda v: np.full_like(v, yaw_rate),
        cfg=cfg,
    )[0]
    return Trajectory(points=points, dt=cfg.dt)


def physics_rollouts(s0: AgentState, cfg: IntegrationConfig) -> Dict[PhysicsModelKind, Trajectory]:
    return {kind: physics_rollout(s0, kind, cfg) for kind in PhysicsModelKind}


def physics_oracle(
    s0: AgentState, ground_truth: Trajectory, cfg: IntegrationConfig
) -> Tuple[PhysicsModelKind, float]:
    """
    Best of the four physics models against the ground truth

    Args:
        s0: Track state at prediction time
        ground_truth: Future positions in the agent frame of ``s0``
        cfg: Integration settings; horizon must match the ground truth

    Returns:
        (best model, its average point-wise distance); ties go to the first
        model in enumeration order
    """
    if ground_truth.n_steps != cfg.horizon_steps:
        raise LengthMismatch(
            f"ground truth has {ground_truth.n_steps} steps, config expects {cfg.horizon_steps}"
        )
    best_kind, best_error = None, float("inf")
    for kind, rollout in physics_rollouts(s0, cfg).items():
        error = distance(rollout, ground_truth, DistanceKind.AVG_L2)
        if error < best_error:
            best_kind, best_error = kind, error
    return best_kind, best_error


def single_mode_set(trajectory: Trajectory) -> TrajectorySet:
    """Wrap one extrapolated trajectory as a one-mode set"""
    return TrajectorySet(modes=(trajectory,), provenance=Provenance.DYNAMIC)
