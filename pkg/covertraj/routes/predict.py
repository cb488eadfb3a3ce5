"""
API Routes for Trajectory Prediction

Inputs are agent states in any frame; returned trajectories are in the
agent frame of that state (origin at the agent, heading along +y).
"""

import time
from typing import Dict, List, Optional, Tuple

from fastapi import APIRouter, HTTPException
from pydantic import BaseModel, Field

from covertraj.baselines import PhysicsModelKind, physics_rollouts
from covertraj.dynamics import IntegrationConfig
from covertraj.errors import CoverTrajError
from covertraj.models.predictor import get_predictor
from covertraj.models.trajectory import AgentState

router = APIRouter()


class StateRequest(BaseModel):
    """Agent state at prediction time"""
    x: float = 0.0
    y: float = 0.0
    heading: float = 1.5707963267948966
    speed: float = Field(ge=0)
    accel: float = 0.0
    yaw_rate: float = 0.0

    def to_state(self) -> AgentState:
        return AgentState(**self.model_dump(include=set(StateRequest.model_fields)))


class PredictRequest(StateRequest):
    top_k: int = Field(default=5, ge=1)


class ModeResponse(BaseModel):
    index: int
    probability: float
    points: List[Tuple[float, float]]


class PredictResponse(BaseModel):
    modes: List[ModeResponse]
    most_likely: int
    set_size: int
    response_time_ms: int


class BaselinesResponse(BaseModel):
    rollouts: Dict[str, List[Tuple[float, float]]]
    default: str
    horizon_steps: int
    dt: float


def _load_predictor():
    try:
        return get_predictor()
    except (FileNotFoundError, CoverTrajError) as e:
        raise HTTPException(status_code=503, detail=f"Predictor unavailable: {e}")


@router.post("/predict", response_model=PredictResponse)
async def predict_trajectories(request: PredictRequest):
    """Top-k modes of the trajectory set with their probabilities"""
    start_time = time.time()
    predictor = _load_predictor()
    try:
        result = predictor.describe(request.to_state(), top_k=request.top_k)
    except CoverTrajError as e:
        raise HTTPException(status_code=422, detail=str(e))
    result["response_time_ms"] = int((time.time() - start_time) * 1000)
    return PredictResponse(**result)


@router.post("/baselines", response_model=BaselinesResponse)
async def baseline_rollouts(request: StateRequest, horizon_steps: Optional[int] = None):
    """The four physics extrapolations; constant velocity and yaw is the default"""
    cfg = IntegrationConfig.from_settings()
    if horizon_steps is not None:
        if horizon_steps < 1:
            raise HTTPException(status_code=422, detail="horizon_steps must be at least 1")
        cfg = IntegrationConfig(dt=cfg.dt, substeps=cfg.substeps, horizon_steps=horizon_steps)
    try:
        rollouts = physics_rollouts(request.to_state(), cfg)
    except CoverTrajError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return BaselinesResponse(
        rollouts={kind.value: traj.points.tolist() for kind, traj in rollouts.items()},
        default=PhysicsModelKind.CONST_VEL_YAW.value,
        horizon_steps=cfg.horizon_steps,
        dt=cfg.dt,
    )
