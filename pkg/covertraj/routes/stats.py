"""
API Routes for Set Information and Health
"""

from datetime import datetime, timezone

from fastapi import APIRouter, HTTPException

from covertraj.errors import CoverTrajError
from covertraj.models.predictor import get_predictor

router = APIRouter()


@router.get("/set")
async def set_summary():
    """Summary and fingerprint of the served trajectory set"""
    try:
        predictor = get_predictor()
    except (FileNotFoundError, CoverTrajError) as e:
        raise HTTPException(status_code=503, detail=f"Predictor unavailable: {e}")
    trajectory_set = predictor.trajectory_set
    return {
        "provenance": trajectory_set.provenance.value,
        "size": len(trajectory_set),
        "dynamic_modes": trajectory_set.n_dynamic,
        "fixed_modes": len(trajectory_set.fixed_modes),
        "epsilon": trajectory_set.epsilon,
        "distance_kind": trajectory_set.kind.value if trajectory_set.kind else None,
        "horizon_steps": trajectory_set.n_steps,
        "dt": trajectory_set.dt,
        "fingerprint": trajectory_set.fingerprint(),
    }


@router.get("/health")
async def health_check():
    """System health status"""
    try:
        get_predictor()
        model = "loaded"
    except (FileNotFoundError, CoverTrajError):
        model = "missing"
    return {
        "status": "healthy",
        "timestamp": datetime.now(timezone.utc),
        "model": model,
    }
