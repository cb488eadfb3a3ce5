"""
FastAPI Main Application

Serves top-k trajectory predictions for an agent state from the configured
trajectory set and classifier.
"""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from covertraj import __version__
from covertraj.config import get_settings
from covertraj.models.predictor import get_predictor
from covertraj.routes import predict, stats

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Load the set and model once at startup"""
    settings = get_settings()
    print("\n" + "=" * 70)
    print("COVERTRAJ - TRAJECTORY SET PREDICTION SERVICE")
    print("=" * 70)
    print("\n📦 Loading trajectory set and model...")
    try:
        predictor = get_predictor()
        print(f"✅ {len(predictor.trajectory_set)} modes from {settings.resolved_set_path()}")
    except (FileNotFoundError, ValueError) as e:
        print(f"❌ Failed to load predictor: {e}")
        print("   Build a set and train a model first: covertraj build-set / covertraj train")
    print("=" * 70 + "\n")

    yield

    print("\n🛑 Shutting down...")


app = FastAPI(
    title="covertraj API",
    description="Trajectory-set classification for multimodal motion prediction",
    version=__version__,
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(predict.router, prefix="/api", tags=["Prediction"])
app.include_router(stats.router, prefix="/api", tags=["Set"])


@app.get("/api")
async def root():
    """API root endpoint"""
    return {
        "name": "covertraj API",
        "version": __version__,
        "endpoints": {
            "predict": "/api/predict",
            "baselines": "/api/baselines",
            "set": "/api/set",
            "health": "/api/health",
            "docs": "/docs",
        },
    }
