import math

import numpy as np
import pytest

from covertraj.config import get_settings
from covertraj.dynamics import ControlProfile, IntegrationConfig, VehicleParams, integrate
from covertraj.models.trajectory import AgentState, Trajectory, TrajectoryCorpus


def make_traj(points, dt=0.5):
    return Trajectory(points=np.asarray(points, dtype=float), dt=dt)


def random_corpus(rng, n, steps=4, scale=1.0, dt=0.5):
    points = np.cumsum(rng.normal(0.0, scale, size=(n, steps, 2)), axis=1)
    return TrajectoryCorpus(items=tuple(Trajectory(points=p, dt=dt) for p in points))


def kinematic_corpus(rng, n, cfg=None, params=None, speeds=(2.0, 14.0)):
    """Noise-free rollouts of grid-like profiles, in the agent frame of their seeds"""
    cfg = cfg or IntegrationConfig()
    params = params or VehicleParams()
    items, seeds = [], []
    for _ in range(n):
        speed = float(rng.uniform(*speeds))
        profile = ControlProfile(float(rng.choice([-2.0, 0.0, 2.0])), float(rng.choice([-1.0, 0.0, 1.0])))
        seed = AgentState(
            speed=speed,
            accel=profile.a_lon,
            yaw_rate=speed * profile.a_lat / max(speed, 1.0) ** 2,
        )
        items.append(integrate(seed, profile, params, cfg))
        seeds.append(seed)
    return TrajectoryCorpus(items=tuple(items), seed_states=tuple(seeds))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def cfg():
    return IntegrationConfig(dt=0.5, substeps=10, horizon_steps=12)


@pytest.fixture
def params():
    return VehicleParams(wheelbase_b=3.0)


@pytest.fixture
def straight_state():
    return AgentState(x=0.0, y=0.0, heading=math.pi / 2, speed=5.0)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point the data directory at a temporary path for every test"""
    monkeypatch.setenv("COVERTRAJ_DATA_DIR", str(tmp_path / "data"))
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()
