"""
Synthetic Corpus Preparation Script

Generates kinematic trajectory corpora for building trajectory sets and
training the set classifier. Every record starts from a random world-frame
state, follows a control profile drawn from the control grid (optionally
switching to a second profile halfway through), and receives Gaussian
position noise.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from covertraj.config import get_settings
from covertraj.dynamics import (
    ControlGrid,
    ControlProfile,
    IntegrationConfig,
    VehicleParams,
    integrate,
    integrate_piecewise,
)
from covertraj.errors import InvalidRange
from covertraj.models.trajectory import AgentState
from covertraj.utils.io import CorpusHeader, CorpusRecord, SeedStateModel, read_corpus, write_corpus

logger = logging.getLogger(__name__)

POSITION_RANGE = (-100.0, 100.0)
DEFAULT_SPEED_RANGE = (0.0, 15.0)
SAMPLE_CORPUS_NAME = "sample_corpus.jsonl"


def _check_ranges(count, horizon_s, dt, speed_range, noise_std, piecewise_prob, profile_jitter):
    if count < 1:
        raise InvalidRange(f"count must be at least 1, got {count}")
    if not (dt > 0 and horizon_s > 0) or round(horizon_s / dt) < 1:
        raise InvalidRange(f"horizon {horizon_s} s at dt {dt} s gives no samples")
    lo, hi = speed_range
    if not (0 <= lo <= hi and math.isfinite(hi)):
        raise InvalidRange(f"speed range must satisfy 0 <= lo <= hi, got {speed_range}")
    if noise_std < 0 or profile_jitter < 0:
        raise InvalidRange("noise_std and profile_jitter must be non-negative")
    if not 0.0 <= piecewise_prob <= 1.0:
        raise InvalidRange(f"piecewise_prob must be in [0, 1], got {piecewise_prob}")


def gen_corpus(
    count: int,
    horizon_s: float = 6.0,
    dt: float = 0.5,
    speed_range: Tuple[float, float] = DEFAULT_SPEED_RANGE,
    noise_std: float = 0.0,
    rng_seed: int = 0,
    grid: Optional[ControlGrid] = None,
    piecewise_prob: float = 0.0,
    profile_jitter: float = 0.0,
    profile: Optional[Tuple[float, float]] = None,
    params: Optional[VehicleParams] = None,
    substeps: int = 10,
) -> Tuple[CorpusHeader, List[CorpusRecord]]:
    """
    Sample a synthetic corpus

    Args:
        count: Number of records
        horizon_s: Future length in seconds
        dt: Sampling interval in seconds
        speed_range: Uniform range of initial speeds (m/s)
        noise_std: Std of Gaussian noise added to every position (m)
        rng_seed: Seed of the single random stream
        grid: Profiles are drawn uniformly from this grid
        piecewise_prob: Probability that a record switches to a second
            profile at a random intermediate step
        profile_jitter: Std of Gaussian noise added to drawn profiles
        profile: Force every record to this (a_lat, a_lon) profile
        params: Vehicle parameters
        substeps: Integration substeps per sample

    Returns:
        Header and records; futures and seed states are in the world frame
    """
    _check_ranges(count, horizon_s, dt, speed_range, noise_std, piecewise_prob, profile_jitter)
    grid = grid or ControlGrid()
    params = params or VehicleParams()
    cfg = IntegrationConfig(dt=dt, substeps=substeps, horizon_steps=int(round(horizon_s / dt)))
    candidates = grid.profiles()
    rng = np.random.Generator(np.random.PCG64(rng_seed))

    def draw_profile() -> ControlProfile:
        if profile is not None:
            return ControlProfile(*profile)
        base = candidates[int(rng.integers(len(candidates)))]
        if profile_jitter > 0:
            return ControlProfile(
                base.a_lat + rng.normal(0.0, profile_jitter),
                base.a_lon + rng.normal(0.0, profile_jitter),
            )
        return base

    records: List[CorpusRecord] = []
    for i in range(count):
        x, y = rng.uniform(*POSITION_RANGE, size=2)
        heading = rng.uniform(-math.pi, math.pi)
        speed = rng.uniform(*speed_range)
        first = draw_profile()
        seed = AgentState(
            x=float(x), y=float(y), heading=float(heading), speed=float(speed),
            accel=first.a_lon,
            yaw_rate=speed * first.a_lat / max(speed, 1.0) ** 2,
        )

        if cfg.horizon_steps > 1 and piecewise_prob > 0 and rng.random() < piecewise_prob:
            second = draw_profile()
            switch = int(rng.integers(1, cfg.horizon_steps))
            future = integrate_piecewise(seed, first, second, switch, params, cfg).points
        else:
            future = integrate(seed, first, params, cfg).points
        if noise_std > 0:
            future = future + rng.normal(0.0, noise_std, size=future.shape)

        records.append(CorpusRecord(
            id=i,
            dt=dt,
            seed_state=SeedStateModel.from_state(seed),
            future=[(float(px), float(py)) for px, py in future],
        ))

    header = CorpusHeader(
        horizon_steps=cfg.horizon_steps,
        dt=dt,
        meta={
            "generator": "kinematic",
            "seed": rng_seed,
            "noise_std": noise_std,
            "piecewise_prob": piecewise_prob,
            "wheelbase_b": params.wheelbase_b,
            "substeps": substeps,
        },
    )
    logger.info("Generated %d records (N=%d, dt=%g)", count, cfg.horizon_steps, dt)
    return header, records


def _raw_dir() -> Path:
    return get_settings().data_dir / "raw"


def create_sample_corpus(
    count: int = 2000, rng_seed: int = 42, noise_std: float = 0.0, output_path: Optional[Path] = None
) -> Path:
    """Generate the default corpus (6 s at 2 Hz) under data/raw"""
    settings = get_settings()
    output_path = Path(output_path) if output_path else _raw_dir() / SAMPLE_CORPUS_NAME
    header, records = gen_corpus(
        count,
        horizon_s=settings.horizon_s,
        dt=settings.dt,
        noise_std=noise_std,
        rng_seed=rng_seed,
        params=VehicleParams(settings.wheelbase),
        substeps=settings.substeps,
    )
    write_corpus(output_path, header, records)

    print(f"✅ Sample corpus created: {output_path}")
    print(f"   Records: {len(records)}")
    print(f"   Horizon: {header.horizon_steps} steps at dt={header.dt}s")
    return output_path


def load_corpus(filepath: Optional[Path] = None):
    """Load a corpus, generating the sample corpus first if it is missing"""
    filepath = Path(filepath) if filepath else _raw_dir() / SAMPLE_CORPUS_NAME
    if not filepath.exists():
        print(f"Corpus not found at {filepath}")
        print("Creating sample corpus...")
        filepath = create_sample_corpus(output_path=filepath)

    corpus = read_corpus(filepath)
    print(f"✅ Loaded corpus: {filepath}")
    print(f"   Trajectories: {len(corpus)}")
    return corpus


if __name__ == "__main__":
    logging.basicConfig(level=get_settings().log_level)
    create_sample_corpus()
