"""
Self-Check Oracles

Quick end-to-end checks of the cover, rollout and classifier code against
independent oracles. Each check returns a list of violation messages.
"""

import logging
import math
from typing import Callable, Dict, List

import numpy as np

from covertraj.coverset import CoverConfig, brute_force_cover, greedy_cover, verify_cover
from covertraj.dynamics import ControlProfile, IntegrationConfig, VehicleParams, integrate
from covertraj.models.classifier import SoftmaxModel, gradient_check
from covertraj.models.trajectory import AgentState, Trajectory, TrajectoryCorpus

logger = logging.getLogger(__name__)

CIRCLE_TOLERANCE = 0.05
GRADIENT_TOLERANCE = 1e-5


def _random_corpus(rng: np.random.Generator, n: int, steps: int = 4) -> TrajectoryCorpus:
    # random walks with unit-scale increments give covers of varied size at eps ~ 1-3
    steps_xy = rng.normal(0.0, 1.0, size=(n, steps, 2))
    points = np.cumsum(steps_xy, axis=1)
    return TrajectoryCorpus(items=tuple(Trajectory(points=p, dt=0.5) for p in points))


def check_greedy_bound(rng_seed: int = 0, instances: int = 100, max_n: int = 12) -> List[str]:
    """Greedy size is at most max(1, ceil(ln n)) times the exhaustive optimum"""
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    violations = []
    for trial in range(instances):
        n = int(rng.integers(1, max_n + 1))
        corpus = _random_corpus(rng, n)
        config = CoverConfig(epsilon=float(rng.uniform(0.5, 3.0)))
        greedy = greedy_cover(corpus, config)
        optimum = brute_force_cover(corpus, config)
        bound = max(1, math.ceil(math.log(n))) * len(optimum)
        if len(greedy) > bound:
            violations.append(f"greedy bound: trial {trial} n={n} greedy={len(greedy)} bound={bound}")
        if not verify_cover(greedy, corpus, config):
            violations.append(f"greedy cover incomplete on trial {trial}")
    return violations


def circle_deviation(speed: float, a_lat: float, cfg: IntegrationConfig, params: VehicleParams) -> float:
    """Largest radial deviation of a constant-a_lat rollout from the circle v^2 / a_lat"""
    radius = speed * speed / abs(a_lat)
    traj = integrate(AgentState(speed=speed), ControlProfile(a_lat, 0.0), params, cfg)
    # heading +y at the origin: left turns circle around (-R, 0)
    center = np.array([-math.copysign(radius, a_lat), 0.0])
    return float(np.max(np.abs(np.linalg.norm(traj.points - center, axis=1) - radius)))


def check_circle(substeps: int = 10) -> List[str]:
    cfg = IntegrationConfig(dt=0.5, substeps=substeps, horizon_steps=12)
    params = VehicleParams()
    violations = []
    for speed, a_lat in ((10.0, 2.0), (8.0, -4.0), (12.0, 6.0)):
        deviation = circle_deviation(speed, a_lat, cfg, params)
        if deviation > CIRCLE_TOLERANCE:
            violations.append(f"circle: v={speed} a_lat={a_lat} deviation {deviation:.4f} m")
    return violations


def check_gradients(rng_seed: int = 0, draws: int = 100) -> List[str]:
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    violations = []
    for draw in range(draws):
        modes = int(rng.integers(2, 8))
        model = SoftmaxModel(weights=rng.normal(size=(modes, 4)))
        features = rng.normal(size=4)
        target = int(rng.integers(modes))
        error = gradient_check(model, (features, target))
        if error > GRADIENT_TOLERANCE:
            violations.append(f"gradient: draw {draw} relative error {error:.2e}")
    return violations


CHECKS: Dict[str, Callable[[], List[str]]] = {
    "greedy-vs-brute-force": check_greedy_bound,
    "circle-arc": check_circle,
    "gradient-check": check_gradients,
}


def run_selfcheck(rng_seed: int = 0) -> Dict[str, List[str]]:
    results = {}
    for name, check in CHECKS.items():
        kwargs = {"rng_seed": rng_seed} if name != "circle-arc" else {}
        results[name] = check(**kwargs)
        level = logging.WARNING if results[name] else logging.INFO
        logger.log(level, "%s: %d violations", name, len(results[name]))
    return results
