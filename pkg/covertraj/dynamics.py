"""
Kinematic Rollouts and Dynamic Trajectory Sets

Vehicle model (positions x, y, heading theta, speed v; wheelbase b):

    x' = v cos(theta)    y' = v sin(theta)
    theta' = v / b * tan(u_steer)    v' = u_accel

Control profiles hold a constant lateral and longitudinal acceleration over
the horizon. The steering angle that realizes the lateral acceleration is
recomputed at every substep from the current speed.

Trajectories produced here are expressed in the agent frame of the initial
state (origin at its position, heading along +y) unless stated otherwise.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from covertraj.config import get_settings
from covertraj.coverset import CoverConfig, CoverageReport, greedy_cover, report_from_residuals
from covertraj.errors import EmptySet, InvalidState, MissingSeedStates
from covertraj.models.trajectory import (
    AgentState,
    DistanceKind,
    Provenance,
    Trajectory,
    TrajectoryCorpus,
    TrajectorySet,
    check_compatible,
    pairwise_distances,
    pointwise_norms,
    reduce_norms,
)

logger = logging.getLogger(__name__)

DEFAULT_LAT_VALUES = (-6.0, -4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 6.0)
DEFAULT_LON_VALUES = (-4.0, -2.0, -1.0, 0.0, 1.0, 2.0)

# Rollouts closer than this (MaxL2, meters) count as the same mode.
DEDUP_TOLERANCE = 1e-6

# Below this speed the lateral-acceleration conversion uses 1 m/s instead.
MIN_CONVERSION_SPEED = 1.0


@dataclass(frozen=True)
class VehicleParams:
    wheelbase_b: float = 3.0

    def __post_init__(self):
        if not (self.wheelbase_b > 0 and math.isfinite(self.wheelbase_b)):
            raise InvalidState(f"wheelbase must be positive, got {self.wheelbase_b}")


@dataclass(frozen=True)
class ControlProfile:
    """Constant lateral and longitudinal acceleration (m/s^2)"""

    a_lat: float
    a_lon: float

    def __post_init__(self):
        if not (math.isfinite(self.a_lat) and math.isfinite(self.a_lon)):
            raise InvalidState(f"control profile must be finite, got ({self.a_lat}, {self.a_lon})")

    def as_tuple(self) -> Tuple[float, float]:
        return (float(self.a_lat), float(self.a_lon))


@dataclass(frozen=True)
class ControlGrid:
    """Cartesian grid of candidate control profiles"""

    lat_values: Tuple[float, ...] = DEFAULT_LAT_VALUES
    lon_values: Tuple[float, ...] = DEFAULT_LON_VALUES

    def __post_init__(self):
        lat = np.asarray(self.lat_values, dtype=np.float64)
        lon = np.asarray(self.lon_values, dtype=np.float64)
        for name, values in (("lat_values", lat), ("lon_values", lon)):
            if values.size == 0:
                raise InvalidState(f"{name} must be non-empty")
            if not np.all(np.isfinite(values)):
                raise InvalidState(f"{name} must be finite")
            if np.any(np.diff(values) <= 0):
                raise InvalidState(f"{name} must be strictly increasing")
        if not np.allclose(lat, -lat[::-1], rtol=0.0, atol=1e-12):
            raise InvalidState("lat_values must be symmetric about 0")
        object.__setattr__(self, "lat_values", tuple(float(v) for v in lat))
        object.__setattr__(self, "lon_values", tuple(float(v) for v in lon))

    def profiles(self) -> Tuple[ControlProfile, ...]:
        """All (a_lat, a_lon) pairs, lateral-major order"""
        return tuple(
            ControlProfile(a_lat, a_lon)
            for a_lat in self.lat_values
            for a_lon in self.lon_values
        )

    def __len__(self) -> int:
        return len(self.lat_values) * len(self.lon_values)


@dataclass(frozen=True)
class IntegrationConfig:
    """Output sampling interval, Euler substeps per sample, and horizon length"""

    dt: float = 0.5
    substeps: int = 10
    horizon_steps: int = 12

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidState(f"dt must be positive, got {self.dt}")
        if self.substeps < 1:
            raise InvalidState(f"substeps must be at least 1, got {self.substeps}")
        if self.horizon_steps < 1:
            raise InvalidState(f"horizon_steps must be at least 1, got {self.horizon_steps}")

    @classmethod
    def from_settings(cls) -> "IntegrationConfig":
        settings = get_settings()
        return cls(dt=settings.dt, substeps=settings.substeps, horizon_steps=settings.horizon_steps)

    def for_corpus(self, corpus: TrajectoryCorpus) -> "IntegrationConfig":
        """Same substeps, with dt and horizon taken from the corpus"""
        return IntegrationConfig(dt=corpus.dt, substeps=self.substeps, horizon_steps=corpus.n_steps)


def _steer(speed, a_lat, wheelbase_b: float):
    v_eff = np.maximum(speed, MIN_CONVERSION_SPEED)
    curvature = a_lat / (v_eff * v_eff)
    return np.arctan(curvature * wheelbase_b)


def lat_to_steer(state_speed: float, a_lat: float, params: VehicleParams) -> float:
    """
    Steering angle realizing a lateral acceleration at the given speed

    Uses a_lat = v^2 * kappa with kappa = tan(steer) / b, substituting
    max(v, 1) for v so the conversion stays defined near standstill.
    """
    return float(_steer(float(state_speed), float(a_lat), params.wheelbase_b))


def rollout_arrays(
    x: np.ndarray,
    y: np.ndarray,
    theta: np.ndarray,
    v: np.ndarray,
    accel: np.ndarray,
    yaw_rate_fn: Callable[[np.ndarray], np.ndarray],
    cfg: IntegrationConfig,
    return_state: bool = False,
):
    """
    Batched forward integration

    Each substep advances heading with the yaw rate evaluated at the current
    speed (explicit Euler) and moves along the mid-step heading by the exact
    distance covered under constant longitudinal acceleration. Speed is
    clamped at 0; a vehicle that would reverse stops where v reaches 0.

    Args:
        x, y, theta, v: Initial states, arrays of shape (n,)
        accel: Longitudinal acceleration per rollout, shape (n,)
        yaw_rate_fn: Maps current speeds to yaw rates
        cfg: Integration settings
        return_state: Also return the final (x, y, theta, v) arrays

    Returns:
        Positions of shape (n, horizon_steps, 2), excluding the initial position
    """
    x = np.array(x, dtype=np.float64)
    y = np.array(y, dtype=np.float64)
    theta = np.array(theta, dtype=np.float64)
    v = np.array(v, dtype=np.float64)
    accel = np.broadcast_to(np.asarray(accel, dtype=np.float64), v.shape)
    h = cfg.dt / cfg.substeps
    out = np.empty((v.shape[0], cfg.horizon_steps, 2), dtype=np.float64)

    for step in range(cfg.horizon_steps):
        for _ in range(cfg.substeps):
            omega = yaw_rate_fn(v)
            v_next = v + accel * h
            stopping = v_next < 0.0
            stop_denominator = np.where(stopping, -2.0 * accel, 1.0)
            ds = np.where(stopping, v * v / stop_denominator, 0.5 * (v + v_next) * h)
            heading_mid = theta + 0.5 * omega * h
            x = x + ds * np.cos(heading_mid)
            y = y + ds * np.sin(heading_mid)
            theta = theta + omega * h
            v = np.maximum(v_next, 0.0)
        out[:, step, 0] = x
        out[:, step, 1] = y
    if return_state:
        return out, (x, y, theta, v)
    return out


def _bicycle_rollouts(
    seeds: Sequence[AgentState],
    a_lat: np.ndarray,
    a_lon: np.ndarray,
    params: VehicleParams,
    cfg: IntegrationConfig,
    return_state: bool = False,
):
    b = params.wheelbase_b
    a_lat = np.asarray(a_lat, dtype=np.float64)

    def yaw_rate(v: np.ndarray) -> np.ndarray:
        return v / b * np.tan(_steer(v, a_lat, b))

    return rollout_arrays(
        x=np.array([s.x for s in seeds]),
        y=np.array([s.y for s in seeds]),
        theta=np.array([s.heading for s in seeds]),
        v=np.array([s.speed for s in seeds]),
        accel=a_lon,
        yaw_rate_fn=yaw_rate,
        cfg=cfg,
        return_state=return_state,
    )


def integrate(
    s0: AgentState, profile: ControlProfile, params: VehicleParams, cfg: IntegrationConfig
) -> Trajectory:
    """
    Forward-integrate a constant control profile from ``s0``

    Returns:
        Trajectory of cfg.horizon_steps points in the same frame as ``s0``
    """
    points = _bicycle_rollouts(
        [s0], np.array([profile.a_lat]), np.array([profile.a_lon]), params, cfg
    )[0]
    return Trajectory(points=points, dt=cfg.dt)


def integrate_piecewise(
    s0: AgentState,
    first: ControlProfile,
    second: ControlProfile,
    switch_step: int,
    params: VehicleParams,
    cfg: IntegrationConfig,
) -> Trajectory:
    """
    Integrate ``first`` for ``switch_step`` samples, then ``second`` for the rest

    The second segment starts from the exact state reached by the first.
    Output is in the same frame as ``s0``.
    """
    if not 0 < switch_step < cfg.horizon_steps:
        raise InvalidState(f"switch_step must be in (0, {cfg.horizon_steps}), got {switch_step}")
    head_cfg = IntegrationConfig(dt=cfg.dt, substeps=cfg.substeps, horizon_steps=switch_step)
    tail_cfg = IntegrationConfig(
        dt=cfg.dt, substeps=cfg.substeps, horizon_steps=cfg.horizon_steps - switch_step
    )
    head, (x, y, theta, v) = _bicycle_rollouts(
        [s0], np.array([first.a_lat]), np.array([first.a_lon]), params, head_cfg, return_state=True
    )
    mid = AgentState(x=float(x[0]), y=float(y[0]), heading=float(theta[0]), speed=float(v[0]))
    tail = _bicycle_rollouts(
        [mid], np.array([second.a_lat]), np.array([second.a_lon]), params, tail_cfg
    )
    return Trajectory(points=np.concatenate([head[0], tail[0]]), dt=cfg.dt)


def rollout_profiles(
    s0: AgentState,
    profiles: Sequence[Tuple[float, float]],
    params: VehicleParams,
    cfg: IntegrationConfig,
) -> np.ndarray:
    """Rollouts of several profiles from ``s0`` in its agent frame, shape (P, N, 2)"""
    prof = np.asarray(profiles, dtype=np.float64).reshape(-1, 2)
    origin = s0.at_origin()
    return _bicycle_rollouts([origin] * prof.shape[0], prof[:, 0], prof[:, 1], params, cfg)


def _dedup_order(points: np.ndarray) -> list:
    dists = pairwise_distances(points, points, DistanceKind.MAX_L2)
    kept: list = []
    for i in range(points.shape[0]):
        if not kept or dists[i, kept].min() >= DEDUP_TOLERANCE:
            kept.append(i)
    return kept


def dynamic_set(
    s0: AgentState, grid: ControlGrid, params: VehicleParams, cfg: IntegrationConfig
) -> TrajectorySet:
    """
    One rollout per grid profile from ``s0``, in the agent frame

    Rollouts within DEDUP_TOLERANCE of an earlier one are dropped together
    with their profile (for example every steering value at standstill).
    """
    profiles = [p.as_tuple() for p in grid.profiles()]
    points = rollout_profiles(s0, profiles, params, cfg)
    kept = _dedup_order(points)
    return TrajectorySet(
        modes=tuple(Trajectory(points=points[i], dt=cfg.dt) for i in kept),
        provenance=Provenance.DYNAMIC,
        profiles=tuple(profiles[i] for i in kept),
        meta=_rollout_meta(s0, params, cfg),
    )


def _rollout_meta(s0: AgentState, params: VehicleParams, cfg: IntegrationConfig) -> dict:
    return {
        "reference_state": {
            "x": s0.x, "y": s0.y, "heading": s0.heading,
            "speed": s0.speed, "accel": s0.accel, "yaw_rate": s0.yaw_rate,
        },
        "wheelbase_b": params.wheelbase_b,
        "substeps": cfg.substeps,
    }


def _require_seeds(corpus: TrajectoryCorpus, cfg: IntegrationConfig):
    corpus.require_non_empty()
    if corpus.seed_states is None:
        raise MissingSeedStates("profile covering needs an initial state for every sample")
    check_compatible(corpus.n_steps, corpus.dt, cfg.horizon_steps, cfg.dt)


def profile_distances(
    corpus: TrajectoryCorpus,
    profiles: Sequence[Tuple[float, float]],
    params: VehicleParams,
    cfg: IntegrationConfig,
    kind: DistanceKind,
) -> np.ndarray:
    """
    Distance between every sample and every profile rolled out from that sample's seed

    Corpus items are expected in the agent frame of their seed states.

    Returns:
        Array of shape (P, n)
    """
    _require_seeds(corpus, cfg)
    seeds = [s.at_origin() for s in corpus.seed_states]
    prof = np.asarray(profiles, dtype=np.float64).reshape(-1, 2)
    n = len(seeds)
    out = np.empty((prof.shape[0], n), dtype=np.float64)
    for p, (a_lat, a_lon) in enumerate(prof):
        rolled = _bicycle_rollouts(seeds, np.full(n, a_lat), np.full(n, a_lon), params, cfg)
        norms = pointwise_norms(rolled, corpus.points)
        out[p] = reduce_norms(norms, kind)
    return out


class ProfileCoverResult(NamedTuple):
    profiles: Tuple[ControlProfile, ...]
    uncovered: Tuple[int, ...]
    grid_indices: Tuple[int, ...]


def profile_cover(
    corpus: TrajectoryCorpus,
    candidate_grid: ControlGrid,
    params: VehicleParams,
    cfg: IntegrationConfig,
    config: CoverConfig,
) -> ProfileCoverResult:
    """
    Greedy cover of a corpus by control profiles

    A profile covers sample i when its rollout from seed_states[i] lies
    within epsilon of sample i. Selection stops when no remaining candidate
    covers any uncovered sample, so full coverage is not guaranteed.

    Raises:
        MissingSeedStates: if the corpus carries no initial states
    """
    candidates = candidate_grid.profiles()
    covers = profile_distances(
        corpus, [p.as_tuple() for p in candidates], params, cfg, config.kind
    ) <= config.epsilon
    uncovered = np.ones(len(corpus), dtype=bool)
    chosen: list = []

    while uncovered.any():
        if config.max_set_size is not None and len(chosen) >= config.max_set_size:
            break
        gains = covers[:, uncovered].sum(axis=1)
        best = int(np.argmax(gains))
        if gains[best] == 0:
            break
        chosen.append(best)
        uncovered &= ~covers[best]

    residual = tuple(int(i) for i in np.flatnonzero(uncovered))
    logger.info(
        "Profile cover: %d of %d profiles cover %d/%d samples at eps=%.3g",
        len(chosen), len(candidates), len(corpus) - len(residual), len(corpus), config.epsilon,
    )
    if residual:
        logger.warning("%d samples not reachable by any candidate profile", len(residual))
    return ProfileCoverResult(
        profiles=tuple(candidates[i] for i in chosen),
        uncovered=residual,
        grid_indices=tuple(chosen),
    )


def _reference_modes(
    s0: AgentState, profiles: Sequence[ControlProfile], params: VehicleParams, cfg: IntegrationConfig
) -> Tuple[Trajectory, ...]:
    if not profiles:
        return ()
    points = rollout_profiles(s0, [p.as_tuple() for p in profiles], params, cfg)
    if len(_dedup_order(points)) != len(profiles):
        raise InvalidState(
            f"profiles collapse to duplicate rollouts at reference speed {s0.speed}; "
            "use a moving reference state"
        )
    return tuple(Trajectory(points=p, dt=cfg.dt) for p in points)


def dynamic_cover_set(
    corpus: TrajectoryCorpus,
    s0: AgentState,
    candidate_grid: ControlGrid,
    params: VehicleParams,
    cfg: IntegrationConfig,
    config: CoverConfig,
) -> TrajectorySet:
    """Dynamic set made of the profiles chosen by profile_cover, rolled out from ``s0``"""
    result = profile_cover(corpus, candidate_grid, params, cfg, config)
    if not result.profiles:
        raise EmptySet("no candidate profile covers any sample")
    return TrajectorySet(
        modes=_reference_modes(s0, result.profiles, params, cfg),
        provenance=Provenance.DYNAMIC,
        profiles=tuple(p.as_tuple() for p in result.profiles),
        epsilon=config.epsilon,
        kind=config.kind,
        complete=not result.uncovered,
        meta={**_rollout_meta(s0, params, cfg), "uncovered": len(result.uncovered)},
    )


def hybrid_set(
    corpus: TrajectoryCorpus,
    s0: AgentState,
    candidate_grid: ControlGrid,
    params: VehicleParams,
    cfg: IntegrationConfig,
    config: CoverConfig,
) -> TrajectorySet:
    """
    Dynamic profile cover plus a fixed greedy cover of the samples it misses

    The first modes are the chosen profiles rolled out from ``s0``; the rest
    are corpus trajectories (source_indices point into ``corpus``). Scored
    per instance with dynamic_coverage_report, the result covers the whole
    corpus.
    """
    result = profile_cover(corpus, candidate_grid, params, cfg, config)
    dynamic_modes = _reference_modes(s0, result.profiles, params, cfg)

    fixed_modes: Tuple[Trajectory, ...] = ()
    fixed_sources: Tuple[int, ...] = ()
    complete = True
    if result.uncovered:
        residual = greedy_cover(corpus.subset(result.uncovered), config)
        fixed_modes = residual.modes
        fixed_sources = tuple(result.uncovered[i] for i in residual.source_indices)
        complete = residual.complete

    logger.info(
        "Hybrid set: %d dynamic + %d fixed modes", len(dynamic_modes), len(fixed_modes)
    )
    return TrajectorySet(
        modes=dynamic_modes + fixed_modes,
        provenance=Provenance.HYBRID,
        source_indices=fixed_sources,
        profiles=tuple(p.as_tuple() for p in result.profiles),
        epsilon=config.epsilon,
        kind=config.kind,
        complete=complete,
        meta=_rollout_meta(s0, params, cfg),
    )


def rollout_settings(
    trajectory_set: TrajectorySet,
    corpus: Optional[TrajectoryCorpus] = None,
    params: Optional[VehicleParams] = None,
    cfg: Optional[IntegrationConfig] = None,
) -> Tuple[VehicleParams, IntegrationConfig]:
    """Vehicle and integration settings for re-rolling a set, falling back to its metadata"""
    if params is None:
        params = VehicleParams(float(trajectory_set.meta.get("wheelbase_b", VehicleParams().wheelbase_b)))
    if cfg is None:
        substeps = int(trajectory_set.meta.get("substeps", IntegrationConfig().substeps))
        cfg = IntegrationConfig(
            dt=trajectory_set.dt, substeps=substeps, horizon_steps=trajectory_set.n_steps
        )
    if corpus is not None:
        check_compatible(corpus.n_steps, corpus.dt, cfg.horizon_steps, cfg.dt)
    return params, cfg


def instantiate_set(
    trajectory_set: TrajectorySet, s0: AgentState, params: VehicleParams, cfg: IntegrationConfig
) -> TrajectorySet:
    """
    Re-roll a set's control profiles from another state

    Mode k of the result corresponds to mode k of ``trajectory_set``; fixed
    modes are carried over unchanged. Sets without profiles are returned as is.
    """
    if not trajectory_set.n_dynamic:
        return trajectory_set
    check_compatible(trajectory_set.n_steps, trajectory_set.dt, cfg.horizon_steps, cfg.dt)
    points = rollout_profiles(s0, trajectory_set.profiles, params, cfg)
    dynamic_modes = tuple(Trajectory(points=p, dt=cfg.dt) for p in points)
    return TrajectorySet(
        modes=dynamic_modes + trajectory_set.fixed_modes,
        provenance=trajectory_set.provenance,
        source_indices=trajectory_set.source_indices,
        profiles=trajectory_set.profiles,
        epsilon=trajectory_set.epsilon,
        kind=trajectory_set.kind,
        complete=trajectory_set.complete,
        meta=trajectory_set.meta,
    )


def dynamic_coverage_report(
    trajectory_set: TrajectorySet,
    corpus: TrajectoryCorpus,
    config: CoverConfig,
    params: Optional[VehicleParams] = None,
    cfg: Optional[IntegrationConfig] = None,
) -> CoverageReport:
    """
    Coverage of a corpus by a set expanded per instance

    Sample i is scored against the set's profiles rolled out from its own
    seed state together with the set's fixed modes. Vehicle and integration
    settings default to the ones recorded when the set was built.
    """
    params, cfg = rollout_settings(trajectory_set, corpus, params, cfg)
    check_compatible(corpus.n_steps, corpus.dt, trajectory_set.n_steps, trajectory_set.dt)
    residuals = np.full(len(corpus), np.inf)
    if trajectory_set.n_dynamic:
        per_profile = profile_distances(corpus, trajectory_set.profiles, params, cfg, config.kind)
        residuals = np.minimum(residuals, per_profile.min(axis=0))
    fixed = trajectory_set.fixed_modes
    if fixed:
        fixed_points = np.stack([t.points for t in fixed])
        residuals = np.minimum(
            residuals, pairwise_distances(corpus.points, fixed_points, config.kind).min(axis=1)
        )
    return report_from_residuals(
        residuals,
        config.epsilon,
        set_size=len(trajectory_set),
        dynamic_modes=trajectory_set.n_dynamic,
        fixed_modes=len(fixed),
    )
