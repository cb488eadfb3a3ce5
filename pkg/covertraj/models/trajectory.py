"""
Trajectory Types and Distances

Value types shared by every module (agent states, trajectories, corpora and
trajectory sets), the agent-frame normalization, and the three point-wise
distances used for coverage and ground-truth matching.

A trajectory holds the N future positions after the current state; the
current pose itself is not part of the point sequence.
"""

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np

from covertraj.errors import (
    EmptyCorpus,
    EmptySet,
    InvalidState,
    LengthMismatch,
    RateMismatch,
)

# Upper bound on the number of float64 elements materialised per chunk of a
# pairwise distance computation.
_CHUNK_ELEMENTS = 4_000_000


def wrap_angle(angle: float) -> float:
    """Wrap an angle into [-pi, pi)"""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


class DistanceKind(str, Enum):
    """Point-wise distance between two equal-length trajectories"""

    MAX_L2 = "max"
    AVG_L2 = "avg"
    RMS_L2 = "rms"


class Provenance(str, Enum):
    """How a trajectory set was constructed"""

    FIXED = "fixed"
    DYNAMIC = "dynamic"
    HYBRID = "hybrid"


@dataclass(frozen=True)
class AgentState:
    """Instantaneous kinematic state of an agent

    Heading follows the mathematical convention (counter-clockwise positive)
    and is wrapped into [-pi, pi) on construction.
    """

    x: float = 0.0
    y: float = 0.0
    heading: float = math.pi / 2
    speed: float = 0.0
    accel: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        values = (self.x, self.y, self.heading, self.speed, self.accel, self.yaw_rate)
        if not all(math.isfinite(v) for v in values):
            raise InvalidState(f"non-finite agent state: {values}")
        if self.speed < 0:
            raise InvalidState(f"speed must be non-negative, got {self.speed}")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    def at_origin(self) -> "AgentState":
        """The same state expressed in its own agent frame (origin, heading up)"""
        return AgentState(
            x=0.0,
            y=0.0,
            heading=math.pi / 2,
            speed=self.speed,
            accel=self.accel,
            yaw_rate=self.yaw_rate,
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fixed-rate sequence of 2-D positions"""

    points: np.ndarray
    dt: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise InvalidState(f"trajectory points must have shape (N>=1, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidState("trajectory points must be finite")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidState(f"dt must be positive, got {self.dt}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def n_steps(self) -> int:
        return self.points.shape[0]

    @property
    def final_point(self) -> np.ndarray:
        return self.points[-1]

    def same_points(self, other: "Trajectory") -> bool:
        return self.points.shape == other.points.shape and bool(np.array_equal(self.points, other.points))

    def __len__(self) -> int:
        return self.n_steps


def check_compatible(n_a: int, dt_a: float, n_b: int, dt_b: float):
    if n_a != n_b:
        raise LengthMismatch(f"trajectory lengths differ: {n_a} vs {n_b}")
    if not math.isclose(dt_a, dt_b, rel_tol=1e-9, abs_tol=0.0):
        raise RateMismatch(f"sampling intervals differ: {dt_a} vs {dt_b}")


@dataclass(frozen=True, eq=False)
class TrajectoryCorpus:
    """Trajectories sharing N and dt, optionally with their initial states"""

    items: Tuple[Trajectory, ...]
    seed_states: Optional[Tuple[AgentState, ...]] = None

    def __post_init__(self):
        items = tuple(self.items)
        object.__setattr__(self, "items", items)
        if items:
            first = items[0]
            for traj in items[1:]:
                check_compatible(first.n_steps, first.dt, traj.n_steps, traj.dt)
        if self.seed_states is not None:
            seeds = tuple(self.seed_states)
            if len(seeds) != len(items):
                raise InvalidState(
                    f"seed_states has {len(seeds)} entries for {len(items)} trajectories"
                )
            object.__setattr__(self, "seed_states", seeds)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_steps(self) -> int:
        self.require_non_empty()
        return self.items[0].n_steps

    @property
    def dt(self) -> float:
        self.require_non_empty()
        return self.items[0].dt

    @cached_property
    def points(self) -> np.ndarray:
        """Stacked positions, shape (n, N, 2)"""
        self.require_non_empty()
        stacked = np.stack([t.points for t in self.items])
        stacked.setflags(write=False)
        return stacked

    def require_non_empty(self):
        if not self.items:
            raise EmptyCorpus("corpus is empty")

    def subset(self, indices: Sequence[int]) -> "TrajectoryCorpus":
        idx = [int(i) for i in indices]
        seeds = None if self.seed_states is None else tuple(self.seed_states[i] for i in idx)
        return TrajectoryCorpus(items=tuple(self.items[i] for i in idx), seed_states=seeds)


@dataclass(frozen=True, eq=False)
class TrajectorySet:
    """Ordered collection of trajectories serving as a classification label space

    For dynamic and hybrid sets the first ``len(profiles)`` modes are rollouts
    of those control profiles from a reference state; any remaining modes are
    fixed trajectories. ``complete`` is False when a size cap stopped a cover
    before every corpus element was covered.
    """

    modes: Tuple[Trajectory, ...]
    provenance: Provenance = Provenance.FIXED
    source_indices: Optional[Tuple[int, ...]] = None
    profiles: Optional[Tuple[Tuple[float, float], ...]] = None
    epsilon: Optional[float] = None
    kind: Optional[DistanceKind] = None
    complete: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise EmptySet("trajectory set has no modes")
        first = modes[0]
        for traj in modes[1:]:
            check_compatible(first.n_steps, first.dt, traj.n_steps, traj.dt)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.kind is not None:
            object.__setattr__(self, "kind", DistanceKind(self.kind))
        if self.source_indices is not None:
            object.__setattr__(self, "source_indices", tuple(int(i) for i in self.source_indices))
        if self.profiles is not None:
            profiles = tuple((float(a), float(b)) for a, b in self.profiles)
            if len(profiles) > len(modes):
                raise InvalidState(
                    f"{len(profiles)} profiles for only {len(modes)} modes"
                )
            object.__setattr__(self, "profiles", profiles)

    def __len__(self) -> int:
        return len(self.modes)

    @property
    def n_steps(self) -> int:
        return self.modes[0].n_steps

    @property
    def dt(self) -> float:
        return self.modes[0].dt

    @property
    def n_dynamic(self) -> int:
        return 0 if self.profiles is None else len(self.profiles)

    @property
    def fixed_modes(self) -> Tuple[Trajectory, ...]:
        return self.modes[self.n_dynamic:]

    @cached_property
    def points(self) -> np.ndarray:
        """Stacked positions, shape (K, N, 2)"""
        stacked = np.stack([t.points for t in self.modes])
        stacked.setflags(write=False)
        return stacked

    def has_duplicates(self) -> bool:
        flat = self.points.reshape(len(self.modes), -1)
        return len(np.unique(flat, axis=0)) != len(self.modes)

    def fingerprint(self) -> str:
        """SHA-256 over provenance, profiles and mode coordinates"""
        digest = hashlib.sha256()
        digest.update(self.provenance.value.encode("utf-8"))
        digest.update(repr(self.dt).encode("utf-8"))
        if self.profiles:
            digest.update(np.asarray(self.profiles, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.points, dtype="<f8").tobytes())
        return digest.hexdigest()


def normalize_frame(raw: Trajectory, origin: AgentState) -> Trajectory:
    """
    Express a world-frame trajectory in the agent frame of ``origin``

    The origin position maps to (0, 0) and the origin heading to the +y axis
    (translate by (-x, -y), then rotate by pi/2 - heading).
    """
    return Trajectory(points=_to_agent_frame(raw.points, origin), dt=raw.dt)


def _to_agent_frame(points: np.ndarray, origin: AgentState) -> np.ndarray:
    phi = math.pi / 2 - origin.heading
    c, s = math.cos(phi), math.sin(phi)
    rotation = np.array([[c, -s], [s, c]])
    shifted = np.asarray(points, dtype=np.float64) - np.array([origin.x, origin.y])
    return shifted @ rotation.T


def reduce_norms(norms: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """Collapse point-wise norms (last axis) into one distance per trajectory pair"""
    if kind is DistanceKind.MAX_L2:
        return norms.max(axis=-1)
    if kind is DistanceKind.AVG_L2:
        return norms.mean(axis=-1)
    if kind is DistanceKind.RMS_L2:
        return np.sqrt(np.mean(norms * norms, axis=-1))
    raise ValueError(f"unknown distance kind: {kind}")


def pointwise_norms(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean norm of a - b along the last (x, y) axis"""
    diff = a - b
    return np.sqrt(np.sum(diff * diff, axis=-1))


def distance(a: Trajectory, b: Trajectory, kind: DistanceKind = DistanceKind.MAX_L2) -> float:
    """
    Point-wise distance between two trajectories

    Args:
        a: First trajectory
        b: Second trajectory
        kind: Reduction over the point-wise Euclidean norms (max, mean, or RMS)

    Returns:
        Distance in meters
    """
    check_compatible(a.n_steps, a.dt, b.n_steps, b.dt)
    return float(reduce_norms(pointwise_norms(a.points, b.points), DistanceKind(kind)))


def pairwise_distances(
    a: np.ndarray, b: np.ndarray, kind: DistanceKind = DistanceKind.MAX_L2
) -> np.ndarray:
    """
    Distance matrix between two stacks of equal-length trajectories

    Args:
        a: Array of shape (n, N, 2)
        b: Array of shape (m, N, 2)
        kind: Distance reduction

    Returns:
        Array of shape (n, m)
    """
    kind = DistanceKind(kind)
    if a.shape[1:] != b.shape[1:]:
        raise LengthMismatch(f"trajectory stacks differ in shape: {a.shape[1:]} vs {b.shape[1:]}")
    n, m, steps = a.shape[0], b.shape[0], a.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    rows = max(1, _CHUNK_ELEMENTS // max(1, m * steps * 2))
    for start in range(0, n, rows):
        block = a[start:start + rows, None, :, :]
        out[start:start + rows] = reduce_norms(pointwise_norms(block, b[None, :, :, :]), kind)
    return out


def closest_index(
    target: Trajectory, trajectory_set: TrajectorySet, kind: DistanceKind = DistanceKind.AVG_L2
) -> int:
    """
    Index of the set element nearest to ``target``

    Ties are broken by the smallest index.
    """
    if len(trajectory_set) == 0:
        raise EmptySet("cannot match against an empty set")
    check_compatible(target.n_steps, target.dt, trajectory_set.n_steps, trajectory_set.dt)
    dists = reduce_norms(pointwise_norms(trajectory_set.points, target.points[None]), DistanceKind(kind))
    return int(np.argmin(dists))
