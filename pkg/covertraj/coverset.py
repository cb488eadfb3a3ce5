"""
Fixed Trajectory Set Construction

Greedy ("bagging") set cover over a trajectory corpus, its randomized
weighted variant, an exhaustive minimum-cover oracle for small corpora, and
coverage reporting.

A corpus element k is covered by a set element l when distance(k, l) <= epsilon.
Set elements are always drawn from the corpus itself.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from covertraj.errors import InvalidState, TooLarge
from covertraj.models.trajectory import (
    DistanceKind,
    Provenance,
    TrajectoryCorpus,
    TrajectorySet,
    check_compatible,
    pairwise_distances,
)

logger = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class CoverConfig:
    """Parameters of an epsilon cover

    Attributes:
        epsilon: Coverage radius in meters
        kind: Distance used for coverage
        tie_break: Only "smallest_index" is supported
        max_set_size: Optional cap on the number of selected elements
        candidates: "all" considers every corpus element at each step;
            "uncovered" only those not yet covered
    """

    epsilon: float
    kind: DistanceKind = DistanceKind.MAX_L2
    tie_break: Literal["smallest_index"] = "smallest_index"
    max_set_size: Optional[int] = None
    candidates: Literal["all", "uncovered"] = "all"

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise InvalidState(f"epsilon must be positive, got {self.epsilon}")
        if self.max_set_size is not None and self.max_set_size < 1:
            raise InvalidState(f"max_set_size must be at least 1, got {self.max_set_size}")
        if self.tie_break != "smallest_index":
            raise InvalidState(f"unsupported tie_break: {self.tie_break}")
        if self.candidates not in ("all", "uncovered"):
            raise InvalidState(f"unsupported candidate pool: {self.candidates}")
        object.__setattr__(self, "kind", DistanceKind(self.kind))


@dataclass
class CoverageReport:
    """How well a set covers a corpus"""

    fraction_covered: float
    max_residual: float
    residuals: np.ndarray
    epsilon: float
    extra: dict = field(default_factory=dict)

    def histogram(self, bins: int = 20) -> pd.DataFrame:
        """Residual histogram as a table of (bin_start, bin_end, count)"""
        upper = max(self.max_residual, self.epsilon)
        counts, edges = np.histogram(self.residuals, bins=bins, range=(0.0, upper))
        return pd.DataFrame({
            "bin_start": edges[:-1],
            "bin_end": edges[1:],
            "count": counts,
        })

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "fraction_covered": self.fraction_covered,
            "max_residual": self.max_residual,
            "corpus_size": int(self.residuals.shape[0]),
            "covered": int(np.count_nonzero(self.residuals <= self.epsilon)),
            **self.extra,
            "residuals": [float(r) for r in self.residuals],
        }


def unique_indices(points: np.ndarray) -> np.ndarray:
    """Indices of the first occurrence of each distinct point sequence, in corpus order"""
    flat = points.reshape(points.shape[0], -1)
    _, first = np.unique(flat, axis=0, return_index=True)
    return np.sort(first)


def coverage_matrix(points: np.ndarray, config: CoverConfig) -> np.ndarray:
    """Boolean (n, n) matrix; entry (i, j) is True when i and j are within epsilon"""
    return pairwise_distances(points, points, config.kind) <= config.epsilon


def _greedy_select(
    covers: np.ndarray,
    config: CoverConfig,
    choose: Callable[[np.ndarray], int],
) -> Tuple[List[int], bool]:
    n = covers.shape[0]
    uncovered = np.ones(n, dtype=bool)
    gains = covers.sum(axis=1).astype(np.int64)
    selected: List[int] = []

    while uncovered.any():
        if config.max_set_size is not None and len(selected) >= config.max_set_size:
            return selected, False
        if config.candidates == "uncovered":
            scores = np.where(uncovered, gains, 0)
        else:
            scores = gains
        j = choose(scores)
        selected.append(j)
        newly = covers[j] & uncovered
        uncovered &= ~newly
        # covers is symmetric, so rows of the newly covered give each candidate's loss
        gains -= covers[newly].sum(axis=0)
    return selected, True


def _deterministic_choice(scores: np.ndarray) -> int:
    return int(np.argmax(scores))


def _build_fixed_set(
    corpus: TrajectoryCorpus, chosen: Sequence[int], config: CoverConfig, complete: bool
) -> TrajectorySet:
    indices = tuple(int(i) for i in chosen)
    return TrajectorySet(
        modes=tuple(corpus.items[i] for i in indices),
        provenance=Provenance.FIXED,
        source_indices=indices,
        epsilon=config.epsilon,
        kind=config.kind,
        complete=complete,
    )


def greedy_cover(corpus: TrajectoryCorpus, config: CoverConfig) -> TrajectorySet:
    """
    Deterministic greedy epsilon cover of a corpus

    Each step adds the candidate covering the most still-uncovered elements,
    ties going to the smallest corpus index. Duplicate point sequences are
    collapsed before covering.

    Args:
        corpus: Trajectories to cover
        config: Cover parameters

    Returns:
        TrajectorySet whose source_indices point into ``corpus``; ``complete``
        is False if ``config.max_set_size`` stopped the loop early
    """
    corpus.require_non_empty()
    uniq = unique_indices(corpus.points)
    covers = coverage_matrix(corpus.points[uniq], config)
    selected, complete = _greedy_select(covers, config, _deterministic_choice)
    if not complete:
        logger.warning(
            "Size cap %d reached before full cover of %d trajectories",
            config.max_set_size, len(corpus),
        )
    logger.info(
        "Greedy cover: %d modes for %d trajectories (%d distinct) at eps=%.3g (%s)",
        len(selected), len(corpus), len(uniq), config.epsilon, config.kind.value,
    )
    return _build_fixed_set(corpus, uniq[selected], config, complete)


def random_cover(
    corpus: TrajectoryCorpus, config: CoverConfig, trials: int, rng_seed: int
) -> TrajectorySet:
    """
    Randomized greedy cover repeated ``trials`` times

    Each step samples the next element with probability proportional to the
    number of uncovered elements it covers. The smallest cover wins, ties
    going to the earliest trial. Every trial draws from its own child stream
    of ``SeedSequence(rng_seed)`` so results depend only on the seed.
    """
    if trials < 1:
        raise InvalidState(f"trials must be at least 1, got {trials}")
    corpus.require_non_empty()
    uniq = unique_indices(corpus.points)
    covers = coverage_matrix(corpus.points[uniq], config)

    best: Optional[Tuple[List[int], bool]] = None
    for trial, child in enumerate(np.random.SeedSequence(rng_seed).spawn(trials)):
        rng = np.random.Generator(np.random.PCG64(child))

        def weighted_choice(scores: np.ndarray) -> int:
            weights = np.maximum(scores, 0).astype(np.float64)
            return int(rng.choice(weights.shape[0], p=weights / weights.sum()))

        selected, complete = _greedy_select(covers, config, weighted_choice)
        logger.debug("Random cover trial %d: %d modes", trial, len(selected))
        if best is None or len(selected) < len(best[0]):
            best = (selected, complete)

    selected, complete = best
    logger.info(
        "Random cover: best of %d trials has %d modes for %d trajectories",
        trials, len(selected), len(corpus),
    )
    return _build_fixed_set(corpus, uniq[selected], config, complete)


def brute_force_cover(
    corpus: TrajectoryCorpus, config: CoverConfig, limit: int = BRUTE_FORCE_LIMIT
) -> TrajectorySet:
    """
    Minimum-cardinality cover by exhaustive search

    Subsets are enumerated by increasing size and, within a size, in
    lexicographic index order; the first full cover is returned.

    Raises:
        TooLarge: if the corpus has more than ``limit`` elements
    """
    corpus.require_non_empty()
    if len(corpus) > limit:
        raise TooLarge(f"exhaustive cover limited to {limit} trajectories, got {len(corpus)}")
    uniq = unique_indices(corpus.points)
    covers = coverage_matrix(corpus.points[uniq], config)
    m = len(uniq)
    masks = [sum(1 << j for j in np.flatnonzero(row)) for row in covers]
    full = (1 << m) - 1

    for size in range(1, m + 1):
        for combo in itertools.combinations(range(m), size):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return _build_fixed_set(corpus, uniq[list(combo)], config, True)
    # unreachable: the full distinct set always covers itself
    raise AssertionError("no cover found")


def report_from_residuals(residuals: np.ndarray, epsilon: float, **extra) -> CoverageReport:
    residuals = np.asarray(residuals, dtype=np.float64)
    return CoverageReport(
        fraction_covered=float(np.count_nonzero(residuals <= epsilon)) / residuals.shape[0],
        max_residual=float(residuals.max()),
        residuals=residuals,
        epsilon=float(epsilon),
        extra=extra,
    )


def coverage_report(
    trajectory_set: TrajectorySet, corpus: TrajectoryCorpus, config: CoverConfig
) -> CoverageReport:
    """
    Distance from every corpus element to its nearest set element

    The set is scored as-is (its modes are fixed positions); per-instance
    scoring of dynamic and hybrid sets lives in covertraj.dynamics.
    """
    corpus.require_non_empty()
    check_compatible(corpus.n_steps, corpus.dt, trajectory_set.n_steps, trajectory_set.dt)
    residuals = pairwise_distances(corpus.points, trajectory_set.points, config.kind).min(axis=1)
    return report_from_residuals(residuals, config.epsilon, set_size=len(trajectory_set))


def verify_cover(
    trajectory_set: TrajectorySet, corpus: TrajectoryCorpus, config: CoverConfig
) -> bool:
    """Exact re-check that every corpus element is within epsilon of the set"""
    return coverage_report(trajectory_set, corpus, config).fraction_covered == 1.0
