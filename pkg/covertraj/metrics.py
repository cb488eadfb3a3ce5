"""
Multimodal Prediction Metrics

minADE_k, FDE and HitRate_{k,d} for predictions made of a trajectory set
with per-mode probabilities, plus dataset-level aggregation.

Top-k selection orders modes by probability, ties going to the smallest
mode index.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from covertraj.errors import (
    CoverTrajError,
    EmptyDataset,
    EmptyRecords,
    InstanceError,
    InvalidState,
    KOutOfRange,
)
from covertraj.models.trajectory import (
    AgentState,
    DistanceKind,
    Trajectory,
    TrajectorySet,
    check_compatible,
    pointwise_norms,
    reduce_norms,
)

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 5, 10, 15)
DEFAULT_HIT_K = 5
DEFAULT_HIT_D = 2.0
PROBABILITY_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class PredictionResult:
    """A trajectory set with one probability per mode"""

    trajectory_set: TrajectorySet
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64).reshape(-1)
        if probs.shape[0] != len(self.trajectory_set):
            raise InvalidState(
                f"{probs.shape[0]} probabilities for {len(self.trajectory_set)} modes"
            )
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise InvalidState("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > PROBABILITY_TOLERANCE:
            raise InvalidState(f"probabilities sum to {probs.sum()}, expected 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def n_modes(self) -> int:
        return len(self.trajectory_set)

    def top_k(self, k: int) -> np.ndarray:
        """Indices of the k most likely modes, most likely first"""
        if not 1 <= k <= self.n_modes:
            raise KOutOfRange(f"k must be in [1, {self.n_modes}], got {k}")
        return np.argsort(-self.probs, kind="stable")[:k]

    @property
    def most_likely(self) -> int:
        return int(np.argmax(self.probs))


def one_hot_prediction(trajectory_set: TrajectorySet, index: int) -> PredictionResult:
    probs = np.zeros(len(trajectory_set))
    probs[index] = 1.0
    return PredictionResult(trajectory_set=trajectory_set, probs=probs)


def _mode_distances(pred: PredictionResult, truth: Trajectory, kind: DistanceKind) -> np.ndarray:
    check_compatible(truth.n_steps, truth.dt, pred.trajectory_set.n_steps, pred.trajectory_set.dt)
    return reduce_norms(pointwise_norms(pred.trajectory_set.points, truth.points[None]), kind)


def min_ade(pred: PredictionResult, truth: Trajectory, k: int) -> float:
    """Smallest average displacement among the k most likely modes"""
    top = pred.top_k(k)
    return float(_mode_distances(pred, truth, DistanceKind.AVG_L2)[top].min())


def fde(pred: PredictionResult, truth: Trajectory) -> float:
    """Final-point displacement of the most likely mode"""
    check_compatible(truth.n_steps, truth.dt, pred.trajectory_set.n_steps, pred.trajectory_set.dt)
    mode = pred.trajectory_set.modes[pred.most_likely]
    return float(np.linalg.norm(mode.final_point - truth.final_point))


def hit(pred: PredictionResult, truth: Trajectory, k: int, d: float) -> int:
    """1 if some top-k mode stays within d meters of the truth at every step"""
    top = pred.top_k(k)
    return int(_mode_distances(pred, truth, DistanceKind.MAX_L2)[top].min() <= d)


def hit_rate(records: Sequence[int]) -> float:
    """Mean of per-instance hits for one (k, d)"""
    if len(records) == 0:
        raise EmptyRecords("hit rate over zero instances")
    return float(np.mean(np.asarray(records, dtype=np.float64)))


def ade_over_horizon(pred: PredictionResult, truth: Trajectory) -> np.ndarray:
    """Per-step displacement of the most likely mode, shape (N,)"""
    check_compatible(truth.n_steps, truth.dt, pred.trajectory_set.n_steps, pred.trajectory_set.dt)
    mode = pred.trajectory_set.modes[pred.most_likely]
    return pointwise_norms(mode.points, truth.points)


@dataclass
class EvalRecord:
    """Metrics of one instance"""

    min_ade: Dict[int, float]
    fde: float
    hits: Dict[Tuple[int, float], int]
    n_modes: int = 0
    horizon: Optional[np.ndarray] = None


class EvalInstance(NamedTuple):
    """One evaluation example: agent-frame seed state and ground-truth future"""

    index: int
    state: AgentState
    truth: Trajectory


def evaluate_instance(
    pred: PredictionResult,
    truth: Trajectory,
    ks: Sequence[int] = DEFAULT_KS,
    ds: Sequence[float] = (DEFAULT_HIT_D,),
    horizon: bool = False,
) -> EvalRecord:
    """
    All metrics for one prediction

    Values of k larger than the number of modes are evaluated with every
    mode, so single-mode predictors report the same minADE for every k.
    """
    n = pred.n_modes
    avg = _mode_distances(pred, truth, DistanceKind.AVG_L2)
    worst = _mode_distances(pred, truth, DistanceKind.MAX_L2)
    order = np.argsort(-pred.probs, kind="stable")
    # running minimum over modes taken in probability order
    best_avg = np.minimum.accumulate(avg[order])
    best_worst = np.minimum.accumulate(worst[order])

    return EvalRecord(
        min_ade={int(k): float(best_avg[min(k, n) - 1]) for k in ks},
        fde=fde(pred, truth),
        hits={
            (int(k), float(d)): int(best_worst[min(k, n) - 1] <= d)
            for k in ks for d in ds
        },
        n_modes=n,
        horizon=ade_over_horizon(pred, truth) if horizon else None,
    )


@dataclass
class DatasetEvaluation:
    """Aggregated metrics over a dataset"""

    records: List[EvalRecord]
    ks: Tuple[int, ...]
    hit_k: int
    hit_d: float
    ds: Tuple[float, ...] = field(default_factory=tuple)

    def summary(self) -> Dict[str, float]:
        """Unweighted means in the column layout minADE_k..., FDE, HitRate_{k,d}"""
        row: Dict[str, float] = {
            "modes": float(np.mean([r.n_modes for r in self.records])),
        }
        for k in self.ks:
            row[f"minADE_{k}"] = float(np.mean([r.min_ade[k] for r in self.records]))
        row["FDE"] = float(np.mean([r.fde for r in self.records]))
        row[f"HitRate_{self.hit_k},{_fmt(self.hit_d)}"] = hit_rate(
            [r.hits[(self.hit_k, self.hit_d)] for r in self.records]
        )
        return row

    def hit_rate_curve(self) -> pd.DataFrame:
        """HitRate_{k,d} for every evaluated k (rows) and d (columns)"""
        hit_ks = sorted({k for k, _ in self.records[0].hits})
        hit_ds = sorted({d for _, d in self.records[0].hits})
        table = {
            f"d={_fmt(d)}": [hit_rate([r.hits[(k, d)] for r in self.records]) for k in hit_ks]
            for d in hit_ds
        }
        return pd.DataFrame(table, index=pd.Index(hit_ks, name="k"))

    def horizon_curve(self) -> Optional[pd.DataFrame]:
        """Mean per-step displacement of the most likely mode"""
        curves = [r.horizon for r in self.records if r.horizon is not None]
        if not curves:
            return None
        mean = np.mean(np.stack(curves), axis=0)
        return pd.DataFrame({"step": np.arange(1, mean.shape[0] + 1), "ade_1": mean})


def _fmt(value: float) -> str:
    return f"{value:g}"


def _evaluate_one(predictor, instance: EvalInstance, ks, ds, horizon) -> EvalRecord:
    try:
        return evaluate_instance(predictor(instance), instance.truth, ks, ds, horizon)
    except (CoverTrajError, ValueError) as exc:
        raise InstanceError(instance.index, exc) from exc


def evaluate_dataset(
    predictor: Callable[[EvalInstance], PredictionResult],
    dataset: Iterable[EvalInstance],
    ks: Sequence[int] = DEFAULT_KS,
    ds: Sequence[float] = (DEFAULT_HIT_D,),
    hit_k: int = DEFAULT_HIT_K,
    hit_d: float = DEFAULT_HIT_D,
    horizon: bool = False,
    n_jobs: int = 1,
) -> DatasetEvaluation:
    """
    Evaluate a predictor on every instance and aggregate

    Args:
        predictor: Maps an instance to a PredictionResult
        dataset: Instances with ground truth
        ks: k values reported for minADE (and hit rates)
        ds: Hit thresholds in meters
        hit_k, hit_d: The (k, d) pair of the headline HitRate column
        horizon: Also collect the per-step displacement curve
        n_jobs: joblib workers; 1 evaluates in-process

    Raises:
        EmptyDataset: if the dataset has no instances
        InstanceError: wrapping the first failing instance
    """
    instances = list(dataset)
    if not instances:
        raise EmptyDataset("cannot evaluate an empty dataset")
    ks = tuple(sorted({int(k) for k in ks}))
    hit_ks = tuple(sorted(set(ks) | {int(hit_k)}))
    hit_ds = tuple(sorted({float(d) for d in ds} | {float(hit_d)}))

    records = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_one)(predictor, inst, hit_ks, hit_ds, horizon) for inst in instances
    )
    for record in records:
        record.min_ade = {k: v for k, v in record.min_ade.items() if k in ks}
    logger.info("Evaluated %d instances", len(records))
    return DatasetEvaluation(
        records=list(records), ks=ks, hit_k=int(hit_k), hit_d=float(hit_d), ds=hit_ds
    )
