"""
Corpus, Set and Table Files

Corpus files are JSON Lines: a header line {version, horizon_steps, dt}
followed by one record per instance with its world-frame seed state and
future positions. Set files are a single JSON document. All writes go to a
temporary file that is renamed into place.
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from covertraj.errors import DataError, EmptyCorpus, LengthMismatch, RateMismatch
from covertraj.models.trajectory import (
    AgentState,
    DistanceKind,
    Provenance,
    Trajectory,
    TrajectoryCorpus,
    TrajectorySet,
    normalize_frame,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

PathLike = Union[str, Path]


class SeedStateModel(BaseModel):
    x: float
    y: float
    heading: float
    speed: float = Field(ge=0)
    accel: float = 0.0
    yaw_rate: float = 0.0

    def to_state(self) -> AgentState:
        return AgentState(**self.model_dump())

    @classmethod
    def from_state(cls, state: AgentState) -> "SeedStateModel":
        return cls(
            x=state.x, y=state.y, heading=state.heading,
            speed=state.speed, accel=state.accel, yaw_rate=state.yaw_rate,
        )


class CorpusHeader(BaseModel):
    version: int = FORMAT_VERSION
    horizon_steps: int = Field(ge=1)
    dt: float = Field(gt=0)
    meta: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("version")
    @classmethod
    def _supported(cls, v: int) -> int:
        if v != FORMAT_VERSION:
            raise ValueError(f"unsupported corpus version {v}")
        return v


class CorpusRecord(BaseModel):
    id: Union[int, str]
    dt: float = Field(gt=0)
    seed_state: SeedStateModel
    future: List[Tuple[float, float]]


class SetFileModel(BaseModel):
    version: int = FORMAT_VERSION
    provenance: Provenance
    epsilon: Optional[float] = None
    distance_kind: Optional[DistanceKind] = None
    dt: float = Field(gt=0)
    modes: List[List[Tuple[float, float]]]
    profiles: Optional[List[Tuple[float, float]]] = None
    source_indices: Optional[List[int]] = None
    complete: bool = True
    meta: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self) -> "SetFileModel":
        if not self.modes:
            raise ValueError("set file has no modes")
        if self.profiles is not None and len(self.profiles) > len(self.modes):
            raise ValueError(
                f"{len(self.profiles)} profiles for only {len(self.modes)} modes"
            )
        return self


def atomic_write_text(path: Path, text: str):
    """Write UTF-8 text with LF endings via a temporary file and rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(payload: Any) -> str:
    return json.dumps(payload, separators=(",", ":"))


def write_corpus(path: PathLike, header: CorpusHeader, records: Iterable[CorpusRecord]):
    lines = [_dumps(header.model_dump(mode="json"))]
    lines.extend(_dumps(record.model_dump(mode="json")) for record in records)
    atomic_write_text(Path(path), "\n".join(lines) + "\n")
    logger.info("Wrote %d records to %s", len(lines) - 1, path)


def read_corpus_records(path: PathLike) -> Tuple[CorpusHeader, List[CorpusRecord]]:
    """
    Parse and validate a corpus file without transforming it

    Raises:
        FileNotFoundError: if the file does not exist
        DataError: on schema violations, with the offending line number
        LengthMismatch / RateMismatch: if a record disagrees with the header
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Corpus file not found: {path}")
    header: Optional[CorpusHeader] = None
    records: List[CorpusRecord] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                if header is None:
                    header = CorpusHeader.model_validate(data)
                    continue
                record = CorpusRecord.model_validate(data)
            except (ValidationError, json.JSONDecodeError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if len(record.future) != header.horizon_steps:
                raise LengthMismatch(
                    f"{path}:{lineno}: {len(record.future)} points, header says {header.horizon_steps}"
                )
            if not math.isclose(record.dt, header.dt, rel_tol=1e-9):
                raise RateMismatch(f"{path}:{lineno}: dt {record.dt}, header says {header.dt}")
            records.append(record)
    if header is None:
        raise EmptyCorpus(f"{path} has no header line")
    return header, records


def read_corpus(path: PathLike, min_displacement: Optional[float] = None) -> TrajectoryCorpus:
    """
    Load a corpus in the agent frame of every record's seed state

    Futures are normalized into their seed's frame and seed states are
    re-expressed at the origin. Records whose final point lies closer than
    ``min_displacement`` to the seed position are dropped.
    """
    header, records = read_corpus_records(path)
    items: List[Trajectory] = []
    seeds: List[AgentState] = []
    dropped = 0
    for record in records:
        seed = record.seed_state.to_state()
        future = normalize_frame(Trajectory(points=record.future, dt=record.dt), seed)
        if min_displacement is not None and np.linalg.norm(future.final_point) < min_displacement:
            dropped += 1
            continue
        items.append(future)
        seeds.append(seed.at_origin())
    if dropped:
        logger.warning("Dropped %d records below %.3g m displacement", dropped, min_displacement)
    if not items:
        raise EmptyCorpus(f"{path} contains no usable records")
    logger.info("Loaded %d trajectories (N=%d, dt=%g) from %s", len(items), header.horizon_steps, header.dt, path)
    return TrajectoryCorpus(items=tuple(items), seed_states=tuple(seeds))


def set_to_model(trajectory_set: TrajectorySet) -> SetFileModel:
    return SetFileModel(
        provenance=trajectory_set.provenance,
        epsilon=trajectory_set.epsilon,
        distance_kind=trajectory_set.kind,
        dt=trajectory_set.dt,
        modes=trajectory_set.points.tolist(),
        profiles=None if trajectory_set.profiles is None else [list(p) for p in trajectory_set.profiles],
        source_indices=None if trajectory_set.source_indices is None else list(trajectory_set.source_indices),
        complete=trajectory_set.complete,
        meta=trajectory_set.meta,
    )


def write_set(path: PathLike, trajectory_set: TrajectorySet):
    payload = set_to_model(trajectory_set).model_dump(mode="json")
    atomic_write_text(Path(path), json.dumps(payload, indent=1) + "\n")
    logger.info("Wrote %d-mode %s set to %s", len(trajectory_set), trajectory_set.provenance.value, path)


def read_set(path: PathLike) -> TrajectorySet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Set file not found: {path}")
    try:
        model = SetFileModel.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return TrajectorySet(
        modes=tuple(Trajectory(points=m, dt=model.dt) for m in model.modes),
        provenance=model.provenance,
        source_indices=None if model.source_indices is None else tuple(model.source_indices),
        profiles=None if model.profiles is None else tuple(tuple(p) for p in model.profiles),
        epsilon=model.epsilon,
        kind=model.distance_kind,
        complete=model.complete,
        meta=dict(model.meta),
    )


def write_json(path: PathLike, payload: Any):
    atomic_write_text(Path(path), json.dumps(payload, indent=2) + "\n")


def write_table(table: pd.DataFrame, path: PathLike, json_too: bool = True) -> List[Path]:
    """Write a table as CSV and, optionally, as JSON records next to it"""
    path = Path(path)
    written = [path]
    atomic_write_text(path, table.to_csv(index=False, lineterminator="\n"))
    if json_too:
        json_path = path.with_suffix(".json")
        atomic_write_text(json_path, table.to_json(orient="records", indent=2) + "\n")
        written.append(json_path)
    return written
