import json
import math

import numpy as np
import pytest

from conftest import make_traj
from covertraj.errors import DataError, EmptyCorpus, InvalidRange, LengthMismatch, RateMismatch
from covertraj.models.trajectory import AgentState, DistanceKind, Provenance, TrajectorySet
from covertraj.utils.io import (
    CorpusHeader,
    CorpusRecord,
    SeedStateModel,
    read_corpus,
    read_corpus_records,
    read_set,
    write_corpus,
    write_set,
)
from ml.prepare_data import gen_corpus


def _record(i, seed, future, dt=0.5):
    return CorpusRecord(id=i, dt=dt, seed_state=SeedStateModel.from_state(seed), future=future)


def test_read_corpus_normalizes_into_seed_frame(tmp_path):
    # heading along +x: world points ahead of the seed map onto +y
    seed = AgentState(x=10.0, y=-5.0, heading=0.0, speed=4.0, accel=0.5, yaw_rate=0.1)
    future = [(12.0, -5.0), (14.0, -5.0), (16.0, -4.0)]
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, CorpusHeader(horizon_steps=3, dt=0.5), [_record(0, seed, future)])

    corpus = read_corpus(path)
    np.testing.assert_allclose(corpus.items[0].points, [(0, 2), (0, 4), (-1, 6)], atol=1e-12)
    origin = corpus.seed_states[0]
    assert (origin.x, origin.y, origin.heading) == (0.0, 0.0, math.pi / 2)
    assert (origin.speed, origin.accel, origin.yaw_rate) == (4.0, 0.5, 0.1)


def test_header_mismatches_are_rejected(tmp_path):
    seed = AgentState()
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, CorpusHeader(horizon_steps=3, dt=0.5), [_record(0, seed, [(0, 1), (0, 2)])])
    with pytest.raises(LengthMismatch):
        read_corpus(path)
    write_corpus(path, CorpusHeader(horizon_steps=2, dt=0.5), [_record(0, seed, [(0, 1), (0, 2)], dt=0.1)])
    with pytest.raises(RateMismatch):
        read_corpus(path)


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "corpus.jsonl"
    header = json.dumps({"version": 1, "horizon_steps": 2, "dt": 0.5})
    path.write_text(header + "\n" + '{"id": 0, "dt": 0.5}\n', encoding="utf-8")
    with pytest.raises(DataError, match=":2:"):
        read_corpus_records(path)
    path.write_text("", encoding="utf-8")
    with pytest.raises(EmptyCorpus):
        read_corpus_records(path)
    with pytest.raises(FileNotFoundError):
        read_corpus(tmp_path / "missing.jsonl")


def test_min_displacement_drops_stationary_records(tmp_path):
    path = tmp_path / "corpus.jsonl"
    records = [
        _record(0, AgentState(), [(0.0, 0.1), (0.0, 0.2)]),
        _record(1, AgentState(), [(0.0, 5.0), (0.0, 10.0)]),
    ]
    write_corpus(path, CorpusHeader(horizon_steps=2, dt=0.5), records)
    assert len(read_corpus(path)) == 2
    assert len(read_corpus(path, min_displacement=1.0)) == 1
    with pytest.raises(EmptyCorpus):
        read_corpus(path, min_displacement=100.0)


def test_set_file_round_trip(tmp_path, rng):
    modes = tuple(make_traj(rng.normal(size=(4, 2))) for _ in range(5))
    original = TrajectorySet(
        modes=modes,
        provenance=Provenance.HYBRID,
        source_indices=(3, 7, 11),
        profiles=((1.0, 0.0), (-1.0, 0.5)),
        epsilon=2.0,
        kind=DistanceKind.MAX_L2,
        complete=False,
        meta={"reference_state": {"speed": 10.0}},
    )
    path = tmp_path / "set.json"
    write_set(path, original)
    loaded = read_set(path)
    np.testing.assert_array_equal(loaded.points, original.points)
    assert loaded.provenance == original.provenance
    assert loaded.source_indices == original.source_indices
    assert loaded.profiles == original.profiles
    assert (loaded.epsilon, loaded.kind, loaded.complete) == (2.0, DistanceKind.MAX_L2, False)
    assert loaded.meta == original.meta
    assert loaded.fingerprint() == original.fingerprint()


def test_set_file_rejects_bad_payload(tmp_path):
    path = tmp_path / "set.json"
    path.write_text(json.dumps({"provenance": "fixed", "dt": 0.5, "modes": []}), encoding="utf-8")
    with pytest.raises(DataError):
        read_set(path)


def test_forced_straight_profile_gives_straight_futures(tmp_path):
    header, records = gen_corpus(20, horizon_s=3.0, dt=0.5, profile=(0.0, 0.0), rng_seed=3)
    assert header.horizon_steps == 6
    path = tmp_path / "corpus.jsonl"
    write_corpus(path, header, records)
    corpus = read_corpus(path)
    for traj, seed in zip(corpus.items, corpus.seed_states):
        np.testing.assert_allclose(traj.points[:, 0], 0.0, atol=1e-9)
        np.testing.assert_allclose(traj.points[:, 1], seed.speed * 0.5 * np.arange(1, 7), atol=1e-9)


def test_gen_corpus_is_deterministic(tmp_path):
    kwargs = dict(horizon_s=2.0, dt=0.5, noise_std=0.2, piecewise_prob=0.5, profile_jitter=0.1, rng_seed=11)
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_corpus(first, *gen_corpus(50, **kwargs))
    write_corpus(second, *gen_corpus(50, **kwargs))
    assert first.read_bytes() == second.read_bytes()
    write_corpus(second, *gen_corpus(50, **{**kwargs, "rng_seed": 12}))
    assert first.read_bytes() != second.read_bytes()


@pytest.mark.parametrize(
    "kwargs",
    [
        {"count": 0},
        {"count": 5, "dt": 0.0},
        {"count": 5, "horizon_s": 0.1, "dt": 0.5},
        {"count": 5, "speed_range": (5.0, 1.0)},
        {"count": 5, "noise_std": -1.0},
        {"count": 5, "piecewise_prob": 1.5},
    ],
)
def test_gen_corpus_rejects_invalid_ranges(kwargs):
    with pytest.raises(InvalidRange):
        gen_corpus(**kwargs)
