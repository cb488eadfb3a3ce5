import json
import math

import numpy as np
import pytest

from conftest import make_traj
from covertraj.errors import DataError, DimensionMismatch, EmptyDataset
from covertraj.models.classifier import (
    SoftmaxModel,
    gradient_check,
    label,
    log_softmax,
    loss_and_gradient,
    predict,
    softmax,
    train,
)
from covertraj.models.trajectory import AgentState, DistanceKind, TrajectorySet, distance
from covertraj.utils.features import StateFeatureExtractor


def straight(x, n=4):
    return make_traj([(x, 2.5 * (i + 1)) for i in range(n)])


def curve(sign, n=4):
    return make_traj([(sign * 0.3 * (i + 1) ** 2, 2.5 * (i + 1)) for i in range(n)])


@pytest.fixture
def three_modes():
    return TrajectorySet(modes=(straight(-2.0), straight(0.0), straight(2.0)))


def test_zero_weights_give_uniform_probabilities(three_modes, rng):
    model = SoftmaxModel.zeros(three_modes)
    pred = predict(model, rng.normal(size=4))
    np.testing.assert_allclose(pred.probs, np.full(3, 1 / 3))


def test_dominant_logit_saturates():
    logits = np.array([0.0, 1000.0, -3.0, 12.0])
    probs = softmax(logits)
    assert probs[1] >= 1 - 1e-9
    assert np.all(np.isfinite(log_softmax(logits)))


def test_softmax_matches_exact_reference(rng):
    for _ in range(50):
        logits = rng.normal(scale=20.0, size=int(rng.integers(2, 10)))
        probs = softmax(logits)
        for i, li in enumerate(logits):
            expected = 1.0 / math.fsum(math.exp(lj - li) for lj in logits)
            assert probs[i] == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_probabilities_invariant_to_bias_shift(three_modes, rng):
    model = SoftmaxModel(weights=rng.normal(size=(3, 4)), trajectory_set=three_modes)
    features = rng.normal(size=4)
    features[3] = 1.0
    before = predict(model, features).probs
    model.weights[:, 3] += 37.5
    after = predict(model, features).probs
    np.testing.assert_allclose(before, after, atol=1e-12)


def test_label_ties_go_to_smallest_index():
    modes = TrajectorySet(modes=(straight(1.0), straight(-1.0)))
    assert label(straight(0.0), modes) == 0


def test_label_matches_exhaustive_scan(rng):
    modes = TrajectorySet(modes=tuple(make_traj(rng.normal(scale=3, size=(4, 2))) for _ in range(15)))
    for _ in range(100):
        truth = make_traj(rng.normal(scale=3, size=(4, 2)))
        for kind in DistanceKind:
            scan = [distance(m, truth, kind) for m in modes.modes]
            assert label(truth, modes, kind) == int(np.argmin(scan))


def test_train_rejects_empty_dataset(three_modes):
    with pytest.raises(EmptyDataset):
        train([], three_modes, epochs=5)


def test_zero_epochs_return_zero_weights(three_modes):
    dataset = [(np.array([10.0, 0.0, 0.1, 1.0]), straight(0.0))]
    model = train(dataset, three_modes, epochs=0)
    assert np.all(model.weights == 0)
    assert model.loss_curve == [pytest.approx(math.log(3))]


def test_single_example_converges(three_modes):
    dataset = [(np.array([10.0, 0.5, 0.1, 1.0]), straight(2.0))]
    model = train(dataset, three_modes, epochs=2000)
    assert model.loss_curve[-1] < 0.01
    assert np.all(np.diff(model.loss_curve) <= 0)
    assert predict(model, dataset[0][0]).most_likely == 2


def test_separable_yaw_rate_task_reaches_full_accuracy():
    modes = TrajectorySet(modes=(curve(-1.0), curve(1.0)))
    extractor = StateFeatureExtractor()
    dataset = []
    for yaw_rate in np.linspace(0.05, 0.5, 20):
        dataset.append((extractor.to_vector(AgentState(speed=10.0, yaw_rate=yaw_rate)), curve(-1.0)))
        dataset.append((extractor.to_vector(AgentState(speed=10.0, yaw_rate=-yaw_rate)), curve(1.0)))
    model = train(dataset, modes, epochs=200, batch_size=len(dataset))
    features = np.stack([f for f, _ in dataset])
    predicted = np.argmax(model.predict_proba(features), axis=1)
    expected = np.array([0, 1] * 20)
    assert np.array_equal(predicted, expected)


def test_full_batch_loss_is_non_increasing(three_modes, rng):
    dataset = []
    for _ in range(24):
        features = np.array([rng.uniform(0, 15), rng.normal(), rng.normal(scale=0.3), 1.0])
        dataset.append((features, make_traj(rng.normal(scale=2, size=(4, 2)) + straight(0.0).points)))
    model = train(dataset, three_modes, epochs=50, lr=1e-3, batch_size=32)
    assert len(model.loss_curve) == 51
    assert np.all(np.diff(model.loss_curve) <= 1e-12)


def test_gradient_check_over_random_draws(rng):
    for _ in range(100):
        modes = int(rng.integers(2, 10))
        model = SoftmaxModel(weights=rng.normal(size=(modes, 4)))
        error = gradient_check(model, (rng.normal(size=4), int(rng.integers(modes))))
        assert error <= 1e-5


def test_saturated_gradient_vanishes():
    weights = np.zeros((3, 4))
    weights[1, 3] = 1000.0
    _, grad = loss_and_gradient(weights, np.array([1.0, 0.0, 0.0, 1.0]), np.array([1]))
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)


def test_uniform_model_bias_gradient():
    k = 5
    features = np.array([8.0, 0.3, -0.1, 1.0])
    _, grad = loss_and_gradient(np.zeros((k, 4)), features, np.array([2]))
    assert grad[2, 3] == pytest.approx((1 / k - 1) * 1.0)
    assert grad[0, 3] == pytest.approx(1 / k)


def test_save_and_load_round_trip(three_modes, tmp_path, rng):
    model = SoftmaxModel(weights=rng.normal(size=(3, 4)), trajectory_set=three_modes)
    path = tmp_path / "model.json"
    model.save_model(path)
    loaded = SoftmaxModel.load_model(path, three_modes)
    np.testing.assert_array_equal(loaded.weights, model.weights)
    assert loaded.set_fingerprint == three_modes.fingerprint()
    features = rng.normal(size=4)
    np.testing.assert_allclose(predict(loaded, features).probs, predict(model, features).probs)


def test_load_rejects_other_set(three_modes, tmp_path):
    path = tmp_path / "model.json"
    SoftmaxModel.zeros(three_modes).save_model(path)
    other = TrajectorySet(modes=(straight(-3.0), straight(0.0), straight(3.0)))
    with pytest.raises(DataError):
        SoftmaxModel.load_model(path, other)
    with pytest.raises(FileNotFoundError):
        SoftmaxModel.load_model(tmp_path / "missing.json")


def test_dimension_mismatch(three_modes):
    model = SoftmaxModel.zeros(three_modes)
    with pytest.raises(DimensionMismatch):
        predict(model, np.ones(3))
    with pytest.raises(DimensionMismatch):
        model.bind(TrajectorySet(modes=(straight(0.0),)))


def test_load_rejects_ragged_weights(three_modes, tmp_path):
    path = tmp_path / "model.json"
    SoftmaxModel.zeros(three_modes).save_model(path)
    payload = json.loads(path.read_text())
    payload["weights"] = [[0.0, 0.0, 0.0, 0.0], [0.0, 0.0], [0.0]]
    path.write_text(json.dumps(payload))
    with pytest.raises(DataError):
        SoftmaxModel.load_model(path, three_modes)
