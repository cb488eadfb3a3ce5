import json

import pandas as pd
import pytest

from covertraj.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from covertraj.utils.io import read_set

GRID = ["--lat-values=-2,0,2", "--lon-values=-1,0,1"]


@pytest.fixture
def corpus_path(tmp_path):
    path = tmp_path / "corpus.jsonl"
    argv = ["gen-corpus", "--count", "150", "--horizon-s", "3", "--speed-range", "2,14",
            "--seed", "5", "--out", str(path), *GRID]
    assert main(argv) == EXIT_OK
    return path


@pytest.fixture
def fixed_set(tmp_path, corpus_path):
    path = tmp_path / "fixed.json"
    assert main(["build-set", "--corpus", str(corpus_path), "--epsilon", "2", "--out", str(path)]) == EXIT_OK
    return path


def test_gen_corpus_is_byte_identical_for_a_seed(tmp_path, corpus_path):
    again = tmp_path / "again.jsonl"
    main(["gen-corpus", "--count", "150", "--horizon-s", "3", "--speed-range", "2,14",
          "--seed", "5", "--out", str(again), *GRID])
    assert again.read_bytes() == corpus_path.read_bytes()


@pytest.mark.parametrize("mode", ["fixed", "dynamic", "hybrid"])
def test_build_set_modes(tmp_path, corpus_path, mode):
    out = tmp_path / f"{mode}.json"
    argv = ["build-set", "--corpus", str(corpus_path), "--mode", mode, "--epsilon", "2", "--out", str(out), *GRID]
    assert main(argv) == EXIT_OK
    trajectory_set = read_set(out)
    assert trajectory_set.provenance.value == mode
    assert trajectory_set.epsilon == 2.0
    assert (trajectory_set.n_dynamic > 0) == (mode != "fixed")


def test_build_set_subsample_is_recorded(tmp_path, corpus_path):
    out = tmp_path / "sub.json"
    argv = ["build-set", "--corpus", str(corpus_path), "--epsilon", "2", "--subsample", "40", "--out", str(out)]
    assert main(argv) == EXIT_OK
    meta = read_set(out).meta
    assert meta["subsample"] == 40


@pytest.mark.parametrize("epsilon", ["2", "3"])
def test_hybrid_is_no_larger_than_fixed_on_noise_free_corpus(tmp_path, corpus_path, epsilon):
    sizes = {}
    for mode in ("fixed", "hybrid"):
        out = tmp_path / f"{mode}.json"
        main(["build-set", "--corpus", str(corpus_path), "--mode", mode, "--epsilon", epsilon,
              "--out", str(out), *GRID])
        sizes[mode] = len(read_set(out))
    assert sizes["hybrid"] <= sizes["fixed"]


def test_cover_report_writes_json_and_histogram(tmp_path, corpus_path, fixed_set):
    out = tmp_path / "report.json"
    argv = ["cover-report", "--corpus", str(corpus_path), "--set", str(fixed_set), "--out", str(out), "--bins", "5"]
    assert main(argv) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["fraction_covered"] == 1.0
    assert report["max_residual"] <= 2.0
    assert report["distance_kind"] == "max"
    hist = pd.read_csv(tmp_path / "report_hist.csv")
    assert list(hist.columns) == ["bin_start", "bin_end", "count"]
    assert hist["count"].sum() == report["corpus_size"]


def test_coverage_curve(tmp_path, corpus_path):
    out = tmp_path / "curve.csv"
    argv = ["coverage-curve", "--corpus", str(corpus_path), "--epsilons", "4,2",
            "--modes", "fixed,dynamic", "--out", str(out), *GRID]
    assert main(argv) == EXIT_OK
    table = pd.read_csv(out)
    assert list(table["epsilon"]) == [4.0, 2.0]
    assert (table["fixed_size"] > 0).all()
    assert "dynamic_covered" in table.columns


def test_baselines_table(tmp_path, corpus_path):
    out = tmp_path / "baselines.csv"
    assert main(["baselines", "--corpus", str(corpus_path), "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out).set_index("model")
    assert "physics_oracle" in table.index
    physics_rows = table.drop(index="physics_oracle")
    assert table.loc["physics_oracle", "minADE_1"] <= physics_rows["minADE_1"].min() + 1e-9


def test_train_then_evaluate(tmp_path, corpus_path, fixed_set):
    model = tmp_path / "model.json"
    argv = ["train", "--corpus", str(corpus_path), "--set", str(fixed_set), "--epochs", "5", "--out", str(model)]
    assert main(argv) == EXIT_OK
    assert model.exists()

    out = tmp_path / "eval.csv"
    argv = ["evaluate", "--corpus", str(corpus_path), "--set", str(fixed_set), "--model", str(model),
            "--horizon-curve", "--ds", "1,2,4", "--out", str(out)]
    assert main(argv) == EXIT_OK
    row = pd.read_csv(out).iloc[0]
    assert row["model"] == "classifier"
    assert 0.0 <= row["HitRate_5,2"] <= 1.0
    assert (tmp_path / "eval_hitrate.csv").exists()
    assert len(pd.read_csv(tmp_path / "eval_horizon.csv")) == 6


def test_oracle_probs_hit_everything_at_epsilon(tmp_path, corpus_path, fixed_set):
    out = tmp_path / "oracle.csv"
    argv = ["evaluate", "--corpus", str(corpus_path), "--set", str(fixed_set), "--oracle-probs",
            "--ks", "1", "--hit-k", "1", "--hit-d", "2", "--out", str(out)]
    assert main(argv) == EXIT_OK
    assert pd.read_csv(out).iloc[0]["HitRate_1,2"] == 1.0


def test_distance_ablation_has_one_row_per_distance(tmp_path, corpus_path, fixed_set):
    out = tmp_path / "ablation.csv"
    argv = ["evaluate", "--corpus", str(corpus_path), "--set", str(fixed_set), "--distance-ablation",
            "--epochs", "3", "--out", str(out)]
    assert main(argv) == EXIT_OK
    table = pd.read_csv(out)
    assert sorted(table["label_distance"]) == ["avg", "max", "rms"]


def test_usage_errors_exit_with_one(corpus_path, fixed_set):
    assert main(["build-set", "--corpus", str(corpus_path)]) == EXIT_USAGE
    assert main(["no-such-command"]) == EXIT_USAGE
    argv = ["evaluate", "--corpus", str(corpus_path), "--set", str(fixed_set), "--oracle-probs", "--distance-ablation"]
    assert main(argv) == EXIT_USAGE


def test_missing_files_exit_with_two(tmp_path, fixed_set):
    assert main(["build-set", "--corpus", str(tmp_path / "nope.jsonl"), "--epsilon", "2"]) == EXIT_DATA
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"version": 1, "horizon_steps": 2, "dt": 0.5}\nnot json\n')
    assert main(["cover-report", "--corpus", str(bad), "--set", str(fixed_set), "--out", str(tmp_path / "r.json")]) == EXIT_DATA


def test_selfcheck_passes():
    assert main(["selfcheck"]) == EXIT_OK


def test_coverage_curve_keeps_rows_when_no_profile_covers(tmp_path):
    corpus = tmp_path / "noisy.jsonl"
    main(["gen-corpus", "--count", "30", "--noise-std", "3", "--seed", "1", "--out", str(corpus)])
    out = tmp_path / "curve.csv"
    argv = ["coverage-curve", "--corpus", str(corpus), "--epsilons", "4,0.1",
            "--modes", "fixed,hybrid,dynamic", "--out", str(out)]
    assert main(argv) == EXIT_OK
    row = pd.read_csv(out).set_index("epsilon").loc[0.1]
    assert row["dynamic_size"] == 0
    assert row["dynamic_covered"] == 0.0
    assert row["fixed_size"] > 0
    assert row["hybrid_covered"] == 1.0


def test_coverage_curve_on_default_corpus(tmp_path):
    corpus = tmp_path / "corpus.jsonl"
    assert main(["gen-corpus", "--count", "2000", "--seed", "42", "--out", str(corpus)]) == EXIT_OK
    out = tmp_path / "curve.csv"
    argv = ["coverage-curve", "--corpus", str(corpus), "--epsilons", "8,5,4,3,2", "--modes", "fixed", "--out", str(out)]
    assert main(argv) == EXIT_OK
    sizes = list(pd.read_csv(out)["fixed_size"])
    assert sizes == sorted(sizes)
    assert sizes[-1] < 2000


def test_random_cover_is_byte_identical_for_a_seed(tmp_path, corpus_path):
    outputs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        argv = ["build-set", "--corpus", str(corpus_path), "--epsilon", "2", "--random-trials", "4",
                "--seed", "9", "--out", str(out)]
        assert main(argv) == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_train_is_byte_identical_for_a_seed(tmp_path, corpus_path, fixed_set):
    outputs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        argv = ["train", "--corpus", str(corpus_path), "--set", str(fixed_set), "--epochs", "5",
                "--seed", "3", "--out", str(out)]
        assert main(argv) == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_distance_ablation_is_byte_identical_for_a_seed(tmp_path, corpus_path, fixed_set):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        argv = ["evaluate", "--corpus", str(corpus_path), "--set", str(fixed_set), "--distance-ablation",
                "--epochs", "3", "--seed", "4", "--out", str(out)]
        assert main(argv) == EXIT_OK
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_baselines_has_no_wheelbase_flag(corpus_path):
    assert main(["baselines", "--corpus", str(corpus_path), "--wheelbase", "2"]) == EXIT_USAGE


def test_malformed_model_exits_with_two(tmp_path, corpus_path, fixed_set):
    model = tmp_path / "model.json"
    model.write_text(json.dumps({"weights": [[0.0, 1.0], [0.0]], "feature_names": ["speed", "bias"]}))
    argv = ["evaluate", "--corpus", str(corpus_path), "--set", str(fixed_set), "--model", str(model)]
    assert main(argv) == EXIT_DATA
