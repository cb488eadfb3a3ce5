"""
Command-Line Interface

Subcommands map one-to-one onto library operations: corpus generation, set
construction, coverage reporting, physics baselines, classifier training and
evaluation, the self-check suite, and the HTTP service.

Exit codes: 0 success, 1 usage error, 2 data error, 3 self-check violation.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from covertraj.baselines import PhysicsModelKind
from covertraj.config import get_settings
from covertraj.coverset import CoverConfig, coverage_report, greedy_cover, random_cover
from covertraj.dynamics import (
    DEFAULT_LAT_VALUES,
    DEFAULT_LON_VALUES,
    ControlGrid,
    IntegrationConfig,
    VehicleParams,
    dynamic_cover_set,
    dynamic_coverage_report,
    hybrid_set,
)
from covertraj.errors import CoverTrajError, EmptySet
from covertraj.metrics import (
    DEFAULT_HIT_D,
    DEFAULT_HIT_K,
    DEFAULT_KS,
    EvalInstance,
    evaluate_dataset,
)
from covertraj.models.classifier import DEFAULT_LR, SoftmaxModel
from covertraj.models.predictor import (
    OraclePredictor,
    PhysicsOraclePredictor,
    PhysicsPredictor,
    SetPredictor,
)
from covertraj.models.trajectory import AgentState, DistanceKind, TrajectoryCorpus, TrajectorySet
from covertraj.selfcheck import run_selfcheck
from covertraj.utils.io import read_corpus, read_set, write_corpus, write_json, write_set, write_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SELFCHECK = 3

DEFAULT_REF_SPEED = 10.0


class UsageError(Exception):
    """Raised instead of argparse's own exit so usage errors map to exit code 1"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _pair(text: str) -> tuple:
    values = _floats(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    return tuple(values)


# -- shared helpers ---------------------------------------------------------

def _integration(args, corpus: Optional[TrajectoryCorpus] = None) -> IntegrationConfig:
    settings = get_settings()
    substeps = getattr(args, "substeps", None) or settings.substeps
    if corpus is not None:
        return IntegrationConfig(dt=corpus.dt, substeps=substeps, horizon_steps=corpus.n_steps)
    return IntegrationConfig(dt=settings.dt, substeps=substeps, horizon_steps=settings.horizon_steps)


def _vehicle(args) -> VehicleParams:
    return VehicleParams(getattr(args, "wheelbase", None) or get_settings().wheelbase)


def _grid(args) -> ControlGrid:
    return ControlGrid(tuple(args.lat_values), tuple(args.lon_values))


def _load_corpus(args) -> TrajectoryCorpus:
    return read_corpus(args.corpus, min_displacement=getattr(args, "min_displacement", None))


def _instances(corpus: TrajectoryCorpus) -> List[EvalInstance]:
    return [
        EvalInstance(index=i, state=seed, truth=truth)
        for i, (truth, seed) in enumerate(zip(corpus.items, corpus.seed_states))
    ]


def _subsample(corpus: TrajectoryCorpus, k: Optional[int], seed: int) -> TrajectoryCorpus:
    if k is None or k >= len(corpus):
        return corpus
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = np.sort(rng.choice(len(corpus), size=k, replace=False))
    logger.info("Subsampled %d of %d trajectories (seed %d)", k, len(corpus), seed)
    return corpus.subset(picked)


def _build(args, corpus: TrajectoryCorpus, mode: str, epsilon: float) -> TrajectorySet:
    config = CoverConfig(
        epsilon=epsilon,
        kind=DistanceKind(args.distance),
        max_set_size=args.max_set_size,
        candidates=args.candidates,
    )
    if mode == "fixed":
        if args.random_trials:
            return random_cover(corpus, config, args.random_trials, args.seed)
        return greedy_cover(corpus, config)
    reference = AgentState(speed=args.ref_speed)
    builder = dynamic_cover_set if mode == "dynamic" else hybrid_set
    return builder(corpus, reference, _grid(args), _vehicle(args), _integration(args, corpus), config)


def _report(trajectory_set: TrajectorySet, corpus: TrajectoryCorpus, config: CoverConfig):
    if trajectory_set.n_dynamic:
        return dynamic_coverage_report(trajectory_set, corpus, config)
    return coverage_report(trajectory_set, corpus, config)


def _progress(iterable, **kwargs):
    return tqdm(iterable, leave=False, disable=None, **kwargs)


def _emit(table: pd.DataFrame, out: Optional[Path]):
    if out is not None:
        for path in write_table(table, out):
            print(f"✅ Wrote {path}")
    print(table.to_string(index=False))


# -- subcommands ------------------------------------------------------------

def cmd_gen_corpus(args) -> int:
    from ml.prepare_data import gen_corpus

    header, records = gen_corpus(
        args.count,
        horizon_s=args.horizon_s,
        dt=args.dt,
        speed_range=tuple(args.speed_range),
        noise_std=args.noise_std,
        rng_seed=args.seed,
        grid=_grid(args),
        piecewise_prob=args.piecewise_prob,
        profile_jitter=args.profile_jitter,
        profile=args.profile,
        params=_vehicle(args),
        substeps=args.substeps or get_settings().substeps,
    )
    write_corpus(args.out, header, records)
    print(f"✅ Wrote {len(records)} records to {args.out}")
    return EXIT_OK


def cmd_build_set(args) -> int:
    corpus = _subsample(_load_corpus(args), args.subsample, args.seed)
    trajectory_set = _build(args, corpus, args.mode, args.epsilon)
    if args.subsample is not None:
        trajectory_set.meta.update({"subsample": args.subsample, "subsample_seed": args.seed})
    out = args.out or get_settings().resolved_set_path()
    write_set(out, trajectory_set)
    status = "complete" if trajectory_set.complete else "incomplete"
    print(f"✅ {args.mode} set: {len(trajectory_set)} modes ({status}) -> {out}")
    return EXIT_OK


def cmd_cover_report(args) -> int:
    trajectory_set = read_set(args.set)
    corpus = _load_corpus(args)
    epsilon = args.epsilon if args.epsilon is not None else trajectory_set.epsilon
    if epsilon is None:
        raise UsageError("--epsilon is required for sets built without one")
    kind = DistanceKind(args.distance or (trajectory_set.kind or DistanceKind.MAX_L2))
    report = _report(trajectory_set, corpus, CoverConfig(epsilon=epsilon, kind=kind))

    out = Path(args.out)
    payload = {"distance_kind": kind.value, **report.to_dict()}
    write_json(out, payload)
    hist_path = out.with_name(out.stem + "_hist.csv")
    write_table(report.histogram(args.bins), hist_path, json_too=False)
    print(f"✅ Coverage {report.fraction_covered:.4f} (max residual {report.max_residual:.3f} m)")
    print(f"   Report: {out}")
    print(f"   Histogram: {hist_path}")
    return EXIT_OK


def cmd_coverage_curve(args) -> int:
    corpus = _load_corpus(args)
    rows = []
    for epsilon in _progress(args.epsilons, desc="epsilon"):
        row = {"epsilon": epsilon}
        config = CoverConfig(epsilon=epsilon, kind=DistanceKind(args.distance))
        for mode in args.modes:
            try:
                trajectory_set = _build(args, corpus, mode, epsilon)
            except EmptySet:
                logger.warning("No %s mode covers any sample at epsilon %g", mode, epsilon)
                row[f"{mode}_size"], row[f"{mode}_covered"] = 0, 0.0
                continue
            row[f"{mode}_size"] = len(trajectory_set)
            if mode != "fixed":
                row[f"{mode}_covered"] = _report(trajectory_set, corpus, config).fraction_covered
        rows.append(row)
    _emit(pd.DataFrame(rows), args.out)
    return EXIT_OK


def _metric_row(name: str, evaluation) -> dict:
    return {"model": name, **evaluation.summary()}


def cmd_baselines(args) -> int:
    corpus = _load_corpus(args)
    instances = _instances(corpus)
    cfg = _integration(args, corpus)
    predictors = [(kind.value, PhysicsPredictor(kind, cfg)) for kind in PhysicsModelKind]
    predictors.append(("physics_oracle", PhysicsOraclePredictor(cfg)))

    rows = []
    for name, predictor in _progress(predictors, desc="baselines"):
        evaluation = evaluate_dataset(
            predictor, instances, ks=args.ks, hit_k=args.hit_k, hit_d=args.hit_d, n_jobs=args.n_jobs
        )
        rows.append(_metric_row(name, evaluation))
    _emit(pd.DataFrame(rows), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    from ml.train_model import SetClassifierTrainer

    corpus = _load_corpus(args)
    trajectory_set = read_set(args.set)
    trainer = SetClassifierTrainer(
        trajectory_set,
        epochs=args.epochs,
        lr=args.lr,
        rng_seed=args.seed,
        label_kind=DistanceKind(args.label_distance),
    )
    model = trainer.fit(corpus)
    out = args.out or get_settings().resolved_model_path()
    model.save_model(out)
    metrics = trainer.evaluate(corpus)
    print(f"✅ Trained {model.n_modes}-mode model -> {out}")
    print("   " + "  ".join(f"{k}={v:.4f}" for k, v in metrics.items()))
    return EXIT_OK


def _evaluate(args, predictor, instances):
    return evaluate_dataset(
        predictor,
        instances,
        ks=args.ks,
        ds=args.ds or (args.hit_d,),
        hit_k=args.hit_k,
        hit_d=args.hit_d,
        horizon=args.horizon_curve,
        n_jobs=args.n_jobs,
    )


def _distance_ablation(args, trajectory_set: TrajectorySet, corpus: TrajectoryCorpus) -> pd.DataFrame:
    from ml.train_model import SetClassifierTrainer, split_corpus

    train_corpus, test_corpus = split_corpus(corpus, test_size=args.test_size, rng_seed=args.seed)
    instances = _instances(test_corpus)
    rows = []
    for kind in _progress(list(DistanceKind), desc="label distance"):
        trainer = SetClassifierTrainer(
            trajectory_set, epochs=args.epochs, lr=args.lr, rng_seed=args.seed,
            label_kind=kind, show_progress=False,
        )
        model = trainer.fit(train_corpus)
        evaluation = _evaluate(args, SetPredictor(trajectory_set, model), instances)
        rows.append({"label_distance": kind.value, **evaluation.summary()})
    return pd.DataFrame(rows)


def cmd_evaluate(args) -> int:
    corpus = _load_corpus(args)
    trajectory_set = read_set(args.set)

    if args.distance_ablation:
        _emit(_distance_ablation(args, trajectory_set, corpus), args.out)
        return EXIT_OK

    if args.oracle_probs:
        predictor = OraclePredictor(trajectory_set)
        name = "oracle"
    else:
        model_path = args.model or get_settings().resolved_model_path()
        predictor = SetPredictor(trajectory_set, SoftmaxModel.load_model(model_path, trajectory_set))
        name = "classifier"

    evaluation = _evaluate(args, predictor, _instances(corpus))
    _emit(pd.DataFrame([_metric_row(name, evaluation)]), args.out)
    if args.out is not None:
        out = Path(args.out)
        curve = evaluation.hit_rate_curve().reset_index()
        write_table(curve, out.with_name(out.stem + "_hitrate.csv"))
        horizon = evaluation.horizon_curve()
        if horizon is not None:
            write_table(horizon, out.with_name(out.stem + "_horizon.csv"))
    return EXIT_OK


def cmd_selfcheck(args) -> int:
    results = run_selfcheck(args.seed)
    failed = False
    for name, violations in results.items():
        marker = "❌" if violations else "✅"
        print(f"{marker} {name}: {len(violations)} violations")
        for message in violations[:10]:
            print(f"   {message}")
        failed = failed or bool(violations)
    return EXIT_SELFCHECK if failed else EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("covertraj.main:app", host=args.host, port=args.port)
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _add_corpus(p, required: bool = True):
    p.add_argument("--corpus", type=Path, required=required, help="corpus JSONL file")
    p.add_argument("--min-displacement", type=float, default=None,
                   help="drop records whose final point is closer than this to the start (m)")


def _add_vehicle(p):
    p.add_argument("--wheelbase", type=float, default=None, help="vehicle wheelbase b (m)")
    p.add_argument("--substeps", type=int, default=None, help="integration substeps per sample")


def _add_grid(p):
    p.add_argument("--lat-values", type=_floats, default=list(DEFAULT_LAT_VALUES))
    p.add_argument("--lon-values", type=_floats, default=list(DEFAULT_LON_VALUES))


def _add_cover(p):
    p.add_argument("--distance", choices=[k.value for k in DistanceKind], default=DistanceKind.MAX_L2.value)
    p.add_argument("--random-trials", type=int, default=0, help="best of T randomized covers")
    p.add_argument("--max-set-size", type=int, default=None)
    p.add_argument("--candidates", choices=["all", "uncovered"], default="all")
    p.add_argument("--ref-speed", type=float, default=DEFAULT_REF_SPEED,
                   help="speed of the reference state for dynamic modes (m/s)")
    p.add_argument("--seed", type=int, default=0)
    _add_grid(p)
    _add_vehicle(p)


def _add_metrics(p):
    p.add_argument("--ks", type=_ints, default=list(DEFAULT_KS))
    p.add_argument("--hit-k", type=int, default=DEFAULT_HIT_K)
    p.add_argument("--hit-d", type=float, default=DEFAULT_HIT_D)
    p.add_argument("--n-jobs", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="CSV output (JSON written alongside)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="covertraj", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--log-level", default=None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-corpus", help="generate a synthetic kinematic corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--horizon-s", type=float, default=6.0)
    p.add_argument("--dt", type=float, default=0.5)
    p.add_argument("--speed-range", type=_pair, default=(0.0, 15.0))
    p.add_argument("--noise-std", type=float, default=0.0)
    p.add_argument("--piecewise-prob", type=float, default=0.0)
    p.add_argument("--profile-jitter", type=float, default=0.0)
    p.add_argument("--profile", type=_pair, default=None, help="force every record to a_lat,a_lon")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    _add_grid(p)
    _add_vehicle(p)
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("build-set", help="build a fixed, dynamic or hybrid trajectory set")
    _add_corpus(p)
    p.add_argument("--mode", choices=["fixed", "dynamic", "hybrid"], default="fixed")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--subsample", type=int, default=None, help="cover a uniform random subsample of K items")
    p.add_argument("--out", type=Path, default=None)
    _add_cover(p)
    p.set_defaults(func=cmd_build_set)

    p = sub.add_parser("cover-report", help="coverage of a corpus by a set")
    _add_corpus(p)
    p.add_argument("--set", type=Path, required=True)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--distance", choices=[k.value for k in DistanceKind], default=None)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--out", type=Path, required=True, help="JSON report; histogram goes to <stem>_hist.csv")
    p.set_defaults(func=cmd_cover_report)

    p = sub.add_parser("coverage-curve", help="set size as a function of epsilon")
    _add_corpus(p)
    p.add_argument("--epsilons", type=_floats, default=[8.0, 5.0, 4.0, 3.0, 2.0])
    p.add_argument("--modes", type=lambda s: s.split(","), default=["fixed", "hybrid", "dynamic"])
    p.add_argument("--out", type=Path, default=None)
    _add_cover(p)
    p.set_defaults(func=cmd_coverage_curve)

    p = sub.add_parser("baselines", help="physics extrapolation baselines and their oracle")
    _add_corpus(p)
    _add_metrics(p)
    p.add_argument("--substeps", type=int, default=None, help="integration substeps per sample")
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("train", help="train the set classifier")
    _add_corpus(p)
    p.add_argument("--set", type=Path, required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--label-distance", choices=[k.value for k in DistanceKind], default=DistanceKind.AVG_L2.value)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="minADE / FDE / HitRate table for a predictor")
    _add_corpus(p)
    p.add_argument("--set", type=Path, required=True)
    source = p.add_mutually_exclusive_group()
    source.add_argument("--model", type=Path, default=None)
    source.add_argument("--oracle-probs", action="store_true",
                        help="probability 1 on the mode closest to the ground truth")
    source.add_argument("--distance-ablation", action="store_true",
                        help="train and evaluate once per label distance")
    p.add_argument("--ds", type=_floats, default=None, help="hit thresholds for the hit-rate curve")
    p.add_argument("--horizon-curve", action="store_true")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=DEFAULT_LR)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-size", type=float, default=0.2)
    _add_metrics(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("selfcheck", help="run the oracle self-checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selfcheck)

    p = sub.add_parser("serve", help="start the prediction API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    settings = get_settings()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(level=(args.log_level or settings.log_level).upper())
    if getattr(args, "n_jobs", 0) is None:
        args.n_jobs = settings.n_jobs
    try:
        return args.func(args)
    except UsageError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except (CoverTrajError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_DATA
