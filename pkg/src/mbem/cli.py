"""Command-line interface: simulate / train / bound / sweep."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import io as mbio
from .core import classic_em, hard_labels, majority_vote_init
from .harness import emit_report, run_sweep, spec_from_dict
from .learn import LearnerConfig, fit
from .methods import MbemConfig, one_hot, run_hard_baseline, run_mbem, \
    weighted_soft_labels
from .seeding import RngSeed
from .simulate import WorkerSkillModel, assign_workers, corrupt_labels, \
    make_synthetic_dataset, sample_worker_pool
from .theory import beta_eps_closed_form, bound_factor, optimal_redundancy

TRAIN_METHODS = ("mv", "em", "weighted-mv", "weighted-em", "mbem",
                 "oracle-weighted-em", "oracle-correct")


def _add_learner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--learner", choices=["logistic", "mlp"], default="logistic")
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=0,
                   help="0 means full batch")
    p.add_argument("--hidden-units", type=int, default=32)
    p.add_argument("--init-scale", type=float, default=0.01)


def _learner_config(args) -> LearnerConfig:
    kind = ("multinomial_logistic" if args.learner == "logistic"
            else "one_hidden_layer_mlp")
    return LearnerConfig(learner_kind=kind, l2_penalty=args.l2,
                         learning_rate=args.learning_rate, epochs=args.epochs,
                         batch_size=args.batch_size,
                         hidden_units=args.hidden_units,
                         init_scale=args.init_scale)


def cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = RngSeed(args.seed)
    skill = WorkerSkillModel(kind=args.skill, gamma=args.gamma, K=args.classes)
    features, truth = make_synthetic_dataset(args.n, args.classes,
                                             args.feature_dim, args.margin,
                                             seed.child("data"))
    confusions = sample_worker_pool(skill, args.m, seed.child("workers"))
    assignment = assign_workers(args.n, args.r, args.m, seed.child("assign"))
    ann = corrupt_labels(truth, assignment, confusions, seed.child("corrupt"))
    mbio.write_features(out / "features.csv", features)
    mbio.write_truth(out / "truth.csv", truth)
    mbio.write_annotations(out / "annotations.csv", ann)
    mbio.write_confusions(out / "workers.csv", confusions)
    print(f"wrote {args.n} examples, {len(ann)} annotations to {out}",
          file=sys.stderr)
    return 0


def cmd_train(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    features = mbio.read_features(args.features)
    ann = mbio.read_annotations(args.annotations)
    seed = RngSeed(args.seed)
    cfg = MbemConfig(rounds=args.rounds, prior_mode=args.prior,
                     smoothing=args.smoothing, learner=_learner_config(args))

    soft = None
    confusions = None
    method = args.method
    if method == "mbem":
        result = run_mbem(features, ann, cfg, seed)
        model, soft, confusions = result.model, result.soft, result.confusions
    elif method in ("weighted-mv", "weighted-em", "oracle-weighted-em"):
        oracle = None
        if method == "oracle-weighted-em":
            if not args.worker_confusions:
                raise SystemExit("--worker-confusions is required for "
                                 "oracle-weighted-em")
            oracle = mbio.read_confusions(args.worker_confusions)
        if method == "weighted-em":
            soft, confusions, _ = classic_em(ann)
        else:
            soft = weighted_soft_labels(ann, method.replace("-", "_"),
                                        oracle_confusions=oracle)
        model = fit(features, soft, cfg.learner, seed.child("fit"))
    elif method in ("mv", "em"):
        if method == "em":
            soft, confusions, _ = classic_em(ann)
        else:
            soft = majority_vote_init(ann)
        targets = one_hot(hard_labels(soft), ann.K)
        model = fit(features, targets, cfg.learner, seed.child("fit"))
    elif method == "oracle-correct":
        if not args.truth:
            raise SystemExit("--truth is required for oracle-correct")
        truth = mbio.read_truth(args.truth)
        model = run_hard_baseline(features, ann, "oracle_correct", cfg, seed,
                                  truth=truth)
    else:
        raise SystemExit(f"unknown method {method}")

    mbio.save_model(out, model)
    if soft is not None:
        mbio.write_soft_labels(out / "posteriors.csv", soft)
    if confusions is not None:
        mbio.write_confusions(out / "confusions.csv", confusions)
    print(f"trained {method} model -> {out}", file=sys.stderr)
    return 0


def cmd_bound(args) -> int:
    if args.grid_step:
        steps = int(round(args.rho / args.grid_step))
        rhos = [i * args.grid_step for i in range(steps + 1)]
    else:
        rhos = [args.rho]
    print("rho,r,beta,factor,is_optimal")
    for rho in rhos:
        best = optimal_redundancy(rho, args.epsilon, args.r_max)
        for r in range(1, args.r_max + 1):
            beta = beta_eps_closed_form(rho, args.epsilon, r)
            factor = bound_factor(rho, args.epsilon, r)
            print(f"{rho:.6g},{r},{beta:.12g},{factor:.12g},"
                  f"{1 if r == best else 0}")
    return 0


def cmd_sweep(args) -> int:
    path = Path(args.config)
    with open(path) as fh:
        cfg = json.load(fh) if path.suffix == ".json" else yaml.safe_load(fh)
    if args.budget is not None:
        cfg["budget"] = args.budget
    if args.seeds:
        cfg["seeds"] = [int(s) for s in args.seeds.split(",")]
    if args.redundancies:
        cfg["redundancies"] = [int(r) for r in args.redundancies.split(",")]
    if args.methods:
        cfg["methods"] = args.methods.split(",")
    spec = spec_from_dict(cfg)
    result = run_sweep(spec, jobs=args.jobs)
    emit_report(result, args.out_dir)
    failures = [rec for rec in result.records if rec.error]
    for rec in failures:
        print(f"cell ({rec.method}, r={rec.r}, seed={rec.seed}) failed: "
              f"{rec.error}", file=sys.stderr)
    print(f"{len(result.records) - len(failures)}/{len(result.records)} "
          f"cells succeeded -> {args.out_dir}", file=sys.stderr)
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbem",
        description="Learning from noisy crowdsourced labels: simulation, "
                    "training methods, redundancy bounds, budget sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic crowdsourced dataset")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--feature-dim", type=int, default=4)
    p.add_argument("--margin", type=float, default=6.0)
    p.add_argument("--skill", choices=["hammer_spammer",
                                       "classwise_hammer_spammer"],
                   default="hammer_spammer")
    p.add_argument("--gamma", type=float, default=0.2)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one method on an annotation file")
    p.add_argument("--annotations", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--method", choices=TRAIN_METHODS, required=True)
    p.add_argument("--rounds", type=int, default=2)
    p.add_argument("--prior", choices=["uniform", "estimated"],
                   default="uniform")
    p.add_argument("--smoothing", type=float, default=1.0)
    p.add_argument("--truth", help="truth CSV (oracle-correct)")
    p.add_argument("--worker-confusions",
                   help="true confusion CSV (oracle-weighted-em)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    _add_learner_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bound", help="tabulate the redundancy bound factor")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--r-max", type=int, default=9)
    p.add_argument("--grid-step", type=float, default=None,
                   help="sweep rho from 0 to --rho in these steps")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("sweep", help="fixed-budget redundancy sweep")
    p.add_argument("--config", required=True,
                   help="YAML or JSON sweep spec (see README)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--seeds", default=None, help="comma-separated override")
    p.add_argument("--redundancies", default=None,
                   help="comma-separated override")
    p.add_argument("--methods", default=None, help="comma-separated override")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
