"""Fixed-budget experiment runner.

Given a total annotation budget N, each redundancy level r trains on
floor(N / r) examples carrying r labels each. Within one replicate seed,
the test set and worker pool are shared across every method and
redundancy level so comparisons are paired; training data is synthesized
fresh per redundancy level. Every (method, r, seed) cell derives its
randomness from substreams keyed by those coordinates, so results do not
depend on execution order or the number of worker processes, and a
failed cell is recorded without aborting the rest.

Instead of synthesizing data, a sweep can run against pre-collected
annotation/feature/truth files; each cell then subsamples floor(N / r)
examples and r of their annotations.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io as mbio
from .core import AnnotationSet
from .learn import LearnerConfig, zero_one_risk, fit
from .methods import MbemConfig, one_hot, run_hard_baseline, run_mbem, \
    run_weighted_baseline
from .seeding import RngSeed
from .simulate import WorkerSkillModel, assign_workers, corrupt_labels, \
    make_synthetic_dataset, sample_worker_pool, subsample_redundancy

__all__ = [
    "METHODS",
    "SweepSpec",
    "CellRecord",
    "CellAggregate",
    "SweepResult",
    "run_sweep",
    "aggregate",
    "emit_report",
    "read_sweep_csv",
    "spec_from_dict",
]

METHODS = ("mv", "em", "weighted-mv", "weighted-em", "mbem",
           "oracle-weighted-em", "oracle-correct", "truth")


@dataclass(frozen=True)
class SweepSpec:
    budget: int
    redundancies: tuple[int, ...]
    methods: tuple[str, ...]
    skill: WorkerSkillModel
    m: int
    n_test: int
    d: int
    margin: float
    seeds: tuple[int, ...]
    mbem: MbemConfig = field(default_factory=MbemConfig)
    # optional file-backed mode: subsample r labels from recorded annotations
    annotations_file: str | None = None
    features_file: str | None = None
    truth_file: str | None = None
    test_features_file: str | None = None
    test_truth_file: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "redundancies", tuple(self.redundancies))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "seeds", tuple(self.seeds))
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}")
        for r in self.redundancies:
            if r < 1 or self.budget // r < 1:
                raise ValueError(f"budget {self.budget} cannot fund redundancy {r}")
        if not self.seeds:
            raise ValueError("need at least one seed")

    @property
    def file_mode(self) -> bool:
        return self.annotations_file is not None


@dataclass
class CellRecord:
    method: str
    r: int
    n_train: int
    seed: int
    test_risk: float
    train_risk: float
    wall_time: float
    error: str | None = None


@dataclass
class CellAggregate:
    mean: float
    stderr: float | None
    n_seeds: int


@dataclass
class SweepResult:
    records: list[CellRecord]
    aggregates: dict[tuple[str, int], CellAggregate]


def _restrict(ann: AnnotationSet, keep: np.ndarray) -> AnnotationSet:
    """AnnotationSet over the examples in keep, re-indexed to 0..len-1."""
    remap = np.full(ann.n, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    mask = remap[ann.example_ids] >= 0
    return AnnotationSet(n=keep.size, m=ann.m, K=ann.K,
                         example_ids=remap[ann.example_ids[mask]],
                         worker_ids=ann.worker_ids[mask],
                         labels=ann.labels[mask])


def _cell_data(spec: SweepSpec, r: int, seed: int):
    """(X, y, ann, conf_true|None, X_test, y_test) for one (r, seed) cell."""
    n_train = spec.budget // r
    root = RngSeed(seed)
    if spec.file_mode:
        ann_all = mbio.read_annotations(spec.annotations_file)
        X_all = mbio.read_features(spec.features_file)
        y_all = mbio.read_truth(spec.truth_file)
        X_test = mbio.read_features(spec.test_features_file)
        y_test = mbio.read_truth(spec.test_truth_file)
        if n_train > ann_all.n:
            raise ValueError(f"annotation file has only {ann_all.n} examples, "
                             f"cell needs {n_train}")
        pick_rng = root.child("subset", r).generator()
        keep = np.sort(pick_rng.choice(ann_all.n, size=n_train, replace=False))
        ann = subsample_redundancy(_restrict(ann_all, keep), r,
                                   root.child("labels", r))
        return X_all[keep], y_all[keep], ann, None, X_test, y_test

    K = spec.skill.K
    X, y = make_synthetic_dataset(n_train, K, spec.d, spec.margin,
                                  root.child("train-data", r))
    X_test, y_test = make_synthetic_dataset(spec.n_test, K, spec.d, spec.margin,
                                            root.child("test-data"))
    conf_true = sample_worker_pool(spec.skill, spec.m, root.child("workers"))
    assignment = assign_workers(n_train, r, spec.m, root.child("assign", r))
    ann = corrupt_labels(y, assignment, conf_true, root.child("corrupt", r))
    return X, y, ann, conf_true, X_test, y_test


def _train_method(method: str, X, y, ann, conf_true, cfg: MbemConfig, seed):
    if method == "truth":
        return fit(X, one_hot(y, ann.K), cfg.learner, seed.child("fit"))
    if method in ("mv", "em"):
        return run_hard_baseline(X, ann, method, cfg, seed)
    if method == "oracle-correct":
        return run_hard_baseline(X, ann, "oracle_correct", cfg, seed, truth=y)
    if method in ("weighted-mv", "weighted-em"):
        return run_weighted_baseline(X, ann, method.replace("-", "_"), cfg, seed)
    if method == "oracle-weighted-em":
        if conf_true is None:
            raise ValueError("oracle-weighted-em needs the true confusion "
                             "matrices; unavailable in file mode")
        return run_weighted_baseline(X, ann, "oracle_weighted_em", cfg, seed,
                                     oracle_confusions=conf_true)
    if method == "mbem":
        return run_mbem(X, ann, cfg, seed).model
    raise ValueError(f"unknown method {method!r}")


def _run_cell(spec: SweepSpec, method: str, r: int, seed: int) -> CellRecord:
    n_train = spec.budget // r
    start = time.perf_counter()
    try:
        X, y, ann, conf_true, X_test, y_test = _cell_data(spec, r, seed)
        cell_seed = RngSeed(seed).child("method", method, r)
        model = _train_method(method, X, y, ann, conf_true, spec.mbem, cell_seed)
        record = CellRecord(method=method, r=r, n_train=n_train, seed=seed,
                            test_risk=zero_one_risk(model, X_test, y_test),
                            train_risk=zero_one_risk(model, X, y),
                            wall_time=time.perf_counter() - start)
    except Exception as exc:
        record = CellRecord(method=method, r=r, n_train=n_train, seed=seed,
                            test_risk=float("nan"), train_risk=float("nan"),
                            wall_time=time.perf_counter() - start,
                            error=f"{type(exc).__name__}: {exc}")
    return record


def _run_cell_star(args):
    return _run_cell(*args)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Run every (method, r, seed) cell and aggregate over seeds.

    Cells execute in worker processes when jobs > 1; the record order
    (and therefore the emitted files) is fixed by the spec, not by
    completion order.
    """
    cells = [(spec, method, r, seed)
             for method in spec.methods
             for r in spec.redundancies
             for seed in spec.seeds]
    if jobs <= 1:
        records = [_run_cell(*cell) for cell in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell_star, cells, chunksize=1))
    return SweepResult(records=records,
                       aggregates=aggregate(records, strict=False))


def aggregate(records, strict: bool = True) -> dict[tuple[str, int], CellAggregate]:
    """Per (method, r): mean test risk and standard error over seeds.

    Standard error is the sample standard deviation divided by
    sqrt(#seeds), None for single-seed cells. Failed cells are excluded;
    a cell with no successful record raises when strict, and is dropped
    otherwise (the failures stay visible in the records).
    """
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple[str, int], list[float]] = {}
    for rec in records:
        groups.setdefault((rec.method, rec.r), [])
        if rec.error is None:
            groups[(rec.method, rec.r)].append(rec.test_risk)
    out = {}
    for key, values in groups.items():
        if not values:
            if strict:
                raise ValueError(f"cell {key} has no successful runs")
            continue
        arr = np.asarray(values)
        stderr = (float(arr.std(ddof=1) / np.sqrt(arr.size))
                  if arr.size > 1 else None)
        out[key] = CellAggregate(mean=float(arr.mean()), stderr=stderr,
                                 n_seeds=arr.size)
    return out


def emit_report(result: SweepResult, out_dir) -> None:
    """Write sweep.csv, aggregate.csv, plotdata_<method>.csv, timing.csv.

    sweep.csv carries only deterministic fields (floats in shortest
    round-trip form) so reruns are byte-identical; wall-clock times go
    to timing.csv.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "sweep.csv", "w") as fh:
        fh.write("method,r,n_train,seed,test_risk,train_risk,error\n")
        for rec in result.records:
            err = rec.error.replace(",", ";").replace("\n", " ") if rec.error else ""
            fh.write(f"{rec.method},{rec.r},{rec.n_train},{rec.seed},"
                     f"{rec.test_risk!r},{rec.train_risk!r},{err}\n")

    with open(out / "timing.csv", "w") as fh:
        fh.write("method,r,seed,wall_time_seconds\n")
        for rec in result.records:
            fh.write(f"{rec.method},{rec.r},{rec.seed},{rec.wall_time:.6f}\n")

    keys = sorted(result.aggregates)
    with open(out / "aggregate.csv", "w") as fh:
        fh.write("method,r,mean,stderr,n_seeds\n")
        for method, r in keys:
            agg = result.aggregates[(method, r)]
            se = "" if agg.stderr is None else repr(agg.stderr)
            fh.write(f"{method},{r},{agg.mean!r},{se},{agg.n_seeds}\n")

    for method in sorted({k[0] for k in keys}):
        with open(out / f"plotdata_{method}.csv", "w") as fh:
            fh.write("r,mean,stderr\n")
            for meth, r in keys:
                if meth != method:
                    continue
                agg = result.aggregates[(meth, r)]
                se = "" if agg.stderr is None else f"{agg.stderr:.6g}"
                fh.write(f"{r},{agg.mean:.6g},{se}\n")


def read_sweep_csv(path) -> list[CellRecord]:
    """Parse sweep.csv back into records (wall times are not stored there)."""
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        assert header[:4] == ["method", "r", "n_train", "seed"]
        for line in fh:
            parts = line.rstrip("\n").split(",")
            records.append(CellRecord(
                method=parts[0], r=int(parts[1]), n_train=int(parts[2]),
                seed=int(parts[3]), test_risk=float(parts[4]),
                train_risk=float(parts[5]), wall_time=0.0,
                error=parts[6] or None))
    return records


def spec_from_dict(cfg: dict) -> SweepSpec:
    """Build a SweepSpec from a parsed config mapping (see README for keys)."""
    cfg = dict(cfg)
    skill_cfg = cfg.get("worker_model", {})
    skill = WorkerSkillModel(kind=skill_cfg.get("kind", "hammer_spammer"),
                             gamma=float(skill_cfg.get("gamma", 0.2)),
                             K=int(cfg.get("classes", 2)))
    learner_cfg = cfg.get("learner", {})
    learner = LearnerConfig(
        learner_kind=learner_cfg.get("kind", "multinomial_logistic"),
        l2_penalty=float(learner_cfg.get("l2_penalty", 1e-4)),
        learning_rate=float(learner_cfg.get("learning_rate", 0.1)),
        epochs=int(learner_cfg.get("epochs", 300)),
        batch_size=int(learner_cfg.get("batch_size", 0)),
        hidden_units=int(learner_cfg.get("hidden_units", 32)),
        init_scale=float(learner_cfg.get("init_scale", 0.01)),
    )
    mbem_cfg = MbemConfig(rounds=int(cfg.get("rounds", 2)),
                          prior_mode=cfg.get("prior", "uniform"),
                          smoothing=float(cfg.get("smoothing", 1.0)),
                          learner=learner)
    return SweepSpec(
        budget=int(cfg["budget"]),
        redundancies=tuple(int(r) for r in cfg["redundancies"]),
        methods=tuple(cfg["methods"]),
        skill=skill,
        m=int(cfg.get("m", 100)),
        n_test=int(cfg.get("n_test", 4000)),
        d=int(cfg.get("feature_dim", 2 * skill.K)),
        margin=float(cfg.get("margin", 6.0)),
        seeds=tuple(int(s) for s in cfg["seeds"]),
        mbem=mbem_cfg,
        annotations_file=cfg.get("annotations_file"),
        features_file=cfg.get("features_file"),
        truth_file=cfg.get("truth_file"),
        test_features_file=cfg.get("test_features_file"),
        test_truth_file=cfg.get("test_truth_file"),
    )
