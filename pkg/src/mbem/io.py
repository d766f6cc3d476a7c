"""CSV and checkpoint formats.

Annotation file: header ``example_id,worker_id,label``, 0-based integers.
Truth file: ``example_id,label``. Soft labels: ``example_id,p0,...,pK-1``
with 12 significant digits. Confusion matrices travel in long format
``worker_id,k,s,prob``. Model checkpoints are a parameter CSV (one value
per line, full precision) plus a JSON sidecar with
``kind, K, d, hidden_units``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import AnnotationSet
from .learn import TrainedModel

__all__ = [
    "write_annotations", "read_annotations",
    "write_truth", "read_truth",
    "write_soft_labels", "read_soft_labels",
    "write_confusions", "read_confusions",
    "write_features", "read_features",
    "save_model", "load_model",
]


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_annotations(path, ann: AnnotationSet) -> None:
    rows = zip(ann.example_ids.tolist(), ann.worker_ids.tolist(),
               ann.labels.tolist())
    _write_rows(path, ["example_id", "worker_id", "label"], rows)


def read_annotations(path, n=None, m=None, K=None) -> AnnotationSet:
    """Load annotations; n/m/K default to the smallest consistent values."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    e, w, z = data[:, 0], data[:, 1], data[:, 2]
    return AnnotationSet(
        n=int(e.max()) + 1 if n is None else n,
        m=int(w.max()) + 1 if m is None else m,
        K=int(z.max()) + 1 if K is None else K,
        example_ids=e, worker_ids=w, labels=z,
    )


def write_truth(path, truth: np.ndarray) -> None:
    truth = np.asarray(truth, dtype=np.int64)
    _write_rows(path, ["example_id", "label"], enumerate(truth.tolist()))


def read_truth(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    truth = np.zeros(data.shape[0], dtype=np.int64)
    truth[data[:, 0]] = data[:, 1]
    return truth


def write_soft_labels(path, soft: np.ndarray) -> None:
    soft = np.asarray(soft, dtype=np.float64)
    header = ["example_id"] + [f"p{k}" for k in range(soft.shape[1])]
    rows = ([i] + [f"{v:.12g}" for v in row] for i, row in enumerate(soft))
    _write_rows(path, header, rows)


def read_soft_labels(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    return data[order, 1:]


def write_confusions(path, confusions: np.ndarray) -> None:
    """Long format worker_id,k,s,prob covering every entry."""
    conf = np.asarray(confusions, dtype=np.float64)
    m, K, _ = conf.shape
    rows = ((a, k, s, f"{conf[a, k, s]:.12g}")
            for a in range(m) for k in range(K) for s in range(K))
    _write_rows(path, ["worker_id", "k", "s", "prob"], rows)


def read_confusions(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    m = int(data[:, 0].max()) + 1
    K = int(data[:, 1].max()) + 1
    conf = np.zeros((m, K, K))
    conf[data[:, 0].astype(int), data[:, 1].astype(int),
         data[:, 2].astype(int)] = data[:, 3]
    return conf


def write_features(path, features: np.ndarray) -> None:
    features = np.asarray(features, dtype=np.float64)
    header = ["example_id"] + [f"x{j}" for j in range(features.shape[1])]
    rows = ([i] + [f"{v:.17g}" for v in row] for i, row in enumerate(features))
    _write_rows(path, header, rows)


def read_features(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    order = np.argsort(data[:, 0])
    return data[order, 1:]


def save_model(out_dir, model: TrainedModel) -> None:
    """Write model_params.csv (one value per line) and model_meta.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "model_params.csv", "w") as fh:
        for v in model.parameters:
            fh.write(f"{v:.17g}\n")
    meta = {"kind": model.learner_kind, "K": model.K, "d": model.d,
            "hidden_units": model.hidden_units}
    with open(out / "model_meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")


def load_model(out_dir) -> TrainedModel:
    out = Path(out_dir)
    params = np.loadtxt(out / "model_params.csv", ndmin=1)
    with open(out / "model_meta.json") as fh:
        meta = json.load(fh)
    return TrainedModel(parameters=params, learner_kind=meta["kind"],
                        K=meta["K"], d=meta["d"],
                        hidden_units=meta["hidden_units"])
