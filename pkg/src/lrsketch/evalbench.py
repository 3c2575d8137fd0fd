"""Synthetic datasets, evaluation metrics, and experiment sweeps.

Every matrix is scaled so its top singular value is 1 before anything
else happens. A sketch's quality on a test set is its mean
approximation loss minus the unavoidable optimum ("excess error"): zero
means the sketch costs nothing over exact truncated SVD.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .linalg import as_matrix, best_rank_k, frobenius_norm, reference_svd
from .formats import load_matrix
from .scw import scw_loss
from .seeding import derived_seed, rng_from
from .sketch import dense_random_sketch, sparse_random_sketch
from .trainer import TrainConfig, train_mixed_joint, train_mixed_separate, train_sketch

SKETCH_TYPES = ("sparse_random", "dense_random", "learned", "mixed_j", "mixed_s")

# seed tag for per-trial randomness inside run_experiment
_SEED_TRIAL = 5


@dataclass(frozen=True)
class DatasetSpec:
    """Declarative description of one matrix distribution.

    kinds:
      spiked                 shared low-rank subspaces, jittered per sample
      lowrank_plus_noise     fresh independent subspaces per sample
      rotated_shared_subspace  shared left basis rotated by a per-sample angle
      files                  load from a manifest of DMAT1/CSV files
    """

    name: str
    kind: str
    n: int = 0
    d: int = 0
    count_train: int = 1
    count_test: int = 1
    spikes: int = 4
    decay: float = 0.8
    noise: float = 0.1
    drift: float = 0.1
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("spiked", "lowrank_plus_noise",
                             "rotated_shared_subspace", "files"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind != "files":
            if self.n < 1 or self.d < 1:
                raise ValueError("dimensions must be >= 1")
            if self.count_train < 1 or self.count_test < 1:
                raise ValueError("matrix counts must be >= 1")
            if self.spikes < 1 or self.noise < 0 or self.decay <= 0:
                raise ValueError("invalid spike/noise/decay parameters")


@dataclass(frozen=True)
class ResultRecord:
    dataset: str
    k: int
    m: int
    sketch_type: str
    err: float
    std_err: float
    trials: int


def normalize_top_singular(a) -> np.ndarray:
    """Scale so the top singular value is exactly 1 (idempotent)."""
    a = as_matrix(a)
    f = reference_svd(a)
    if f.rank == 0:
        raise ValueError("cannot normalize a zero matrix")
    return a / f.sigma[0]


def _orth(g: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(g)
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    return q * sgn


def _noise_term(rng, n, d, noise):
    if noise == 0:
        return 0.0
    return (noise / (np.sqrt(n) + np.sqrt(d))) * rng.standard_normal((n, d))


def _generate_synthetic(spec: DatasetSpec):
    rng = rng_from(spec.seed)
    n, d, r = spec.n, spec.d, spec.spikes
    if r > min(n, d):
        raise ValueError(f"spikes={r} exceeds min(n, d)={min(n, d)}")
    sig = spec.decay ** np.arange(r)
    u0 = _orth(rng.standard_normal((n, r)))
    v0 = _orth(rng.standard_normal((d, r)))
    if spec.kind == "rotated_shared_subspace":
        if n < 2 * r:
            raise ValueError("rotated_shared_subspace needs n >= 2 * spikes")
        # orthonormal block orthogonal to u0, the rotation target
        w0 = _orth(np.concatenate([u0, rng.standard_normal((n, r))], axis=1))[:, r:]

    def sample():
        if spec.kind == "spiked":
            u = _orth(u0 + spec.drift * rng.standard_normal((n, r)))
            v = _orth(v0 + spec.drift * rng.standard_normal((d, r)))
        elif spec.kind == "lowrank_plus_noise":
            u = _orth(rng.standard_normal((n, r)))
            v = _orth(rng.standard_normal((d, r)))
        else:  # rotated_shared_subspace
            theta = rng.uniform(-spec.drift, spec.drift)
            u = u0 * np.cos(theta) + w0 * np.sin(theta)
            v = v0
        a = (u * sig) @ v.T + _noise_term(rng, n, d, spec.noise)
        return normalize_top_singular(a)

    train = [sample() for _ in range(spec.count_train)]
    test = [sample() for _ in range(spec.count_test)]
    return train, test


def _load_files(spec: DatasetSpec):
    if spec.path is None:
        raise ValueError("files dataset needs a manifest path")
    with open(spec.path, "r", encoding="ascii") as fh:
        manifest = json.load(fh)
    base = os.path.dirname(os.path.abspath(spec.path))

    def load_all(paths):
        out = []
        for rel in paths:
            out.append(normalize_top_singular(load_matrix(os.path.join(base, rel))))
        return out

    return load_all(manifest["train"]), load_all(manifest["test"])


def generate_dataset(spec: DatasetSpec):
    """Build (train, test) matrix lists; deterministic in spec.seed."""
    if spec.kind == "files":
        return _load_files(spec)
    return _generate_synthetic(spec)


def optimal_loss(test, k: int) -> float:
    """Mean Frobenius distance from each matrix to its best rank-k truncation."""
    if not test:
        raise ValueError("empty test set")
    return float(np.mean([frobenius_norm(a - best_rank_k(a, k)) for a in test]))


def mean_scw_loss(test, s, k: int) -> float:
    """Mean sketch-and-solve approximation loss over a test set."""
    if not test:
        raise ValueError("empty test set")
    return float(np.mean([scw_loss(a, s, k) for a in test]))


def err_metric(test, s, k: int) -> float:
    """Mean sketch-and-solve loss minus the optimal loss (excess error)."""
    return mean_scw_loss(test, s, k) - optimal_loss(test, k)


def _trial_sketch(train_set, n: int, k: int, m: int, sketch_type: str,
                  trial_seed: int, train_cfg: TrainConfig):
    if sketch_type == "sparse_random":
        return sparse_random_sketch(m, n, trial_seed)
    if sketch_type == "dense_random":
        return dense_random_sketch(m, n, trial_seed)
    cfg = replace(train_cfg, k=k, seed=trial_seed)
    if sketch_type == "learned":
        return train_sketch(train_set, m, replace(cfg, mode="learned"))[0]
    if sketch_type == "mixed_j":
        return train_mixed_joint(train_set, m, replace(cfg, mode="mixed_joint"))[0]
    if sketch_type == "mixed_s":
        return train_mixed_separate(train_set, m, replace(cfg, mode="mixed_separate"))[0]
    raise ValueError(f"unknown sketch type {sketch_type!r}")


def _trial_errs(train_set, test, k: int, m: int, sketch_type: str, trials: int,
                train_cfg: TrainConfig, jobs: int = 1) -> list[float]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = test[0].shape[0]
    app = optimal_loss(test, k)  # shared across trials
    seeds = [derived_seed(train_cfg.seed, _SEED_TRIAL, t) for t in range(trials)]

    def one(trial_seed: int) -> float:
        s = _trial_sketch(train_set, n, k, m, sketch_type, trial_seed, train_cfg)
        return mean_scw_loss(test, s, k) - app

    if jobs > 1 and trials > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, seeds))  # ordered, so worker count is moot
    return [one(seed) for seed in seeds]


def _aggregate(dataset: str, k: int, m: int, sketch_type: str,
               errs: list[float]) -> ResultRecord:
    errs_arr = np.asarray(errs)
    std_err = 0.0
    if len(errs) > 1:
        std_err = float(np.std(errs_arr, ddof=1) / np.sqrt(len(errs)))
    return ResultRecord(dataset, k, m, sketch_type, float(np.mean(errs_arr)),
                        std_err, len(errs))


def run_experiment(spec: DatasetSpec, k: int, m: int, sketch_type: str,
                   trials: int, train_cfg: TrainConfig, jobs: int = 1) -> ResultRecord:
    """Evaluate one (dataset, k, m, sketch type) cell over several trials.

    The dataset is fixed by spec.seed; trials differ in the sketch /
    training randomness, seeded from train_cfg.seed.
    """
    train_set, test = generate_dataset(spec)
    errs = _trial_errs(train_set, test, k, m, sketch_type, trials, train_cfg, jobs)
    return _aggregate(spec.name, k, m, sketch_type, errs)


def mixed_training_set_experiment(specs, eval_spec: DatasetSpec, k: int, m: int,
                                  train_cfg: TrainConfig, trials: int = 1,
                                  jobs: int = 1) -> ResultRecord:
    """Train one sketch on the union of several datasets, evaluate on one."""
    train_set = []
    for sp in specs:
        train_set.extend(generate_dataset(sp)[0])
    rows = {a.shape[0] for a in train_set}
    if len(rows) != 1:
        raise ValueError(f"union train sets disagree on row count: {sorted(rows)}")
    _, test = generate_dataset(eval_spec)
    errs = _trial_errs(train_set, test, k, m, "learned", trials, train_cfg, jobs)
    return _aggregate(eval_spec.name, k, m, "learned", errs)


def results_to_csv(records, path) -> None:
    """Write records sorted by (dataset, k, m, sketch) with a fixed header."""
    rows = sorted(records, key=lambda r: (r.dataset, r.k, r.m, r.sketch_type))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("dataset,k,m,sketch,err,std_err,trials\n")
        for r in rows:
            fh.write(f"{r.dataset},{r.k},{r.m},{r.sketch_type},"
                     f"{r.err!r},{r.std_err!r},{r.trials}\n")


def write_xy_csv(path, rows) -> None:
    """Plot-data CSV: one (series, x, y) triple per row."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("series,x,y\n")
        for series, x, y in rows:
            fh.write(f"{series},{x!r},{y!r}\n")
