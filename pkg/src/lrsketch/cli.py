"""Command-line entry point.

Subcommands: gen-data, train, eval, verify, theory. Experiments are
described by a JSON config (schema documented in the README); --seed
and --out override the config's master seed and output directory.

Exit codes: 0 success, 1 usage error, 2 property failure, 3 training
divergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .diffsvd import PowerSvdConfig
from .evalbench import (SKETCH_TYPES, DatasetSpec, ResultRecord, generate_dataset,
                        mean_scw_loss, optimal_loss, results_to_csv, write_xy_csv)
from .formats import load_sketch, save_dmat, save_sketch
from .seeding import derived_seed, rng_from
from .sketch import dense_random_sketch, sparse_random_sketch
from .theory import (RobustnessParams, flat_profile,
                     generalization_gap_sweep, objective_mean_estimate,
                     objective_means, random_profile)
from .trainer import TrainConfig, TrainingDivergedError, report_to_csv, train
from .verify import VerifyConfig, run_verification

CONFIG_VERSION = 1

# seed derivation tags under the master seed
_SEED_DATASET = 50
_SEED_TRAIN = 60
_SEED_EVAL_TRIAL = 70

_TRAINABLE = {"learned": "learned", "mixed_j": "mixed_joint", "mixed_s": "mixed_separate"}


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class TrainParams:
    lr: float = 0.1
    batch_size: int = 1
    iterations: int = 500
    power_iters: int = 60
    learned_rows: int | None = None  # None: half of m (rounded down)


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str
    datasets: tuple[DatasetSpec, ...]
    pairs: tuple[tuple[int, int], ...]
    sketch_types: tuple[str, ...]
    trials: int = 1
    train: TrainParams = field(default_factory=TrainParams)


def load_config(path: str, seed_override: int | None = None,
                out_override: str | None = None) -> ExperimentConfig:
    """Parse a config file; overrides behave as if written in the file.

    Dataset seeds left out of the file derive from the (possibly
    overridden) master seed, so a --seed override re-randomizes
    everything at once.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if raw.get("version") != CONFIG_VERSION:
        raise UsageError(f"config version must be {CONFIG_VERSION}")
    master = seed_override if seed_override is not None else int(raw.get("seed", 0))
    datasets = []
    for i, spec in enumerate(raw.get("datasets", [])):
        spec = dict(spec)
        spec.setdefault("seed", derived_seed(master, _SEED_DATASET, i))
        if spec.get("kind") == "files":
            p = spec.get("path")
            if not p or not os.path.exists(p):
                raise UsageError(f"dataset {spec.get('name')}: path {p!r} does not exist")
        try:
            datasets.append(DatasetSpec(**spec))
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad dataset spec {spec.get('name')!r}: {exc}") from exc
    pairs = []
    for pair in raw.get("pairs", []):
        try:
            k, m = (int(x) for x in pair)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad (k, m) pair {pair!r}") from exc
        if k < 1 or m < 1:
            raise UsageError(f"(k, m) pairs must be positive, got ({k}, {m})")
        pairs.append((k, m))
    sketch_types = tuple(raw.get("sketch_types", []))
    for st in sketch_types:
        if st not in SKETCH_TYPES:
            raise UsageError(f"unknown sketch type {st!r}")
    try:
        train_params = TrainParams(**raw.get("train", {}))
    except TypeError as exc:
        raise UsageError(f"bad train parameters: {exc}") from exc
    return ExperimentConfig(seed=master,
                            out_dir=out_override or raw.get("out_dir", "runs"),
                            datasets=tuple(datasets),
                            pairs=tuple(pairs),
                            sketch_types=sketch_types,
                            trials=int(raw.get("trials", 1)),
                            train=train_params)


def _map_ordered(fn, items, jobs: int):
    """Map preserving order; results never depend on the worker count."""
    if jobs > 1 and len(items) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _data_dir(cfg: ExperimentConfig, name: str) -> str:
    return os.path.join(cfg.out_dir, "data", name)


def _sketch_path(cfg: ExperimentConfig, name: str, k: int, m: int, st: str,
                 trial: int) -> str:
    return os.path.join(cfg.out_dir, "sketches", f"{name}_k{k}_m{m}_{st}_t{trial}.skch")


def cmd_gen_data(cfg: ExperimentConfig) -> int:
    """Write every dataset as DMAT1 files plus a manifest per dataset."""
    for spec in cfg.datasets:
        train_set, test_set = generate_dataset(spec)
        ddir = _data_dir(cfg, spec.name)
        os.makedirs(ddir, exist_ok=True)
        manifest = {"version": 1, "name": spec.name, "seed": spec.seed,
                    "train": [], "test": []}
        for role, mats in (("train", train_set), ("test", test_set)):
            for i, a in enumerate(mats):
                fname = f"{role}_{i:03d}.dmat"
                save_dmat(os.path.join(ddir, fname), a)
                manifest[role].append(fname)
        with open(os.path.join(ddir, "manifest.json"), "w", encoding="ascii") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=1)
        print(f"gen-data: {spec.name}: {len(train_set)} train + {len(test_set)} test "
              f"matrices -> {ddir}")
    return 0


def _load_dataset_files(cfg: ExperimentConfig, spec: DatasetSpec):
    manifest = os.path.join(_data_dir(cfg, spec.name), "manifest.json")
    if not os.path.exists(manifest):
        raise UsageError(f"missing data for {spec.name!r}: run gen-data first "
                         f"(expected {manifest})")
    file_spec = DatasetSpec(name=spec.name, kind="files", path=manifest)
    return generate_dataset(file_spec)


def _train_cfg(cfg: ExperimentConfig, k: int, m: int, mode: str, seed: int) -> TrainConfig:
    tp = cfg.train
    learned_rows = tp.learned_rows if tp.learned_rows is not None else m // 2
    return TrainConfig(k=k, lr=tp.lr, batch_size=tp.batch_size,
                       iterations=tp.iterations, seed=seed,
                       power_cfg=PowerSvdConfig(t_iters=tp.power_iters),
                       mode=mode, learned_rows=learned_rows)


def cmd_train(cfg: ExperimentConfig, jobs: int = 1) -> int:
    """Train one sketch per (dataset, k, m, trainable type, trial)."""
    os.makedirs(os.path.join(cfg.out_dir, "sketches"), exist_ok=True)
    os.makedirs(os.path.join(cfg.out_dir, "reports"), exist_ok=True)
    modes = [st for st in cfg.sketch_types if st in _TRAINABLE]
    for di, spec in enumerate(cfg.datasets):
        train_set, _ = _load_dataset_files(cfg, spec)
        for k, m in cfg.pairs:
            for st in modes:
                def one_trial(t, k=k, m=m, st=st, di=di):
                    seed = derived_seed(cfg.seed, _SEED_TRAIN, di, k, m,
                                        SKETCH_TYPES.index(st), t)
                    return train(train_set, m, _train_cfg(cfg, k, m, _TRAINABLE[st], seed))

                results = _map_ordered(one_trial, list(range(cfg.trials)), jobs)
                for t, (sketch, report) in enumerate(results):
                    save_sketch(_sketch_path(cfg, spec.name, k, m, st, t), sketch)
                    report_to_csv(report, os.path.join(
                        cfg.out_dir, "reports",
                        f"{spec.name}_k{k}_m{m}_{st}_t{t}.csv"))
                    print(f"train: {spec.name} k={k} m={m} {st} trial {t}: "
                          f"loss {report.initial_loss:.4f} -> {report.final_loss:.4f}")
    return 0


def cmd_eval(cfg: ExperimentConfig, jobs: int = 1) -> int:
    """Evaluate every configured cell; writes results.csv and plot data."""
    os.makedirs(cfg.out_dir, exist_ok=True)
    records: list[ResultRecord] = []
    for di, spec in enumerate(cfg.datasets):
        _, test_set = _load_dataset_files(cfg, spec)
        n = test_set[0].shape[0]
        app_by_k = {k: optimal_loss(test_set, k) for k, _ in cfg.pairs}
        for k, m in cfg.pairs:
            for st in cfg.sketch_types:
                sketches = []
                for t in range(cfg.trials):
                    if st in _TRAINABLE:
                        path = _sketch_path(cfg, spec.name, k, m, st, t)
                        if not os.path.exists(path):
                            raise UsageError(f"missing sketch file {path}: run train first")
                        sketches.append(load_sketch(path))
                    else:
                        seed = derived_seed(cfg.seed, _SEED_EVAL_TRIAL, di, k, m,
                                            SKETCH_TYPES.index(st), t)
                        if st == "sparse_random":
                            sketches.append(sparse_random_sketch(m, n, seed))
                        else:
                            sketches.append(dense_random_sketch(m, n, seed))
                errs = _map_ordered(
                    lambda s: mean_scw_loss(test_set, s, k) - app_by_k[k],
                    sketches, jobs)
                std_err = 0.0
                if len(errs) > 1:
                    std_err = float(np.std(np.asarray(errs), ddof=1) / np.sqrt(len(errs)))
                records.append(ResultRecord(spec.name, k, m, st,
                                            float(np.mean(errs)), std_err, len(errs)))
    results_to_csv(records, os.path.join(cfg.out_dir, "results.csv"))
    _write_plot_data(cfg, records)
    print(f"eval: wrote {len(records)} rows -> {os.path.join(cfg.out_dir, 'results.csv')}")
    return 0


def _write_plot_data(cfg: ExperimentConfig, records) -> None:
    """Excess error vs sketch rows, one plot-data CSV per (dataset, k)."""
    plot_dir = os.path.join(cfg.out_dir, "plots")
    cells = sorted({(r.dataset, r.k) for r in records})
    if cells:
        os.makedirs(plot_dir, exist_ok=True)
    for dataset, k in cells:
        rows = [(r.sketch_type, r.m, r.err) for r in sorted(
            records, key=lambda r: (r.sketch_type, r.m))
            if r.dataset == dataset and r.k == k]
        write_xy_csv(os.path.join(plot_dir, f"err_vs_m_{dataset}_k{k}.csv"), rows)


def cmd_verify(args) -> int:
    concat_fn = None
    if args.inject_broken_concat:
        def concat_fn(s1, s2):  # negative-control hook: drops the first block
            return s2
    vcfg = VerifyConfig() if args.seed is None else VerifyConfig(seed=args.seed)
    kwargs = {} if concat_fn is None else {"concat_fn": concat_fn}
    results = run_verification(vcfg, **kwargs)
    failed = 0
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    print(f"verify: {len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 2


def cmd_theory(args) -> int:
    """Emit the single-row-sketch report CSV: lemma products and gap trend."""
    seed = args.seed if args.seed is not None else 20260101
    out_dir = args.out or "runs"
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    ok = True
    for j in range(10):
        dim = int(rng_from(seed, 90, j).integers(2, 16))
        p = random_profile(dim, derived_seed(seed, 91, j))
        mean_full, mean_simp = objective_means(p, 20000, derived_seed(seed, 92, j))
        rp = p.stable_rank()
        rows.append((dim, rp, mean_simp, mean_simp * rp, "", ""))
        ok = ok and mean_simp * rp >= 1 / 20 and mean_full * rp >= 1 / 20
    params = RobustnessParams(rho=0.05, delta=0.05, eps_grid=0.05)
    sweep = generalization_gap_sweep([25, 100, 400], 6, 500, params, seed)
    for n_train, gap in sweep:
        rows.append((2, "", "", "", n_train, gap))
    gaps = [g for _, g in sweep]
    ok = ok and gaps[0] > gaps[1] > gaps[2]
    path = os.path.join(out_dir, "theory.csv")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("d,r_prime,empirical_mean,product,N,gap\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    flat10 = objective_mean_estimate(flat_profile(10, derived_seed(seed, 93)),
                                     20000, derived_seed(seed, 94))
    ok = ok and abs(flat10 - 0.1) <= 0.02
    print(f"theory: wrote {len(rows)} rows -> {path}; flat d=10 mean = {flat10:.4f}; "
          f"{'all bounds hold' if ok else 'BOUND VIOLATION'}")
    return 0 if ok else 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="lrsketch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (("gen-data", True), ("train", True), ("eval", True),
                               ("verify", False), ("theory", False)):
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment config JSON")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output directory override")
        p.add_argument("--jobs", type=int, default=1, help="parallel workers")
        p.set_defaults(needs_config=needs_config)
        if name == "verify":
            p.add_argument("--inject-broken-concat", action="store_true",
                           help=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise UsageError("--seed must fit in an unsigned 64-bit integer")
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "theory":
            return cmd_theory(args)
        if not args.config:
            raise UsageError(f"{args.command} requires --config")
        cfg = load_config(args.config, seed_override=args.seed,
                          out_override=args.out)
        if args.command == "gen-data":
            return cmd_gen_data(cfg)
        if args.command == "train":
            return cmd_train(cfg, jobs=args.jobs)
        return cmd_eval(cfg, jobs=args.jobs)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
