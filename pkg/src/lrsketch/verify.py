"""Executable property checks behind the `verify` CLI command.

Each check returns a CheckResult with the measured margin, so the
report shows not just pass/fail but how much headroom each property
has. Counts are sized to finish in seconds; the pytest suite runs the
same properties at full scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffsvd import PowerSvdConfig, backward, scw_forward_with_tape, scw_power_loss
from .linalg import best_rank_k, frobenius_norm, matmul
from .scw import scw_loss
from .seeding import derived_seed, rng_from
from .sketch import (apply_sketch, concat_sketches, densify,
                     identity_pattern_sketch, sparse_random_sketch)
from .theory import (RobustnessParams, flat_profile, fragile_counterexample,
                     generalization_gap_sweep, grid_search_robust_minimizer,
                     objective_mean_estimate, random_profile, robustness_fraction,
                     verify_stable_rank_lemma)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class VerifyConfig:
    seed: int = 20260101
    dominance_trials: int = 80
    gradient_instances: int = 5
    lemma_profiles: int = 10
    lemma_samples: int = 20000
    trend_splits: int = 6


def check_dominance(cfg: VerifyConfig, concat_fn=concat_sketches) -> CheckResult:
    """Stacked sketches never lose to their first block alone."""
    worst = -np.inf
    for t in range(cfg.dominance_trials):
        rng = rng_from(cfg.seed, 0, t)
        n, d = int(rng.integers(3, 13)), int(rng.integers(3, 13))
        m1, m2 = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        k = int(rng.integers(1, 4))
        a = rng.standard_normal((n, d))
        s1 = sparse_random_sketch(m1, n, derived_seed(cfg.seed, 0, t, 1))
        s2 = sparse_random_sketch(m2, n, derived_seed(cfg.seed, 0, t, 2))
        loss_star = scw_loss(a, concat_fn(s1, s2), k)
        loss_1 = scw_loss(a, s1, k)
        worst = max(worst, loss_star - loss_1)
    return CheckResult("concat-dominance", worst <= 1e-9,
                       f"worst loss(concat)-loss(s1) = {worst:.3e} (allowed 1e-9)")


def check_scw_identity(cfg: VerifyConfig) -> CheckResult:
    """With the identity sketch pattern the pipeline matches truncated SVD."""
    worst = 0.0
    for t in range(10):
        rng = rng_from(cfg.seed, 1, t)
        n, d, k = 8, 6, 2
        a = rng.standard_normal((n, d))
        out = scw_loss(a, identity_pattern_sketch(n), k)
        opt = frobenius_norm(a - best_rank_k(a, k))
        worst = max(worst, abs(out - opt))
    return CheckResult("scw-identity-sketch", worst <= 1e-8,
                       f"worst |loss - optimal| = {worst:.3e} (allowed 1e-8)")


def check_gradients(cfg: VerifyConfig) -> CheckResult:
    """Reverse-mode gradients against central finite differences.

    Pass condition per coordinate: |ad - fd| <= 1e-6 + 1e-4 * |fd|.
    """
    h = 1e-5
    worst = 0.0  # |ad - fd| / (atol + rtol * |fd|); <= 1 passes
    for t in range(cfg.gradient_instances):
        rng = rng_from(cfg.seed, 2, t)
        a = rng.standard_normal((8, 6))
        s = sparse_random_sketch(3, 8, derived_seed(cfg.seed, 2, t))
        pcfg = PowerSvdConfig(t_iters=60, init_seed=derived_seed(cfg.seed, 2, t, 1))
        _, tape = scw_forward_with_tape(a, s, 2, pcfg)
        g = backward(tape)
        vals = s.value_of
        for i in range(vals.shape[0]):
            vp, vm = vals.copy(), vals.copy()
            vp[i] += h
            vm[i] -= h
            fd = (scw_power_loss(a, s.with_values(vp), 2, pcfg)
                  - scw_power_loss(a, s.with_values(vm), 2, pcfg)) / (2 * h)
            worst = max(worst, abs(g[i] - fd) / (1e-6 + 1e-4 * abs(fd)))
    return CheckResult("gradient-fidelity", worst <= 1.0,
                       f"worst |ad-fd| at {worst:.3f} of the 1e-4 relative / "
                       f"1e-6 absolute budget (<= 1 passes)")


def check_stable_rank_lemma(cfg: VerifyConfig) -> CheckResult:
    profiles = [random_profile(int(rng_from(cfg.seed, 3, j).integers(2, 16)),
                               derived_seed(cfg.seed, 3, j, 1))
                for j in range(cfg.lemma_profiles)]
    worst, bound = verify_stable_rank_lemma(profiles, cfg.lemma_samples, cfg.seed)
    flat = flat_profile(10, derived_seed(cfg.seed, 3, 99))
    mean10 = objective_mean_estimate(flat, cfg.lemma_samples,
                                     derived_seed(cfg.seed, 3, 100))
    ok = worst >= bound and abs(mean10 - 0.1) <= 0.02
    return CheckResult("stable-rank-lemma", ok,
                       f"worst mean*r' = {worst:.4f} (needs >= {bound:.4f}); "
                       f"flat d=10 mean = {mean10:.4f} (needs 0.1 +- 0.02)")


def check_robustness_counterexample(cfg: VerifyConfig) -> CheckResult:
    s, train, adv = fragile_counterexample(0.01)
    frac = robustness_fraction(s, [adv], 0.05)
    params = RobustnessParams(rho=0.0, delta=0.05, eps_grid=0.1)
    res = grid_search_robust_minimizer(train, params)
    fragile_excluded = res.feasible and abs(float(res.s @ s)) < 0.99
    ok = frac == 1.0 and fragile_excluded
    return CheckResult("robustness-counterexample", ok,
                       f"fragile denominator fraction = {frac} (needs 1.0); "
                       f"robust search avoids the fragile direction: {fragile_excluded}")


def check_generalization_trend(cfg: VerifyConfig) -> CheckResult:
    params = RobustnessParams(rho=0.05, delta=0.05, eps_grid=0.05)
    sweep = generalization_gap_sweep([25, 100, 400], cfg.trend_splits, 500,
                                     params, cfg.seed)
    gaps = [g for _, g in sweep]
    ok = gaps[0] > gaps[1] > gaps[2]
    detail = ", ".join(f"N={n}: {g:.4f}" for n, g in sweep)
    return CheckResult("generalization-trend", ok, f"mean |gap| {detail}")


def check_apply_bitwise(cfg: VerifyConfig) -> CheckResult:
    for t in range(30):
        rng = rng_from(cfg.seed, 4, t)
        n, d, m = 8, 5, 3
        a = rng.standard_normal((n, d))
        s = sparse_random_sketch(m, n, derived_seed(cfg.seed, 4, t))
        if not np.array_equal(apply_sketch(s, a), matmul(densify(s), a)):
            return CheckResult("apply-sketch-bitwise", False,
                               f"mismatch against densified product at trial {t}")
    return CheckResult("apply-sketch-bitwise", True,
                       "30/30 trials equal the densified product bit for bit")


def run_verification(cfg: VerifyConfig | None = None,
                     concat_fn=concat_sketches) -> list[CheckResult]:
    """Run every check; `concat_fn` is a test hook for negative controls."""
    cfg = cfg or VerifyConfig()
    return [
        check_dominance(cfg, concat_fn),
        check_scw_identity(cfg),
        check_gradients(cfg),
        check_stable_rank_lemma(cfg),
        check_robustness_counterexample(cfg),
        check_generalization_trend(cfg),
        check_apply_bitwise(cfg),
    ]
