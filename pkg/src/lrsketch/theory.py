"""Single-row sketches in spectral coordinates.

With one sketch row, the whole pipeline reduces to picking a unit
vector s: the quality of the pick depends only on the alignments
<s, U_i> against each matrix's left singular vectors and the singular
values. This module scores candidate vectors (full and top-component
objectives), estimates how well a uniformly random vector does compared
to the stable rank, flags directions whose objective denominator is
fragile, and searches a discretized sphere for the best robust
direction.

Profiles carry (singular values, left basis) directly instead of full
matrices; everything here depends only on those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, frobenius_norm, reference_svd
from .seeding import derived_seed, rng_from

# Denominators below this are treated as degenerate.
DEGENERATE_DENOM = 1e-15

_MC_CHUNK = 20000
_GRID_BUDGET = 10**7


class DegenerateDirectionError(ValueError):
    """Objective denominator vanished for this direction."""


@dataclass(frozen=True, eq=False)
class SpectralProfile:
    """Spectrum and left singular basis of one matrix.

    sigma: (r,) positive, nonincreasing. u_basis: (dim, r) orthonormal
    columns. Distribution generators normalize so sigma[0] == 1; hand
    built profiles (e.g. fragility counterexamples) may deviate.
    """

    sigma: np.ndarray
    u_basis: np.ndarray

    def __post_init__(self):
        if self.sigma.ndim != 1 or self.u_basis.ndim != 2:
            raise ValueError("sigma must be 1-D and u_basis 2-D")
        if self.u_basis.shape[1] != self.sigma.shape[0]:
            raise ValueError("u_basis columns must match sigma length")
        if self.sigma.size and (np.any(self.sigma <= 0)
                                or np.any(np.diff(self.sigma) > 1e-12)):
            raise ValueError("sigma must be positive and nonincreasing")

    @property
    def dim(self) -> int:
        return self.u_basis.shape[0]

    def stable_rank(self) -> float:
        return float(np.sum(self.sigma**2) / self.sigma[0] ** 2)


def require_normalized(p: SpectralProfile) -> SpectralProfile:
    """Check sigma[0] == 1 (1e-9) and orthonormal columns (1e-8)."""
    if abs(p.sigma[0] - 1.0) > 1e-9:
        raise ValueError(f"profile top singular value is {p.sigma[0]}, expected 1")
    gram = p.u_basis.T @ p.u_basis
    if np.abs(gram - np.eye(p.sigma.size)).max() > 1e-8:
        raise ValueError("u_basis columns are not orthonormal")
    return p


def stable_rank(a) -> float:
    """Squared Frobenius-to-operator norm ratio of a matrix."""
    a = as_matrix(a)
    f = reference_svd(a)
    if f.rank == 0:
        raise ValueError("stable rank of a zero matrix is undefined")
    return (frobenius_norm(a) / f.sigma[0]) ** 2


def _check_unit(s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if abs(float(np.linalg.norm(s)) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return s


def _alignment_sums(s: np.ndarray, p: SpectralProfile) -> tuple[float, float, float]:
    """(top alignment^2, sum lambda^2 align^2, sum lambda^4 align^2)."""
    c2 = (p.u_basis.T @ s) ** 2
    lam2 = p.sigma**2
    return float(c2[0]), float(np.sum(lam2 * c2)), float(np.sum(lam2 * lam2 * c2))


def full_objective(s, profile: SpectralProfile) -> float:
    """Weighted alignment ratio sum(l^4 c^2) / sum(l^2 c^2); 1 at s = U_1."""
    s = _check_unit(s)
    _, den, num = _alignment_sums(s, profile)
    if den < DEGENERATE_DENOM:
        raise DegenerateDirectionError(f"denominator {den} below {DEGENERATE_DENOM}")
    return num / den


def simplified_objective(s, profile: SpectralProfile) -> float:
    """Top-component share c_1^2 / sum(l^2 c^2)."""
    s = _check_unit(s)
    top, den, _ = _alignment_sums(s, profile)
    if den < DEGENERATE_DENOM:
        raise DegenerateDirectionError(f"denominator {den} below {DEGENERATE_DENOM}")
    return top / den


def random_unit_vector(d: int, seed: int) -> np.ndarray:
    """Uniform on the (d-1)-sphere: normalized standard normal draw."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = rng_from(seed)
    while True:
        z = rng.standard_normal(d)
        nrm = float(np.linalg.norm(z))
        if nrm > 0:
            return z / nrm


def _objective_values(grid: np.ndarray, p: SpectralProfile):
    """Vectorized objectives and denominators for rows of `grid`.

    Degenerate denominators yield objective value 0.
    """
    c2 = (grid @ p.u_basis) ** 2
    lam2 = p.sigma**2
    den = c2 @ lam2
    num_full = c2 @ (lam2 * lam2)
    ok = den >= DEGENERATE_DENOM
    safe_den = np.where(ok, den, 1.0)
    full = np.where(ok, num_full / safe_den, 0.0)
    simp = np.where(ok, c2[:, 0] / safe_den, 0.0)
    return full, simp, den


def objective_means(profile: SpectralProfile, samples: int,
                    seed: int) -> tuple[float, float]:
    """Monte Carlo means (full, simplified) over uniform sphere directions.

    Draws happen in fixed-size chunks with per-chunk seeds, so the
    estimate is reproducible and chunks could run in parallel.
    """
    total_full = 0.0
    total_simp = 0.0
    done = 0
    chunk_ix = 0
    while done < samples:
        count = min(_MC_CHUNK, samples - done)
        z = rng_from(seed, chunk_ix).standard_normal((count, profile.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        full, simp, _ = _objective_values(z, profile)
        total_full += float(np.sum(full))
        total_simp += float(np.sum(simp))
        done += count
        chunk_ix += 1
    return total_full / samples, total_simp / samples


def objective_mean_estimate(profile: SpectralProfile, samples: int, seed: int,
                            objective: str = "simplified") -> float:
    """Monte Carlo mean of one objective over uniform sphere directions."""
    if objective not in ("simplified", "full"):
        raise ValueError(f"unknown objective {objective!r}")
    full, simp = objective_means(profile, samples, seed)
    return full if objective == "full" else simp


def verify_stable_rank_lemma(profiles, samples: int, seed: int) -> tuple[float, float]:
    """Worst (mean objective x stable rank) product over normalized profiles.

    A uniformly random direction achieves expected objective on the
    order of 1 / stable_rank, so the product should stay above a fixed
    constant; we test 1/20. Returns (worst product, tested constant).
    """
    worst = math.inf
    for j, p in enumerate(profiles):
        require_normalized(p)
        rp = p.stable_rank()
        mean_full, mean_simp = objective_means(p, samples, derived_seed(seed, j))
        worst = min(worst, mean_simp * rp, mean_full * rp)
    return worst, 1.0 / 20.0


def discretize_sphere(d: int, eps: float) -> np.ndarray:
    """Cube-grid directions: spacing eps/sqrt(d), projected and deduplicated.

    Every point of the unit sphere lies within eps of some returned
    direction. Rows come back unit-norm and lexicographically sorted.
    """
    if d < 1 or eps <= 0:
        raise ValueError("need d >= 1 and eps > 0")
    h = eps / np.sqrt(d)
    half = int(np.ceil(1.0 / h))
    per_axis = 2 * half + 1
    if per_axis**d > _GRID_BUDGET:
        raise ValueError(f"grid of {per_axis}^{d} points exceeds budget {_GRID_BUDGET}")
    axis = np.arange(-half, half + 1) * h
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms > 0]
    dirs = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    _, first = np.unique(np.round(dirs, 12), axis=0, return_index=True)
    dirs = dirs[np.sort(first)]
    # lexicographic row order (first coordinate is the primary key)
    return dirs[np.lexsort(np.round(dirs, 12).T[::-1])]


def robustness_fraction(s, profiles, delta: float) -> float:
    """Fraction of profiles whose objective denominator falls below delta."""
    s = _check_unit(s)
    bad = 0
    for p in profiles:
        _, den, _ = _alignment_sums(s, p)
        if den < delta:
            bad += 1
    return bad / len(profiles)


def empirical_losses(s, train, holdout) -> tuple[float, float, float]:
    """Negative mean full objective on each set, and holdout - train gap.

    Degenerate denominators contribute objective 0 (the worst case for
    this sign convention) rather than raising.
    """
    s = _check_unit(s)

    def loss(profiles):
        vals = [_objective_values(s[None, :], p)[0][0] for p in profiles]
        return -float(np.mean(vals))

    tr, ho = loss(train), loss(holdout)
    return tr, ho, ho - tr


@dataclass(frozen=True)
class RobustnessParams:
    rho: float
    delta: float
    eta: float = 0.5
    eps_grid: float = 0.05

    def __post_init__(self):
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must be in [0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if not 0 < self.eta < 1:
            raise ValueError("eta must be in (0, 1)")
        if self.eps_grid <= 0:
            raise ValueError("eps_grid must be positive")


@dataclass(frozen=True)
class RobustSearchResult:
    s: np.ndarray | None  # None when no grid point is robust
    train_loss: float | None
    feasible_count: int

    @property
    def feasible(self) -> bool:
        return self.s is not None


def grid_search_robust_minimizer(train, params: RobustnessParams) -> RobustSearchResult:
    """Best robust direction on the discretized sphere.

    Feasible points have denominator < delta on at most a rho fraction
    of the train profiles; among them the empirical loss minimizer
    wins, ties going to the lexicographically smallest vector.
    """
    if not train:
        raise ValueError("empty train set")
    grid = discretize_sphere(train[0].dim, params.eps_grid)
    obj_sum = np.zeros(grid.shape[0])
    bad = np.zeros(grid.shape[0], dtype=np.int64)
    for p in train:
        full, _, den = _objective_values(grid, p)
        obj_sum += full
        bad += den < params.delta
    feasible = bad / len(train) <= params.rho
    if not np.any(feasible):
        return RobustSearchResult(None, None, 0)
    losses = -obj_sum / len(train)
    masked = np.where(feasible, losses, np.inf)
    best = int(np.argmin(masked))  # grid is lexicographically sorted; first min wins
    return RobustSearchResult(grid[best].copy(), float(losses[best]),
                              int(np.sum(feasible)))


# ---------------------------------------------------------------------------
# profile families
# ---------------------------------------------------------------------------

def random_profile(dim: int, seed: int) -> SpectralProfile:
    """Square normalized profile with geometric spectrum, random basis."""
    rng = rng_from(seed)
    decay = rng.uniform(0.1, 1.0)
    sig = decay ** np.arange(dim)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    return SpectralProfile(sig, q * sgn)


def flat_profile(dim: int, seed: int) -> SpectralProfile:
    """All singular values equal to 1; stable rank == dim."""
    rng = rng_from(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    return SpectralProfile(np.ones(dim), q * sgn)


def rotation_profile(theta: float, lam2: float) -> SpectralProfile:
    """2-D profile: basis rotated by theta, spectrum (1, lam2)."""
    u = np.array([[np.cos(theta), -np.sin(theta)],
                  [np.sin(theta), np.cos(theta)]])
    return SpectralProfile(np.array([1.0, lam2]), u)


def planted_profile_family(count: int, seed: int, angle_center: float = 0.4,
                           angle_jitter: float = 0.5,
                           lam2_range: tuple[float, float] = (0.3, 0.7)):
    """2-D family: shared mean angle with per-profile jitter."""
    rng = rng_from(seed)
    out = []
    for _ in range(count):
        theta = angle_center + angle_jitter * rng.standard_normal()
        lam2 = rng.uniform(*lam2_range)
        out.append(rotation_profile(theta, lam2))
    return out


def fragile_counterexample(eps: float = 0.01, dim: int = 2):
    """Direction that aces rank-1 training data but has a fragile denominator.

    Returns (s, train_profiles, adversarial_profile): on the rank-1
    train profiles s scores a perfect objective yet its denominator is
    eps^2, and the adversarial profile drives its objective near zero.
    """
    if dim < 2:
        raise ValueError("need dim >= 2")
    s = np.zeros(dim)
    s[0], s[1] = eps, np.sqrt(1.0 - eps * eps)
    e1 = np.zeros((dim, 1))
    e1[0, 0] = 1.0
    train = [SpectralProfile(np.ones(1), e1)]
    adv_sig = np.array([np.sqrt(1.0 - 100.0 * eps * eps), 10.0 * eps])
    adv_u = np.zeros((dim, 2))
    adv_u[0, 0] = 1.0
    adv_u[1, 1] = 1.0
    return s, train, SpectralProfile(adv_sig, adv_u)


def generalization_gap_sweep(n_values, splits: int, holdout_count: int,
                             params: RobustnessParams, seed: int,
                             family_kwargs: dict | None = None):
    """Mean |holdout - train| loss gap of the robust minimizer vs train size.

    For each N, draws `splits` fresh train/holdout pairs from the same
    2-D planted family, grid-searches the robust minimizer on train and
    records the absolute loss gap. Returns [(N, mean gap), ...].
    """
    kwargs = family_kwargs or {}
    out = []
    for n_ix, n_train in enumerate(n_values):
        gaps = []
        for split in range(splits):
            tr = planted_profile_family(n_train,
                                        derived_seed(seed, n_ix, split, 0), **kwargs)
            ho = planted_profile_family(holdout_count,
                                        derived_seed(seed, n_ix, split, 1), **kwargs)
            res = grid_search_robust_minimizer(tr, params)
            if not res.feasible:
                raise RuntimeError(f"no robust direction for N={n_train}, split={split}")
            _, _, gap = empirical_losses(res.s, tr, ho)
            gaps.append(abs(gap))
        out.append((n_train, float(np.mean(gaps))))
    return out
