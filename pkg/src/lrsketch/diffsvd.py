"""Differentiable SVD by deflated power iteration, and the taped
sketch-to-loss forward pass.

Each singular triple comes from T rounds of v <- A^T A v / ||A^T A v||
followed by sigma = ||Av||, u = Av/sigma and deflation A <- A - sigma
u v^T. Running that chain on a Tape with the sketch's stored values as
the differentiable leaf yields the gradient of the squared
approximation loss with respect to those values.

The taped chain never truncates: its node count depends only on shapes,
so finite differencing and repeated forwards see the same computation.
The standalone `power_svd` truncates trailing near-zero factors like a
compact SVD would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import EagerRunner, Tape
from .linalg import SvdFactors, as_matrix
from .seeding import rng_from
from .sketch import SparseSketch

# Relative threshold at which deflation stops extracting factors.
DEFLATION_TOL = 1e-12


@dataclass(frozen=True)
class PowerSvdConfig:
    """Power-iteration SVD knobs.

    t_iters: power iterations per singular triple.
    m_factors: triples to extract; None means min(rows, cols).
    init_seed: seed for the start vectors (one fresh vector per factor).
    """

    t_iters: int = 100
    m_factors: int | None = None
    init_seed: int = 0

    def __post_init__(self):
        if self.t_iters < 1:
            raise ValueError("t_iters must be >= 1")
        if self.m_factors is not None and self.m_factors < 1:
            raise ValueError("m_factors must be >= 1")


def _init_vector(dim: int, seed: int, stream: int, index: int) -> np.ndarray:
    """Uniform-on-sphere start vector for factor `index` of SVD `stream`."""
    z = rng_from(seed, stream, index).standard_normal(dim)
    nrm = float(np.linalg.norm(z))
    if nrm == 0.0:
        z = np.zeros(dim)
        z[0] = 1.0
        return z
    return z / nrm


def _power_factors(eng, a_h, dim_cols: int, n_factors: int, cfg: PowerSvdConfig,
                   stream: int, stop_tol: float | None = None):
    """Extract (sigma, u, v) handle triples from matrix handle a_h.

    With stop_tol set (eager use only), extraction stops once a sigma
    falls below stop_tol times the first sigma; without it the chain
    structure is fixed by shapes alone.
    """
    triples = []
    a_cur = a_h
    sig_first = None
    for i in range(n_factors):
        v = eng.const(_init_vector(dim_cols, cfg.init_seed, stream, i))
        for _ in range(cfg.t_iters):
            w = eng.matvec(a_cur, v)
            z = eng.rmatvec(a_cur, w)
            v = eng.normalize(z)
        w = eng.matvec(a_cur, v)
        sig = eng.vec_norm(w)
        if stop_tol is not None:
            sig_val = float(eng.value(sig))
            if sig_first is None:
                if sig_val <= 0.0:
                    break
                sig_first = sig_val
            elif sig_val <= 0.0 or sig_val < stop_tol * sig_first:
                break
        u = eng.scale_div(w, sig)
        a_cur = eng.add_scaled_outer(a_cur, sig, u, v, -1.0)
        triples.append((sig, u, v))
    return triples


def power_svd(a, cfg: PowerSvdConfig) -> SvdFactors:
    """SVD factors via deflated power iteration (truncates tiny sigmas)."""
    a = as_matrix(a)
    n, d = a.shape
    nf = min(n, d) if cfg.m_factors is None else cfg.m_factors
    if nf > min(n, d):
        raise ValueError(f"m_factors={nf} exceeds min(rows, cols)={min(n, d)}")
    eng = EagerRunner()
    triples = _power_factors(eng, a, d, nf, cfg, stream=0, stop_tol=DEFLATION_TOL)
    if not triples:
        return SvdFactors(np.zeros((n, 0)), np.zeros(0), np.zeros((d, 0)))
    u = np.column_stack([t[1] for t in triples])
    sigma = np.array([t[0] for t in triples], dtype=np.float64)
    v = np.column_stack([t[2] for t in triples])
    return SvdFactors(u=u, sigma=sigma, v=v)


def _scw_power_chain(eng, a: np.ndarray, s: SparseSketch, k: int,
                     cfg: PowerSvdConfig):
    """Record/evaluate sketch -> SVD -> [AV]_k V^T -> squared loss."""
    n, d = a.shape
    vals = eng.leaf_values(s.value_of, s.trainable_mask)
    sa = eng.sketch_apply(vals, s.row_of, s.col_of, s.m, a)
    r1 = min(s.m, d) if cfg.m_factors is None else min(cfg.m_factors, s.m, d)
    tri1 = _power_factors(eng, sa, d, r1, cfg, stream=0)
    v_cols = [t[2] for t in tri1]
    v_mat = eng.stack_columns(v_cols)
    a_const = eng.const(a)
    av_cols = [eng.matvec(a_const, vc) for vc in v_cols]
    av = eng.stack_columns(av_cols)
    tri2 = _power_factors(eng, av, r1, min(k, r1, n), cfg, stream=1)
    rec = eng.const(np.zeros((n, r1)))
    for sig, u, v in tri2:
        rec = eng.add_scaled_outer(rec, sig, u, v, 1.0)
    approx = eng.matmul_nt(rec, v_mat)
    return eng.residual_sumsq(a_const, approx)


def scw_forward_with_tape(a, s: SparseSketch, k: int,
                          cfg: PowerSvdConfig) -> tuple[float, Tape]:
    """Taped forward pass; returns (squared loss, tape)."""
    a = as_matrix(a)
    if s.n != a.shape[0]:
        raise ValueError(f"sketch has n={s.n} but matrix has {a.shape[0]} rows")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    tape = Tape()
    tape.output = _scw_power_chain(tape, a, s, k, cfg)
    return float(tape.value(tape.output)), tape


def scw_power_loss(a, s: SparseSketch, k: int, cfg: PowerSvdConfig) -> float:
    """Eager evaluation of the exact computation the tape records."""
    a = as_matrix(a)
    if s.n != a.shape[0]:
        raise ValueError(f"sketch has n={s.n} but matrix has {a.shape[0]} rows")
    return float(_scw_power_chain(EagerRunner(), a, s, k, cfg))


def backward(tape: Tape) -> np.ndarray:
    """Gradient of the taped loss w.r.t. the sketch's stored values."""
    return tape.backward_values()
