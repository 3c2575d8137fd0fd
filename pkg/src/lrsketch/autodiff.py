"""Reverse-mode autodiff over a recorded list of primitive operations.

The Tape is a Wengert list: every primitive appends one node holding
its forward value and a closure that maps the node's output gradient to
gradient contributions for its parents. Nodes only ever reference
earlier nodes, so a single reverse sweep visits each node exactly once.

EagerRunner exposes the same operation set but just computes values.
Both engines call the identical kernel functions in identical order, so
a taped forward pass and an eager one agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from .sketch import scatter_rows

# Divisors are clamped here; below the clamp the divisor is treated as
# constant (max-subgradient), so no gradient flows through it.
CLAMP = 1e-12


def _safe(x: float) -> float:
    return x if x > CLAMP else CLAMP


# ---------------------------------------------------------------------------
# forward kernels (shared by Tape and EagerRunner)
# ---------------------------------------------------------------------------

def k_matvec(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    return a @ v


def k_rmatvec(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    return a.T @ w


def k_normalize(z: np.ndarray) -> np.ndarray:
    return z / _safe(float(np.linalg.norm(z)))


def k_vec_norm(w: np.ndarray) -> float:
    return float(np.linalg.norm(w))


def k_scale_div(w: np.ndarray, sigma: float) -> np.ndarray:
    return w / _safe(sigma)


def k_add_scaled_outer(m: np.ndarray, sigma: float, u: np.ndarray,
                       v: np.ndarray, sign: float) -> np.ndarray:
    return m + (sign * sigma) * np.multiply.outer(u, v)


def k_stack_columns(cols: list[np.ndarray]) -> np.ndarray:
    return np.column_stack(cols)


def k_matmul_nt(r: np.ndarray, v: np.ndarray) -> np.ndarray:
    return r @ v.T


def k_residual_sumsq(a: np.ndarray, x: np.ndarray) -> float:
    diff = a - x
    return float(np.sum(diff * diff))


class EagerRunner:
    """Engine that evaluates the primitive ops without recording."""

    def const(self, x):
        return x

    def leaf_values(self, values, mask):
        return np.array(values, dtype=np.float64)

    def sketch_apply(self, vals, rows, cols, m, a):
        return scatter_rows(vals, rows, cols, m, a)

    def matvec(self, a, v):
        return k_matvec(a, v)

    def rmatvec(self, a, w):
        return k_rmatvec(a, w)

    def normalize(self, z):
        return k_normalize(z)

    def vec_norm(self, w):
        return k_vec_norm(w)

    def scale_div(self, w, sigma):
        return k_scale_div(w, sigma)

    def add_scaled_outer(self, m, sigma, u, v, sign):
        return k_add_scaled_outer(m, sigma, u, v, sign)

    def stack_columns(self, cols):
        return k_stack_columns(cols)

    def matmul_nt(self, r, v):
        return k_matmul_nt(r, v)

    def residual_sumsq(self, a, x):
        return k_residual_sumsq(a, x)

    def value(self, h):
        return h


class Tape:
    """Recorded forward computation, replayable backward.

    Handles returned by the op methods are integer node ids. After the
    forward pass set `output` to the scalar loss node, then call
    `backward_values()` for d(loss)/d(leaf values) with non-trainable
    positions zeroed.
    """

    def __init__(self):
        self._values: list = []
        self._vjps: list = []  # None for constants and the leaf
        self.leaf: int | None = None
        self.mask: np.ndarray | None = None
        self.output: int | None = None

    def __len__(self) -> int:
        return len(self._values)

    def value(self, ix: int):
        return self._values[ix]

    def _push(self, value, vjp=None) -> int:
        self._values.append(value)
        self._vjps.append(vjp)
        return len(self._values) - 1

    def _wants(self, ix: int) -> bool:
        return ix == self.leaf or self._vjps[ix] is not None

    # -- ops ----------------------------------------------------------------

    def const(self, x) -> int:
        return self._push(x)

    def leaf_values(self, values, mask) -> int:
        ix = self._push(np.array(values, dtype=np.float64))
        self.leaf = ix
        self.mask = np.asarray(mask, dtype=bool)
        return ix

    def sketch_apply(self, vals_ix, rows, cols, m, a) -> int:
        out = scatter_rows(self._values[vals_ix], rows, cols, m, a)

        def vjp(g):
            return [(vals_ix, np.sum(g[rows] * a[cols], axis=1))]

        return self._push(out, vjp)

    def matvec(self, a_ix, v_ix) -> int:
        a, v = self._values[a_ix], self._values[v_ix]
        out = k_matvec(a, v)
        want_a, want_v = self._wants(a_ix), self._wants(v_ix)

        def vjp(g):
            contrib = []
            if want_a:
                contrib.append((a_ix, np.multiply.outer(g, v)))
            if want_v:
                contrib.append((v_ix, a.T @ g))
            return contrib

        return self._push(out, vjp)

    def rmatvec(self, a_ix, w_ix) -> int:
        a, w = self._values[a_ix], self._values[w_ix]
        out = k_rmatvec(a, w)
        want_a, want_w = self._wants(a_ix), self._wants(w_ix)

        def vjp(g):
            contrib = []
            if want_a:
                contrib.append((a_ix, np.multiply.outer(w, g)))
            if want_w:
                contrib.append((w_ix, a @ g))
            return contrib

        return self._push(out, vjp)

    def normalize(self, z_ix) -> int:
        z = self._values[z_ix]
        nrm = float(np.linalg.norm(z))
        out = z / _safe(nrm)

        def vjp(g):
            if nrm > CLAMP:
                gz = g / nrm - z * (float(z @ g) / nrm**3)
            else:
                gz = g / CLAMP
            return [(z_ix, gz)]

        return self._push(out, vjp)

    def vec_norm(self, w_ix) -> int:
        w = self._values[w_ix]
        sig = k_vec_norm(w)

        def vjp(g):
            return [(w_ix, (g / _safe(sig)) * w)]

        return self._push(sig, vjp)

    def scale_div(self, w_ix, sig_ix) -> int:
        w, sig = self._values[w_ix], self._values[sig_ix]
        safe = _safe(sig)
        out = w / safe

        def vjp(g):
            contrib = [(w_ix, g / safe)]
            if sig > CLAMP:
                contrib.append((sig_ix, -float(w @ g) / (safe * safe)))
            return contrib

        return self._push(out, vjp)

    def add_scaled_outer(self, m_ix, sig_ix, u_ix, v_ix, sign) -> int:
        m, sig = self._values[m_ix], self._values[sig_ix]
        u, v = self._values[u_ix], self._values[v_ix]
        out = k_add_scaled_outer(m, sig, u, v, sign)
        want_m = self._wants(m_ix)

        def vjp(g):
            contrib = []
            if want_m:
                contrib.append((m_ix, g))
            gv_vec = g @ v
            contrib.append((sig_ix, sign * float(u @ gv_vec)))
            contrib.append((u_ix, (sign * sig) * gv_vec))
            contrib.append((v_ix, (sign * sig) * (g.T @ u)))
            return contrib

        return self._push(out, vjp)

    def stack_columns(self, col_ixs) -> int:
        cols = [self._values[ix] for ix in col_ixs]
        out = k_stack_columns(cols)

        def vjp(g):
            return [(ix, g[:, j]) for j, ix in enumerate(col_ixs)]

        return self._push(out, vjp)

    def matmul_nt(self, r_ix, v_ix) -> int:
        r, v = self._values[r_ix], self._values[v_ix]
        out = k_matmul_nt(r, v)

        def vjp(g):
            return [(r_ix, g @ v), (v_ix, g.T @ r)]

        return self._push(out, vjp)

    def residual_sumsq(self, a_ix, x_ix) -> int:
        a, x = self._values[a_ix], self._values[x_ix]
        out = k_residual_sumsq(a, x)

        def vjp(g):
            return [(x_ix, (2.0 * g) * (x - a))]

        return self._push(out, vjp)

    # -- reverse sweep ------------------------------------------------------

    def backward_values(self) -> np.ndarray:
        """Single reverse pass; gradient w.r.t. leaf values, mask applied."""
        if self.output is None or self.leaf is None:
            raise RuntimeError("forward pass incomplete: output or leaf missing")
        grads: list = [None] * len(self._values)
        grads[self.output] = 1.0
        for ix in range(len(self._values) - 1, -1, -1):
            g = grads[ix]
            if g is None:
                continue
            vjp = self._vjps[ix]
            if vjp is None:
                continue
            for p_ix, pg in vjp(g):
                grads[p_ix] = pg if grads[p_ix] is None else grads[p_ix] + pg
            grads[ix] = None  # release; each node is consumed exactly once
        leaf_grad = grads[self.leaf]
        if leaf_grad is None:
            leaf_grad = np.zeros_like(self._values[self.leaf])
        return np.where(self.mask, leaf_grad, 0.0)
