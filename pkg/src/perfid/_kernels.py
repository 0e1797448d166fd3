"""Residual and Jacobian kernels for the decomposition system.

Two implementations with one contract: ``residual_jacobian_numba`` (explicit
loops, compiled when numba is available) and ``residual_jacobian_numpy``
(vectorized).  ``residual_jacobian`` dispatches on ``_accel.NUMBA_ENABLED``.

Both take a :class:`Layout` and fill ``F = [target - sum_i lam_i (x)_j w_j(v_j^i); u_j . v_j^i - 1]``
and its Jacobian with respect to the packed variables
``[lam_1, v_1^1, ..., v_k^1, lam_2, ...]``.
"""
from __future__ import annotations

from functools import reduce

import numpy as np

from . import _accel
from ._accel import njit
from .formats import FormatSpec
from .tensors import PatchSet, exponent_table


class Layout:
    """Integer tables describing a (format, rank, patches) triple for the kernels."""

    def __init__(self, fmt: FormatSpec, r: int, patches: PatchSet):
        self.format = fmt
        self.r = r
        k = len(fmt.groups)
        self.k = k
        self.dims = np.array(fmt.dims, dtype=np.int64)
        self.degs = np.array(fmt.degrees, dtype=np.int64)
        self.blocks = np.array(fmt.block_sizes, dtype=np.int64)
        self.group_offsets = np.concatenate(([0], np.cumsum(self.dims)[:-1])).astype(np.int64)
        self.stride = 1 + int(self.dims.sum())
        self.ambient = fmt.ambient_dim
        self.n_eqs = self.ambient + r * k
        self.n_vars = r * self.stride
        maxL, maxn = int(self.blocks.max()), int(self.dims.max())
        self.exps = np.zeros((k, maxL, maxn), dtype=np.int64)
        for j, (n, e) in enumerate(fmt.groups):
            tab = exponent_table(n, e)
            self.exps[j, : tab.shape[0], :n] = tab
        self.exp_tables = [exponent_table(n, e) for n, e in fmt.groups]
        self.amb_idx = np.ascontiguousarray(
            np.stack(np.unravel_index(np.arange(self.ambient), fmt.block_sizes), axis=1).astype(np.int64)
        )
        self.patch = np.zeros((k, maxn), dtype=np.complex128)
        for j, u in enumerate(patches.vectors):
            self.patch[j, : len(u)] = u


@njit(cache=True, nogil=True)
def _fill_numba(x, target, r, dims, degs, blocks, goff, stride, exps, amb_idx, patch, F, J):
    k = dims.shape[0]
    ambient = amb_idx.shape[0]
    maxL = exps.shape[1]
    maxn = exps.shape[2]
    for a in range(ambient):
        F[a] = target[a]
    w = np.zeros((k, maxL), dtype=np.complex128)
    dw = np.zeros((k, maxL, maxn), dtype=np.complex128)
    prefix = np.zeros(k + 1, dtype=np.complex128)
    suffix = np.zeros(k + 1, dtype=np.complex128)
    for i in range(r):
        base = i * stride
        lam = x[base]
        for j in range(k):
            n = dims[j]
            v0 = base + 1 + goff[j]
            for l in range(blocks[j]):
                val = 1.0 + 0.0j
                for m in range(n):
                    a_m = exps[j, l, m]
                    if a_m > 0:
                        val *= x[v0 + m] ** a_m
                w[j, l] = val
                for m in range(n):
                    a_m = exps[j, l, m]
                    if a_m == 0:
                        dw[j, l, m] = 0.0
                        continue
                    d = a_m + 0.0j
                    for mm in range(n):
                        p = exps[j, l, mm]
                        if mm == m:
                            p -= 1
                        if p > 0:
                            d *= x[v0 + mm] ** p
                    dw[j, l, m] = d
        for a in range(ambient):
            prefix[0] = 1.0
            for j in range(k):
                prefix[j + 1] = prefix[j] * w[j, amb_idx[a, j]]
            suffix[k] = 1.0
            for j in range(k - 1, -1, -1):
                suffix[j] = suffix[j + 1] * w[j, amb_idx[a, j]]
            F[a] -= lam * prefix[k]
            J[a, base] = -prefix[k]
            for j in range(k):
                excl = -lam * prefix[j] * suffix[j + 1]
                l = amb_idx[a, j]
                v0 = base + 1 + goff[j]
                for m in range(dims[j]):
                    J[a, v0 + m] = excl * dw[j, l, m]
        for j in range(k):
            row = ambient + i * k + j
            v0 = base + 1 + goff[j]
            acc = -1.0 + 0.0j
            for m in range(dims[j]):
                acc += patch[j, m] * x[v0 + m]
                J[row, v0 + m] = patch[j, m]
            F[row] = acc


def residual_jacobian_numba(layout: Layout, x, target):
    F = np.zeros(layout.n_eqs, dtype=np.complex128)
    J = np.zeros((layout.n_eqs, layout.n_vars), dtype=np.complex128)
    _fill_numba(
        np.ascontiguousarray(x, dtype=np.complex128),
        np.ascontiguousarray(target, dtype=np.complex128),
        layout.r, layout.dims, layout.degs, layout.blocks, layout.group_offsets,
        layout.stride, layout.exps, layout.amb_idx, layout.patch, F, J,
    )
    return F, J


def _block_and_derivative(v: np.ndarray, tab: np.ndarray):
    w = np.prod(v[None, :] ** tab, axis=1)
    n = len(v)
    dw = np.empty((tab.shape[0], n), dtype=np.complex128)
    for m in range(n):
        lowered = tab.copy()
        lowered[:, m] = np.maximum(lowered[:, m] - 1, 0)
        dw[:, m] = tab[:, m] * np.prod(v[None, :] ** lowered, axis=1)
    return w, dw


def residual_jacobian_numpy(layout: Layout, x, target):
    x = np.asarray(x, dtype=np.complex128)
    k, amb = layout.k, layout.ambient
    F = np.zeros(layout.n_eqs, dtype=np.complex128)
    J = np.zeros((layout.n_eqs, layout.n_vars), dtype=np.complex128)
    F[:amb] = target
    shape = tuple(int(b) for b in layout.blocks)
    for i in range(layout.r):
        base = i * layout.stride
        lam = x[base]
        vs = [x[base + 1 + o : base + 1 + o + n] for o, n in zip(layout.group_offsets, layout.dims)]
        parts = [_block_and_derivative(v, tab) for v, tab in zip(vs, layout.exp_tables)]
        ws = [p[0] for p in parts]
        full = reduce(np.multiply.outer, ws).reshape(-1)
        F[:amb] -= lam * full
        J[:amb, base] = -full
        for j in range(k):
            # broadcast every block to its axis, with dW_j's coordinate axis last
            prod = np.ones(shape + (1,), dtype=np.complex128)
            for jj in range(k):
                bshape = [1] * (k + 1)
                bshape[jj] = shape[jj]
                if jj == j:
                    bshape[k] = int(layout.dims[j])
                    prod = prod * parts[j][1].reshape(bshape)
                else:
                    prod = prod * ws[jj].reshape(bshape)
            o = base + 1 + layout.group_offsets[j]
            J[:amb, o : o + layout.dims[j]] = -lam * prod.reshape(amb, -1)
        for j in range(k):
            row = amb + i * k + j
            o = base + 1 + layout.group_offsets[j]
            u = layout.patch[j, : layout.dims[j]]
            F[row] = np.dot(u, vs[j]) - 1.0
            J[row, o : o + layout.dims[j]] = u
    return F, J


def residual_jacobian(layout: Layout, x, target):
    if _accel.NUMBA_ENABLED:
        return residual_jacobian_numba(layout, x, target)
    return residual_jacobian_numpy(layout, x, target)
