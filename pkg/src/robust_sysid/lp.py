"""Minimum infinity-norm solutions of underdetermined linear systems.

``min ||g||_inf  s.t.  basis @ g = target`` is solved as the linear program::

    minimize t
    subject to  Q (g+ - g-) = c
                g+_j + g-_j + s_j - t = 0
                g+, g-, s, t >= 0

where ``Q`` has orthonormal rows spanning the row space of ``basis`` (so
redundant equations are removed up front) and ``c`` is the matching
right-hand side. At an optimum at most one of ``g+_j, g-_j`` is positive, so
``g+_j + g-_j = |g_j| <= t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import LPError, NotDecomposableError

REDUCED_COST_TOL = 1e-10


@dataclass
class InfNormSolution:
    gamma: np.ndarray
    value: float
    residual: float
    iterations: int


def range_residual(basis, target) -> float:
    """Least-squares residual ``min_g ||basis g - target||``."""
    basis = np.asarray(basis, dtype=float)
    target = np.asarray(target, dtype=float).reshape(-1)
    if basis.shape[1] == 0:
        return float(np.linalg.norm(target))
    g = np.linalg.lstsq(basis, target, rcond=None)[0]
    return float(np.linalg.norm(basis @ g - target))


def in_range(basis, target, rtol=1e-8) -> bool:
    target = np.asarray(target, dtype=float).reshape(-1)
    return range_residual(basis, target) <= rtol * max(1.0, float(np.linalg.norm(target)))


def _row_space(basis):
    u, sv, vt = np.linalg.svd(basis, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return u[:, :0], sv[:0], vt[:0]
    rank = int(np.sum(sv > max(basis.shape) * np.finfo(float).eps * sv[0]))
    return u[:, :rank], sv[:rank], vt[:rank]


def min_inf_norm_solve(basis, target, max_iter=None) -> InfNormSolution:
    """Minimise ``||g||_inf`` subject to ``basis @ g = target``.

    Raises
    ------
    NotDecomposableError
        If ``target`` is outside the range of ``basis`` (least-squares
        residual above ``1e-8 * max(1, ||target||)``).
    """
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    target = np.asarray(target, dtype=float).reshape(-1)
    r, k = basis.shape
    if target.size != r:
        raise ValueError(f"target has length {target.size}, basis has {r} rows")
    resid = range_residual(basis, target)
    if resid > 1e-8 * max(1.0, float(np.linalg.norm(target))):
        raise NotDecomposableError(
            f"target is outside the range of the basis (residual {resid:.3e})", residual=resid
        )
    if k == 0 or not np.any(target):
        return InfNormSolution(np.zeros(k), 0.0, resid, 0)

    u, sv, vt = _row_space(basis)
    q = vt
    c = (u.T @ target) / sv
    rank = q.shape[0]

    # columns: g+ [0,k), g- [k,2k), t [2k], s [2k+1, 3k+1), artificials [3k+1, 3k+1+rank)
    n_struct = 3 * k + 1
    n_cols = n_struct + rank
    rows = rank + k
    tab = np.zeros((rows + 1, n_cols + 1))
    sign = np.where(c < 0, -1.0, 1.0)
    tab[:rank, :k] = q * sign[:, None]
    tab[:rank, k : 2 * k] = -q * sign[:, None]
    tab[:rank, n_cols] = c * sign
    tab[:rank, n_struct:n_cols] = np.eye(rank)
    eye_k = np.eye(k)
    tab[rank:rows, :k] = eye_k
    tab[rank:rows, k : 2 * k] = eye_k
    tab[rank:rows, 2 * k] = -1.0
    tab[rank:rows, 2 * k + 1 : n_struct] = eye_k
    basis_idx = np.concatenate(
        [np.arange(n_struct, n_cols), np.arange(2 * k + 1, n_struct)]
    ).astype(np.int64)
    max_iter = int(max_iter or 50 * (rows + n_cols))
    bland_after = 2 * rows

    # phase 1: drive the artificials out
    tab[rows, :] = -tab[:rank, :].sum(axis=0)
    tab[rows, n_struct:n_cols] = 0.0
    status, it1 = _kernels.simplex_iterate(
        tab, basis_idx, n_struct, max_iter, REDUCED_COST_TOL, bland_after
    )
    if status != _kernels.STATUS_OPTIMAL:
        raise LPError(f"phase 1 stopped with status {status} after {it1} pivots")
    if -tab[rows, n_cols] > 1e-9 * max(1.0, float(np.abs(c).sum())):
        raise LPError("phase 1 could not reach feasibility although the target is in range")
    for i in np.flatnonzero(basis_idx >= n_struct):
        row = tab[i, :n_struct]
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-9:
            tab[i, :] /= tab[i, j]
            for other in range(rows + 1):
                if other != i and tab[other, j] != 0.0:
                    tab[other, :] -= tab[other, j] * tab[i, :]
            basis_idx[i] = j

    # phase 2: minimise t
    cost = np.zeros(n_cols)
    cost[2 * k] = 1.0
    cb = cost[basis_idx]
    tab[rows, :n_cols] = cost - cb @ tab[:rows, :n_cols]
    tab[rows, n_cols] = -cb @ tab[:rows, n_cols]
    status, it2 = _kernels.simplex_iterate(
        tab, basis_idx, n_struct, max_iter, REDUCED_COST_TOL, bland_after
    )
    if status != _kernels.STATUS_OPTIMAL:
        raise LPError(f"phase 2 stopped with status {status} after {it2} pivots")

    x = np.zeros(n_cols)
    x[basis_idx] = tab[:rows, n_cols]
    gamma = _polish(basis, target, x[:k] - x[k : 2 * k])
    return InfNormSolution(
        gamma=gamma,
        value=float(np.abs(gamma).max()),
        residual=float(np.linalg.norm(basis @ gamma - target)),
        iterations=int(it1 + it2),
    )


def _polish(basis, target, gamma):
    """Re-solve for the free entries with the saturated pattern held fixed.

    At a vertex the entries with ``|g_j| = t`` share one magnitude and sign
    pattern; the rest are free. Solving that small system in float64 removes
    accumulated tableau round-off. The refined point is kept only if it is
    feasible and no worse.
    """
    t = float(np.abs(gamma).max())
    if t == 0.0:
        return gamma
    sat = np.abs(np.abs(gamma) - t) <= 1e-9 * max(1.0, t)
    free = ~sat
    signs = np.sign(gamma[sat])
    # unknowns: free entries and t
    lhs = np.hstack([basis[:, free], (basis[:, sat] @ signs)[:, None]])
    sol, *_ = np.linalg.lstsq(lhs, target, rcond=None)
    cand = np.empty_like(gamma)
    cand[free] = sol[:-1]
    cand[sat] = signs * sol[-1]
    old_res = np.linalg.norm(basis @ gamma - target)
    new_res = np.linalg.norm(basis @ cand - target)
    ok = new_res <= max(old_res, 1e-12 * max(1.0, np.linalg.norm(target)))
    if ok and np.abs(cand).max() <= t + 1e-9 * max(1.0, t) and sol[-1] >= 0:
        return cand
    return gamma
