"""Hot loops: the splitting iteration and the dense simplex pivot loop.

Both are written in numba's nopython numpy subset; see ``_accel``.
"""
import numpy as np

from ._accel import jit_kernel

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2


@jit_kernel
def block_soft_threshold_columns(v, tau):
    """Apply ``v_j * max(0, 1 - tau/||v_j||)`` to every column of ``v``."""
    n, t = v.shape
    out = np.zeros_like(v)
    for j in range(t):
        s = 0.0
        for i in range(n):
            s += v[i, j] * v[i, j]
        nrm = np.sqrt(s)
        if nrm > tau:
            scale = 1.0 - tau / nrm
            for i in range(n):
                out[i, j] = v[i, j] * scale
    return out


@jit_kernel
def column_norm_sum(v):
    n, t = v.shape
    total = 0.0
    for j in range(t):
        s = 0.0
        for i in range(n):
            s += v[i, j] * v[i, j]
        total += np.sqrt(s)
    return total


@jit_kernel
def admm_sum_of_norms(
    y, z, solve_mat, theta, d, w, rho, max_iters, tol_abs, tol_rel, adaptive, check_every
):
    """Two-block splitting for ``min sum_j ||d_j||`` s.t. ``theta z + d = y``.

    ``w`` is the scaled dual variable and ``solve_mat`` is the cached
    ``z^T (z z^T + ridge I)^{-1}``, so the theta step is one product.

    Returns ``(theta, d, w, rho, iters, r_norm, s_norm, converged,
    best_theta, best_obj, checkpoints, n_checkpoints)`` where ``checkpoints``
    holds the best feasible objective seen at every ``check_every`` iterations.
    """
    n, t = y.shape
    p = z.shape[0]
    sqrt_nt = np.sqrt(n * t)
    sqrt_np = np.sqrt(n * p)
    y_norm = np.linalg.norm(y)
    zt = z.T.copy()
    checkpoints = np.empty(max_iters // check_every + 2)
    n_ck = 0
    best_obj = np.inf
    best_theta = theta.copy()
    r_norm = np.inf
    s_norm = np.inf
    converged = False
    adapt_until = max_iters // 2
    it = 0
    while it < max_iters:
        it += 1
        theta = (y - d - w) @ solve_mat
        tz = theta @ z
        d_old = d
        d = block_soft_threshold_columns(y - tz - w, 1.0 / rho)
        resid = tz + d - y
        w = w + resid
        r_norm = np.linalg.norm(resid)
        s_norm = rho * np.linalg.norm((d - d_old) @ zt)
        eps_pri = tol_abs * sqrt_nt + tol_rel * max(np.linalg.norm(tz), np.linalg.norm(d), y_norm)
        eps_dual = tol_abs * sqrt_np + tol_rel * rho * np.linalg.norm(w @ zt)
        done = r_norm <= eps_pri and s_norm <= eps_dual
        if done or it % check_every == 0:
            obj = column_norm_sum(y - tz)
            if obj < best_obj:
                best_obj = obj
                best_theta = theta.copy()
            checkpoints[n_ck] = best_obj
            n_ck += 1
        if done:
            converged = True
            break
        if adaptive and it % 10 == 0 and it < adapt_until:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                w = w / 2.0
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                w = w * 2.0
    return (
        theta, d, w, rho, it, r_norm, s_norm, converged,
        best_theta, best_obj, checkpoints, n_ck,
    )


@jit_kernel
def simplex_iterate(tab, basis, n_enter, max_iter, tol, bland_after):
    """Pivot a minimisation tableau to optimality.

    ``tab`` is ``(rows+1) x (cols+1)``: constraint rows on top, reduced-cost
    row last, right-hand side in the last column. Only columns below
    ``n_enter`` may enter. Dantzig's rule is used until ``bland_after``
    consecutive degenerate pivots, after which Bland's rule takes over for the
    rest of the phase and rules out cycling.
    """
    m = tab.shape[0] - 1
    rhs = tab.shape[1] - 1
    it = 0
    streak = 0
    bland = False
    while it < max_iter:
        enter = -1
        if bland:
            for j in range(n_enter):
                if tab[m, j] < -tol:
                    enter = j
                    break
        else:
            best = -tol
            for j in range(n_enter):
                if tab[m, j] < best:
                    best = tab[m, j]
                    enter = j
        if enter < 0:
            return STATUS_OPTIMAL, it
        leave = -1
        best_ratio = np.inf
        for i in range(m):
            a = tab[i, enter]
            if a > 1e-9:
                ratio = tab[i, rhs] / a
                if leave < 0 or ratio < best_ratio - 1e-12:
                    best_ratio = ratio
                    leave = i
                elif ratio <= best_ratio + 1e-12 and basis[i] < basis[leave]:
                    # ties go to the smallest basic index (Bland)
                    best_ratio = min(ratio, best_ratio)
                    leave = i
        if leave < 0:
            return STATUS_UNBOUNDED, it
        if best_ratio <= tol:
            streak += 1
            if streak > bland_after:
                bland = True
        else:
            streak = 0
        piv = tab[leave, enter]
        for j in range(rhs + 1):
            tab[leave, j] /= piv
        for i in range(m + 1):
            if i != leave:
                f = tab[i, enter]
                if f != 0.0:
                    for j in range(rhs + 1):
                        tab[i, j] -= f * tab[leave, j]
                    if i < m and tab[i, rhs] < 0.0 and tab[i, rhs] > -1e-9:
                        tab[i, rhs] = 0.0
        basis[leave] = enter
        it += 1
    return STATUS_ITERATION_LIMIT, it
