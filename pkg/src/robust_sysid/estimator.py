"""Sum-of-column-norms system identification and the least-squares baseline.

The robust estimator solves::

    minimize   sum_i ||d_i||_2
    subject to x_{i+1} = A x_i + B u_i + d_i,   i = 0..T-1

With no restriction on ``D`` this is ``min_theta ||Y - theta Z||_{2,col}``
for ``theta = [A, B]``, ``Y = [x_1..x_T]`` and ``Z = [X; U]``. It is solved by
operator splitting on ``(theta, D)`` with coupling ``D = Y - theta Z``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._accel import backend_name
from .errors import RankDeficientError
from .lti import SystemMatrices, Trajectory, col_group_norm


@dataclass
class SolverConfig:
    penalty: float = 1.0
    max_iters: int = 50_000
    tol_abs: float = 1e-9
    tol_rel: float = 1e-7
    adaptive_penalty: bool = True
    # refit on the columns the splitting left exactly zero; kept only if it lowers the objective
    polish: bool = True
    check_every: int = 50

    def __post_init__(self):
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not (self.tol_abs > 0 and self.tol_rel > 0):
            raise ValueError("tolerances must be strictly positive")
        if self.check_every < 1:
            raise ValueError("check_every must be at least 1")


@dataclass
class EstimationResult:
    sys_hat: SystemMatrices
    d_hat: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)
    checkpoints: np.ndarray = field(default_factory=lambda: np.empty(0))

    def to_dict(self) -> dict:
        return {
            "a_hat": self.sys_hat.a.tolist(),
            "b_hat": self.sys_hat.b.tolist(),
            "d_hat": self.d_hat.tolist(),
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict) -> "EstimationResult":
        a = np.asarray(doc["a_hat"], dtype=float)
        b = np.asarray(doc["b_hat"], dtype=float).reshape(a.shape[0], -1)
        return cls(
            sys_hat=SystemMatrices(a, b),
            d_hat=np.asarray(doc["d_hat"], dtype=float).reshape(a.shape[0], -1),
            objective=float(doc["objective"]),
            iterations=int(doc["iterations"]),
            primal_residual=float(doc["primal_residual"]),
            dual_residual=float(doc["dual_residual"]),
            converged=bool(doc["converged"]),
            diagnostics=dict(doc.get("diagnostics", {})),
        )


def block_soft_threshold(v, tau: float) -> np.ndarray:
    """Proximal map of ``tau * ||.||_2``: ``v * max(0, 1 - tau/||v||)``."""
    if tau < 0:
        raise ValueError("tau must be non-negative")
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if nrm <= tau:
        return np.zeros_like(v)
    return v * (1.0 - tau / nrm)


def _objective(theta, y, z) -> float:
    return col_group_norm(y - theta @ z)


def _full_row_rank(z, rel=1e-10) -> bool:
    if z.shape[1] < z.shape[0]:
        return False
    sv = np.linalg.svd(z, compute_uv=False)
    return sv[0] > 0 and sv[-1] > rel * sv[0]


def _refit(y, z, cols):
    zc = z[:, cols]
    if not _full_row_rank(zc):
        return None
    return np.linalg.lstsq(zc.T, y[:, cols].T, rcond=None)[0].T


def solve_lasso(traj: Trajectory, config: SolverConfig | None = None) -> EstimationResult:
    """Minimise ``sum_i ||x_{i+1} - A x_i - B u_i||_2`` over ``(A, B)``.

    The returned ``d_hat`` is recomputed from the constraint, so it is exactly
    feasible, and ``objective`` is its column-norm sum. Non-convergence is
    reported through ``converged`` and the residuals, never raised.
    """
    config = config or SolverConfig()
    y = np.ascontiguousarray(traj.y)
    z = np.ascontiguousarray(traj.data_matrix())
    n, horizon = y.shape
    p = z.shape[0]
    nonzero_cols = int(np.count_nonzero(np.any(z != 0.0, axis=0)))
    diagnostics = {
        "degenerate": nonzero_cols <= p,
        "rank_deficient": not _full_row_rank(z),
        "backend": backend_name(),
    }

    if not np.any(z):
        theta = np.zeros((n, p))
        d_hat = y.copy()
        diagnostics["uniqueness_unverified"] = True
        return EstimationResult(
            SystemMatrices.from_theta(theta, n), d_hat, col_group_norm(d_hat),
            0, 0.0, 0.0, True, diagnostics,
        )

    scale = max(np.linalg.norm(y), np.linalg.norm(z)) / np.sqrt(horizon)
    ys = y / scale
    zs = z / scale
    gram = zs @ zs.T
    ridge = 1e-12 * max(1.0, float(np.trace(gram)) / p)
    solve_mat = np.ascontiguousarray(np.linalg.solve(gram + ridge * np.eye(p), zs).T)

    theta0 = ys @ solve_mat
    d0 = ys - theta0 @ zs
    w0 = np.zeros_like(ys)
    (theta, d_split, _w, rho, iters, r_norm, s_norm, converged,
     best_theta, best_obj, checkpoints, n_ck) = _kernels.admm_sum_of_norms(
        ys, zs, solve_mat, theta0, d0, w0,
        float(config.penalty), int(config.max_iters), float(config.tol_abs),
        float(config.tol_rel), bool(config.adaptive_penalty), int(config.check_every),
    )
    diagnostics["final_penalty"] = float(rho)

    candidates = [("splitting", theta), ("best_checkpoint", best_theta)]
    if config.polish:
        zero_cols = np.flatnonzero(~np.any(d_split != 0.0, axis=0))
        polished = _refit(ys, zs, zero_cols)
        if polished is not None:
            candidates.append(("polished", polished))
            # second pass on the refit's own interpolation set
            resid = np.linalg.norm(ys - polished @ zs, axis=0)
            again = _refit(ys, zs, np.flatnonzero(resid <= 1e-9))
            if again is not None:
                candidates.append(("polished", again))
    source, theta_best = min(candidates, key=lambda c: _objective(c[1], ys, zs))
    diagnostics["solution_source"] = source

    d_hat = y - theta_best @ z
    resid_cols = np.linalg.norm(d_hat, axis=0)
    pinned = resid_cols <= 1e-9 * max(1.0, float(resid_cols.max()))
    diagnostics["uniqueness_unverified"] = not _full_row_rank(z[:, pinned])
    return EstimationResult(
        sys_hat=SystemMatrices.from_theta(theta_best, n),
        d_hat=d_hat,
        objective=col_group_norm(d_hat),
        iterations=int(iters),
        primal_residual=float(r_norm * scale),
        dual_residual=float(s_norm * scale),
        converged=bool(converged),
        diagnostics=diagnostics,
        checkpoints=np.asarray(checkpoints[:n_ck]) * scale,
    )


def solve_least_squares(traj: Trajectory) -> SystemMatrices:
    """Ordinary least squares ``[A, B] = Y Z^T (Z Z^T)^{-1}`` via an SVD solve."""
    y = traj.y
    z = traj.data_matrix()
    p = z.shape[0]
    sv = np.linalg.svd(z, compute_uv=False)
    smax = float(sv[0]) if sv.size else 0.0
    smin = float(sv[-1]) if sv.size == p and z.shape[1] >= p else 0.0
    if not smax > 0 or smin <= 1e-10 * smax:
        raise RankDeficientError(
            f"[X; U] is rank deficient: sigma_min={smin:.3e}, sigma_max={smax:.3e}",
            sigma_min=smin,
            sigma_max=smax,
        )
    theta = np.linalg.lstsq(z.T, y.T, rcond=None)[0].T
    return SystemMatrices.from_theta(theta, traj.n)
