"""Sufficient conditions for the null space property of ``[X; U]``.

Three certificates are offered, all one-directional: a positive answer
guarantees the property (and with constant below one, unique recovery by the
robust estimator); a negative answer is inconclusive.

* ``singular_value``: ``sqrt(|S|) sigma_max([X_S; U_S]) < c sigma_min([X_Sc; U_Sc])``.
* ``xi_s``: the s-self-decomposable amplitude with ``s = |S|`` gives constant ``xi_s``.
* ``xi_1``: the 1-amplitude gives ``|S| xi_1 / (1 - (|S|-1) xi_1)``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ._parallel import ordered_map
from .errors import EnumerationCapError, NotDecomposableError
from .lp import min_inf_norm_solve
from .lti import IndexSet, Trajectory

METHODS = ("singular_value", "xi_s", "xi_1")
DEFAULT_SUBSET_CAP = 10**6


@dataclass
class CertificateReport:
    method: str
    c_achieved: Optional[float]
    xi_value: Optional[float]
    recovery_certified: bool
    details: dict = field(default_factory=dict)
    inapplicable_reasons: list = field(default_factory=list)

    @property
    def applicable(self) -> bool:
        return self.c_achieved is not None

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass
class DecompositionWitness:
    index_set: IndexSet
    gamma: np.ndarray
    amplitude: float

    def residual(self, v: np.ndarray) -> float:
        rest = np.delete(v, self.index_set.as_array(), axis=1)
        return float(np.linalg.norm(v[:, self.index_set.as_array()] - rest @ self.gamma))


def _data(traj_or_matrix) -> np.ndarray:
    if isinstance(traj_or_matrix, Trajectory):
        return traj_or_matrix.data_matrix()
    return np.atleast_2d(np.asarray(traj_or_matrix, dtype=float))


def _inapplicable(method, reason, **details) -> CertificateReport:
    return CertificateReport(method, None, None, False, details, [reason])


def _sigma_min_rows(mat: np.ndarray) -> float:
    """Smallest of the ``rows`` singular values (0 if fewer columns than rows)."""
    if mat.shape[1] < mat.shape[0]:
        return 0.0
    return float(np.linalg.svd(mat, compute_uv=False)[-1])


def full_row_rank(v: np.ndarray, rtol=1e-10) -> bool:
    if v.shape[1] < v.shape[0]:
        return False
    sv = np.linalg.svd(v, compute_uv=False)
    return bool(sv[0] > 0 and sv[-1] > rtol * sv[0])


def check_singular_value_nsp(traj, s_set: IndexSet, c: float = 1.0) -> CertificateReport:
    """Singular-value test; ``c_achieved = sqrt(|S|) sigma_max / sigma_min``."""
    if not c > 0:
        raise ValueError("c must be positive")
    v = _data(traj)
    p, horizon = v.shape
    if s_set.horizon != horizon:
        raise ValueError(f"index set horizon {s_set.horizon} != T = {horizon}")
    sc = s_set.complement()
    if horizon < p or len(sc) < p:
        return _inapplicable(
            "singular_value",
            f"|S^c| = {len(sc)} < m + n = {p}: condition inapplicable",
            s_size=len(s_set),
        )
    v_s = v[:, s_set.as_array()]
    v_sc = v[:, sc.as_array()]
    sig_max = float(np.linalg.svd(v_s, compute_uv=False)[0]) if len(s_set) else 0.0
    sig_min = _sigma_min_rows(v_sc)
    lhs = math.sqrt(len(s_set)) * sig_max
    rhs = c * sig_min
    scale = float(np.abs(v).max()) if v.size else 0.0
    if sig_min <= 1e-12 * max(scale, 1e-300):
        c_achieved = math.inf
    else:
        c_achieved = lhs / sig_min
    details = {
        "sigma_max_s": sig_max,
        "sigma_min_sc": sig_min,
        "s_size": len(s_set),
        "lhs": lhs,
        "rhs": rhs,
        "c": c,
        "holds": bool(lhs < rhs),
    }
    return CertificateReport("singular_value", c_achieved, None, bool(c_achieved < 1), details)


def min_inf_norm_columns(basis, targets, workers=None):
    """Solve ``min ||g||_inf, basis g = target`` for every column of ``targets``."""
    return ordered_map(lambda col: min_inf_norm_solve(basis, col), list(targets.T), workers)


def xi_1(traj, workers=None):
    """1-self-decomposable amplitude: ``max_i min{||g||_inf : V_{!=i} g = v_i}``.

    Raises ``NotDecomposableError`` (with ``.index``) at the first column, in
    index order, that lies outside the span of the others.
    """
    v = _data(traj)
    horizon = v.shape[1]
    if horizon < 2:
        raise ValueError("need at least two columns")

    def solve(i):
        try:
            return min_inf_norm_solve(np.delete(v, i, axis=1), v[:, i])
        except NotDecomposableError as exc:
            return exc

    sols = ordered_map(solve, range(horizon), workers)
    witnesses = []
    for i, sol in enumerate(sols):
        if isinstance(sol, NotDecomposableError):
            raise NotDecomposableError(
                f"not 1-self-decomposable: column {i} is outside the span of the others",
                residual=sol.residual,
                index=(i,),
            )
        witnesses.append(DecompositionWitness(IndexSet((i,), horizon), sol.gamma[:, None], sol.value))
    value = max(w.amplitude for w in witnesses)
    return value, witnesses


def xi_s(traj, s: int, subset_cap: int = DEFAULT_SUBSET_CAP, workers=None):
    """s-self-decomposable amplitude by exhaustive enumeration of size-s index sets.

    Returns ``(value, [witness at the maximising set])``.
    """
    v = _data(traj)
    horizon = v.shape[1]
    if s < 1:
        raise ValueError("s must be at least 1")
    if horizon - s < 1:
        raise ValueError(f"s = {s} leaves no remaining columns (T = {horizon})")
    count = math.comb(horizon, s)
    if count > subset_cap:
        raise EnumerationCapError(
            f"C({horizon}, {s}) = {count} subsets exceeds the cap of {subset_cap}; "
            "use xi_1 with its |S| bound instead",
            count=count,
        )

    def solve(subset):
        rest = np.delete(v, subset, axis=1)
        cols = []
        for k in subset:
            try:
                cols.append(min_inf_norm_solve(rest, v[:, k]))
            except NotDecomposableError as exc:
                return subset, exc
        return subset, cols

    best = None
    for subset, cols in ordered_map(solve, itertools.combinations(range(horizon), s), workers):
        if isinstance(cols, NotDecomposableError):
            raise NotDecomposableError(
                f"not {s}-self-decomposable at index set {subset}",
                residual=cols.residual,
                index=subset,
            )
        amp = sum(sol.value for sol in cols)
        if best is None or amp > best[0]:
            best = (amp, subset, np.column_stack([sol.gamma for sol in cols]))
    amp, subset, gamma = best
    return amp, [DecompositionWitness(IndexSet(subset, horizon), gamma, amp)]


def xi1_constant(xi1: float, s_size: int) -> float:
    """NSP constant ``|S| xi_1 / (1 - (|S|-1) xi_1)`` certified by a 1-amplitude."""
    denom = 1.0 - (s_size - 1) * xi1
    if denom <= 0:
        return math.inf
    return s_size * xi1 / denom


def xi1_recovery_threshold(s_size: int) -> float:
    """Largest 1-amplitude (exclusive) that still certifies recovery: ``1/(2|S|-1)``."""
    return 1.0 / (2 * s_size - 1)


def certify_via_xi(
    traj, s_set: IndexSet, mode: str, subset_cap: int = DEFAULT_SUBSET_CAP,
    xi_value: Optional[float] = None, workers=None,
) -> CertificateReport:
    """Certificate from the ``xi_s`` (``s = |S|``) or ``xi_1`` amplitude.

    ``xi_value`` may carry a precomputed amplitude for the chosen mode.
    """
    if mode not in ("xi_s", "xi_1"):
        raise ValueError(f"mode must be 'xi_s' or 'xi_1', got {mode!r}")
    v = _data(traj)
    if s_set.horizon != v.shape[1]:
        raise ValueError(f"index set horizon {s_set.horizon} != T = {v.shape[1]}")
    s_size = len(s_set)
    details = {"s_size": s_size}
    if not full_row_rank(v):
        return _inapplicable(mode, "[X; U] does not have full row rank", **details)
    if s_size == 0:
        return CertificateReport(mode, 0.0, 0.0, True, details)
    if mode == "xi_1" and s_size < 2:
        return _inapplicable(mode, "xi_1 certificate needs |S| > 1", **details)
    try:
        if xi_value is None:
            if mode == "xi_s":
                xi_value, _ = xi_s(v, s_size, subset_cap, workers)
            else:
                xi_value, _ = xi_1(v, workers)
    except EnumerationCapError as exc:
        return _inapplicable(mode, str(exc), subset_count=exc.count, **details)
    except NotDecomposableError as exc:
        return _inapplicable(mode, str(exc), not_decomposable_at=exc.index, **details)
    except ValueError as exc:
        return _inapplicable(mode, str(exc), **details)

    if mode == "xi_s":
        return CertificateReport(mode, float(xi_value), float(xi_value), bool(xi_value < 1), details)

    limit = 1.0 / (s_size - 1)
    details["xi_1_limit"] = limit
    details["recovery_threshold"] = xi1_recovery_threshold(s_size)
    if xi_value > limit:
        return CertificateReport(
            mode, None, float(xi_value), False, details,
            [f"xi_1 = {xi_value:.6g} exceeds 1/(|S|-1) = {limit:.6g}"],
        )
    c = xi1_constant(xi_value, s_size)
    return CertificateReport(
        mode, c, float(xi_value), bool(xi_value < xi1_recovery_threshold(s_size)), details
    )


def nsp_verdict(
    traj, s_set: IndexSet, methods=METHODS, subset_cap: int = DEFAULT_SUBSET_CAP, workers=None
) -> CertificateReport:
    """Run every applicable certificate and keep the smallest certified constant.

    ``recovery_certified`` is true iff some method certifies a constant
    below one; false means "not certified", never "the property fails".
    """
    reports = {}
    for method in methods:
        if method == "singular_value":
            reports[method] = check_singular_value_nsp(traj, s_set, 1.0)
        elif method in ("xi_s", "xi_1"):
            reports[method] = certify_via_xi(traj, s_set, method, subset_cap, workers=workers)
        else:
            raise ValueError(f"unknown method {method!r}")
    reasons = [f"{m}: {r}" for m, rep in reports.items() for r in rep.inapplicable_reasons]
    applicable = [rep for rep in reports.values() if rep.applicable]
    details = {"reports": {m: rep.to_dict() for m, rep in reports.items()}, "s_size": len(s_set)}
    if not applicable:
        return CertificateReport("none", None, None, False, details, reasons)
    best = min(applicable, key=lambda rep: rep.c_achieved)
    xi = next((rep.xi_value for rep in reports.values() if rep.xi_value is not None), None)
    return CertificateReport(
        best.method,
        best.c_achieved,
        best.xi_value if best.xi_value is not None else xi,
        any(rep.recovery_certified for rep in reports.values()),
        details,
        reasons,
    )
