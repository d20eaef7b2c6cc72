"""Linear time-invariant systems, trajectories and column-wise matrix tools.

All trajectory matrices use "columns are time steps": ``X`` is ``n x T`` with
column ``t`` holding ``x_t``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; normals come from numpy's ziggurat transform.

    Both the bit generator and the transform are platform independent, so a
    given seed replays the same trajectory on any machine.
    """
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(base_seed: int, trial: int) -> int:
    """Independent per-trial seed, stable under reordering of trials."""
    state = np.random.SeedSequence([int(base_seed), int(trial)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class SystemMatrices:
    """The pair ``(A, B)`` of ``x_{t+1} = A x_t + B u_t + d_t``.

    ``b`` may have zero columns for an autonomous system.
    """

    a: np.ndarray
    b: np.ndarray = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"A must be a non-empty square matrix, got shape {a.shape}")
        n = a.shape[0]
        if self.b is None:
            b = np.zeros((n, 0))
        else:
            b = np.asarray(self.b, dtype=float)
            if b.ndim == 1:
                b = b.reshape(n, -1) if b.size else np.zeros((n, 0))
            if b.ndim != 2 or b.shape[0] != n:
                raise ValueError(f"B must have {n} rows, got shape {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def theta(self) -> np.ndarray:
        """``[A, B]`` as one ``n x (n+m)`` block."""
        return np.hstack([self.a, self.b])

    @classmethod
    def from_theta(cls, theta: np.ndarray, n: int) -> "SystemMatrices":
        theta = np.asarray(theta, dtype=float)
        return cls(theta[:, :n].copy(), theta[:, n:].copy())


@dataclass(frozen=True)
class IndexSet:
    """A sorted set of time indices drawn from ``{0, ..., horizon-1}``."""

    indices: tuple
    horizon: int

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise ValueError(f"duplicate indices in {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= self.horizon):
            raise ValueError(f"indices must lie in [0, {self.horizon - 1}], got {idx}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask) -> "IndexSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(tuple(np.flatnonzero(mask)), mask.size)

    @classmethod
    def full(cls, horizon: int) -> "IndexSet":
        return cls(tuple(range(horizon)), horizon)

    def complement(self) -> "IndexSet":
        keep = set(self.indices)
        return IndexSet(tuple(i for i in range(self.horizon) if i not in keep), self.horizon)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.horizon, dtype=bool)
        out[list(self.indices)] = True
        return out

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item):
        return item in self.indices


@dataclass(frozen=True)
class AttackModel:
    """Fixed attack times with feedback attacks ``d_t = P x_t + Q u_t + e_t``.

    Off the support ``d_t ~ N(0, epsilon^2 I)``; inputs are ``N(0, sigma^2 I)``.
    """

    support: IndexSet
    p_mat: np.ndarray
    q_mat: np.ndarray
    epsilon: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "p_mat", np.atleast_2d(np.asarray(self.p_mat, dtype=float)))
        q = np.asarray(self.q_mat, dtype=float)
        if q.ndim < 2:
            q = q.reshape(self.p_mat.shape[0], -1)
        object.__setattr__(self, "q_mat", q)

    @property
    def horizon(self) -> int:
        return self.support.horizon

    def check_against(self, sys: SystemMatrices) -> None:
        if self.p_mat.shape != (sys.n, sys.n):
            raise ValueError(f"P must be {sys.n}x{sys.n}, got {self.p_mat.shape}")
        if self.q_mat.shape != (sys.n, sys.m):
            raise ValueError(f"Q must be {sys.n}x{sys.m}, got {self.q_mat.shape}")


@dataclass
class Trajectory:
    """States ``x_0..x_T``, inputs ``u_0..u_{T-1}`` and optional disturbances."""

    states: np.ndarray
    inputs: np.ndarray = None
    disturbances: Optional[np.ndarray] = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] < 2:
            raise ValueError("states must be an n x (T+1) array with T >= 1")
        n, t1 = self.states.shape
        if self.inputs is None or np.size(self.inputs) == 0:
            self.inputs = np.zeros((0, t1 - 1))
        else:
            self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if self.inputs.ndim != 2 or self.inputs.shape[1] != t1 - 1:
            raise ValueError(
                f"expected {t1 - 1} input columns for {t1} states, got {self.inputs.shape[1]}"
            )
        if self.disturbances is not None:
            self.disturbances = np.asarray(self.disturbances, dtype=float)
            if self.disturbances.shape != (n, t1 - 1):
                raise ValueError(
                    f"disturbances must be {n}x{t1 - 1}, got {self.disturbances.shape}"
                )

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1] - 1

    @property
    def x(self) -> np.ndarray:
        """``X = [x_0, ..., x_{T-1}]``."""
        return self.states[:, :-1]

    @property
    def y(self) -> np.ndarray:
        """Shifted states ``[x_1, ..., x_T]``."""
        return self.states[:, 1:]

    @property
    def u(self) -> np.ndarray:
        return self.inputs

    @property
    def d(self) -> Optional[np.ndarray]:
        return self.disturbances

    def data_matrix(self) -> np.ndarray:
        """Stacked ``[X; U]`` of shape ``(n+m) x T``."""
        return np.vstack([self.x, self.u])

    def prefix(self, t: int) -> "Trajectory":
        """The first ``t`` transitions (states ``x_0..x_t``)."""
        if not 1 <= t <= self.horizon:
            raise ValueError(f"prefix length must be in [1, {self.horizon}], got {t}")
        d = None if self.disturbances is None else self.disturbances[:, :t]
        return Trajectory(self.states[:, : t + 1], self.inputs[:, :t], d)


def _as_columns(name: str, value, rows: int, cols: Optional[int]) -> np.ndarray:
    """Accept a ``rows x T`` array or a sequence of ``T`` vectors."""
    if value is None:
        if rows == 0 and cols is not None:
            return np.zeros((0, cols))
        raise ValueError(f"{name} is required")
    if isinstance(value, np.ndarray) and value.ndim == 2:
        arr = value.astype(float)
        if arr.shape[0] != rows:
            raise ValueError(f"{name} must have {rows} rows, got shape {arr.shape}")
    else:
        vecs = list(value)
        for t, v in enumerate(vecs):
            if np.size(v) != rows:
                raise ValueError(f"{name}[{t}] has length {np.size(v)}, expected {rows}")
        arr = np.asarray(vecs, dtype=float).reshape(len(vecs), rows).T
    if cols is not None and arr.shape[1] != cols:
        raise ValueError(f"{name} has {arr.shape[1]} time steps, expected {cols}")
    return arr


def simulate(sys: SystemMatrices, x0, inputs, disturbances) -> Trajectory:
    """Roll ``x_{t+1} = A x_t + B u_t + d_t`` forward from ``x0``.

    ``inputs`` and ``disturbances`` are either ``dim x T`` arrays or
    sequences of ``T`` vectors. Pass ``inputs=None`` when ``m = 0``.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.n:
        raise ValueError(f"x0 has length {x0.size}, expected {sys.n}")
    d = _as_columns("disturbances", disturbances, sys.n, None)
    horizon = d.shape[1]
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    u = _as_columns("inputs", inputs, sys.m, horizon)
    states = np.empty((sys.n, horizon + 1))
    states[:, 0] = x0
    for t in range(horizon):
        states[:, t + 1] = sys.a @ states[:, t] + sys.b @ u[:, t] + d[:, t]
    return Trajectory(states, u, d)


def sample_attack_disturbances(
    model: AttackModel, sys: SystemMatrices, x0, rng_seed
) -> Trajectory:
    """Draw Gaussian inputs and feedback attacks, then simulate.

    Draw order is fixed (all inputs, then all noise vectors) so equal seeds
    give bit-identical trajectories.
    """
    model.check_against(sys)
    n, m, horizon = sys.n, sys.m, model.horizon
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != n:
        raise ValueError(f"x0 has length {x0.size}, expected {n}")
    rng = make_rng(rng_seed)
    u = model.sigma * rng.standard_normal((horizon, m)).T
    e = model.epsilon * rng.standard_normal((horizon, n)).T
    attacked = model.support.mask()
    states = np.empty((n, horizon + 1))
    d = np.empty((n, horizon))
    states[:, 0] = x0
    for t in range(horizon):
        xt = states[:, t]
        if attacked[t]:
            d[:, t] = model.p_mat @ xt + model.q_mat @ u[:, t] + e[:, t]
        else:
            d[:, t] = e[:, t]
        states[:, t + 1] = sys.a @ xt + sys.b @ u[:, t] + d[:, t]
    return Trajectory(states, u, d)


def col_group_norm(mat) -> float:
    """Sum over columns of the column Euclidean norms."""
    mat = np.asarray(mat, dtype=float)
    if mat.size == 0:
        return 0.0
    return float(np.sqrt(np.einsum("ij,ij->j", mat, mat)).sum())


def project_columns(mat, idx: IndexSet) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if idx.horizon != mat.shape[1]:
        raise ValueError(f"index set horizon {idx.horizon} != {mat.shape[1]} columns")
    out = np.zeros_like(mat)
    cols = idx.as_array()
    out[:, cols] = mat[:, cols]
    return out


def submatrix(mat, idx: IndexSet) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if idx.horizon != mat.shape[1]:
        raise ValueError(f"index set horizon {idx.horizon} != {mat.shape[1]} columns")
    return mat[:, idx.as_array()]


def dynamics_residual(sys: SystemMatrices, traj: Trajectory) -> float:
    """``max_t ||x_{t+1} - A x_t - B u_t - d_t||``."""
    d = traj.disturbances if traj.disturbances is not None else 0.0
    r = traj.y - sys.a @ traj.x - sys.b @ traj.u - d
    return float(np.linalg.norm(r, axis=0).max())


# --- CSV --------------------------------------------------------------------


def csv_header(n: int, m: int, with_disturbances: bool = True) -> list:
    cols = ["t"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)]
    if with_disturbances:
        cols += [f"d_{i}" for i in range(n)]
    return cols


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per time step; input and disturbance cells are blank at ``t = T``."""
    n, m, horizon = traj.n, traj.m, traj.horizon
    has_d = traj.disturbances is not None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(n, m, has_d))
        for t in range(horizon + 1):
            row = [str(t)] + [_fmt(v) for v in traj.states[:, t]]
            if t < horizon:
                row += [_fmt(v) for v in traj.inputs[:, t]]
                if has_d:
                    row += [_fmt(v) for v in traj.disturbances[:, t]]
            else:
                row += [""] * (m + (n if has_d else 0))
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if not header or header[0] != "t":
        raise ValueError(f"{path}:1: header must start with 't'")
    n = sum(1 for h in header if h.startswith("x_"))
    m = sum(1 for h in header if h.startswith("u_"))
    nd = sum(1 for h in header if h.startswith("d_"))
    if header != csv_header(n, m, nd > 0) or nd not in (0, n):
        raise ValueError(f"{path}:1: unexpected header {header}")
    body = rows[1:]
    horizon = len(body) - 1
    if horizon < 1:
        raise ValueError(f"{path}:2: need at least two rows of states")
    states = np.empty((n, horizon + 1))
    inputs = np.empty((m, horizon))
    dist = np.empty((n, horizon)) if nd else None
    for lineno, row in enumerate(body, start=2):
        t = lineno - 2
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            if int(row[0]) != t:
                raise ValueError(f"expected t={t}, got {row[0]}")
            states[:, t] = [float(v) for v in row[1 : 1 + n]]
            if t < horizon:
                inputs[:, t] = [float(v) for v in row[1 + n : 1 + n + m]]
                if dist is not None:
                    dist[:, t] = [float(v) for v in row[1 + n + m :]]
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return Trajectory(states, inputs, dist)
