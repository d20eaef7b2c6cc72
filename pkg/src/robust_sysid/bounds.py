"""Error bounds, second-moment envelopes and singular-value concentration.

Everything here is either a closed-form evaluation or a Monte-Carlo check of
one. Constants of the small-ball argument (probability ``1/12`` and floor
``Gamma/2`` with ``Gamma = diag(eps^2 I_n, sigma^2 I_m)``) are fixed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from .certifier import full_row_rank
from .errors import RankDeficientError
from .lti import (
    AttackModel,
    IndexSet,
    SystemMatrices,
    Trajectory,
    col_group_norm,
    sample_attack_disturbances,
    trial_seed,
)

SMALL_BALL_PROBABILITY = 1.0 / 12.0


@dataclass
class ErrorBound:
    c: float
    noise_mass: float
    sigma_min_data: float
    bound: float


def error_bound(c: float, noise_mass: float, sigma_min_data: float) -> ErrorBound:
    """``2 (1+c)/(1-c) * noise_mass / sigma_min_data``."""
    if not 0 < c < 1:
        raise ValueError(f"c must lie in (0, 1) for a finite bound, got {c}")
    if not sigma_min_data > 0:
        raise RankDeficientError("sigma_min of [X; U] must be positive", sigma_min=sigma_min_data)
    if noise_mass < 0:
        raise ValueError("noise_mass must be non-negative")
    bound = 2.0 * (1.0 + c) / (1.0 - c) * noise_mass / sigma_min_data
    return ErrorBound(c, noise_mass, sigma_min_data, bound)


def estimation_error_bound(c: float, traj: Trajectory, s_set: IndexSet) -> ErrorBound:
    """Bound on ``||[A_hat - A, B_hat - B]||_F`` for any robust-estimator solution.

    Valid when ``[X; U]`` satisfies the null space property on ``S`` with
    constant ``c < 1``. Needs the true disturbances stored in ``traj``.
    """
    if traj.disturbances is None:
        raise ValueError("trajectory carries no ground-truth disturbances")
    if not 0 < c < 1:
        raise ValueError(f"c must lie in (0, 1) for a finite bound, got {c}")
    z = traj.data_matrix()
    p, horizon = z.shape
    if horizon <= p:
        raise ValueError(f"need T > m + n, got T = {horizon}, m + n = {p}")
    if not full_row_rank(z):
        sv = np.linalg.svd(z, compute_uv=False)
        raise RankDeficientError(
            "[X; U] does not have full row rank", sigma_min=float(sv[-1]), sigma_max=float(sv[0])
        )
    sigma_min = float(np.linalg.svd(z, compute_uv=False)[-1])
    noise = col_group_norm(traj.disturbances[:, s_set.complement().as_array()])
    return error_bound(c, noise, sigma_min)


def attack_constants(sys: SystemMatrices, model: AttackModel) -> dict:
    """``alpha_min``, ``alpha_max`` and ``beta_max`` from the singular values of
    ``A``, ``A + P``, ``B`` and ``B + Q``."""
    model.check_against(sys)
    sa = np.linalg.svd(sys.a, compute_uv=False)
    sap = np.linalg.svd(sys.a + model.p_mat, compute_uv=False)
    if sys.m:
        beta = max(
            np.linalg.svd(sys.b, compute_uv=False)[0],
            np.linalg.svd(sys.b + model.q_mat, compute_uv=False)[0],
        )
    else:
        beta = 0.0
    return {
        "alpha_min": float(min(sa[-1], sap[-1])),
        "alpha_max": float(max(sa[0], sap[0])),
        "beta_max": float(beta),
    }


@dataclass
class GramianEnvelope:
    alpha_min: float
    alpha_max: float
    beta_max: float
    epsilon: float
    gamma0: np.ndarray
    lower: np.ndarray  # (T, n, n)
    upper: np.ndarray  # (T, n, n)
    input_scale: float = 1.0

    @property
    def drive(self) -> float:
        return self.epsilon**2 + self.input_scale**2 * self.beta_max**2

    def closed_form_upper(self, t: int) -> np.ndarray:
        n = self.gamma0.shape[0]
        a2 = self.alpha_max**2
        geom = sum(a2**i for i in range(t))
        return a2**t * self.gamma0 + geom * self.drive * np.eye(n)

    def ordering_margin(self) -> np.ndarray:
        """``lambda_min(upper_t - lower_t)`` for every ``t``."""
        return np.array([np.linalg.eigvalsh(u - l)[0] for l, u in zip(self.lower, self.upper)])


def _check_psd(mat, name):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.allclose(mat, mat.T, atol=1e-12 * max(1.0, np.abs(mat).max())):
        raise ValueError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(mat)[0]
    if lam < -1e-10 * max(1.0, np.abs(mat).max()):
        raise ValueError(f"{name} is not positive semidefinite (min eigenvalue {lam:.3e})")
    return mat


def gramian_envelope(
    alpha_min, alpha_max, beta_max, epsilon, gamma0, horizon, input_scale=1.0
) -> GramianEnvelope:
    """Evaluate ``lower_t = a_min^2 lower_{t-1} + eps^2 I`` and
    ``upper_t = a_max^2 upper_{t-1} + (eps^2 + s^2 b_max^2) I`` for ``t < horizon``.

    Both start from ``gamma0``. ``input_scale`` is the input standard
    deviation ``s``; the input term enters the second moment as
    ``s^2 (B+Q)(B+Q)^T``, so ``s = 1`` recovers the unit-variance form.
    The envelope is a valid sandwich of ``E[x_t x_t^T]`` whenever
    ``gamma0`` is a multiple of the identity (e.g. ``x_0 = 0``); for
    anisotropic ``gamma0`` and non-normal dynamics it may not be.
    """
    for name, val in (("alpha_min", alpha_min), ("alpha_max", alpha_max),
                      ("beta_max", beta_max), ("epsilon", epsilon)):
        if val < 0:
            raise ValueError(f"{name} must be non-negative")
    gamma0 = _check_psd(gamma0, "gamma0")
    n = gamma0.shape[0]
    eye = np.eye(n)
    lower = np.empty((horizon, n, n))
    upper = np.empty((horizon, n, n))
    lower[0] = gamma0
    upper[0] = gamma0
    drive = epsilon**2 + input_scale**2 * beta_max**2
    for t in range(1, horizon):
        lower[t] = alpha_min**2 * lower[t - 1] + epsilon**2 * eye
        upper[t] = alpha_max**2 * upper[t - 1] + drive * eye
    return GramianEnvelope(
        float(alpha_min), float(alpha_max), float(beta_max), float(epsilon),
        gamma0, lower, upper, float(input_scale),
    )


def envelope_for(sys: SystemMatrices, model: AttackModel, gamma0=None, horizon=None):
    consts = attack_constants(sys, model)
    if gamma0 is None:
        gamma0 = np.zeros((sys.n, sys.n))
    return gramian_envelope(
        consts["alpha_min"], consts["alpha_max"], consts["beta_max"], model.epsilon,
        gamma0, horizon or model.horizon, model.sigma,
    )


@dataclass
class ConcentrationQuantities:
    c_of_i: float
    sigma_max_threshold: float
    sigma_min_threshold: float
    tail_probability: float
    exponent: float


def concentration_exponent(size, m, n, c_of_i, floor_sq, eta, k=1, p=SMALL_BALL_PROBABILITY):
    """Exponent of the lower-tail term; ``floor_sq`` is ``k floor(|I|/k) p^2 / 16``."""
    denom = floor_sq * eta**2
    if denom <= 0 or c_of_i <= 0:
        return math.inf
    return (
        -size * p**2 / (10.0 * k)
        + 2.0 * (m + n) * math.log(10.0 / p)
        + 0.5 * (m + n) * math.log(c_of_i / denom)
    )


def concentration_quantities(
    model: AttackModel, sys: SystemMatrices, gamma0, idx: IndexSet, eta: float, k: int = 1
) -> ConcentrationQuantities:
    """Upper and lower singular-value thresholds of ``[X_I; U_I]`` with their tail levels.

    ``C(I) = m sigma^2 |I| + sum_{i in I} tr(upper_i)``;
    ``P(sigma_max > sqrt(C/eta)) <= eta`` and
    ``P(sigma_min < min(eps, sigma) sqrt(k floor(|I|/k) p^2/16)) <= eta + exp(exponent)``.
    """
    if not 0 < eta < 1:
        raise ValueError(f"eta must lie in (0, 1), got {eta}")
    if k < 1:
        raise ValueError("k must be at least 1")
    if idx.horizon != model.horizon:
        raise ValueError("index set horizon must match the attack model horizon")
    env = envelope_for(sys, model, gamma0, model.horizon)
    n, m = sys.n, sys.m
    size = len(idx)
    p = SMALL_BALL_PROBABILITY
    c_of_i = m * model.sigma**2 * size + float(sum(np.trace(env.upper[i]) for i in idx))
    floor_sq = k * (size // k) * p**2 / 16.0
    scale = min(model.epsilon, model.sigma)
    exponent = concentration_exponent(size, m, n, c_of_i, scale**2 * floor_sq, eta, k, p)
    tail = eta + (math.exp(exponent) if exponent < 700 else math.inf)
    return ConcentrationQuantities(
        c_of_i=c_of_i,
        sigma_max_threshold=math.sqrt(c_of_i / eta),
        sigma_min_threshold=scale * math.sqrt(floor_sq),
        tail_probability=tail,
        exponent=exponent,
    )


def _simulate_trials(model, sys, trials, rng_seed, x0, workers):
    x0 = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float)
    return ordered_map(
        lambda i: sample_attack_disturbances(model, sys, x0, trial_seed(rng_seed, i)),
        range(trials),
        workers,
    )


@dataclass
class SigmaCheck:
    empirical_exceed_rate: float
    threshold: float
    eta: float
    trials: int
    slack: float

    @property
    def passed(self) -> bool:
        return self.empirical_exceed_rate <= self.eta + self.slack


def monte_carlo_sigma_check(
    model: AttackModel, sys: SystemMatrices, idx: IndexSet, eta: float, trials: int,
    rng_seed: int, x0=None, workers=None,
) -> SigmaCheck:
    """Fraction of simulated trajectories with ``sigma_max([X_I; U_I]) > sqrt(C(I)/eta)``.

    ``x0`` is deterministic (default zero), so the envelope starts from
    ``x0 x0^T``. The pass criterion allows ``3 sqrt(eta (1-eta)/trials)``.
    """
    if trials < 100:
        raise ValueError("need at least 100 trials")
    x0v = np.zeros(sys.n) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    q = concentration_quantities(model, sys, np.outer(x0v, x0v), idx, eta)
    cols = idx.as_array()

    def top_sv(traj):
        block = traj.data_matrix()[:, cols]
        return float(np.linalg.svd(block, compute_uv=False)[0]) if block.size else 0.0

    trajs = _simulate_trials(model, sys, trials, rng_seed, x0v, workers)
    exceed = sum(top_sv(tr) > q.sigma_max_threshold for tr in trajs)
    return SigmaCheck(
        empirical_exceed_rate=exceed / trials,
        threshold=q.sigma_max_threshold,
        eta=eta,
        trials=trials,
        slack=3.0 * math.sqrt(eta * (1.0 - eta) / trials),
    )


@dataclass
class SandwichCheck:
    upper_margin: np.ndarray
    lower_margin: np.ndarray
    upper_se: np.ndarray
    lower_se: np.ndarray
    z: float

    @property
    def passed(self) -> bool:
        ok_up = self.upper_margin >= -self.z * self.upper_se - 1e-12
        ok_lo = self.lower_margin >= -self.z * self.lower_se - 1e-12
        return bool(np.all(ok_up) and np.all(ok_lo))


def monte_carlo_states(model, sys, trials, rng_seed, x0=None, workers=None) -> np.ndarray:
    """States of ``trials`` independent runs, shape ``(trials, T, n)`` for ``t < T``."""
    trajs = _simulate_trials(model, sys, trials, rng_seed, x0, workers)
    return np.stack([tr.states[:, :-1].T for tr in trajs])


def _directional_margin(diff, samples):
    lam, vecs = np.linalg.eigh(diff)
    v = vecs[:, 0]
    proj = (samples @ v) ** 2
    se = proj.std(ddof=1) / math.sqrt(len(proj))
    return lam[0], se


def gramian_sandwich_check(env: GramianEnvelope, states: np.ndarray, z: float = 5.0) -> SandwichCheck:
    """Compare the sample second moments with the envelope at every ``t``.

    The standard error is that of ``mean((v^T x_t)^2)`` along the eigenvector
    ``v`` attaining the smallest eigenvalue of the margin.
    """
    horizon = min(states.shape[1], env.upper.shape[0])
    up_m, lo_m, up_se, lo_se = (np.empty(horizon) for _ in range(4))
    for t in range(horizon):
        x = states[:, t, :]
        gram = x.T @ x / x.shape[0]
        up_m[t], up_se[t] = _directional_margin(env.upper[t] - gram, x)
        lo_m[t], lo_se[t] = _directional_margin(gram - env.lower[t], x)
    return SandwichCheck(up_m, lo_m, up_se, lo_se, z)
