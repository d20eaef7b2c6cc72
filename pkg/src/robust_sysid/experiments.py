"""Experiment drivers: error-vs-time curves and certification sweeps."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ._parallel import ordered_map
from .certifier import METHODS, nsp_verdict
from .errors import RankDeficientError
from .estimator import SolverConfig, solve_lasso, solve_least_squares
from .lti import (
    AttackModel,
    IndexSet,
    SystemMatrices,
    Trajectory,
    make_rng,
    sample_attack_disturbances,
    simulate,
    trial_seed,
)
from .bounds import attack_constants

SCHEMA_VERSION = 1
CURVE_HEADER = ["trial", "t", "method", "err_fro", "objective", "converged", "seed"]
SWEEP_HEADER = ["param", "value", "metric", "estimate", "slack"]


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n: int = 10
    m: int = 0
    horizon: int = 200
    attack_probability: float = 0.3
    attack_scale: float = 10.0
    noise_on: bool = False
    noise_scale: float = 1.0
    input_scale: float = 1.0
    trials: int = 20
    rng_seed: int = 0
    eigenvalue_law: str = "uniform:0:1"
    t_step: int = 5
    t_min: int = 0
    # sweep only: attack feedback gains P, Q are this times a normalised Gaussian
    feedback_gain: float = 0.5
    certify_methods: str = "singular_value,xi_s,xi_1"
    subset_cap: int = 2000
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.n < 1 or self.m < 0:
            raise ConfigError("need n >= 1 and m >= 0")
        if not 0.0 <= self.attack_probability <= 1.0:
            raise ConfigError("attack_probability must lie in [0, 1]")
        if self.horizon < self.n + self.m + 1:
            raise ConfigError("horizon must be at least n + m + 1")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.t_step < 1:
            raise ConfigError("t_step must be at least 1")
        parse_eigenvalue_law(self.eigenvalue_law)
        for method in self.methods:
            if method not in METHODS:
                raise ConfigError(f"unknown certify method {method!r}")

    @property
    def methods(self) -> tuple:
        return tuple(m.strip() for m in self.certify_methods.split(",") if m.strip())

    def t_grid(self) -> list:
        start = max(self.t_min, self.n + self.m + 1)
        grid = list(range(start, self.horizon + 1, self.t_step))
        if not grid or grid[-1] != self.horizon:
            grid.append(self.horizon)
        return grid

    @classmethod
    def from_mapping(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(doc) - set(known))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        if "schema_version" not in doc:
            raise ConfigError("config is missing schema_version")
        kwargs = {}
        for key, value in doc.items():
            if isinstance(value, (dict, list)):
                raise ConfigError(f"config must be flat; {key!r} is nested")
            kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_mapping(doc)

    def to_mapping(self) -> dict:
        return asdict(self)


def parse_eigenvalue_law(law: str):
    """``"uniform:lo:hi"`` -> ``(lo, hi)``."""
    parts = law.split(":")
    if len(parts) != 3 or parts[0] != "uniform":
        raise ConfigError(f"eigenvalue_law must look like 'uniform:lo:hi', got {law!r}")
    try:
        lo, hi = float(parts[1]), float(parts[2])
    except ValueError:
        raise ConfigError(f"bad bounds in eigenvalue_law {law!r}") from None
    if not lo < hi:
        raise ConfigError("eigenvalue_law needs lo < hi")
    return lo, hi


def _draw_system_factors(n, rng_seed, eigenvalue_law="uniform:0:1", max_cond=1e6):
    """Eigenvalues and eigenvector matrix, plus the generator for any further draws."""
    if n < 1:
        raise ValueError("n must be at least 1")
    lo, hi = parse_eigenvalue_law(eigenvalue_law)
    rng = make_rng(rng_seed)
    lam = rng.uniform(lo, hi, size=n)
    for _ in range(11):
        p = rng.standard_normal((n, n))
        cond = np.linalg.cond(p)
        if cond <= max_cond:
            return p, lam, rng
    raise ValueError(f"eigenvector matrix stayed ill-conditioned (cond={cond:.3e}) after 10 redraws")


def generate_random_system(
    n: int, rng_seed, m: int = 0, eigenvalue_law: str = "uniform:0:1", max_cond: float = 1e6
) -> SystemMatrices:
    """``A = P diag(lam) P^{-1}`` with ``lam ~ U(lo, hi)`` and Gaussian ``P``.

    ``P`` is redrawn while its condition number exceeds ``max_cond`` (at most
    10 redraws). ``B`` is standard Gaussian when ``m > 0``.
    """
    p, lam, rng = _draw_system_factors(n, rng_seed, eigenvalue_law, max_cond)
    a = np.linalg.solve(p.T, (p * lam).T).T
    b = rng.standard_normal((n, m)) if m else None
    return SystemMatrices(a, b)


@dataclass
class CurveRow:
    trial: int
    t: int
    method: str
    err_fro: float
    objective: float
    converged: bool
    seed: int

    def as_csv(self) -> list:
        return [
            str(self.trial), str(self.t), self.method, repr(float(self.err_fro)),
            repr(float(self.objective)), "true" if self.converged else "false", str(self.seed),
        ]

    @classmethod
    def from_csv(cls, row: list) -> "CurveRow":
        if row[5] not in ("true", "false"):
            raise ValueError(f"converged must be true/false, got {row[5]!r}")
        return cls(int(row[0]), int(row[1]), row[2], float(row[3]), float(row[4]),
                   row[5] == "true", int(row[6]))


def simulate_experiment_trial(config: ExperimentConfig, seed: int):
    """One random system and trajectory following the experiment recipe."""
    rng = make_rng(seed)
    sys = generate_random_system(
        config.n, int(rng.integers(2**63)), config.m, config.eigenvalue_law
    )
    n, m, horizon = config.n, config.m, config.horizon
    x0 = rng.standard_normal(n)
    attacked = rng.random(horizon) < config.attack_probability
    attacks = config.attack_scale * rng.standard_normal((n, horizon)) * attacked
    noise = config.noise_scale * rng.standard_normal((n, horizon))
    inputs = config.input_scale * rng.standard_normal((m, horizon))
    d = attacks + (noise if config.noise_on else 0.0)
    traj = simulate(sys, x0, inputs if m else None, d)
    return sys, traj, IndexSet.from_mask(attacked)


def _estimate_pair(sys: SystemMatrices, traj: Trajectory, solver: SolverConfig):
    truth = sys.theta
    out = []
    try:
        res = solve_lasso(traj, solver)
        out.append(("lasso", float(np.linalg.norm(res.sys_hat.theta - truth)),
                    res.objective, res.converged))
    except Exception:  # recorded, never aborts the sweep
        out.append(("lasso", math.nan, math.nan, False))
    try:
        ls = solve_least_squares(traj)
        obj = float(np.linalg.norm(traj.y - ls.theta @ traj.data_matrix(), axis=0).sum())
        out.append(("least_squares", float(np.linalg.norm(ls.theta - truth)), obj, True))
    except (RankDeficientError, np.linalg.LinAlgError):
        out.append(("least_squares", math.nan, math.nan, False))
    return out


def run_error_curve(config: ExperimentConfig, solver: SolverConfig | None = None,
                    workers=None) -> list:
    """Estimation error of both methods on growing prefixes, for every trial.

    Rows come back ordered by ``(trial, t, method)`` whatever the scheduling.
    """
    solver = solver or SolverConfig()
    grid = config.t_grid()
    seeds = [trial_seed(config.rng_seed, i) for i in range(config.trials)]
    setups = [simulate_experiment_trial(config, s) for s in seeds]
    jobs = [(i, t) for i in range(config.trials) for t in grid]

    def work(job):
        i, t = job
        sys, traj, _ = setups[i]
        return [CurveRow(i, t, meth, err, obj, conv, seeds[i])
                for meth, err, obj, conv in _estimate_pair(sys, traj.prefix(t), solver)]

    rows = []
    for chunk in ordered_map(work, jobs, workers):
        rows.extend(chunk)
    return rows


def write_curve_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CURVE_HEADER)
        for row in rows:
            writer.writerow(row.as_csv())


def read_curve_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CURVE_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(CURVE_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                if len(row) != len(CURVE_HEADER):
                    raise ValueError(f"expected {len(CURVE_HEADER)} fields, got {len(row)}")
                rows.append(CurveRow.from_csv(row))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return rows


def curve_summary(rows, method: str) -> dict:
    """``{t: (q25, median, q75)}`` of ``err_fro`` over trials."""
    by_t = {}
    for row in rows:
        if row.method == method:
            by_t.setdefault(row.t, []).append(row.err_fro)
    return {t: tuple(np.nanpercentile(v, [25, 50, 75])) for t, v in sorted(by_t.items())}


@dataclass
class SweepTrial:
    s_size: int
    trial: int
    seed: int
    certified: bool
    c_achieved: float
    method: str
    all_inapplicable: bool
    alpha_max: float


def _sweep_trial(config: ExperimentConfig, s_size: int, trial: int) -> SweepTrial:
    seed = trial_seed(config.rng_seed, 1_000_003 * s_size + trial)
    rng = make_rng(seed)
    n, m, horizon = config.n, config.m, config.horizon
    sys = generate_random_system(n, int(rng.integers(2**63)), m, config.eigenvalue_law)
    support = IndexSet(tuple(rng.choice(horizon, size=s_size, replace=False)), horizon)
    g = config.feedback_gain
    p_mat = g * rng.standard_normal((n, n)) / math.sqrt(n)
    q_mat = g * rng.standard_normal((n, m)) / math.sqrt(max(m, 1))
    model = AttackModel(support, p_mat, q_mat, epsilon=config.noise_scale, sigma=config.input_scale)
    traj = sample_attack_disturbances(model, sys, rng.standard_normal(n), int(rng.integers(2**63)))
    report = nsp_verdict(traj, support, config.methods, config.subset_cap)
    return SweepTrial(
        s_size, trial, seed, report.recovery_certified,
        math.inf if report.c_achieved is None else float(report.c_achieved),
        report.method, report.method == "none",
        attack_constants(sys, model)["alpha_max"],
    )


def run_certification_sweep(config: ExperimentConfig, s_sizes, workers=None):
    """Certification frequency against attack-set size.

    Returns ``(trials, rows)``: the per-trial outcomes and the aggregated
    ``param,value,metric,estimate,slack`` rows (binomial standard errors as
    slack for frequencies).
    """
    horizon = config.horizon
    for s in s_sizes:
        if not 0 <= s <= horizon:
            raise ConfigError(f"attack-set size {s} outside [0, {horizon}]")
    jobs = [(s, i) for s in s_sizes for i in range(config.trials)]
    trials = ordered_map(lambda job: _sweep_trial(config, *job), jobs, workers)
    rows = []
    for s in s_sizes:
        group = [tr for tr in trials if tr.s_size == s]
        k = len(group)
        freq = sum(tr.certified for tr in group) / k
        inapp = sum(tr.all_inapplicable for tr in group) / k
        cs = [tr.c_achieved for tr in group if math.isfinite(tr.c_achieved)]
        sc = horizon - s
        rows += [
            ("s_size", s, "cert_frequency", freq, math.sqrt(freq * (1 - freq) / k)),
            ("s_size", s, "inapplicable_frequency", inapp, math.sqrt(inapp * (1 - inapp) / k)),
            ("s_size", s, "median_c", float(np.median(cs)) if cs else math.inf, 0.0),
            ("s_size", s, "s2_over_sc", s * s / sc if sc else math.inf, 0.0),
            ("s_size", s, "median_alpha_max", float(np.median([tr.alpha_max for tr in group])), 0.0),
        ]
    return trials, rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        for param, value, metric, est, slack in rows:
            writer.writerow([param, str(value), metric, repr(float(est)), repr(float(slack))])


def read_sweep_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SWEEP_HEADER:
            raise ValueError(f"{path}:1: expected header {','.join(SWEEP_HEADER)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                if len(row) != len(SWEEP_HEADER):
                    raise ValueError(f"expected {len(SWEEP_HEADER)} fields, got {len(row)}")
                rows.append((row[0], int(row[1]), row[2], float(row[3]), float(row[4])))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return rows
