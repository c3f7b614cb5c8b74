"""Monte Carlo protocol: M independent trials over a grid of return coefficients.

Each trial redraws the hyperparameters and the return matrix, factorises J
once and solves every R on the grid from that factorisation.

Seeding rule: trial ``m`` of an experiment with seed ``s`` draws its
hyperparameters from ``SeedSequence(s, spawn_key=(m, 0))`` and its return
noise from ``SeedSequence(s, spawn_key=(m, 1))``.  A trial's streams are
therefore fixed by ``(s, m)`` alone, so serial and parallel runs agree bit for
bit.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence, Union

import numpy as np

from . import replica
from .errors import ParameterError, ReplicaPortfolioError
from .hyperparams import (
    HyperModel,
    HyperParams,
    MomentSet,
    distribution_from_dict,
    empirical_moments,
    population_moments,
    sample_hyperparams,
)
from .market import NoiseSpec, generate_market
from .optimizer import MarketSolver, QuadraticForms, solve_or_portfolio

log = logging.getLogger(__name__)

# Relative slack for the per-trial check eps_OR >= eps.
INEQUALITY_SLACK = 1e-10


@dataclass(frozen=True)
class ExplicitHyperParams:
    """A fixed (r, v) list reused by every trial instead of a generating law."""

    means: tuple[float, ...]
    variances: tuple[float, ...]

    def params(self) -> HyperParams:
        return HyperParams(np.array(self.means, dtype=float), np.array(self.variances, dtype=float))

    def to_dict(self) -> dict:
        return {"explicit": {"means": list(self.means), "variances": list(self.variances)}}


HyperSource = Union[HyperModel, ExplicitHyperParams]


def hyper_source_from_dict(spec: dict) -> HyperSource:
    if "explicit" in spec:
        ex = spec["explicit"]
        return ExplicitHyperParams(tuple(map(float, ex["means"])), tuple(map(float, ex["variances"])))
    try:
        return HyperModel(
            mean_dist=distribution_from_dict(spec["mean"]),
            ratio_dist=distribution_from_dict(spec["ratio"]),
            coupling=spec.get("coupling", "product"),
        )
    except KeyError as exc:
        raise ParameterError(f"hyper model is missing {exc}") from None


def hyper_source_to_dict(source: HyperSource) -> dict:
    return source.to_dict()


@dataclass(frozen=True)
class ExperimentConfig:
    n_assets: int
    n_periods: int
    n_trials: int
    seed: int
    hyper: HyperSource
    r_grid: tuple[float, ...]
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    workers: int = 1

    def __post_init__(self) -> None:
        if self.n_assets < 1:
            raise ParameterError("n_assets must be >= 1")
        if self.n_periods <= self.n_assets:
            raise ParameterError(f"need p > N (alpha > 1), got p={self.n_periods}, N={self.n_assets}")
        if self.n_trials < 1:
            raise ParameterError("n_trials must be >= 1")
        if not self.r_grid:
            raise ParameterError("r_grid must not be empty")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if self.seed < 0:
            raise ParameterError("seed must be a non-negative integer")
        if isinstance(self.hyper, ExplicitHyperParams) and len(self.hyper.means) != self.n_assets:
            raise ParameterError(
                f"explicit hyperparameters list {len(self.hyper.means)} assets, config has n_assets={self.n_assets}"
            )
        object.__setattr__(self, "r_grid", tuple(float(r) for r in self.r_grid))

    @property
    def alpha(self) -> float:
        return self.n_periods / self.n_assets

    def population_moments(self) -> MomentSet:
        if isinstance(self.hyper, ExplicitHyperParams):
            return empirical_moments(self.hyper.params())
        return population_moments(self.hyper)

    def to_dict(self) -> dict:
        return {
            "n_assets": self.n_assets,
            "n_periods": self.n_periods,
            "alpha": self.alpha,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "hyper": hyper_source_to_dict(self.hyper),
            "noise": self.noise.kind,
            "r_grid": list(self.r_grid),
            "workers": self.workers,
        }


def trial_seeds(seed: int, trial_index: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent (hyperparameter, noise) seed sequences of one trial."""
    return (
        np.random.SeedSequence(seed, spawn_key=(trial_index, 0)),
        np.random.SeedSequence(seed, spawn_key=(trial_index, 1)),
    )


@dataclass(frozen=True)
class TrialResult:
    trial_index: int
    R: float
    alpha: float
    epsilon: float
    q_w: float
    sharpe: float
    epsilon_or: float
    expected_epsilon_or: float
    epsilon_prime: float
    forms: QuadraticForms
    r_star_emp: float
    s_star_emp: float
    epsilon_direct: float

    @property
    def or_inequality_holds(self) -> bool:
        return self.epsilon_or >= self.epsilon * (1.0 - INEQUALITY_SLACK)


@dataclass(frozen=True)
class TrialOutcome:
    """All grid results of one trial, or the reason it failed."""

    trial_index: int
    results: tuple[TrialResult | None, ...]
    error: str | None = None


def draw_trial(config: ExperimentConfig, trial_index: int):
    hyper_seq, noise_seq = trial_seeds(config.seed, trial_index)
    if isinstance(config.hyper, ExplicitHyperParams):
        params = config.hyper.params()
    else:
        params = sample_hyperparams(config.hyper, config.n_assets, hyper_seq)
    sample = generate_market(params, config.n_periods, config.noise, noise_seq)
    return params, sample


def _grid_results(config: ExperimentConfig, trial_index: int, r_values: Sequence[float]) -> TrialOutcome:
    params, sample = draw_trial(config, trial_index)
    try:
        solver = MarketSolver(sample, params)
    except ReplicaPortfolioError as exc:
        log.warning("trial %d failed: %s", trial_index, exc)
        return TrialOutcome(trial_index, tuple(None for _ in r_values), f"{type(exc).__name__}: {exc}")

    alpha = sample.alpha
    forms = solver.forms
    try:
        _, r_star, s_star = solver.max_sharpe()
    except ReplicaPortfolioError:
        r_star = s_star = math.nan

    results: list[TrialResult | None] = []
    errors: list[str] = []
    for R in r_values:
        try:
            w_star, k, theta = solver.min_risk(R)
            w_or = solve_or_portfolio(params, R)
        except ReplicaPortfolioError as exc:
            results.append(None)
            errors.append(f"R={R!r}: {type(exc).__name__}: {exc}")
            continue
        eps = 0.5 * (k + R * theta)
        results.append(
            TrialResult(
                trial_index=trial_index,
                R=R,
                alpha=alpha,
                epsilon=eps,
                q_w=w_star.concentration,
                sharpe=R / math.sqrt(2.0 * eps),
                epsilon_or=w_or.risk(sample),
                expected_epsilon_or=w_or.expected_risk(params, alpha),
                epsilon_prime=w_star.expected_risk(params, alpha),
                forms=forms,
                r_star_emp=r_star,
                s_star_emp=s_star,
                epsilon_direct=w_star.risk(sample),
            )
        )
    return TrialOutcome(trial_index, tuple(results), "; ".join(errors) or None)


def run_trial_grid(config: ExperimentConfig, trial_index: int) -> TrialOutcome:
    return _grid_results(config, trial_index, config.r_grid)


def run_trial(config: ExperimentConfig, trial_index: int, R: float) -> TrialResult:
    """One trial at one return coefficient; raises if the trial fails."""
    outcome = _grid_results(config, trial_index, (R,))
    if outcome.results[0] is None:
        raise ReplicaPortfolioError(outcome.error)
    return outcome.results[0]


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stat:
    mean: float
    se: float | None  # None when fewer than two samples
    n: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "Stat":
        a = np.asarray(values, dtype=float)
        if a.size == 0:
            return cls(math.nan, None, 0)
        mean = math.fsum(a) / a.size
        if a.size < 2:
            return cls(mean, None, int(a.size))
        var = math.fsum((a - mean) ** 2) / (a.size - 1)
        return cls(mean, math.sqrt(var / a.size), int(a.size))

    def z_score(self, target: float) -> float:
        if not self.se:
            return math.inf if self.mean != target else 0.0
        return (self.mean - target) / self.se


@dataclass(frozen=True)
class SummaryRow:
    R: float
    n_ok: int
    n_failed: int
    epsilon: Stat
    q_w: Stat
    sharpe: Stat
    epsilon_or: Stat
    epsilon_or_realized: Stat
    epsilon_prime: Stat
    kappa_hat: float
    kappa_hat_mean_of_ratios: float
    kappa_prime_hat: float
    or_violations: int
    prediction: replica.ReplicaPrediction | None

    @property
    def valid(self) -> bool:
        return self.n_ok > 0


@dataclass(frozen=True)
class ProbeSummary:
    ee: Stat
    re: Stat
    rr: Stat
    r_star: Stat
    s_star: Stat
    ee_limit: float
    re_limit: float
    rr_limit: float
    r_star_limit: float | None
    s_star_limit: float | None


@dataclass(frozen=True)
class ExperimentSummary:
    config: ExperimentConfig
    moments: MomentSet
    rows: tuple[SummaryRow, ...]
    probes: ProbeSummary
    n_failed_trials: int
    failures: tuple[str, ...]
    flags: tuple[str, ...]
    trial_epsilon: np.ndarray = field(repr=False)  # (M, |grid|), NaN where failed

    @property
    def all_failed(self) -> bool:
        return not any(row.valid for row in self.rows)

    def to_json_dict(self) -> dict:
        def stat(s: Stat) -> dict:
            return {"mean": _num(s.mean), "se": _num(s.se), "n": s.n}

        rows = []
        for row in self.rows:
            rows.append(
                {
                    "R": row.R,
                    "valid": row.valid,
                    "n_ok": row.n_ok,
                    "n_failed": row.n_failed,
                    "epsilon": stat(row.epsilon),
                    "q_w": stat(row.q_w),
                    "sharpe": stat(row.sharpe),
                    "epsilon_or": stat(row.epsilon_or),
                    "epsilon_or_realized": stat(row.epsilon_or_realized),
                    "epsilon_prime": stat(row.epsilon_prime),
                    "kappa_hat": _num(row.kappa_hat),
                    "kappa_hat_mean_of_ratios": _num(row.kappa_hat_mean_of_ratios),
                    "kappa_prime_hat": _num(row.kappa_prime_hat),
                    "or_violations": row.or_violations,
                    "prediction": None if row.prediction is None else row.prediction.as_dict(),
                }
            )
        p = self.probes
        # Worker count is left out so the summary does not depend on parallelism.
        config = {k: v for k, v in self.config.to_dict().items() if k != "workers"}
        return {
            "config": config,
            "error_bars": "standard error of the mean across trials (unbiased sample std / sqrt(M))",
            "moments": self.moments.as_dict(),
            "n_failed_trials": self.n_failed_trials,
            "failures": list(self.failures),
            "flags": list(self.flags),
            "probes": {
                "ee": {**stat(p.ee), "limit": p.ee_limit},
                "re": {**stat(p.re), "limit": p.re_limit},
                "rr": {**stat(p.rr), "limit": p.rr_limit},
                "r_star": {**stat(p.r_star), "limit": _num(p.r_star_limit)},
                "s_star": {**stat(p.s_star), "limit": _num(p.s_star_limit)},
            },
            "rows": rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _num(x: float | None) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return x


def _ratio(num: float, den: float) -> float:
    return num / den if den else math.nan


def summarize(config: ExperimentConfig, outcomes: Sequence[TrialOutcome]) -> ExperimentSummary:
    outcomes = sorted(outcomes, key=lambda o: o.trial_index)
    moments = config.population_moments()
    alpha = config.alpha
    flags = []
    if moments.R1 <= 0:
        flags.append(f"R1 = {moments.R1!r} <= 0: dual bounds and R* are applied outside the discussed regime")
    if config.noise.kind == "gaussian":
        flags.append("noise distribution assumed Gaussian")

    rows = []
    eps_matrix = np.full((len(outcomes), len(config.r_grid)), np.nan)
    for col, R in enumerate(config.r_grid):
        ok = [o.results[col] for o in outcomes if o.results[col] is not None]
        for irow, o in enumerate(outcomes):
            if o.results[col] is not None:
                eps_matrix[irow, col] = o.results[col].epsilon
        eps = Stat.of([t.epsilon for t in ok])
        eps_or = Stat.of([t.expected_epsilon_or for t in ok])
        eps_prime = Stat.of([t.epsilon_prime for t in ok])
        try:
            pred = replica.predict(moments, alpha, R)
        except ReplicaPortfolioError:
            pred = None
        rows.append(
            SummaryRow(
                R=R,
                n_ok=len(ok),
                n_failed=len(outcomes) - len(ok),
                epsilon=eps,
                q_w=Stat.of([t.q_w for t in ok]),
                sharpe=Stat.of([t.sharpe for t in ok]),
                epsilon_or=eps_or,
                epsilon_or_realized=Stat.of([t.epsilon_or for t in ok]),
                epsilon_prime=eps_prime,
                kappa_hat=_ratio(eps_or.mean, eps.mean),
                kappa_hat_mean_of_ratios=Stat.of([t.expected_epsilon_or / t.epsilon for t in ok]).mean,
                kappa_prime_hat=_ratio(eps_prime.mean, eps.mean),
                or_violations=sum(not t.or_inequality_holds for t in ok),
                prediction=pred,
            )
        )

    firsts = [next((t for t in o.results if t is not None), None) for o in outcomes]
    firsts = [t for t in firsts if t is not None]
    try:
        r_star_limit = replica.max_sharpe_return(moments)
        s_star_limit = replica.sharpe_triple(moments, alpha).s_at_rstar
    except ReplicaPortfolioError:
        r_star_limit = s_star_limit = None
    probes = ProbeSummary(
        ee=Stat.of([t.forms.ee for t in firsts]),
        re=Stat.of([t.forms.re for t in firsts]),
        rr=Stat.of([t.forms.rr for t in firsts]),
        r_star=Stat.of([t.r_star_emp for t in firsts if math.isfinite(t.r_star_emp)]),
        s_star=Stat.of([t.s_star_emp for t in firsts if math.isfinite(t.s_star_emp)]),
        ee_limit=moments.m_v1 / (alpha - 1.0),
        re_limit=moments.m_v1r / (alpha - 1.0),
        rr_limit=moments.m_v1r2 / (alpha - 1.0),
        r_star_limit=r_star_limit,
        s_star_limit=s_star_limit,
    )
    failures = tuple(f"trial {o.trial_index}: {o.error}" for o in outcomes if o.error)
    n_failed = sum(all(t is None for t in o.results) for o in outcomes)
    return ExperimentSummary(config, moments, tuple(rows), probes, n_failed, failures, tuple(flags), eps_matrix)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> ExperimentSummary:
    """Run all M trials and aggregate them against the replica predictions."""
    workers = config.workers if workers is None else workers
    indices = range(config.n_trials)
    if workers <= 1:
        outcomes = [run_trial_grid(config, m) for m in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_trial_grid, [config] * config.n_trials, indices))
    return summarize(config, outcomes)


def linspace_grid(start: float, stop: float, num: int) -> tuple[float, ...]:
    if num < 1:
        raise ParameterError("grid needs at least one point")
    return tuple(float(x) for x in np.linspace(start, stop, num))
