"""Closed-form minimal-risk predictions for random-market portfolios and their Monte Carlo check."""

from .errors import (
    CollinearConstraintError,
    DivergenceError,
    DomainError,
    InfeasibleError,
    ParameterError,
    ReplicaPortfolioError,
    SingularMatrixError,
    UndefinedSharpeError,
)
from .harness import ExperimentConfig, ExplicitHyperParams, run_experiment, run_trial
from .hyperparams import (
    BoundedPareto,
    Discrete,
    HyperModel,
    HyperParams,
    MomentSet,
    PointMass,
    empirical_moments,
    population_moments,
    sample_hyperparams,
)
from .market import MarketSample, NoiseSpec, generate_market
from .optimizer import Portfolio, max_sharpe_portfolio, quadratic_forms, solve_min_risk, solve_or_portfolio
from .replica import (
    dual_return_bounds,
    epsilon_min,
    predict,
    q_w,
    sharpe,
    sharpe_triple,
)

__version__ = "0.1.0"

__all__ = [
    "BoundedPareto",
    "CollinearConstraintError",
    "Discrete",
    "DivergenceError",
    "DomainError",
    "ExperimentConfig",
    "ExplicitHyperParams",
    "HyperModel",
    "HyperParams",
    "InfeasibleError",
    "MarketSample",
    "MomentSet",
    "NoiseSpec",
    "ParameterError",
    "PointMass",
    "Portfolio",
    "ReplicaPortfolioError",
    "SingularMatrixError",
    "UndefinedSharpeError",
    "dual_return_bounds",
    "empirical_moments",
    "epsilon_min",
    "generate_market",
    "max_sharpe_portfolio",
    "population_moments",
    "predict",
    "q_w",
    "quadratic_forms",
    "run_experiment",
    "run_trial",
    "sample_hyperparams",
    "sharpe",
    "sharpe_triple",
    "solve_min_risk",
    "solve_or_portfolio",
]
