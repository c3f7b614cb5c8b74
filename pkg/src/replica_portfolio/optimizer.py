"""Exact finite-N optimal portfolios for one realised market.

All quadratic forms in ``J^-1`` come from one Cholesky factorisation and two
triangular solves (``J y = e`` and ``J z = r``); ``J`` is never inverted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.linalg.lapack import dpocon

from .errors import CollinearConstraintError, InfeasibleError, SingularMatrixError, UndefinedSharpeError
from .hyperparams import HyperParams
from .market import MarketSample

MAX_CONDITION = 1e12
# ee*rr - re^2 below this fraction of ee*rr means r is parallel to e.
COLLINEAR_TOL = 1e-12
# Relative slack on R when the constraints are collinear and R must equal r.
R_MATCH = 1e-10


@dataclass(frozen=True)
class Portfolio:
    """Position sizes normalised so that ``sum(w) = N``; any sign allowed."""

    weights: np.ndarray

    @property
    def n_assets(self) -> int:
        return self.weights.size

    @property
    def budget(self) -> float:
        return float(self.weights.sum() / self.n_assets)

    def expected_return(self, means: np.ndarray) -> float:
        return float(means @ self.weights / self.n_assets)

    @property
    def concentration(self) -> float:
        return float(self.weights @ self.weights / self.n_assets)

    def risk(self, sample: MarketSample) -> float:
        """Investment risk per asset ``w^T J w / (2N)``."""
        w = self.weights
        return float(w @ (sample.j @ w)) / (2.0 * self.n_assets)

    def expected_risk(self, params: HyperParams, alpha: float) -> float:
        """Expectation of the risk per asset over return draws: ``(alpha/2N) sum v w^2``."""
        w = self.weights
        return 0.5 * alpha * float(params.variances @ (w * w)) / self.n_assets


@dataclass(frozen=True)
class QuadraticForms:
    ee: float
    re: float
    rr: float

    @property
    def determinant(self) -> float:
        return self.ee * self.rr - self.re * self.re


class MarketSolver:
    """Factorises J once and answers every per-trial question from it."""

    def __init__(self, sample: MarketSample, params: HyperParams, max_condition: float = MAX_CONDITION):
        if params.n_assets != sample.n_assets:
            raise ValueError(f"{params.n_assets} hyperparameter pairs for {sample.n_assets} assets")
        self.sample = sample
        self.params = params
        n = sample.n_assets
        j = sample.j
        try:
            self._factor = cho_factor(j, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(f"J is not positive definite: {exc}") from None
        anorm = float(np.abs(j).sum(axis=0).max())
        rcond, info = dpocon(self._factor[0], anorm, uplo="U")
        if info != 0 or not rcond > 0 or 1.0 / rcond > max_condition:
            cond = math.inf if not rcond > 0 else 1.0 / rcond
            raise SingularMatrixError(f"J condition estimate {cond:.3e} exceeds {max_condition:.1e}")
        self.condition = 1.0 / rcond
        rhs = np.column_stack([np.ones(n), params.means])
        sol = cho_solve(self._factor, rhs, check_finite=False)
        self.y = sol[:, 0]  # J^-1 e
        self.z = sol[:, 1]  # J^-1 r
        r = params.means
        self.forms = QuadraticForms(
            ee=float(self.y.sum()) / n,
            re=float(r @ self.y) / n,
            rr=float(r @ self.z) / n,
        )

    @property
    def alpha(self) -> float:
        return self.sample.alpha

    def solve(self, b: np.ndarray) -> np.ndarray:
        return cho_solve(self._factor, b, check_finite=False)

    def multipliers(self, R: float) -> tuple[float, float]:
        """Lagrange multipliers (k, theta) of the budget and return constraints."""
        f = self.forms
        det = f.determinant
        if det <= COLLINEAR_TOL * f.ee * f.rr:
            r_only = f.re / f.ee
            if abs(R - r_only) <= R_MATCH * max(1.0, abs(r_only)):
                # The return constraint repeats the budget constraint.
                return 1.0 / f.ee, 0.0
            raise CollinearConstraintError(
                f"all r_i are equal to {r_only!r}; return coefficient R = {R!r} is unattainable"
            )
        k = (f.rr - R * f.re) / det
        theta = (R * f.ee - f.re) / det
        return k, theta

    def min_risk(self, R: float) -> tuple[Portfolio, float, float]:
        k, theta = self.multipliers(R)
        return Portfolio(k * self.y + theta * self.z), k, theta

    def max_sharpe(self) -> tuple[Portfolio, float, float]:
        f = self.forms
        if abs(f.re) <= 1e-14 * math.sqrt(f.ee * f.rr):
            raise UndefinedSharpeError("r^T J^-1 e vanishes: the maximal Sharpe portfolio cannot meet the budget")
        w = self.z / f.re
        return Portfolio(w), f.rr / f.re, math.sqrt(f.rr)


def quadratic_forms(sample: MarketSample, params: HyperParams) -> QuadraticForms:
    """``e'J^-1 e/N``, ``r'J^-1 e/N`` and ``r'J^-1 r/N`` via two linear solves."""
    return MarketSolver(sample, params).forms


def solve_min_risk(sample: MarketSample, params: HyperParams, R: float) -> tuple[Portfolio, float, float]:
    """Risk minimiser under budget and return constraints.

    Returns the portfolio ``w* = k J^-1 e + theta J^-1 r`` and the multipliers
    ``(k, theta)``; the minimal risk per asset is ``(k + R theta) / 2``.
    """
    return MarketSolver(sample, params).min_risk(R)


def max_sharpe_portfolio(sample: MarketSample, params: HyperParams) -> tuple[Portfolio, float, float]:
    """Budget-normalised ``w ∝ J^-1 r`` with its return ``R*`` and Sharpe ratio."""
    return MarketSolver(sample, params).max_sharpe()


def solve_or_portfolio(params: HyperParams, R: float) -> Portfolio:
    """Minimiser of the expected risk ``(alpha/2) sum v_i w_i^2`` under both constraints.

    The solution is ``w_i = (k' + theta' r_i) / v_i``; it does not depend on
    alpha, which only scales the objective.
    """
    r, v = params.means, params.variances
    n = r.size
    iv = 1.0 / v
    a11 = math.fsum(iv) / n
    a12 = math.fsum(iv * r) / n
    a22 = math.fsum(iv * r * r) / n
    det = a11 * a22 - a12 * a12
    if det <= COLLINEAR_TOL * a11 * a22:
        r_only = a12 / a11
        if abs(R - r_only) > R_MATCH * max(1.0, abs(r_only)):
            raise InfeasibleError(f"all r_i equal {r_only!r}; cannot reach R = {R!r}")
        return Portfolio(iv / a11)
    k = (a22 - R * a12) / det
    theta = (R * a11 - a12) / det
    return Portfolio((k + theta * r) * iv)
