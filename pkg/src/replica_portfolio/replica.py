"""Closed-form zero-temperature predictions for the constrained risk minimum.

All functions are pure in ``(moments, alpha, R)``.  Two regimes need care:

* every formula has a pole at ``alpha = 1``; we require ``alpha > 1 + 1e-9``;
* every formula divides by ``V1``.  A weighted variance below
  ``1e-14 * (R1**2 + 1)`` is treated as exactly zero, which is only
  consistent with ``R == R1`` (budget constraint alone).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DivergenceError, InfeasibleError, UndefinedSharpeError
from .hyperparams import MomentSet

ALPHA_MARGIN = 1e-9
DEGENERATE_V1 = 1e-14
# R is considered equal to R1 at this relative distance when V1 is degenerate.
R_MATCH = 1e-12


def _check_alpha(alpha: float) -> None:
    if not alpha > 1.0 + ALPHA_MARGIN:
        raise DivergenceError(f"alpha = {alpha!r}: no typical minimum for p <= N (need alpha > 1)")


def is_degenerate(moments: MomentSet) -> bool:
    return abs(moments.V1) < DEGENERATE_V1 * (moments.R1**2 + 1.0)


def _excess(moments: MomentSet, R: float) -> float:
    """(R - R1)^2 / V1, the return-constraint excess over the budget-only case."""
    d = R - moments.R1
    if is_degenerate(moments):
        if abs(d) <= R_MATCH * max(1.0, abs(moments.R1)):
            return 0.0
        raise InfeasibleError(
            f"V1 = {moments.V1!r} is degenerate: only R = R1 = {moments.R1!r} is attainable, got R = {R!r}"
        )
    return d * d / moments.V1


def c_of_R(moments: MomentSet, R: float) -> float:
    """The quadratic ``c(R)`` entering the concentration of the optimal weights."""
    d = R - moments.R1
    return moments.V2 * d * d + (moments.V1 + d * (moments.R2 - moments.R1)) ** 2


def _or_concentration_term(moments: MomentSet, R: float) -> float:
    """<v^-2> c(R) / (<v^-1>^2 V1^2); equal to <v^-2>/<v^-1>^2 in the degenerate limit."""
    if is_degenerate(moments):
        _excess(moments, R)  # raises unless R == R1
        ratio = 1.0
    else:
        ratio = c_of_R(moments, R) / moments.V1**2
    return moments.m_v2 * ratio / moments.m_v1**2


def epsilon_budget_only(moments: MomentSet, alpha: float) -> float:
    """Minimal risk per asset with the budget constraint alone."""
    _check_alpha(alpha)
    return (alpha - 1.0) / (2.0 * moments.m_v1)


def epsilon_min(moments: MomentSet, alpha: float, R: float) -> float:
    """Minimal investment risk per asset at return coefficient ``R``."""
    return epsilon_budget_only(moments, alpha) * (1.0 + _excess(moments, R))


def q_w(moments: MomentSet, alpha: float, R: float) -> float:
    """Investment concentration ``(1/N) sum w_i^2`` of the risk minimiser."""
    _check_alpha(alpha)
    return (1.0 + _excess(moments, R)) / (alpha - 1.0) + _or_concentration_term(moments, R)


def q_w_budget_only(moments: MomentSet, alpha: float) -> float:
    _check_alpha(alpha)
    return 1.0 / (alpha - 1.0) + moments.m_v2 / moments.m_v1**2


def q_s(moments: MomentSet, alpha: float, R: float) -> float:
    """Variance-weighted self overlap ``(1/N) sum v_i w_i^2`` at zero temperature."""
    _check_alpha(alpha)
    return alpha / ((alpha - 1.0) * moments.m_v1) * (1.0 + _excess(moments, R))


def sharpe(moments: MomentSet, alpha: float, R: float) -> float:
    """Sharpe ratio ``R / sqrt(2 eps)``; negative for R < 0."""
    return R / math.sqrt(2.0 * epsilon_min(moments, alpha, R))


def sharpe_at_infinity(moments: MomentSet, alpha: float) -> float:
    """Limit of the Sharpe ratio as R -> +inf, evaluated in closed form."""
    _check_alpha(alpha)
    if is_degenerate(moments):
        return 0.0
    return math.sqrt(moments.m_v1 * moments.V1 / (alpha - 1.0))


@dataclass(frozen=True)
class SharpeTriple:
    s_at_rstar: float
    s_at_r1: float
    s_at_inf: float
    r_star: float

    @property
    def residual(self) -> float:
        """S^2(R*) - S^2(R1) - S^2(inf)."""
        return self.s_at_rstar**2 - self.s_at_r1**2 - self.s_at_inf**2


def max_sharpe_return(moments: MomentSet) -> float:
    """Return coefficient R* = <v^-1 r^2>/<v^-1 r> that maximises the Sharpe ratio."""
    if moments.R1 == 0.0 or moments.m_v1r == 0.0:
        raise UndefinedSharpeError("R1 = 0: the maximal Sharpe ratio is attained only as R -> inf")
    if is_degenerate(moments):
        return moments.R1
    return moments.m_v1r2 / moments.m_v1r


def sharpe_triple(moments: MomentSet, alpha: float) -> SharpeTriple:
    """Maximal, budget-only and infinite-return Sharpe ratios.

    The three values satisfy ``S(R*)^2 = S(R1)^2 + S(inf)^2``.
    """
    _check_alpha(alpha)
    r_star = max_sharpe_return(moments)
    scale = math.sqrt(moments.m_v1 / (alpha - 1.0))
    v1 = 0.0 if is_degenerate(moments) else moments.V1
    s_max = scale * math.sqrt(moments.R1**2 + v1)
    if moments.R1 < 0:
        # For R1 < 0 the supremum over R is approached from the R* branch with
        # the sign of R*; report the signed value like ``sharpe`` does.
        s_max = math.copysign(s_max, r_star)
    return SharpeTriple(
        s_at_rstar=s_max,
        s_at_r1=scale * moments.R1,
        s_at_inf=sharpe_at_infinity(moments, alpha),
        r_star=r_star,
    )


def dual_return_bounds(moments: MomentSet, alpha: float, epsilon: float) -> tuple[float, float]:
    """Largest and smallest attainable return coefficient at risk level ``epsilon``.

    Returns ``(r_max, r_min)``.
    """
    _check_alpha(alpha)
    disc = 2.0 * moments.m_v1 * epsilon / (alpha - 1.0) - 1.0
    if disc < 0.0:
        if disc < -1e-12:
            floor = epsilon_budget_only(moments, alpha)
            raise InfeasibleError(f"epsilon = {epsilon!r} lies below the risk floor {floor!r}")
        disc = 0.0
    v1 = 0.0 if is_degenerate(moments) else moments.V1
    half_width = math.sqrt(v1 * disc)
    return moments.R1 + half_width, moments.R1 - half_width


@dataclass(frozen=True)
class ORPrediction:
    epsilon_or: float
    q_w_or: float
    kappa: float
    kappa_prime: float
    epsilon_prime: float


def opportunity_loss(alpha: float) -> float:
    _check_alpha(alpha)
    return alpha / (alpha - 1.0)


def or_predictions(moments: MomentSet, alpha: float, R: float) -> ORPrediction:
    """Predictions for the expected-risk (operations research) portfolio.

    ``kappa = eps_OR / eps`` and ``kappa_prime = eps' / eps`` depend on alpha
    only.
    """
    _check_alpha(alpha)
    kappa = opportunity_loss(alpha)
    return ORPrediction(
        epsilon_or=alpha / (2.0 * moments.m_v1) * (1.0 + _excess(moments, R)),
        q_w_or=_or_concentration_term(moments, R),
        kappa=kappa,
        kappa_prime=kappa * kappa,
        epsilon_prime=0.5 * alpha * q_s(moments, alpha, R),
    )


@dataclass(frozen=True)
class ReplicaPrediction:
    alpha: float
    R: float
    epsilon: float
    q_w: float
    sharpe: float
    q_s: float
    epsilon_prime: float
    epsilon_or: float
    q_w_or: float
    kappa: float
    kappa_prime: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def predict(moments: MomentSet, alpha: float, R: float) -> ReplicaPrediction:
    orp = or_predictions(moments, alpha, R)
    return ReplicaPrediction(
        alpha=alpha,
        R=R,
        epsilon=epsilon_min(moments, alpha, R),
        q_w=q_w(moments, alpha, R),
        sharpe=sharpe(moments, alpha, R),
        q_s=q_s(moments, alpha, R),
        epsilon_prime=orp.epsilon_prime,
        epsilon_or=orp.epsilon_or,
        q_w_or=orp.q_w_or,
        kappa=orp.kappa,
        kappa_prime=orp.kappa_prime,
    )


def scalar_summary(moments: MomentSet, alpha: float) -> dict[str, float | None]:
    """Alpha-level constants: moments, R*, the Sharpe triple, kappa, eps0."""
    out: dict[str, float | None] = {
        "alpha": alpha,
        "R1": moments.R1,
        "V1": moments.V1,
        "R2": moments.R2,
        "V2": moments.V2,
        "m_v1": moments.m_v1,
        "m_v2": moments.m_v2,
        "epsilon_0": epsilon_budget_only(moments, alpha),
        "q_w_0": q_w_budget_only(moments, alpha),
        "kappa": opportunity_loss(alpha),
        "kappa_prime": opportunity_loss(alpha) ** 2,
        "S_inf": sharpe_at_infinity(moments, alpha),
        "S_R1": math.sqrt(moments.m_v1 / (alpha - 1.0)) * moments.R1,
        "R_star": None,
        "S_R_star": None,
        "pythagorean_residual": None,
    }
    try:
        trip = sharpe_triple(moments, alpha)
    except UndefinedSharpeError:
        return out
    out["R_star"] = trip.r_star
    out["S_R_star"] = trip.s_at_rstar
    out["pythagorean_residual"] = trip.residual
    return out
