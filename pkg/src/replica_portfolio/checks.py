"""Identity and oracle checks run by ``replica-portfolio check``.

Each check returns a :class:`CheckResult` with the worst residual found and
the tolerance it was held to.  ``fault`` perturbs the risk used in the Sharpe
identity by a relative amount; it exists so the suite can be shown to fail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import replica
from .harness import ExplicitHyperParams, ExperimentConfig, run_trial_grid
from .hyperparams import HyperParams, MomentSet, empirical_moments
from .market import NoiseSpec, generate_market
from .optimizer import MarketSolver, solve_or_portfolio


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""


def random_moment_set(rng: np.random.Generator) -> MomentSet:
    """Moments of a random finite asset universe (always a valid MomentSet)."""
    n = int(rng.integers(2, 40))
    r = rng.uniform(-2.0, 3.0, n)
    v = np.exp(rng.uniform(math.log(0.1), math.log(10.0), n))
    return empirical_moments(HyperParams(r, v))


def random_alpha(rng: np.random.Generator) -> float:
    return float(rng.uniform(1.05, 5.0))


def kkt_solve(q: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimise w'Qw/2 subject to A w = b by one dense solve of the KKT system."""
    n, m = q.shape[0], a.shape[0]
    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = q
    kkt[:n, n:] = a.T
    kkt[n:, :n] = a
    rhs = np.concatenate([np.zeros(n), b])
    return np.linalg.solve(kkt, rhs)[:n]


def constraint_rows(r: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    n = r.size
    return np.vstack([np.ones(n) / n, r / n]), np.array([1.0, R])


def _result(name: str, worst: float, tol: float, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(worst <= tol), float(worst), tol, detail)


def check_pythagorean(n: int = 1000, seed: int = 0, fault: float = 0.0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m = random_moment_set(rng)
        alpha = random_alpha(rng)
        r_star = replica.max_sharpe_return(m)
        eps_star = replica.epsilon_min(m, alpha, r_star) * (1.0 + fault)
        s_star = r_star / math.sqrt(2.0 * eps_star)
        s_r1 = replica.sharpe(m, alpha, m.R1)
        s_inf = replica.sharpe_at_infinity(m, alpha)
        worst = max(worst, abs(s_star**2 - s_r1**2 - s_inf**2) / s_star**2)
    return _result("pythagorean_sharpe", worst, 1e-12, f"{n} random moment sets")


def check_duality_roundtrip(n: int = 1000, seed: int = 1) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(n):
        m = random_moment_set(rng)
        alpha = random_alpha(rng)
        offset = rng.uniform(0.0, 3.0) * math.sqrt(m.V1)
        above = i % 2 == 0
        R = m.R1 + offset if above else m.R1 - offset
        r_max, r_min = replica.dual_return_bounds(m, alpha, replica.epsilon_min(m, alpha, R))
        got = r_max if above else r_min
        worst = max(worst, abs(got - R) / abs(R))
    return _result("duality_roundtrip", worst, 1e-10, f"{n} random (moments, alpha, R), both branches")


def check_opportunity_loss(n: int = 500, seed: int = 2) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m = random_moment_set(rng)
        alpha = random_alpha(rng)
        R = m.R1 + rng.normal() * math.sqrt(m.V1)
        p = replica.predict(m, alpha, R)
        kappa = alpha / (alpha - 1.0)
        worst = max(
            worst,
            abs(p.epsilon_or / p.epsilon - kappa) / kappa,
            abs(p.epsilon_prime / p.epsilon - kappa**2) / kappa**2,
            abs(p.kappa - kappa) / kappa,
        )
    return _result("opportunity_loss_invariance", worst, 1e-12, "eps_OR/eps and eps'/eps vs alpha/(alpha-1)")


def check_scaling_translation(n: int = 500, seed: int = 3) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m = random_moment_set(rng)
        alpha = random_alpha(rng)
        R = m.R1 + rng.normal() * math.sqrt(m.V1)
        c = float(np.exp(rng.uniform(-2, 2)))
        delta = float(rng.uniform(-1, 1))
        eps = replica.epsilon_min(m, alpha, R)
        scaled = m.scaled_variances(c)
        shifted = m.shifted_means(delta)
        worst = max(
            worst,
            abs(replica.epsilon_min(scaled, alpha, R) - c * eps) / (c * eps),
            abs(replica.sharpe(scaled, alpha, R) * math.sqrt(c) - replica.sharpe(m, alpha, R))
            / abs(replica.sharpe(m, alpha, R)),
            abs(replica.epsilon_min(shifted, alpha, R + delta) - eps) / eps,
        )
    # The shifted moments are rebuilt from raw sums, so allow cancellation slack.
    return _result("scaling_translation_laws", worst, 1e-8)


def check_argmax(seed: int = 4, n: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m = random_moment_set(rng)
        if m.R1 <= 0:
            continue
        alpha = random_alpha(rng)
        r_star = replica.max_sharpe_return(m)
        half = 4.0 * abs(r_star - m.R1) + 1.0
        grid = np.linspace(r_star - half, r_star + half, 20001)
        s = np.array([replica.sharpe(m, alpha, R) for R in grid])
        step = grid[1] - grid[0]
        worst = max(worst, abs(grid[int(np.argmax(s))] - r_star) / step)
    return _result("sharpe_argmax_on_grid", worst, 1.0, "distance to R* in grid steps")


def _small_instances(count: int, seed: int, n_assets: int = 5, n_periods: int = 10):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        r = rng.uniform(0.5, 2.0, n_assets)
        v = np.exp(rng.uniform(-1.0, 1.0, n_assets))
        params = HyperParams(r, v)
        sample = generate_market(params, n_periods, NoiseSpec("gaussian"), rng)
        R = float(rng.uniform(0.5, 2.0))
        yield params, sample, R


def check_kkt_oracle(count: int = 100, seed: int = 5) -> CheckResult:
    worst = 0.0
    for params, sample, R in _small_instances(count, seed):
        a, b = constraint_rows(params.means, R)
        w_star, _, _ = MarketSolver(sample, params).min_risk(R)
        oracle = kkt_solve(sample.j, a, b)
        w_or = solve_or_portfolio(params, R)
        oracle_or = kkt_solve(sample.alpha * np.diag(params.variances), a, b)
        worst = max(worst, np.max(np.abs(w_star.weights - oracle)), np.max(np.abs(w_or.weights - oracle_or)))
    return _result("kkt_oracle_equivalence", worst, 1e-8, f"{count} instances, N=5, p=10")


def check_trial_identities(count: int = 100, seed: int = 6) -> CheckResult:
    """Multiplier identity, Cauchy-Schwarz, Sharpe dominance and eps_OR >= eps."""
    worst = 0.0
    bad: list[str] = []
    for i, (params, sample, R) in enumerate(_small_instances(count, seed)):
        solver = MarketSolver(sample, params)
        w, k, theta = solver.min_risk(R)
        eps = 0.5 * (k + R * theta)
        worst = max(worst, abs(eps - w.risk(sample)) / eps)
        f = solver.forms
        if f.re**2 > f.ee * f.rr * (1 + 1e-12):
            bad.append(f"instance {i}: Cauchy-Schwarz")
        _, _, s_star = solver.max_sharpe()
        if R / math.sqrt(2 * eps) > s_star + 1e-10:
            bad.append(f"instance {i}: Sharpe dominance")
        if solve_or_portfolio(params, R).risk(sample) < eps * (1 - 1e-10):
            bad.append(f"instance {i}: eps_OR < eps")
    tol = 1e-8
    return CheckResult("per_trial_identities", worst <= tol and not bad, worst, tol, "; ".join(bad))


def check_special_case(seed: int = 7, n: int = 200) -> CheckResult:
    """Uniform variance and a symmetric two-point mean law reduce to the known forms."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        m_, sigma, s2 = rng.uniform(-1, 2), rng.uniform(0.1, 1.0), rng.uniform(0.2, 4.0)
        alpha, R = random_alpha(rng), float(rng.uniform(-2, 3))
        ms = empirical_moments(HyperParams(np.array([m_ - sigma, m_ + sigma]), np.array([s2, s2])))
        x = 1.0 + (R - m_) ** 2 / sigma**2
        eps_ref = s2 * (alpha - 1.0) / 2.0 * x
        qw_ref = alpha / (alpha - 1.0) * x
        worst = max(
            worst,
            abs(replica.epsilon_min(ms, alpha, R) - eps_ref) / eps_ref,
            abs(replica.q_w(ms, alpha, R) - qw_ref) / qw_ref,
        )
    return _result("uniform_variance_two_point_reduction", worst, 1e-12)


def check_smoke_experiment(seed: int = 8) -> CheckResult:
    """A tiny Monte Carlo run: every non-failed trial must satisfy eps_OR >= eps."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(1.0, 2.0, 30)
    v = rng.uniform(1.0, 4.0, 30)
    cfg = ExperimentConfig(30, 60, 10, seed, ExplicitHyperParams(tuple(r), tuple(v)), (1.2, 1.5, 1.8))
    violations = 0
    for m in range(cfg.n_trials):
        for t in run_trial_grid(cfg, m).results:
            if t is not None and not t.or_inequality_holds:
                violations += 1
    return _result("or_risk_dominance_smoke", float(violations), 0.0, "violations over 10 trials x 3 R")


CHECKS: dict[str, Callable[..., CheckResult]] = {
    "pythagorean_sharpe": check_pythagorean,
    "duality_roundtrip": check_duality_roundtrip,
    "opportunity_loss_invariance": check_opportunity_loss,
    "scaling_translation_laws": check_scaling_translation,
    "sharpe_argmax_on_grid": check_argmax,
    "kkt_oracle_equivalence": check_kkt_oracle,
    "per_trial_identities": check_trial_identities,
    "uniform_variance_two_point_reduction": check_special_case,
    "or_risk_dominance_smoke": check_smoke_experiment,
}


def run_checks(fault: float = 0.0) -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        results.append(fn(fault=fault) if name == "pythagorean_sharpe" else fn())
    return results
