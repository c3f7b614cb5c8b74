"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".  Run directly with
``python3 tests/test_acceptance.py`` or as part of ``pytest``.
"""

import math
import time

import numpy as np
import pytest

from replica_portfolio import replica
from replica_portfolio.checks import constraint_rows, kkt_solve, random_alpha, random_moment_set
from replica_portfolio.harness import ExperimentConfig, linspace_grid, run_experiment, run_trial
from replica_portfolio.hyperparams import BoundedPareto, Discrete, HyperModel, HyperParams, PointMass, population_moments
from replica_portfolio.market import NoiseSpec, generate_market
from replica_portfolio.optimizer import MarketSolver, solve_or_portfolio

PARETO = BoundedPareto(1.0, 2.0, 2.0)
MODEL = HyperModel(PARETO, PARETO, "product")
GRID = linspace_grid(1.0, 2.0, 21)
SEED = 1  # fixed before any run; never tuned

_runs: dict = {}


def experiment(n, p, m, noise="gaussian"):
    key = (n, p, m, noise)
    if key not in _runs:
        cfg = ExperimentConfig(n, p, m, SEED, MODEL, GRID, NoiseSpec(noise))
        t0 = time.perf_counter()
        summary = run_experiment(cfg)
        _runs[key] = (summary, time.perf_counter() - t0)
    return _runs[key]


def worst_z(summary):
    worst = 0.0
    for row in summary.rows:
        p = row.prediction
        for stat, target in ((row.epsilon, p.epsilon), (row.q_w, p.q_w), (row.sharpe, p.sharpe)):
            worst = max(worst, abs(stat.z_score(target)))
    return worst


def three_se_detail(summary, seconds):
    valid = all(r.valid and r.n_failed == 0 for r in summary.rows)
    return worst_z(summary), valid, f"max |z| over eps, q_w, S and 21 R = {worst_z(summary):.2f} (< 3), {seconds:.1f}s"


class TestCriterion1:
    def test_smoke_scale(self, record_criterion):
        summary, secs = experiment(200, 400, 20)
        z, valid, detail = three_se_detail(summary, secs)
        ok = z < 3 and valid and secs < 60
        record_criterion("C1 three-SE agreement, smoke N=200 p=400 M=20", ok, detail)
        assert ok

    def test_full_scale(self, record_criterion):
        summary, secs = experiment(1000, 2000, 100)
        z, valid, detail = three_se_detail(summary, secs)
        ok = z < 3 and valid
        record_criterion("C1 three-SE agreement, full N=1000 p=2000 M=100", ok, detail)
        assert ok


def test_criterion2_pythagorean(record_criterion):
    rng = np.random.default_rng(20)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        m = random_moment_set(rng)
        alpha = random_alpha(rng)
        r_star = replica.max_sharpe_return(m)
        s_star = replica.sharpe(m, alpha, r_star)
        s_r1 = replica.sharpe(m, alpha, m.R1)
        s_inf = replica.sharpe_at_infinity(m, alpha)
        worst = max(worst, abs(s_star**2 - s_r1**2 - s_inf**2) / s_star**2)
    secs = time.perf_counter() - t0
    ok = worst <= 1e-12 and secs < 1.0
    record_criterion("C2 Sharpe Pythagorean identity", ok, f"worst relative residual {worst:.2e} (<= 1e-12), {secs:.2f}s")
    assert ok


def test_criterion3_opportunity_loss(record_criterion):
    summary, _ = experiment(500, 1000, 50)
    kappa = np.array([r.kappa_hat for r in summary.rows])
    kappa_p = np.array([r.kappa_prime_hat for r in summary.rows])
    dk = np.max(np.abs(kappa / 2.0 - 1.0))
    dkp = np.max(np.abs(kappa_p / 4.0 - 1.0))
    analytic = replica.opportunity_loss(2.0)
    ok = dk <= 0.02 and dkp <= 0.05 and analytic == 2.0 and analytic**2 == 4.0
    detail = f"max |kappa_hat/2 - 1| = {dk:.4f} (<= 0.02), max |kappa_prime_hat/4 - 1| = {dkp:.4f} (<= 0.05) over 21 R"
    record_criterion("C3 opportunity losses at alpha=2, N=500 M=50", ok, detail)
    assert ok


def test_criterion4_duality_roundtrip(record_criterion):
    rng = np.random.default_rng(40)
    worst = 0.0
    for _ in range(1000):
        m = random_moment_set(rng)
        alpha = random_alpha(rng)
        R = m.R1 + rng.uniform(0.0, 3.0) * math.sqrt(m.V1)
        r_max, _ = replica.dual_return_bounds(m, alpha, replica.epsilon_min(m, alpha, R))
        worst = max(worst, abs(r_max - R) / abs(R))
    ok = worst <= 1e-10
    record_criterion("C4 duality roundtrip R > R1", ok, f"worst relative error {worst:.2e} (<= 1e-10) over 1000 draws")
    assert ok


def test_criterion5_kkt_oracle(record_criterion):
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        params = HyperParams(rng.uniform(0.5, 2.0, 5), np.exp(rng.uniform(-1.0, 1.0, 5)))
        sample = generate_market(params, 10, "gaussian", rng)
        R = float(rng.uniform(0.5, 2.0))
        a, b = constraint_rows(params.means, R)
        w, _, _ = MarketSolver(sample, params).min_risk(R)
        w_or = solve_or_portfolio(params, R)
        worst = max(
            worst,
            np.max(np.abs(w.weights - kkt_solve(sample.j, a, b))),
            np.max(np.abs(w_or.weights - kkt_solve(sample.alpha * np.diag(params.variances), a, b))),
        )
    ok = worst <= 1e-8
    record_criterion("C5 KKT oracle equivalence N=5 p=10", ok, f"max weight error {worst:.2e} (<= 1e-8) over 100 instances")
    assert ok


def test_criterion6_probes(record_criterion):
    summary, _ = experiment(1000, 2000, 100)
    cfg = summary.config
    m = cfg.population_moments()
    single = run_trial(cfg, 0, 1.5).forms
    rel = {
        "ee": single.ee / (m.m_v1 / (cfg.alpha - 1)) - 1,
        "re": single.re / (m.m_v1r / (cfg.alpha - 1)) - 1,
        "rr": single.rr / (m.m_v1r2 / (cfg.alpha - 1)) - 1,
    }
    p = summary.probes
    zs = {
        "ee": p.ee.z_score(p.ee_limit),
        "re": p.re.z_score(p.re_limit),
        "rr": p.rr.z_score(p.rr_limit),
    }
    ok = all(abs(v) < 0.05 for v in rel.values()) and all(abs(z) < 3 for z in zs.values())
    detail = (
        "trial 0 relative deviation "
        + ", ".join(f"{k} {v:+.3f}" for k, v in rel.items())
        + " (< 0.05); M=100 z "
        + ", ".join(f"{k} {z:+.2f}" for k, z in zs.items())
        + " (< 3)"
    )
    record_criterion("C6 quadratic-form probes N=1000 alpha=2", ok, detail)
    assert ok


def test_criterion7_inequality(record_criterion):
    runs = [experiment(1000, 2000, 100), experiment(200, 400, 20), experiment(500, 1000, 50)]
    runs += [experiment(200, 400, 20, kind) for kind in ("uniform", "rademacher")]
    checked = violations = 0
    for summary, _ in runs:
        for row in summary.rows:
            checked += row.n_ok
            violations += row.or_violations
    ok = violations == 0 and checked > 0
    record_criterion("C7 H(w_OR|X) >= H(w*|X) per trial", ok, f"{violations} violations in {checked} (trial, R) pairs")
    assert ok


def test_criterion8_special_case(record_criterion):
    rng = np.random.default_rng(80)
    worst = 0.0
    for _ in range(500):
        mean, sigma, s2 = rng.uniform(-1, 2), rng.uniform(0.05, 1.0), rng.uniform(0.1, 4.0)
        alpha, R = float(rng.uniform(1.05, 5.0)), float(rng.uniform(-2.0, 3.0))
        model = HyperModel(Discrete((mean - sigma, mean + sigma)), PointMass(s2), "independent")
        m = population_moments(model)
        x = 1.0 + (R - mean) ** 2 / sigma**2
        eps_ref = s2 * (alpha - 1.0) / 2.0 * x
        qw_ref = alpha / (alpha - 1.0) * x
        worst = max(
            worst,
            abs(replica.epsilon_min(m, alpha, R) / eps_ref - 1),
            abs(replica.q_w(m, alpha, R) / qw_ref - 1),
        )
    ok = worst <= 1e-12
    record_criterion("C8 uniform-variance two-point reduction", ok, f"worst relative error {worst:.2e} (<= 1e-12)")
    assert ok


@pytest.mark.parametrize("noise", ["uniform", "rademacher"])
def test_criterion9_noise_universality(record_criterion, noise):
    summary, secs = experiment(200, 400, 20, noise)
    z, valid, detail = three_se_detail(summary, secs)
    ok = z < 3 and valid
    record_criterion(f"C9 three-SE agreement, {noise} noise, smoke scale", ok, detail)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
