"""Randomized property suites shared by the CLI ``check`` command and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..analysis import check_equivalence
from ..corrector import MeasurementKind, beta_star
from ..geometry import Ellipsoid, contains
from .scenario import (
    Dimensions,
    EstimatorSettings,
    InitSettings,
    MeasurementMix,
    NoiseSettings,
    Schedule,
    ScenarioConfig,
    build_scenario,
    run_trial,
)

__all__ = ["CheckResult", "containment_suite", "oracle_suite", "beta_suite", "SUITES"]


@dataclass
class CheckResult:
    name: str
    trials: int
    failures: int = 0
    worst: float = 0.0
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name}: {self.trials} trials, {self.failures} failures, worst {self.worst:.3g}"


def _mixed_config(rng, n, horizon, seed, trial_tag):
    return ScenarioConfig(
        dimensions=Dimensions(n, int(rng.integers(1, n + 1)), 1),
        horizon=horizon,
        seed=seed,
        schedule=Schedule("random", float(rng.uniform(0.3, 1.0))),
        measurements=MeasurementMix(int(rng.integers(0, 3)), int(rng.integers(0, 3)), int(rng.integers(0, 2)),
                                    float(rng.uniform(0.2, 2.0))),
        stability="stable" if trial_tag % 2 == 0 else "marginal",
        init=InitSettings(float(rng.uniform(1.0, 100.0)), 1.0),
        estimator=EstimatorSettings(ordering="grouped" if trial_tag % 3 == 0 else "input",
                                    rescaling=trial_tag % 4 != 1),
        noise=NoiseSettings(float(rng.uniform(0.01, 0.5))),
    )


def containment_suite(trials: int = 200, seed: int = 0, dims=(2, 3, 6), horizon: int = 50,
                      tol: float = 1e-6) -> CheckResult:
    """Truth stays inside every estimated ellipsoid, and the tracked scale never grows."""
    rng = np.random.default_rng([seed, 1])
    res = CheckResult("containment", trials)
    steps_checked = 0
    for t in range(trials):
        cfg = _mixed_config(rng, dims[t % len(dims)], horizon, seed, t)
        rec = run_trial(cfg, t)
        bad = False
        for k in range(rec.horizon + 1):
            E = Ellipsoid._trusted(rec.x_hat[k], rec.P[k], rec.sigma[k])
            steps_checked += 1
            if not contains(E, rec.x_true[k], tol):
                bad = True
        if np.any(np.diff(rec.sigma_bar) > 0):
            bad = True
        res.failures += bad
    res.detail["steps_checked"] = steps_checked
    return res


def oracle_suite(trials: int = 20, seed: int = 0, dims=(2, 3, 5), horizon: int = 50,
                 tol: float = 1e-8) -> CheckResult:
    """Estimator and the equivalent Kalman filter produce the same centers and shapes."""
    rng = np.random.default_rng([seed, 2])
    res = CheckResult("oracle", trials)
    worst_state = worst_shape = 0.0
    for t in range(trials):
        n = dims[t % len(dims)]
        cfg = ScenarioConfig(
            dimensions=Dimensions(n, int(rng.integers(1, n + 1)), 1),
            horizon=horizon,
            seed=seed,
            schedule=Schedule("random", 0.7),
            measurements=MeasurementMix(1 + int(rng.integers(0, 2)), int(rng.integers(0, 2)), 0, 1.0),
            init=InitSettings(float(rng.uniform(1.0, 10.0)), 1.0),
            estimator=EstimatorSettings(rescaling=False),
            noise=NoiseSettings(float(rng.uniform(0.05, 0.5))),
        )
        sc = build_scenario(cfg, t)
        r = check_equivalence(sc.steps, sc.measurements, sc.x0_hat, sc.P0, sc.sigma0)
        rel_shape = r.shape_dev / (1.0 + r.shape_scale)
        worst_state = max(worst_state, r.state_dev)
        worst_shape = max(worst_shape, rel_shape)
        res.failures += not r.ok(tol)
    res.worst = max(worst_state, worst_shape)
    res.detail.update(state_dev=worst_state, shape_dev_rel=worst_shape)
    return res


def zeta(sigma, alpha, delta, gamma, beta):
    return sigma + alpha * beta * (gamma**2 / (1.0 - beta) - delta**2)


def beta_suite(trials: int = 1000, seed: int = 0, grid_points: int = 999, slack: float = 1e-12) -> CheckResult:
    """The switching gain minimizes the bound's scale over a fine grid of gains."""
    rng = np.random.default_rng([seed, 3])
    res = CheckResult("beta", trials)
    grid = np.arange(1, grid_points + 1) / (grid_points + 1)
    for _ in range(trials):
        alpha = float(np.exp(rng.uniform(-3, 3)))
        sigma = float(np.exp(rng.uniform(-3, 3)))
        lam = np.sqrt(sigma / alpha)
        # tightened bounds strictly inside the support interval [-lam, lam] around center 0
        lo, up = np.sort(rng.uniform(-lam, lam, 2))
        delta, gamma = 0.5 * (up + lo), 0.5 * (up - lo)
        b = beta_star(delta, gamma, MeasurementKind.TWO_SIDED, lam, lam)
        z_star = zeta(sigma, alpha, delta, gamma, b)
        z_grid = float(np.min(zeta(sigma, alpha, delta, gamma, grid)))
        excess = z_star - z_grid
        res.worst = max(res.worst, excess)
        res.failures += excess > slack
    return res


SUITES = {"containment": containment_suite, "oracle": oracle_suite, "beta": beta_suite}
