"""Random scenarios, truth simulation and run metrics.

Every trial draws from four independent streams spawned from
``SeedSequence([seed, trial])``: the system matrices, the truth (initial
state and process noise), the measurement directions and margins, and the
measurement schedule. Switching only the schedule therefore changes which
steps are measured while keeping systems, truths and measurement values
identical, which is what makes the three measurement cases comparable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ..corrector import Measurement, Ordering, Policy
from ..estimator import EstimatorConfig, EstimatorState, StepReport, init, step
from ..predictor import TRACE, VOLUME, SystemStep

__all__ = [
    "ConfigError",
    "Dimensions",
    "Schedule",
    "MeasurementMix",
    "InitSettings",
    "EstimatorSettings",
    "NoiseSettings",
    "build_scenario",
    "with_case",
    "ScenarioConfig",
    "Scenario",
    "TrajectoryRecord",
    "MetricsSummary",
    "config_from_dict",
    "config_to_dict",
    "generate_scenario",
    "simulate_truth",
    "run_trial",
    "run_scenario",
    "summarize",
]


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class Dimensions:
    n: int = 2
    m: int = 2
    l: int = 1


@dataclass(frozen=True)
class Schedule:
    kind: str = "every"  # every | random | never
    prob: float = 0.5


@dataclass(frozen=True)
class MeasurementMix:
    strips: int = 1
    halfspaces: int = 0
    equalities: int = 0
    half_width: float = 1.0


@dataclass(frozen=True)
class InitSettings:
    p0_scale: float = 100.0
    sigma0: float = 1.0


@dataclass(frozen=True)
class EstimatorSettings:
    criterion: str = "trace"
    ordering: str = "input"
    rescaling: bool = True
    policy: str = "lenient"

    def to_config(self) -> EstimatorConfig:
        crit = {"trace": TRACE, "volume": VOLUME}[self.criterion]
        return EstimatorConfig(crit, Ordering(self.ordering), self.rescaling, Policy(self.policy))


@dataclass(frozen=True)
class NoiseSettings:
    scale: float = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    dimensions: Dimensions = field(default_factory=Dimensions)
    horizon: int = 100
    seed: int = 0
    schedule: Schedule = field(default_factory=Schedule)
    measurements: MeasurementMix = field(default_factory=MeasurementMix)
    stability: str = "stable"  # stable | marginal
    init: InitSettings = field(default_factory=InitSettings)
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    trials: int = 1
    noise: NoiseSettings = field(default_factory=NoiseSettings)

    def __post_init__(self):
        d = self.dimensions
        if d.n < 1 or d.m < 0 or d.l < 0:
            raise ConfigError("dimensions must satisfy n >= 1, m >= 0, l >= 0")
        if self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.schedule.kind not in ("every", "random", "never"):
            raise ConfigError(f"unknown schedule kind {self.schedule.kind!r}")
        if not 0.0 <= self.schedule.prob <= 1.0:
            raise ConfigError("schedule probability must lie in [0, 1]")
        mm = self.measurements
        if min(mm.strips, mm.halfspaces, mm.equalities) < 0:
            raise ConfigError("measurement counts must be nonnegative")
        if not mm.half_width > 0:
            raise ConfigError("half_width must be positive")
        if self.stability not in ("stable", "marginal"):
            raise ConfigError(f"unknown stability mode {self.stability!r}")
        if not (self.init.p0_scale > 0 and self.init.sigma0 > 0):
            raise ConfigError("p0_scale and sigma0 must be positive")
        e = self.estimator
        if e.criterion not in ("trace", "volume"):
            raise ConfigError(f"unknown criterion {e.criterion!r}")
        if e.ordering not in ("input", "grouped"):
            raise ConfigError(f"unknown ordering {e.ordering!r}")
        if e.policy not in ("lenient", "strict"):
            raise ConfigError(f"unknown policy {e.policy!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.noise.scale >= 0:
            raise ConfigError("noise scale must be nonnegative")

    @classmethod
    def benchmark(cls, n: int, case: int, trials: int = 25, seed: int = 0, horizon: int = 100) -> "ScenarioConfig":
        """Standard n-dimensional benchmark for one measurement case (1 every step, 2 random, 3 never)."""
        kind = {1: "every", 2: "random", 3: "never"}[case]
        return cls(
            dimensions=Dimensions(n, n, max(1, n // 5)),
            horizon=horizon,
            seed=seed,
            schedule=Schedule(kind, 0.5),
            measurements=MeasurementMix(max(1, n // 2), max(1, n // 2), max(1, n // 5), 1.0),
            init=InitSettings(100.0, 1.0),
            trials=trials,
        )


_SECTIONS = {
    "dimensions": Dimensions,
    "schedule": Schedule,
    "measurements": MeasurementMix,
    "init": InitSettings,
    "estimator": EstimatorSettings,
    "noise": NoiseSettings,
}
_SCALARS = {"horizon": int, "seed": int, "stability": str, "trials": int}


def _coerce(value, typ, where):
    if typ is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where} must be a string")
    return value


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Strictly parse a JSON-like document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    kw = {}
    for key, value in doc.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            if not isinstance(value, dict):
                raise ConfigError(f"{key} must be an object")
            types = {f.name: f.type for f in fields(cls)}
            sub = {}
            for k2, v2 in value.items():
                if k2 not in types:
                    raise ConfigError(f"unknown key {key}.{k2}")
                sub[k2] = _coerce(v2, {"int": int, "float": float, "str": str, "bool": bool}[types[k2]], f"{key}.{k2}")
            kw[key] = cls(**sub)
        elif key in _SCALARS:
            kw[key] = _coerce(value, _SCALARS[key], key)
        else:
            raise ConfigError(f"unknown key {key!r}")
    return ScenarioConfig(**kw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = {}
    for f in fields(ScenarioConfig):
        v = getattr(cfg, f.name)
        out[f.name] = {g.name: getattr(v, g.name) for g in fields(v)} if f.name in _SECTIONS else v
    return out


@dataclass(frozen=True, eq=False)
class Scenario:
    """A generated system with its truth and measurement record."""

    steps: list[SystemStep]
    measurements: list[list[Measurement]]
    x_true: np.ndarray  # (N + 1, n)
    x0_hat: np.ndarray
    P0: np.ndarray
    sigma0: float


def _streams(seed: int, trial: int):
    ss = np.random.SeedSequence([seed, trial])
    return [np.random.default_rng(s) for s in ss.spawn(4)]


def _random_state_matrix(rng, n, radius):
    A = rng.standard_normal((n, n))
    rho = float(np.max(np.abs(np.linalg.eigvals(A))))
    if rho == 0.0:
        return radius * np.eye(n)
    return A * (radius / rho)


def generate_scenario(cfg: ScenarioConfig, rng):
    """Random time-invariant dynamics and sinusoidal inputs.

    Returns ``(steps, x0, x0_hat)``: the system for every transition and an
    initial truth with an estimate placed so that the truth lies on the
    boundary of ``E(x0_hat, sigma0 P0)``.
    """
    sys_rng, truth_rng = rng
    n, m, l = cfg.dimensions.n, cfg.dimensions.m, cfg.dimensions.l
    A = _random_state_matrix(sys_rng, n, 0.95 if cfg.stability == "stable" else 1.0)
    B = sys_rng.standard_normal((n, l))
    R = cfg.noise.scale * sys_rng.standard_normal((n, m))
    amp = sys_rng.uniform(0.1, 1.0, l)
    freq = sys_rng.uniform(0.01, 0.5, l)
    phase = sys_rng.uniform(0.0, 2 * math.pi, l)
    steps = [SystemStep(A, B, R, amp * np.sin(freq * k + phase)) for k in range(cfg.horizon)]
    x0 = truth_rng.standard_normal(n)
    u = truth_rng.standard_normal(n)
    u /= np.linalg.norm(u)
    x0_hat = x0 + math.sqrt(cfg.init.sigma0 * cfg.init.p0_scale) * u
    return steps, x0, x0_hat


def simulate_truth(steps, x0, cfg: ScenarioConfig, truth_rng, meas_rng, sched_rng):
    """Propagate the truth and build measurements that it satisfies.

    Directions and margins are drawn for every step whether measured or not,
    so the schedule never shifts the other streams.
    """
    n = x0.shape[0]
    mm = cfg.measurements
    hw = mm.half_width
    xs = [x0]
    ms_all = []
    x = x0
    for k, st in enumerate(steps, start=1):
        nu = truth_rng.uniform(-1.0, 1.0, st.R.shape[1])
        x = st.A @ x + st.B @ st.tau + st.R @ nu
        xs.append(x)
        ms = []
        for _ in range(mm.strips):
            f = meas_rng.standard_normal(n)
            u1, u2 = 1.0 - meas_rng.random(2)
            y = float(f @ x)
            ms.append(Measurement(f, y - hw * u1, y + hw * u2))
        for _ in range(mm.halfspaces):
            f = meas_rng.standard_normal(n)
            u, side = 1.0 - meas_rng.random(), meas_rng.random() < 0.5
            y = float(f @ x)
            ms.append(Measurement(f, upper=y + hw * u) if side else Measurement(f, lower=y - hw * u))
        for _ in range(mm.equalities):
            f = meas_rng.standard_normal(n)
            y = float(f @ x)
            ms.append(Measurement(f, y, y))
        measured = {"every": True, "never": False}.get(cfg.schedule.kind)
        draw = sched_rng.random()
        if measured is None:
            measured = draw < cfg.schedule.prob
        ms_all.append(ms if measured else [])
    return np.array(xs), ms_all


def build_scenario(cfg: ScenarioConfig, trial: int = 0) -> Scenario:
    sys_rng, truth_rng, meas_rng, sched_rng = _streams(cfg.seed, trial)
    steps, x0, x0_hat = generate_scenario(cfg, (sys_rng, truth_rng))
    xs, ms = simulate_truth(steps, x0, cfg, truth_rng, meas_rng, sched_rng)
    P0 = cfg.init.p0_scale * np.eye(cfg.dimensions.n)
    return Scenario(steps, ms, xs, x0_hat, P0, cfg.init.sigma0)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Per-step history, row ``k`` for ``k = 0..N``."""

    x_true: np.ndarray
    x_hat: np.ndarray
    P: list
    sigma: np.ndarray
    sigma_bar: np.ndarray
    trace: np.ndarray
    rank: np.ndarray
    err_norm: np.ndarray
    skipped: np.ndarray
    aberrant: np.ndarray
    reports: list[StepReport]
    wall_ms: float

    @property
    def horizon(self) -> int:
        return len(self.sigma) - 1


@dataclass(frozen=True)
class MetricsSummary:
    shrink_ratio: float
    trace_mean: float
    error_ratio: float
    err_mean: float
    wall_ms: float

    def as_dict(self, timing: bool = True) -> dict:
        d = {"shrink_ratio": self.shrink_ratio, "trace_mean": self.trace_mean,
             "error_ratio": self.error_ratio, "err_mean": self.err_mean}
        if timing:
            d["wall_ms"] = self.wall_ms
        return d


def run_trial(cfg: ScenarioConfig, trial: int = 0, scenario: Scenario | None = None) -> TrajectoryRecord:
    sc = build_scenario(cfg, trial) if scenario is None else scenario
    ecfg = cfg.estimator.to_config()
    t0 = time.perf_counter()
    s = init(sc.x0_hat, sc.P0, sc.sigma0)
    states: list[EstimatorState] = [s]
    reports = []
    for st, ms in zip(sc.steps, sc.measurements):
        s, rep = step(s, st, ms, ecfg)
        states.append(s)
        reports.append(rep)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    x_hat = np.array([q.x for q in states])
    n = sc.P0.shape[0]
    return TrajectoryRecord(
        x_true=sc.x_true,
        x_hat=x_hat,
        P=[q.P for q in states],
        sigma=np.array([q.sigma for q in states]),
        sigma_bar=np.array([q.sigma_bar for q in states]),
        trace=np.array([q.sigma * float(np.trace(q.P)) for q in states]),
        rank=np.array([n] + [r.rank for r in reports]),
        err_norm=np.linalg.norm(sc.x_true - x_hat, axis=1),
        skipped=np.array([0] + [r.skipped for r in reports]),
        aberrant=np.array([0] + [r.aberrant for r in reports]),
        reports=reports,
        wall_ms=wall_ms,
    )


def summarize(rec: TrajectoryRecord) -> MetricsSummary:
    """Summary metrics of one trajectory.

    Means run over ``k = 1..N`` (over the initial state alone when ``N = 0``).
    The shrink ratio is ``s0 tr(P_N) / (s_N tr(P_0))`` on the state carried
    with rescaling on (``s_N = s0``, ``P_N`` the rescaled shape), i.e. the
    ratio of the sums of squared semi-axes of the final and initial sets.
    It is computed from ``tr(sigma P)`` so it does not depend on rescaling.
    """
    sl = slice(1, None) if rec.horizon > 0 else slice(0, 1)
    e0 = rec.err_norm[0]
    return MetricsSummary(
        shrink_ratio=float(rec.trace[-1] / rec.trace[0]),
        trace_mean=float(np.mean(rec.trace[sl])),
        error_ratio=float(rec.err_norm[-1] / e0) if e0 > 0 else math.nan,
        err_mean=float(np.mean(rec.err_norm[sl])),
        wall_ms=rec.wall_ms,
    )


def run_scenario(cfg: ScenarioConfig):
    """Run all trials; returns ``(records, averaged summary)``."""
    records = [run_trial(cfg, t) for t in range(cfg.trials)]
    sums = [summarize(r) for r in records]
    avg = MetricsSummary(*(float(np.mean([getattr(s, f.name) for s in sums])) for f in fields(MetricsSummary)))
    return records, avg


def with_case(cfg: ScenarioConfig, case: int) -> ScenarioConfig:
    kind = {1: "every", 2: "random", 3: "never"}[case]
    return replace(cfg, schedule=replace(cfg.schedule, kind=kind))
