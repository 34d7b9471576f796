"""Recursive estimator: prediction, then sequential correction, then optional
rescaling, one step at a time.

The state is an immutable value; :func:`step` returns a new state together
with a report of what each measurement did.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corrector import CorrectionOutcome, CorrectionStatus, Ordering, Policy, correct_all
from .geometry import Ellipsoid
from .numerics import DEFAULT_TOL, DimensionError, NotPositiveDefiniteError, Tolerances, as_matrix, as_vector, numerical_rank
from .predictor import TRACE, PredictionCriterion, PredictionScratch, SystemStep, time_update_detailed

__all__ = ["EstimatorState", "EstimatorConfig", "StepReport", "init", "step", "run", "metrics"]


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Everything the recursion carries between steps.

    ``sigma_bar`` tracks the scale the algorithm would have without
    rescaling; ``sigma0`` is the initial scale used as rescaling target.
    """

    x: np.ndarray
    P: np.ndarray
    sigma: float
    sigma_bar: float
    k: int = 0
    sigma0: float = 1.0

    @property
    def ellipsoid(self) -> Ellipsoid:
        return Ellipsoid._trusted(self.x, self.P, self.sigma)

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class EstimatorConfig:
    criterion: PredictionCriterion = TRACE
    ordering: Ordering = Ordering.INPUT
    rescaling: bool = True
    policy: Policy = Policy.LENIENT
    tol: Tolerances = DEFAULT_TOL


@dataclass(frozen=True, eq=False)
class StepReport:
    k: int
    outcomes: list[CorrectionOutcome]
    sigma_before: float
    sigma_after: float
    sigma_bar: float
    trace: float
    rank: int
    skipped: int
    aberrant: int
    predicted: Ellipsoid | None = None
    prediction: PredictionScratch | None = field(default=None, repr=False)


def init(x0, P0, sigma0: float = 1.0) -> EstimatorState:
    """Initial state for ``x_0 in E(x0, sigma0 P0)``; ``P0`` must be positive definite."""
    x0 = as_vector(x0, "initial estimate")
    P0 = as_matrix(P0, x0.shape[0], x0.shape[0], "initial shape matrix")
    sigma0 = float(sigma0)
    if not (sigma0 > 0 and math.isfinite(sigma0)):
        raise ValueError(f"initial scale must be positive and finite, got {sigma0}")
    E = Ellipsoid(x0, P0, sigma0)
    try:
        np.linalg.cholesky(E.P)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("initial shape matrix must be positive definite") from None
    return EstimatorState(E.c, E.P, sigma0, sigma0, 0, sigma0)


def step(s: EstimatorState, sys: SystemStep, ms=(), cfg: EstimatorConfig = EstimatorConfig()):
    """One full recursion; returns ``(new_state, report)``. ``s`` is not modified."""
    if sys.n != s.n:
        raise DimensionError(f"system has dimension {sys.n}, state has {s.n}")
    pred, scratch = time_update_detailed(s.ellipsoid, sys, cfg.criterion)
    post, outcomes = correct_all(pred, ms, cfg.ordering, cfg.policy, cfg.tol, sigma_ref=s.sigma0)
    ratio = post.sigma / pred.sigma
    sigma_bar = s.sigma_bar * ratio
    c, P, sigma = post.c, post.P, post.sigma
    if sigma == 0.0:
        # the set collapsed to its center; keep a usable scale for the next prediction
        P, sigma = np.zeros_like(P), s.sigma0
    elif cfg.rescaling and ratio != 1.0:
        P, sigma = (sigma / s.sigma0) * P, s.sigma0
    new = EstimatorState(c, P, sigma, sigma_bar, s.k + 1, s.sigma0)
    skipped = sum(o.status is CorrectionStatus.SKIPPED_UNINFORMATIVE for o in outcomes)
    aberrant = sum(o.status is CorrectionStatus.SKIPPED_ABERRANT for o in outcomes)
    report = StepReport(
        k=new.k,
        outcomes=outcomes,
        sigma_before=pred.sigma,
        sigma_after=post.sigma,
        sigma_bar=sigma_bar,
        trace=float(sigma * np.trace(P)),
        rank=numerical_rank(P, cfg.tol, ref=float(np.max(np.abs(pred.P))) * pred.sigma / sigma),
        skipped=skipped,
        aberrant=aberrant,
        predicted=pred,
        prediction=scratch,
    )
    return new, report


def run(s: EstimatorState, systems, measurements, cfg: EstimatorConfig = EstimatorConfig()):
    """Iterate :func:`step`; returns ``(states, reports)`` with ``states[0] = s``."""
    states, reports = [s], []
    for sys, ms in zip(systems, measurements, strict=True):
        s, rep = step(s, sys, ms, cfg)
        states.append(s)
        reports.append(rep)
    return states, reports


def metrics(s: EstimatorState | Ellipsoid, tol: Tolerances = DEFAULT_TOL) -> dict:
    """Size summary: ``trace`` (sum of squared semi-axes), ``semiaxes`` and ``rank``."""
    S = s.sigma * s.P
    w = np.clip(np.linalg.eigvalsh(S)[::-1], 0.0, None)
    return {"trace": float(np.trace(S)), "semiaxes": np.sqrt(w), "rank": numerical_rank(s.P, tol)}
