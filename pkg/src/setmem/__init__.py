"""Ellipsoidal set-membership state estimation for linear systems with
zonotope-bounded process noise and sporadic linear constraints."""

from .corrector import (
    AberrantMeasurementError,
    CorrectionOutcome,
    CorrectionStatus,
    Measurement,
    MeasurementKind,
    Ordering,
    Policy,
    correct_all,
    correct_single,
)
from .estimator import EstimatorConfig, EstimatorState, StepReport, init, metrics, run, step
from .geometry import Ellipsoid, Halfspace, Hyperplane, Strip, Zonotope, contains, support
from .numerics import DEFAULT_TOL, SetMembershipError, Tolerances
from .predictor import TRACE, VOLUME, PredictionCriterion, SystemStep, time_update

__version__ = "0.1.0"
