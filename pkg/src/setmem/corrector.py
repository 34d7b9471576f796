"""Measurement update: fold scalar linear constraints into the state ellipsoid.

Each measurement bounds ``f'x`` from below, above, both sides or exactly.
The bounds are first tightened against the support interval of the current
ellipsoid; a switching gain ``beta`` then picks between leaving the
ellipsoid alone (0), the optimal strip intersection (``1 - gamma/|delta|``)
and the exact hyperplane section (1). The shape matrix is only ever
downdated by rank-one terms; it is never inverted.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Ellipsoid
from .numerics import DEFAULT_TOL, DimensionError, SetMembershipError, Tolerances, as_vector, rank_cutoff

__all__ = [
    "AberrantMeasurementError",
    "Measurement",
    "MeasurementKind",
    "CorrectionScratch",
    "CorrectionStatus",
    "CorrectionOutcome",
    "Policy",
    "Ordering",
    "classify",
    "clamp_bounds",
    "beta_star",
    "correct_single",
    "correct_all",
    "rescale",
]

log = logging.getLogger(__name__)


class AberrantMeasurementError(SetMembershipError):
    """A measurement's constraint set misses the current ellipsoid."""


class MeasurementKind(enum.Enum):
    EQUALITY = "equality"
    UPPER_ONLY = "upper_only"
    LOWER_ONLY = "lower_only"
    TWO_SIDED = "two_sided"


def _bound(v, name):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        raise ValueError(f"{name} bound is NaN")
    return None if math.isinf(v) else v


@dataclass(frozen=True, eq=False)
class Measurement:
    """Scalar constraint ``lower <= f'x <= upper``; a missing bound is ``None``.

    Infinite bounds are accepted and treated as missing.
    """

    f: np.ndarray
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        f = as_vector(self.f, "measurement direction")
        if not np.all(np.isfinite(f)):
            raise ValueError("measurement direction must be finite")
        if not np.any(f):
            raise ValueError("measurement direction must be nonzero")
        lo, hi = _bound(self.lower, "lower"), _bound(self.upper, "upper")
        if lo is None and hi is None:
            raise ValueError("measurement needs at least one finite bound")
        if lo is not None and hi is not None and lo > hi:
            raise ValueError(f"lower bound {lo} exceeds upper bound {hi}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def equality(cls, f, y: float) -> "Measurement":
        return cls(f, y, y)

    @property
    def kind(self) -> MeasurementKind:
        return classify(self)


def classify(m: Measurement) -> MeasurementKind:
    if m.lower is None:
        return MeasurementKind.UPPER_ONLY
    if m.upper is None:
        return MeasurementKind.LOWER_ONLY
    if m.lower == m.upper:
        return MeasurementKind.EQUALITY
    return MeasurementKind.TWO_SIDED


def clamp_bounds(m: Measurement, rho_bar: float, rho: float, tol: Tolerances = DEFAULT_TOL):
    """Tighten the bounds of ``m`` to the support interval ``[-rho, rho_bar]``.

    Returns ``(upper, lower, aberrant)``; ``aberrant`` flags a constraint set
    that misses the interval by more than the case slack.
    """
    upper = rho_bar if m.upper is None else min(m.upper, rho_bar)
    lower = -rho if m.lower is None else max(m.lower, -rho)
    aberrant = upper < lower - tol.case_slack(rho_bar, rho)
    return upper, lower, aberrant


def beta_star(delta: float, gamma: float, kind: MeasurementKind, rho_bar: float, rho: float,
              tol: Tolerances = DEFAULT_TOL) -> float:
    """Switching gain minimizing the scale of the strip-intersection bound.

    ``kind`` should describe the *tightened* bounds: pass ``EQUALITY`` when
    they coincide.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if kind is MeasurementKind.EQUALITY and abs(rho_bar + rho) > tol.case_slack(rho_bar, rho):
        return 1.0
    if abs(delta) > gamma:
        return 1.0 - gamma / abs(delta)
    return 0.0


class CorrectionStatus(enum.Enum):
    UPDATED = "updated"
    SKIPPED_UNINFORMATIVE = "skipped_uninformative"
    SKIPPED_ABERRANT = "skipped_aberrant"


@dataclass(frozen=True, eq=False)
class CorrectionScratch:
    """Intermediate values of one scalar update.

    ``upper``/``lower`` are the tightened bounds; ``lam = sqrt(sigma theta)``
    is the half-width of the support interval ``[-rho, rho_bar]``.
    """

    phi: np.ndarray
    theta: float
    alpha: float
    lam: float
    rho_bar: float
    rho: float
    delta: float
    gamma: float
    beta: float
    upper: float
    lower: float


@dataclass(frozen=True, eq=False)
class CorrectionOutcome:
    status: CorrectionStatus
    index: int = 0
    scratch: CorrectionScratch | None = None
    reason: str = ""

    @property
    def applied(self) -> bool:
        return self.status is CorrectionStatus.UPDATED


class Policy(enum.Enum):
    LENIENT = "lenient"
    STRICT = "strict"


class Ordering(enum.Enum):
    INPUT = "input"
    GROUPED = "grouped"


def _drop_rounding_directions(P, ref: float, tol: Tolerances):
    # an exact section leaves rounding residue along the cut normals; a later
    # prediction would inflate it (its weight grows as the residue shrinks)
    w, V = np.linalg.eigh(P)
    small = w <= rank_cutoff(w, P.shape[0], tol, ref)
    if not np.any(small):
        return P
    w = np.where(small, 0.0, w)
    P = (V * w) @ V.T
    return 0.5 * (P + P.T)


def _update(c, P, sigma, m: Measurement, index: int, tol: Tolerances, sigma_floor: float):
    """Core scalar update on raw arrays; returns ``(c, P, sigma, outcome)``."""
    f = m.f
    phi = P @ f
    theta = float(f @ phi)
    cf = float(c @ f)
    lam = math.sqrt(sigma * theta) if theta > 0 else 0.0
    if theta <= tol.theta * (1.0 + float(np.trace(P)) * float(f @ f)) or lam == 0.0:
        # f'x is pinned to f'c over the whole ellipsoid
        slack = tol.case_slack(cf, m.lower or 0.0, m.upper or 0.0)
        ok = (m.lower is None or cf >= m.lower - slack) and (m.upper is None or cf <= m.upper + slack)
        if ok:
            return c, P, sigma, CorrectionOutcome(CorrectionStatus.SKIPPED_UNINFORMATIVE, index,
                                                  reason="direction in kernel of shape matrix")
        return c, P, sigma, CorrectionOutcome(CorrectionStatus.SKIPPED_ABERRANT, index,
                                              reason="constraint inconsistent along kernel direction")
    rho_bar = cf + lam
    rho = lam - cf
    upper, lower, aberrant = clamp_bounds(m, rho_bar, rho, tol)
    alpha = 1.0 / theta
    if aberrant:
        scratch = CorrectionScratch(phi, theta, alpha, lam, rho_bar, rho, math.nan, math.nan, 0.0, upper, lower)
        return c, P, sigma, CorrectionOutcome(CorrectionStatus.SKIPPED_ABERRANT, index, scratch,
                                              "constraint set misses the ellipsoid")
    if upper < lower:
        # touching within slack: collapse to the contact value
        upper = lower = 0.5 * (upper + lower)
    delta = 0.5 * (upper + lower) - cf
    gamma = 0.5 * (upper - lower)
    kind = MeasurementKind.EQUALITY if upper == lower else MeasurementKind.TWO_SIDED
    beta = beta_star(delta, gamma, kind, rho_bar, rho, tol)
    scratch = CorrectionScratch(phi, theta, alpha, lam, rho_bar, rho, delta, gamma, beta, upper, lower)
    if beta == 0.0:
        return c, P, sigma, CorrectionOutcome(CorrectionStatus.SKIPPED_UNINFORMATIVE, index, scratch,
                                              "constraint covers the ellipsoid")
    new_sigma = sigma - alpha * beta * beta * delta * delta
    if new_sigma < 0.0:
        if new_sigma < -sigma_floor:
            return c, P, sigma, CorrectionOutcome(CorrectionStatus.SKIPPED_ABERRANT, index, scratch,
                                                  "scale would become negative")
        new_sigma = 0.0
    ab = alpha * beta
    ref = float(np.max(np.abs(P)))
    P = P - ab * np.outer(phi, phi)
    P = 0.5 * (P + P.T)
    if beta == 1.0:
        P = _drop_rounding_directions(P, ref, tol)
    c = c + (ab * delta) * phi
    return c, P, new_sigma, CorrectionOutcome(CorrectionStatus.UPDATED, index, scratch)


def _handle(outcome: CorrectionOutcome, policy: Policy):
    if outcome.status is CorrectionStatus.SKIPPED_ABERRANT:
        if policy is Policy.STRICT:
            raise AberrantMeasurementError(f"measurement {outcome.index}: {outcome.reason}")
        log.warning("skipping aberrant measurement %d: %s", outcome.index, outcome.reason)


def _check(E: Ellipsoid, m: Measurement):
    if m.f.shape[0] != E.n:
        raise DimensionError(f"measurement has dimension {m.f.shape[0]}, ellipsoid has {E.n}")


def correct_single(E: Ellipsoid, m: Measurement, policy: Policy = Policy.LENIENT,
                   tol: Tolerances = DEFAULT_TOL, sigma_ref: float | None = None):
    """Apply one measurement; returns ``(ellipsoid, outcome)``.

    ``sigma_ref`` sets the underflow threshold ``tol.sigma * sigma_ref`` for
    the updated scale (defaults to the current scale).
    """
    _check(E, m)
    ref = E.sigma if sigma_ref is None else sigma_ref
    c, P, sigma, outcome = _update(E.c, E.P, E.sigma, m, 0, tol, tol.sigma * ref)
    _handle(outcome, policy)
    if not outcome.applied:
        return E, outcome
    return Ellipsoid._trusted(c, P, sigma), outcome


def _order(ms, ordering: Ordering):
    idx = list(range(len(ms)))
    if ordering is Ordering.GROUPED:
        rank = {MeasurementKind.UPPER_ONLY: 0, MeasurementKind.LOWER_ONLY: 0,
                MeasurementKind.TWO_SIDED: 1, MeasurementKind.EQUALITY: 2}
        idx.sort(key=lambda i: rank[classify(ms[i])])
    return idx


def correct_all(E: Ellipsoid, ms, ordering: Ordering = Ordering.INPUT, policy: Policy = Policy.LENIENT,
                tol: Tolerances = DEFAULT_TOL, sigma_ref: float | None = None):
    """Sequentially fold all measurements into ``E``.

    Returns ``(ellipsoid, outcomes)`` with outcomes listed in input order;
    each carries the measurement's input index.
    """
    ms = list(ms)
    for m in ms:
        _check(E, m)
    if not ms:
        return E, []
    floor = tol.sigma * (E.sigma if sigma_ref is None else sigma_ref)
    c, P, sigma = E.c, E.P, E.sigma
    outcomes = [None] * len(ms)
    changed = False
    for i in _order(ms, ordering):
        c, P, sigma, outcome = _update(c, P, sigma, ms[i], i, tol, floor)
        _handle(outcome, policy)
        changed |= outcome.applied
        outcomes[i] = outcome
    if not changed:
        return E, outcomes
    return Ellipsoid._trusted(c, P, sigma), outcomes


def rescale(E: Ellipsoid, sigma0: float, sigma_bar: float):
    """Renormalize the scale to ``sigma0`` without changing the set.

    ``sigma_bar`` is the tracked unrescaled scale from the last time ``E``
    carried scale ``sigma0``; it is advanced by the decay ``E.sigma / sigma0``.
    Returns ``(rescaled ellipsoid, new sigma_bar)``.
    """
    sigma0 = float(sigma0)
    if not sigma0 > 0:
        raise ValueError(f"reference scale must be positive, got {sigma0}")
    if not E.sigma > 0:
        raise ValueError("cannot rescale a point ellipsoid")
    ratio = E.sigma / sigma0
    if ratio == 1.0:
        return E, float(sigma_bar)
    return Ellipsoid._trusted(E.c, ratio * E.P, sigma0), float(sigma_bar) * ratio
