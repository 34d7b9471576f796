"""Time update: push the state ellipsoid through the dynamics and absorb the
zonotope-bounded process noise into an outer ellipsoid.

The noise zonotope ``Z(0, R)`` is the Minkowski sum of the segments
``E(0, r_i r_i')``, and each segment is absorbed with the parametrized bound

    P_i = (1 + mu_i) P_{i-1} + (1 + mu_i) / (mu_i sigma) r_i r_i'

starting from ``P_0 = A P A'``. The scale ``sigma`` is never changed here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Ellipsoid
from .numerics import DimensionError, NotPositiveDefiniteError, as_matrix, as_vector, symmetrize

__all__ = [
    "SystemStep",
    "PredictionCriterion",
    "PredictionScratch",
    "TRACE",
    "VOLUME",
    "predict_center",
    "trace_scratch",
    "predict_shape_trace",
    "predict_shape_volume",
    "predict_shape_weighted",
    "sequential_shape",
    "mu_trace",
    "mu_volume",
    "time_update",
    "time_update_detailed",
]


@dataclass(frozen=True, eq=False)
class SystemStep:
    """Known quantities of one transition ``x+ = A x + B tau + R nu``, ``nu in [-1, 1]^m``.

    ``B`` and ``tau`` may be omitted together; ``R`` may have zero columns.
    """

    A: np.ndarray
    B: np.ndarray | None = None
    R: np.ndarray | None = None
    tau: np.ndarray | None = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"state matrix must be square, got shape {A.shape}")
        n = A.shape[0]
        tau = np.zeros(0) if self.tau is None else as_vector(self.tau, "control vector")
        B = np.zeros((n, tau.shape[0])) if self.B is None else as_matrix(self.B, n, None, "input matrix")
        if B.shape[1] != tau.shape[0]:
            raise DimensionError(f"input matrix has {B.shape[1]} columns, control vector has {tau.shape[0]} entries")
        R = np.zeros((n, 0)) if self.R is None or np.size(self.R) == 0 else as_matrix(self.R, n, None, "generator matrix")
        for name, arr in (("A", A), ("B", B), ("R", R), ("tau", tau)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "tau", tau)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class PredictionCriterion:
    """Size measure minimized by the noise absorption.

    ``kind`` is ``"trace"`` (sum of squared semi-axes), ``"volume"`` or
    ``"weighted"`` (``tr(C P C')`` for the weight matrix ``C``).
    """

    kind: str = "trace"
    C: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("trace", "volume", "weighted"):
            raise ValueError(f"unknown prediction criterion {self.kind!r}")
        if self.kind == "weighted":
            if self.C is None:
                raise ValueError("weighted criterion requires a weight matrix")
            C = np.atleast_2d(np.asarray(self.C, dtype=float))
            if not np.all(np.isfinite(C)):
                raise ValueError("weight matrix must be finite")
            object.__setattr__(self, "C", C)

    @classmethod
    def weighted(cls, C) -> "PredictionCriterion":
        return cls("weighted", C)


TRACE = PredictionCriterion("trace")
VOLUME = PredictionCriterion("volume")


@dataclass(frozen=True, eq=False)
class PredictionScratch:
    """Intermediate quantities of the direct minimum-trace formula.

    ``mu0 = sqrt(sigma tr(A P A'))``, ``mu_bar = sum |r_i|`` and
    ``R_bar = sum r_i r_i' / |r_i|``; ``norms`` holds the ``|r_i|`` of the
    generators actually used.
    """

    mu0: float
    mu_bar: float
    R_bar: np.ndarray
    norms: np.ndarray


def _nonzero_generators(R: np.ndarray) -> np.ndarray:
    if R.shape[1] == 0:
        return R
    keep = np.any(R != 0.0, axis=0)
    if not np.all(keep):
        warnings.warn(f"dropping {int(np.count_nonzero(~keep))} zero generator column(s)", RuntimeWarning, stacklevel=3)
        R = R[:, keep]
    return R


def _check_sigma(sigma: float):
    if not sigma > 0:
        raise ValueError(f"scale must be positive for prediction, got {sigma}")


def predict_center(x_hat, step: SystemStep) -> np.ndarray:
    x_hat = as_vector(x_hat, "state estimate")
    if x_hat.shape[0] != step.n:
        raise DimensionError(f"state estimate has dimension {x_hat.shape[0]}, system has {step.n}")
    return step.A @ x_hat + step.B @ step.tau


def trace_scratch(P0: np.ndarray, sigma: float, R: np.ndarray) -> PredictionScratch:
    R = _nonzero_generators(np.asarray(R, dtype=float).reshape(P0.shape[0], -1))
    norms = np.linalg.norm(R, axis=0)
    R_bar = (R / norms) @ R.T if norms.size else np.zeros_like(P0)
    mu0 = math.sqrt(max(sigma * float(np.trace(P0)), 0.0))
    return PredictionScratch(mu0, float(np.sum(norms)), R_bar, norms)


def predict_shape_trace(P, sigma: float, A, R, return_scratch: bool = False):
    """Minimum-trace predicted shape, computed in closed form.

    With ``P0 = A P A'`` the result is ``(1 + mu_bar/mu0) (P0 + mu0/sigma R_bar)``.
    A point-like state (``tr(P0) = 0``) gets the minimum-trace ellipsoid of
    the noise zonotope alone, ``mu_bar R_bar / sigma``, which is the limit
    of the same formula.
    """
    _check_sigma(sigma)
    A = np.asarray(A, dtype=float)
    P0 = symmetrize(A @ P @ A.T)
    scratch = trace_scratch(P0, sigma, R)
    if scratch.norms.size == 0:
        out = P0
    elif scratch.mu0 == 0.0:
        out = symmetrize(scratch.mu_bar * scratch.R_bar / sigma)
    else:
        out = symmetrize((1.0 + scratch.mu_bar / scratch.mu0) * (P0 + (scratch.mu0 / sigma) * scratch.R_bar))
    return (out, scratch) if return_scratch else out


def _absorb(P: np.ndarray, r: np.ndarray, mu: float, sigma: float) -> np.ndarray:
    if math.isinf(mu):
        if np.any(P):
            raise ValueError("infinite mu is only the limit for a zero shape matrix")
        return np.outer(r, r) / sigma
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    return (1.0 + mu) * P + ((1.0 + mu) / (mu * sigma)) * np.outer(r, r)


def sequential_shape(P0, sigma: float, R, mus) -> np.ndarray:
    """Absorb the generators of ``R`` left to right with the given ``mus``."""
    _check_sigma(sigma)
    P = np.array(P0, dtype=float)
    R = np.asarray(R, dtype=float).reshape(P.shape[0], -1)
    mus = np.broadcast_to(np.asarray(mus, dtype=float), (R.shape[1],))
    for r, mu in zip(R.T, mus):
        P = _absorb(P, r, float(mu), sigma)
    return symmetrize(P)


def mu_trace(P_prev: np.ndarray, r: np.ndarray, sigma: float, C: np.ndarray | None = None) -> float:
    """Per-generator minimizer of ``tr(C P_i C')`` (``C = I`` when omitted)."""
    if C is None:
        num, den = float(r @ r), float(np.trace(P_prev))
    else:
        Cr = C @ r
        num, den = float(Cr @ Cr), float(np.trace(C @ P_prev @ C.T))
    if den <= 0:
        return math.inf
    return math.sqrt(num / (sigma * den))


def mu_volume(h: float, n: int) -> float:
    """Per-generator minimizer of ``det(P_i)`` given ``h = r' P_{i-1}^-1 r / sigma``."""
    return math.sqrt((n - 1) ** 2 * h * h + 4 * n * h) / (2 * n) - (n - 1) * h / (2 * n)


def predict_shape_volume(P, sigma: float, A, R) -> np.ndarray:
    """Sequential minimum-volume absorption; needs ``A P A'`` positive definite."""
    _check_sigma(sigma)
    A = np.asarray(A, dtype=float)
    Pk = symmetrize(A @ P @ A.T)
    n = Pk.shape[0]
    R = _nonzero_generators(np.asarray(R, dtype=float).reshape(n, -1))
    for r in R.T:
        try:
            L = np.linalg.cholesky(Pk)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(
                "volume criterion needs a positive definite predicted shape; use the trace criterion "
                "for flat ellipsoids"
            ) from None
        z = np.linalg.solve(L, r)
        h = float(z @ z) / sigma
        Pk = _absorb(Pk, r, mu_volume(h, n), sigma)
    if R.shape[1] == 0:
        try:
            np.linalg.cholesky(Pk)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("volume criterion needs a positive definite predicted shape") from None
    return symmetrize(Pk)


def predict_shape_weighted(P, sigma: float, A, R, C) -> np.ndarray:
    """Sequential absorption minimizing ``tr(C P C')``.

    Generators invisible to ``C`` (``C r = 0``) fall back to the unweighted
    trace step so that they are still absorbed.
    """
    _check_sigma(sigma)
    A = np.asarray(A, dtype=float)
    C = np.atleast_2d(np.asarray(C, dtype=float))
    Pk = symmetrize(A @ P @ A.T)
    R = _nonzero_generators(np.asarray(R, dtype=float).reshape(Pk.shape[0], -1))
    for r in R.T:
        mu = mu_trace(Pk, r, sigma, C)
        if not (0 < mu < math.inf):
            mu = mu_trace(Pk, r, sigma)
        Pk = _absorb(Pk, r, mu, sigma)
    return symmetrize(Pk)


def time_update_detailed(E: Ellipsoid, step: SystemStep, crit: PredictionCriterion = TRACE):
    """Like :func:`time_update` but also returns the trace scratch (or ``None``)."""
    if step.n != E.n:
        raise DimensionError(f"system has dimension {step.n}, ellipsoid has {E.n}")
    c = predict_center(E.c, step)
    scratch = None
    if crit.kind == "trace":
        P, scratch = predict_shape_trace(E.P, E.sigma, step.A, step.R, return_scratch=True)
    elif crit.kind == "volume":
        P = predict_shape_volume(E.P, E.sigma, step.A, step.R)
    else:
        if crit.C.shape[1] != E.n:
            raise DimensionError(f"weight matrix has {crit.C.shape[1]} columns, state has {E.n}")
        P = predict_shape_weighted(E.P, E.sigma, step.A, step.R, crit.C)
    return Ellipsoid._trusted(c, P, E.sigma), scratch


def time_update(E: Ellipsoid, step: SystemStep, crit: PredictionCriterion = TRACE) -> Ellipsoid:
    """Outer ellipsoid of ``A E + {B tau} + Z(0, R)``; the scale is kept."""
    return time_update_detailed(E, step, crit)[0]
