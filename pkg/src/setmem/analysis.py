"""Verification instruments for the estimator.

* A Kalman filter on an equivalent stochastic system. Its process and
  measurement covariances are derived from one ellipsoidal run. The filter
  must then reproduce the ellipsoidal centers and shape matrices exactly.
* Observability and controllability gramians over fixed or sporadic windows.
* The quadratic "Lyapunov" value ``(x - c)' P^+ (x - c)``, which never exceeds
  ``sigma`` on points of the true feasible set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .corrector import CorrectionStatus, MeasurementKind, classify
from .estimator import EstimatorConfig, StepReport, init, step
from .geometry import Ellipsoid
from .numerics import DEFAULT_TOL, SetMembershipError, Tolerances, as_vector, rank_cutoff, split_quadratic_form, symmetrize
from .predictor import TRACE, SystemStep

__all__ = [
    "OracleUnsupportedError",
    "KalmanState",
    "NoiseEquivalents",
    "derive_equivalents",
    "kalman_step",
    "EquivalenceResult",
    "check_equivalence",
    "GramianStep",
    "GramianReport",
    "gramians",
    "lyapunov_value",
]

log = logging.getLogger(__name__)


class OracleUnsupportedError(SetMembershipError, ValueError):
    """The run contains something the Kalman analogy does not cover (equalities)."""


@dataclass(frozen=True, eq=False)
class KalmanState:
    xi: np.ndarray
    P: np.ndarray


@dataclass(frozen=True, eq=False)
class NoiseEquivalents:
    """Stochastic stand-ins for one estimator step.

    ``lam`` inflates the propagated covariance, ``W`` is the covariance of
    the noise entering through the columns of ``R``, and the rows
    ``F[:, i]``, ``y[i]``, ``V[i, i]`` are the measurements actually fused,
    in fusion order. ``upsilon`` holds ``alpha beta^2`` per fused row.
    """

    lam: float
    R: np.ndarray
    W: np.ndarray
    F: np.ndarray
    y: np.ndarray
    V: np.ndarray
    omega: np.ndarray
    upsilon: np.ndarray
    rows: list[int]


def derive_equivalents(report: StepReport, sys: SystemStep, ms) -> NoiseEquivalents:
    """Build the Kalman covariances matching one trace-criterion estimator step."""
    ms = list(ms)
    if any(classify(m) is MeasurementKind.EQUALITY for m in ms):
        raise OracleUnsupportedError("equality constraints are not covered by the Kalman analogy")
    sc = report.prediction
    if sc is None:
        raise OracleUnsupportedError("the Kalman analogy needs the trace prediction criterion")
    sigma = report.sigma_before
    n = sys.n
    keep = np.any(sys.R != 0.0, axis=0)
    R = sys.R[:, keep]
    if sc.norms.size == 0:
        lam, W = 1.0, np.zeros((0, 0))
    else:
        # a point-like predicted state has A P A' = 0, so the inflation is irrelevant
        lam = math.sqrt(1.0 + sc.mu_bar / sc.mu0) if sc.mu0 > 0 else 1.0
        W = np.diag((sc.mu_bar + sc.mu0) / sigma / sc.norms)
    order = sorted(range(len(ms)), key=lambda i: report.outcomes[i].index)
    rows, F, y, omega, ups = [], [], [], [], []
    for i in order:
        o = report.outcomes[i]
        if o.status is not CorrectionStatus.UPDATED:
            continue
        s = o.scratch
        if s.beta >= 1.0:
            raise OracleUnsupportedError(f"measurement {i} was fused as an exact section (beta = 1)")
        rows.append(i)
        F.append(ms[i].f)
        y.append(0.5 * (s.upper + s.lower))
        omega.append(s.alpha * s.beta / (1.0 - s.beta))
        ups.append(s.alpha * s.beta**2)
    omega = np.asarray(omega, dtype=float)
    F = np.array(F, dtype=float).T.reshape(n, len(rows))
    return NoiseEquivalents(lam, R, W, F, np.asarray(y, dtype=float), np.diag(1.0 / omega) if rows else np.zeros((0, 0)),
                            omega, np.asarray(ups, dtype=float), rows)


def kalman_step(s: KalmanState, A, B, tau, R, W, F, V, y, lam: float = 1.0, sequential: bool = True):
    """Predict with ``lam^2 A P A' + R W R'`` then fuse the rows of ``F``.

    The mean is propagated with ``A``; ``lam`` only inflates the covariance.
    Returns ``(state, innovations, thetas)`` where the last two are per-row
    when ``sequential`` (``thetas`` is ``f' P f`` before each row) and the
    batch innovation vector otherwise.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    xi = A @ s.xi
    if B is not None and np.size(B):
        xi = xi + np.asarray(B, dtype=float) @ as_vector(tau)
    P = lam * lam * (A @ s.P @ A.T)
    R = np.asarray(R, dtype=float).reshape(n, -1)
    if R.shape[1]:
        P = P + R @ np.asarray(W, dtype=float) @ R.T
    P = symmetrize(P)
    F = np.asarray(F, dtype=float).reshape(n, -1)
    y = np.asarray(y, dtype=float).reshape(-1)
    V = np.asarray(V, dtype=float).reshape(F.shape[1], F.shape[1])
    if F.shape[1] == 0:
        return KalmanState(xi, P), np.zeros(0), np.zeros(0)
    if sequential:
        innov, thetas = np.empty(F.shape[1]), np.empty(F.shape[1])
        for j in range(F.shape[1]):
            f = F[:, j]
            Pf = P @ f
            thetas[j] = float(f @ Pf)
            s_j = thetas[j] + V[j, j]
            if not s_j > 0:
                raise np.linalg.LinAlgError(f"singular innovation variance at row {j}")
            innov[j] = y[j] - float(f @ xi)
            K = Pf / s_j
            xi = xi + K * innov[j]
            P = symmetrize(P - np.outer(K, Pf))
        return KalmanState(xi, P), innov, thetas
    S = F.T @ P @ F + V
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e14:
        raise np.linalg.LinAlgError(f"innovation matrix is ill-conditioned (cond {cond:.3g})")
    innov = y - F.T @ xi
    K = np.linalg.solve(S, F.T @ P).T
    xi = xi + K @ innov
    P = symmetrize((np.eye(n) - K @ F.T) @ P)
    return KalmanState(xi, P), innov, np.zeros(0)


@dataclass(frozen=True)
class EquivalenceResult:
    state_dev: float
    shape_dev: float
    shape_scale: float
    sigma_dev: float
    info_dev: float
    steps: int

    def ok(self, tol: float = 1e-8) -> bool:
        return self.state_dev <= tol and self.shape_dev <= tol * (1.0 + self.shape_scale)


def check_equivalence(systems, measurements, x0, P0, sigma0: float = 1.0, ordering=None,
                      tol: Tolerances = DEFAULT_TOL) -> EquivalenceResult:
    """Run the estimator (trace criterion, no rescaling) alongside the Kalman oracle.

    Returns the maximum center deviation, the maximum shape deviation in the
    infinity norm (with the largest shape norm seen, for relative use), the
    maximum deviation of the scale recursion rebuilt from the oracle's own
    innovations, and the largest relative error of the information identity
    over full-rank steps.
    """
    systems, measurements = list(systems), [list(ms) for ms in measurements]
    for ms in measurements:
        if any(classify(m) is MeasurementKind.EQUALITY for m in ms):
            raise OracleUnsupportedError("equality constraints are not covered by the Kalman analogy")
    kw = {} if ordering is None else {"ordering": ordering}
    cfg = EstimatorConfig(criterion=TRACE, rescaling=False, tol=tol, **kw)
    s = init(x0, P0, sigma0)
    ks = KalmanState(s.x.copy(), s.P.copy())
    sig = s.sigma
    state_dev = shape_dev = sigma_dev = info_dev = 0.0
    scale = float(np.linalg.norm(s.P, np.inf))
    for sys, ms in zip(systems, measurements, strict=True):
        s, rep = step(s, sys, ms, cfg)
        eq = derive_equivalents(rep, sys, ms)
        ks, innov, thetas = kalman_step(ks, sys.A, sys.B, sys.tau, eq.R, eq.W, eq.F, eq.V, eq.y, eq.lam)
        P_prior = rep.predicted.P
        # scale recursion from the oracle's own quantities
        if eq.rows:
            beta = eq.omega * thetas / (1.0 + eq.omega * thetas)
            sig = sig - float(np.sum(beta**2 * innov**2 / thetas))
        sigma_dev = max(sigma_dev, abs(sig - s.sigma))
        state_dev = max(state_dev, float(np.linalg.norm(s.x - ks.xi)))
        shape_dev = max(shape_dev, float(np.linalg.norm(s.P - ks.P, np.inf)))
        scale = max(scale, float(np.linalg.norm(s.P, np.inf)))
        if eq.rows:
            info_dev = max(info_dev, _information_error(s.P, P_prior, eq.F, eq.omega, tol))
    return EquivalenceResult(state_dev, shape_dev, scale, sigma_dev, info_dev, len(systems))


def _information_error(P_post, P_prior, F, omega, tol) -> float:
    n = P_post.shape[0]
    w_post = np.linalg.eigvalsh(P_post)
    w_prior = np.linalg.eigvalsh(P_prior)
    if w_post[0] <= rank_cutoff(w_post, n, tol) * 1e3 or w_prior[0] <= rank_cutoff(w_prior, n, tol) * 1e3:
        return 0.0
    lhs = np.linalg.inv(P_post)
    rhs = np.linalg.inv(P_prior) + (F * omega) @ F.T
    return float(np.linalg.norm(lhs - rhs, np.inf) / max(np.linalg.norm(lhs, np.inf), 1e-300))


@dataclass(frozen=True, eq=False)
class GramianStep:
    """Data attached to time ``i``: the transition ``i -> i+1`` and the measurements at ``i``.

    ``F`` is ``n x p`` (``p = 0`` when nothing is measured) and ``V`` is ``p x p``.
    ``W`` defaults to the identity and ``lam`` to 1.
    """

    A: np.ndarray
    R: np.ndarray
    F: np.ndarray
    V: np.ndarray | None = None
    W: np.ndarray | None = None
    lam: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0]
        R = np.asarray(self.R, dtype=float).reshape(n, -1)
        F = np.asarray(self.F, dtype=float).reshape(n, -1)
        V = np.eye(F.shape[1]) if self.V is None else np.atleast_2d(np.asarray(self.V, dtype=float)).reshape(F.shape[1], F.shape[1])
        W = np.eye(R.shape[1]) if self.W is None else np.atleast_2d(np.asarray(self.W, dtype=float)).reshape(R.shape[1], R.shape[1])
        for name, v in (("A", A), ("R", R), ("F", F), ("V", V), ("W", W)):
            object.__setattr__(self, name, v)

    @property
    def measured(self) -> bool:
        return self.F.shape[1] > 0


@dataclass(frozen=True, eq=False)
class GramianReport:
    h: int
    observability: np.ndarray
    controllability: np.ndarray
    sporadic: np.ndarray | None
    kappa: int | None
    obs_bounds: tuple[float, float]
    ctrl_bounds: tuple[float, float]
    sporadic_bounds: tuple[float, float] | None
    uniformly_observable: bool
    sporadically_observable: bool
    uniformly_controllable: bool


def _spectral_bounds(M: np.ndarray, tol: Tolerances):
    w = np.linalg.eigvalsh(symmetrize(M))
    lo, hi = float(w[0]), float(w[-1])
    cut = rank_cutoff(w, M.shape[0], tol)
    return (lo, hi), bool(lo > cut and hi > 0)


def _observability(history, start: int, end: int) -> np.ndarray:
    n = history[start].A.shape[0]
    O = np.zeros((n, n))
    Phi = np.eye(n)
    lam_bar = 1.0
    for i in range(start, end + 1):
        g = history[i]
        if g.measured:
            M = Phi.T @ g.F
            O += lam_bar**2 * (M @ np.linalg.solve(g.V, M.T))
        Phi = g.A @ Phi
        lam_bar *= g.lam
    return symmetrize(O)


def _controllability(history, start: int, end: int) -> np.ndarray:
    # sum over i in [start, end - 1] of lam_bar^-2 Phi_{start,i+1} R W R' Phi_{start,i+1}'
    n = history[start].A.shape[0]
    C = np.zeros((n, n))
    Phi = np.eye(n)
    lam_bar = 1.0
    for i in range(start, end):
        g = history[i]
        Phi = g.A @ Phi
        lam_bar *= g.lam
        cond = np.linalg.cond(Phi)
        if not np.isfinite(cond):
            raise ValueError(f"state transition matrix is singular at step {i}")
        if cond > 1e12:
            log.warning("state transition matrix is ill-conditioned at step %d (cond %.3g)", i, cond)
        G = np.linalg.solve(Phi, g.R)
        C += (G @ g.W @ G.T) / lam_bar**2
    return symmetrize(C)


def gramians(history, k: int, h: int, tol: Tolerances = DEFAULT_TOL) -> GramianReport:
    """Gramians ending at time ``k`` for window length ``h``.

    The fixed window covers times ``k - h .. k``. The sporadic window
    reaches back just far enough to include ``h`` measured times; it is
    ``None`` when the history holds fewer than ``h`` of them.
    """
    history = list(history)
    if not 0 <= k < len(history):
        raise IndexError(f"time {k} outside the history of length {len(history)}")
    if h < 1 or h > k:
        raise ValueError(f"window length must lie in [1, {k}], got {h}")
    O = _observability(history, k - h, k)
    C = _controllability(history, k - h, k)
    obs_b, obs_ok = _spectral_bounds(O, tol)
    ctrl_b, ctrl_ok = _spectral_bounds(C, tol)
    kappa, count = None, 0
    for back in range(0, k + 1):
        count += history[k - back].measured
        if count == h:
            kappa = back
            break
    sporadic, sp_b, sp_ok = None, None, False
    if kappa is not None:
        sporadic = _observability(history, k - kappa, k)
        sp_b, sp_ok = _spectral_bounds(sporadic, tol)
    return GramianReport(h, O, C, sporadic, kappa, obs_b, ctrl_b, sp_b, obs_ok, sp_ok, ctrl_ok)


def lyapunov_value(E: Ellipsoid, x, tol: float = 1e-9, rank_tol: Tolerances = DEFAULT_TOL) -> float:
    """``(x - c)' P^+ (x - c)``; ``inf`` when ``x - c`` leaves the range of ``P``."""
    x = as_vector(x, "point")
    v = x - E.c
    q, kernel_norm, scale = split_quadratic_form(E.P, v, rank_tol)
    if kernel_norm > tol * max(1.0, scale * math.sqrt(max(E.sigma, 0.0))):
        return math.inf
    return q
