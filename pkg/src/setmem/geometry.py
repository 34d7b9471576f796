"""Set calculus for ellipsoids, zonotopes, strips, halfspaces and hyperplanes.

An ellipsoid is stored as a center ``c``, a symmetric positive semi-definite
shape ``P`` and a nonnegative scale ``sigma``; the set it describes is

    E(c, sigma P) = {c + (sigma P)^(1/2) u : |u| <= 1}

so flat (rank-deficient) ellipsoids are first-class values. Every operation
here is a pure function returning new objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .numerics import (
    DEFAULT_TOL,
    DimensionError,
    EmptyIntersectionError,
    Tolerances,
    as_matrix,
    as_vector,
    numerical_rank,
    split_quadratic_form,
    symmetrize,
)

__all__ = [
    "Ellipsoid",
    "Zonotope",
    "Strip",
    "Halfspace",
    "Hyperplane",
    "ReductionKind",
    "StripReduction",
    "CutKind",
    "HyperplaneCut",
    "support",
    "support_interval",
    "signed_distance_hyperplane",
    "affine_image",
    "minkowski_bound",
    "zonotope_as_rank1_ellipsoids",
    "halfspace_to_strip",
    "strip_intersect_bound",
    "hyperplane_intersect",
    "contains",
]


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    c: np.ndarray
    P: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        c = as_vector(self.c, "center")
        n = c.shape[0]
        P = as_matrix(self.P, n, n, "shape matrix")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(P))):
            raise ValueError("ellipsoid entries must be finite")
        scale = max(1.0, float(np.max(np.abs(P)))) if P.size else 1.0
        if P.size and float(np.max(np.abs(P - P.T))) > DEFAULT_TOL.sym * scale:
            raise ValueError("shape matrix is not symmetric")
        P = symmetrize(P)
        if n:
            lo = float(np.linalg.eigvalsh(P)[0])
            if lo < -1e-9 * max(1.0, float(np.trace(np.abs(P)))):
                raise ValueError(f"shape matrix is not positive semi-definite (min eigenvalue {lo:.3g})")
        sigma = float(self.sigma)
        if not (sigma >= 0 and math.isfinite(sigma)):
            raise ValueError(f"scale must be finite and nonnegative, got {sigma}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def _trusted(cls, c: np.ndarray, P: np.ndarray, sigma: float) -> "Ellipsoid":
        # Hot-path constructor: inputs already validated and symmetric.
        obj = object.__new__(cls)
        object.__setattr__(obj, "c", c)
        object.__setattr__(obj, "P", P)
        object.__setattr__(obj, "sigma", float(sigma))
        return obj

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def shape(self) -> np.ndarray:
        """Full shape matrix ``sigma * P``."""
        return self.sigma * self.P

    def rank(self, tol: Tolerances = DEFAULT_TOL, ref: float = 0.0) -> int:
        """Numerical rank of ``P``; ``ref`` is an optional reference magnitude."""
        return numerical_rank(self.P, tol, ref)

    def semiaxes(self) -> np.ndarray:
        """Semi-axis lengths, largest first."""
        w = np.linalg.eigvalsh(self.shape)[::-1]
        return np.sqrt(np.clip(w, 0.0, None))

    def __repr__(self):
        return f"Ellipsoid(c={self.c.tolist()}, P={self.P.tolist()}, sigma={self.sigma!r})"


@dataclass(frozen=True, eq=False)
class Zonotope:
    """``{c + G z : z in [-1, 1]^m}``; ``m = 0`` is the singleton ``{c}``."""

    c: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        c = as_vector(self.c, "center")
        G = np.asarray(self.G, dtype=float)
        if G.size == 0:
            G = np.zeros((c.shape[0], 0))
        G = as_matrix(G, c.shape[0], None, "generator matrix")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def order(self) -> int:
        return self.G.shape[1]


def _normal(d, a, what):
    d = as_vector(d, f"{what} normal")
    if not np.any(d):
        raise ValueError(f"{what} normal vector must be nonzero")
    a = float(a)
    if not (np.all(np.isfinite(d)) and math.isfinite(a)):
        raise ValueError(f"{what} parameters must be finite")
    return d, a


@dataclass(frozen=True, eq=False)
class Strip:
    """``{x : |x'd - a| <= 1}``, of width ``2 / |d|``."""

    d: np.ndarray
    a: float

    def __post_init__(self):
        d, a = _normal(self.d, self.a, "strip")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "a", a)

    @classmethod
    def from_bounds(cls, f, lower: float, upper: float) -> "Strip":
        """The strip ``lower <= x'f <= upper`` (requires ``lower < upper``)."""
        if not lower < upper:
            raise ValueError("strip bounds must satisfy lower < upper")
        half = 0.5 * (upper - lower)
        return cls(as_vector(f) / half, 0.5 * (upper + lower) / half)

    def bounds(self) -> tuple[np.ndarray, float, float]:
        return self.d, self.a - 1.0, self.a + 1.0

    def contains(self, x, slack: float = 0.0) -> bool:
        return abs(float(np.dot(x, self.d)) - self.a) <= 1.0 + slack


@dataclass(frozen=True, eq=False)
class Halfspace:
    """``{x : x'd <= a}``."""

    d: np.ndarray
    a: float

    def __post_init__(self):
        d, a = _normal(self.d, self.a, "halfspace")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "a", a)

    def contains(self, x, slack: float = 0.0) -> bool:
        return float(np.dot(x, self.d)) <= self.a + slack


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """``{x : x'd = a}``."""

    d: np.ndarray
    a: float

    def __post_init__(self):
        d, a = _normal(self.d, self.a, "hyperplane")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "a", a)


class ReductionKind(enum.Enum):
    EMPTY = "empty"
    NO_INFORMATION = "no_information"
    POINT = "point"
    STRIP = "strip"


@dataclass(frozen=True, eq=False)
class StripReduction:
    kind: ReductionKind
    point: np.ndarray | None = None
    strip: Strip | None = None


class CutKind(enum.Enum):
    EMPTY = "empty"
    UNCHANGED = "unchanged"
    ELLIPSOID = "ellipsoid"


@dataclass(frozen=True, eq=False)
class HyperplaneCut:
    kind: CutKind
    ellipsoid: Ellipsoid | None = None


def _check_dim(E: Ellipsoid, x: np.ndarray, what: str = "vector"):
    if x.shape[0] != E.n:
        raise DimensionError(f"{what} has dimension {x.shape[0]}, ellipsoid has {E.n}")


def support(E: Ellipsoid, x) -> float:
    """Support function ``max_{u in E} u'x = c'x + sqrt(sigma x'Px)``."""
    x = as_vector(x)
    _check_dim(E, x)
    return float(E.c @ x) + math.sqrt(max(E.sigma * float(x @ E.P @ x), 0.0))


def support_interval(E: Ellipsoid, f):
    """Return ``(rho_bar, rho, theta)`` for direction ``f``.

    ``[-rho, rho_bar]`` is the projection of ``E`` on ``x -> x'f`` and
    ``theta = f'Pf``.
    """
    f = as_vector(f)
    _check_dim(E, f)
    theta = max(float(f @ E.P @ f), 0.0)
    lam = math.sqrt(E.sigma * theta)
    cf = float(E.c @ f)
    return cf + lam, lam - cf, theta


def signed_distance_hyperplane(E: Ellipsoid, H: Hyperplane) -> float:
    """Signed distance between ``E`` and ``H``; negative when ``H`` cuts the interior."""
    _check_dim(E, H.d, "hyperplane normal")
    gap = abs(H.a - float(E.c @ H.d))
    return (gap - math.sqrt(max(E.sigma * float(H.d @ E.P @ H.d), 0.0))) / float(np.linalg.norm(H.d))


def affine_image(E: Ellipsoid, A, b=None) -> Ellipsoid:
    """Image ``{A x + b : x in E}``."""
    A = as_matrix(A, None, E.n, "map")
    b = np.zeros(A.shape[0]) if b is None else as_vector(b)
    if b.shape[0] != A.shape[0]:
        raise DimensionError(f"offset has dimension {b.shape[0]}, map has {A.shape[0]} rows")
    return Ellipsoid(A @ E.c + b, symmetrize(A @ E.P @ A.T), E.sigma)


def minkowski_bound(E1: Ellipsoid, E2: Ellipsoid, mu: float) -> Ellipsoid:
    """Outer ellipsoid of ``E1 + E2`` with shape ``(1 + mu) S1 + (1 + 1/mu) S2``.

    When both operands carry the same scale it is kept and the ``P`` matrices
    are combined; otherwise full shapes are combined and the scale is 1.
    """
    if E1.n != E2.n:
        raise DimensionError("ellipsoids have different dimensions")
    mu = float(mu)
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if E1.sigma == E2.sigma and E1.sigma > 0:
        S1, S2, sigma = E1.P, E2.P, E1.sigma
    else:
        S1, S2, sigma = E1.shape, E2.shape, 1.0
    return Ellipsoid(E1.c + E2.c, symmetrize((1.0 + mu) * S1 + (1.0 + 1.0 / mu) * S2), sigma)


def zonotope_as_rank1_ellipsoids(Z: Zonotope) -> list[Ellipsoid]:
    """Centered segments ``E(0, r r')`` whose Minkowski sum is ``Z - c``."""
    zero = np.zeros(Z.n)
    return [Ellipsoid(zero, np.outer(r, r), 1.0) for r in Z.G.T]


def halfspace_to_strip(E: Ellipsoid, G: Halfspace, tol: Tolerances = DEFAULT_TOL) -> StripReduction:
    """Replace ``E ∩ G`` by ``E ∩ D`` for a strip ``D`` bounded by a tangent plane."""
    f, ybar = G.d, G.a
    rho_bar, rho, theta = support_interval(E, f)
    slack = tol.case_slack(rho_bar, rho)
    if ybar < -rho - slack:
        return StripReduction(ReductionKind.EMPTY)
    if ybar >= rho_bar:
        return StripReduction(ReductionKind.NO_INFORMATION)
    if ybar + rho <= 0.0 or theta == 0.0:
        # tangent from the outside (within slack): single contact point
        if theta == 0.0:
            return StripReduction(ReductionKind.POINT, point=E.c.copy())
        point = E.c - math.sqrt(E.sigma / theta) * (E.P @ f)
        return StripReduction(ReductionKind.POINT, point=point)
    gamma = 0.5 * (ybar + rho)
    y = (ybar - rho) / (2.0 * gamma)
    return StripReduction(ReductionKind.STRIP, strip=Strip(f / gamma, y))


def strip_intersect_bound(E: Ellipsoid, D: Strip, beta: float, tol: Tolerances = DEFAULT_TOL) -> Ellipsoid:
    """Ellipsoid ``E(c(beta), zeta(beta) P(beta))`` containing ``D ∩ E``.

    The strip is first tightened against the support interval of ``E``;
    ``beta = 0`` returns ``E`` and larger values trade scale for shape.
    Raises :class:`EmptyIntersectionError` when ``D`` misses ``E``.
    """
    beta = float(beta)
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    f, lo, hi = D.bounds()
    rho_bar, rho, theta = support_interval(E, f)
    slack = tol.case_slack(rho_bar, rho)
    if lo > rho_bar + slack or hi < -rho - slack:
        raise EmptyIntersectionError("strip does not intersect the ellipsoid")
    if hi >= rho_bar and lo <= -rho:
        return E
    up = min(hi, rho_bar)
    down = max(lo, -rho)
    if up <= down or theta == 0.0:
        # single contact point
        if theta == 0.0:
            return E
        sign = -1.0 if up <= -rho + slack else 1.0
        point = E.c + sign * math.sqrt(E.sigma / theta) * (E.P @ f)
        return Ellipsoid._trusted(point, np.zeros_like(E.P), 0.0)
    if beta == 0.0:
        return E
    cf = float(E.c @ f)
    delta = 0.5 * (up + down) - cf
    gamma = 0.5 * (up - down)
    alpha = 1.0 / theta
    phi = E.P @ f
    ab = alpha * beta
    P = E.P - ab * np.outer(phi, phi)
    c = E.c + ab * delta * phi
    zeta = E.sigma + ab * (gamma**2 / (1.0 - beta) - delta**2)
    return Ellipsoid(c, symmetrize(P), max(zeta, 0.0))


def hyperplane_intersect(E: Ellipsoid, H: Hyperplane, tol: Tolerances = DEFAULT_TOL) -> HyperplaneCut:
    """Exact section ``E ∩ H``; the result loses one rank when ``d`` is not in Ker(P)."""
    f, y = H.d, H.a
    rho_bar, rho, theta = support_interval(E, f)
    slack = tol.case_slack(rho_bar, rho)
    if y > rho_bar + slack or y < -rho - slack:
        return HyperplaneCut(CutKind.EMPTY)
    if theta <= tol.theta * (1.0 + float(np.trace(E.P)) * float(f @ f)):
        return HyperplaneCut(CutKind.UNCHANGED, E)
    alpha = 1.0 / theta
    delta = y - float(E.c @ f)
    phi = E.P @ f
    c = E.c + alpha * delta * phi
    P = symmetrize(E.P - alpha * np.outer(phi, phi))
    sigma = max(E.sigma - alpha * delta**2, 0.0)
    return HyperplaneCut(CutKind.ELLIPSOID, Ellipsoid._trusted(c, P, sigma))


def contains(E: Ellipsoid, x, tol: float = 1e-9, rank_tol: Tolerances = DEFAULT_TOL) -> bool:
    """Membership test for a possibly flat ellipsoid.

    ``x`` belongs to ``E`` when its offset from the center has a kernel part
    no longer than ``tol`` times the ellipsoid's largest semi-axis (at least
    ``tol``) and its range-space quadratic form is at most ``sigma (1 + tol)``.
    """
    x = as_vector(x)
    _check_dim(E, x, "point")
    v = x - E.c
    if E.sigma == 0.0:
        return float(np.linalg.norm(v)) <= tol
    q, kernel_norm, scale = split_quadratic_form(E.P, v, rank_tol)
    if kernel_norm > tol * max(1.0, math.sqrt(E.sigma) * scale):
        return False
    return q <= E.sigma * (1.0 + tol)
