"""Shared numerical tolerances and small linear-algebra helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SetMembershipError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(SetMembershipError, ValueError):
    pass


class NotPositiveDefiniteError(SetMembershipError, ValueError):
    pass


class EmptyIntersectionError(SetMembershipError):
    """The constraint set does not meet the ellipsoid."""


@dataclass(frozen=True)
class Tolerances:
    """Relative thresholds used wherever exact-arithmetic tests are made.

    Attributes
    ----------
    theta : float
        A measurement direction is treated as lying in Ker(P) when
        ``f'Pf <= theta * (1 + tr(P) * |f|^2)``.
    sigma : float
        Scale underflow threshold, relative to the initial scale.
    case : float
        Relative slack for tangency decisions against support values.
    sym : float
        Relative asymmetry accepted on input shape matrices.
    rank : float
        Eigenvalues below ``n * |P|_2 * rank`` count as zero.
    """

    theta: float = 1e-12
    sigma: float = 1e-12
    case: float = 1e-12
    sym: float = 1e-10
    rank: float = 1e-12

    def __post_init__(self):
        for name in ("theta", "sigma", "case", "sym", "rank"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name!r} must be positive")

    def case_slack(self, *values: float) -> float:
        return self.case * (1.0 + sum(abs(v) for v in values))


DEFAULT_TOL = Tolerances()


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    return v


def as_matrix(a, rows: int | None = None, cols: int | None = None, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 1 and rows is not None and cols == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"{name} must have {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"{name} must have {cols} columns, got {m.shape[1]}")
    return m


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def rank_cutoff(w: np.ndarray, n: int, tol: Tolerances = DEFAULT_TOL, ref: float = 0.0) -> float:
    """Zero threshold for the eigenvalues ``w`` of an ``n x n`` PSD matrix.

    ``ref`` is an optional magnitude the matrix descends from (for instance
    the shape before a sequence of rank-one downdates); without it a matrix
    made only of rounding noise would count as full rank.
    """
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    return n * max(scale, ref) * tol.rank


def numerical_rank(P: np.ndarray, tol: Tolerances = DEFAULT_TOL, ref: float = 0.0) -> int:
    n = P.shape[0]
    if n == 0:
        return 0
    w = np.linalg.eigvalsh(symmetrize(P))
    cut = rank_cutoff(w, n, tol, ref)
    return int(np.count_nonzero(w > cut)) if cut > 0 else int(np.count_nonzero(w > 0))


def split_quadratic_form(P: np.ndarray, v: np.ndarray, tol: Tolerances = DEFAULT_TOL):
    """Decompose ``v`` against the eigenbasis of the PSD matrix ``P``.

    Returns ``(q, kernel_norm, scale)`` where ``q = v' P^+ v`` over the
    numerical range of ``P``, ``kernel_norm`` is the norm of the part of
    ``v`` lying in the numerical kernel and ``scale = sqrt(|P|_2)``.
    """
    n = P.shape[0]
    w, V = np.linalg.eigh(symmetrize(P))
    z = V.T @ v
    cut = rank_cutoff(w, n, tol)
    rng = w > cut
    if not np.any(rng):
        return 0.0, float(np.linalg.norm(z)), 0.0
    q = float(np.sum(z[rng] ** 2 / w[rng]))
    kernel_norm = float(np.linalg.norm(z[~rng]))
    return q, kernel_norm, float(np.sqrt(np.max(w)))
