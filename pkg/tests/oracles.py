"""Independent sampling oracles used by the tests.

These deliberately avoid the package's own membership routines: points are
generated from explicit parametrizations and membership is evaluated in
bulk with a separate eigendecomposition.
"""

import numpy as np


def psd_sqrt(S):
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    return V * np.sqrt(np.clip(w, 0.0, None))


def sphere(rng, k, n):
    u = rng.standard_normal((k, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def ball(rng, k, n):
    return sphere(rng, k, n) * rng.random((k, 1)) ** (1.0 / n)


def ellipsoid_points(c, S, rng, k, boundary_fraction=0.5):
    """Points of ``E(c, S)``: a mix of boundary and uniform interior samples."""
    n = len(c)
    kb = int(k * boundary_fraction)
    u = np.vstack([sphere(rng, kb, n), ball(rng, k - kb, n)])
    return c + u @ psd_sqrt(S).T


def in_ellipsoid(c, S, X, tol=1e-7):
    """Vectorized membership of the rows of ``X`` in ``E(c, S)`` (``S`` may be singular)."""
    w, V = np.linalg.eigh(0.5 * (S + S.T))
    Z = (np.atleast_2d(X) - c) @ V
    big = float(np.max(np.abs(w))) if w.size else 0.0
    rng_mask = w > len(c) * big * 1e-12
    q = np.sum(Z[:, rng_mask] ** 2 / w[rng_mask], axis=1) if np.any(rng_mask) else np.zeros(len(Z))
    ker = np.linalg.norm(Z[:, ~rng_mask], axis=1)
    return (q <= 1.0 + tol) & (ker <= tol * max(1.0, np.sqrt(big)))


def quad_value(c, P, X):
    """``(x - c)' P^+ (x - c)`` for each row (range part only)."""
    w, V = np.linalg.eigh(0.5 * (P + P.T))
    Z = (np.atleast_2d(X) - c) @ V
    m = w > len(c) * float(np.max(np.abs(w))) * 1e-12
    return np.sum(Z[:, m] ** 2 / w[m], axis=1)


def zonotope_points(c, G, rng, k):
    """Uniform cube samples plus random vertices of ``{c + G z}``."""
    m = G.shape[1]
    if m == 0:
        return np.tile(c, (k, 1))
    z = rng.uniform(-1, 1, (k, m))
    z[: k // 2] = np.sign(z[: k // 2])
    return c + z @ G.T


def random_spd(rng, n, cond=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    w = np.exp(rng.uniform(0, np.log(cond), n))
    return (Q * w) @ Q.T


def random_psd(rng, n, rank):
    X = rng.standard_normal((n, rank))
    return X @ X.T


def strip_points(c, S, f, lo, hi, rng, k):
    """At least ``k`` points of ``E(c, S) ∩ {lo <= f'x <= hi}``, boundary-heavy.

    Combines filtered ellipsoid samples with projections of ellipsoid samples
    onto the two bounding planes (kept when still inside the ellipsoid).
    """
    out, have = [], 0
    ff = float(f @ f)
    while have < k:
        X = ellipsoid_points(c, S, rng, 4 * k)
        v = X @ f
        keep = X[(v >= lo) & (v <= hi)]
        proj = []
        for y in (lo, hi):
            Y = X - np.outer(X @ f - y, f) / ff
            proj.append(Y[in_ellipsoid(c, S, Y, 0.0)])
        batch = np.vstack([keep, *proj])
        out.append(batch)
        have += len(batch)
    allp = np.vstack(out)
    return allp[rng.permutation(len(allp))[:k]]
