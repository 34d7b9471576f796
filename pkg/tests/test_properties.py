"""Randomized properties driven by hypothesis."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import ellipsoid_points, in_ellipsoid, strip_points, zonotope_points
from setmem.corrector import CorrectionStatus, Ordering, Measurement, MeasurementKind, beta_star, correct_all, correct_single, rescale
from setmem.estimator import EstimatorConfig, init, run
from setmem.geometry import Ellipsoid, support_interval
from setmem.harness import ScenarioConfig, build_scenario
from setmem.harness.checks import zeta
from setmem.predictor import mu_trace, predict_shape_trace, sequential_shape

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
PROPS = settings(max_examples=60, deadline=None)


@st.composite
def spd(draw, n):
    G = draw(arrays(float, (n, n), elements=finite))
    return G @ G.T + 0.1 * np.eye(n)


@st.composite
def ellipsoids(draw, n=None):
    n = draw(st.integers(1, 4)) if n is None else n
    c = draw(arrays(float, n, elements=finite))
    sigma = draw(st.floats(0.1, 3))
    return Ellipsoid(c, draw(spd(n)), sigma)


@st.composite
def directions(draw, n):
    f = draw(arrays(float, n, elements=finite))
    if np.linalg.norm(f) < 1e-2:
        f = np.eye(n)[0]
    return f


@given(st.data())
@PROPS
def test_support_interval_brackets_projection(data):
    E = data.draw(ellipsoids())
    f = data.draw(directions(E.n))
    rho_bar, rho, theta = support_interval(E, f)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    X = ellipsoid_points(E.c, E.shape, rng, 300, boundary_fraction=1.0)
    slack = 1e-9 * (1 + abs(rho_bar) + abs(rho))
    assert np.all(X @ f <= rho_bar + slack) and np.all(X @ f >= -rho - slack)
    # the extreme points c +- S f / sqrt(f'Sf) attain both ends
    Sf = E.shape @ f
    tip = Sf / math.sqrt(f @ Sf)
    assert math.isclose(f @ (E.c + tip), rho_bar, rel_tol=1e-9, abs_tol=slack)
    assert math.isclose(f @ (E.c - tip), -rho, rel_tol=1e-9, abs_tol=slack)
    assert math.isclose(theta, f @ E.P @ f, rel_tol=1e-12)


@given(st.data())
@PROPS
def test_corrected_set_contains_feasible_samples(data):
    E = data.draw(ellipsoids())
    f = data.draw(directions(E.n))
    lam = math.sqrt(E.sigma * f @ E.P @ f)
    a, b = data.draw(st.floats(-1.2, 1.2)), data.draw(st.floats(-1.2, 1.2))
    lo, hi = E.c @ f + min(a, b) * lam, E.c @ f + max(a, b) * lam
    out, o = correct_single(E, Measurement(f, lo, hi))
    assert out.sigma <= E.sigma
    if o.status is CorrectionStatus.SKIPPED_ABERRANT:
        return
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    X = strip_points(E.c, E.shape, f, lo, hi, rng, 500)
    if len(X):
        assert in_ellipsoid(out.c, out.shape, X, 1e-7).all()
    if o.status is CorrectionStatus.UPDATED:
        v = out.c @ f
        assert o.scratch.lower - 1e-9 * (1 + abs(v)) <= v <= o.scratch.upper + 1e-9 * (1 + abs(v))


@given(st.floats(-5, 5), st.floats(0, 5), st.floats(0.01, 10), st.floats(0.01, 10))
@PROPS
def test_beta_star_beats_grid(delta, gamma, alpha, sigma):
    lam = math.sqrt(sigma / alpha)
    up, lo = min(delta + gamma, lam), max(delta - gamma, -lam)
    if lo >= up:
        return
    d, g = 0.5 * (up + lo), 0.5 * (up - lo)
    b = beta_star(d, g, MeasurementKind.TWO_SIDED, lam, lam)
    assert 0.0 <= b < 1.0
    grid = np.linspace(0.001, 0.999, 999)
    assert zeta(sigma, alpha, d, g, b) <= np.min(zeta(sigma, alpha, d, g, grid)) + 1e-12 * max(1.0, sigma)


@given(st.data())
@PROPS
def test_rescale_preserves_product(data):
    E = data.draw(ellipsoids())
    s0 = data.draw(st.floats(0.1, 5))
    out, sb = rescale(E, s0, E.sigma)
    assert out.sigma == s0
    assert np.allclose(out.shape, E.shape, rtol=1e-14, atol=1e-14 * np.abs(E.shape).max())
    assert math.isclose(sb, E.sigma * E.sigma / s0)


@given(st.data())
@PROPS
def test_trace_prediction_direct_matches_sequential_and_contains_sum(data):
    n = data.draw(st.integers(1, 4))
    m = data.draw(st.integers(1, 3))
    E = data.draw(ellipsoids(n))
    A = data.draw(arrays(float, (n, n), elements=finite))
    R = data.draw(arrays(float, (n, m), elements=finite))
    R[:, np.linalg.norm(R, axis=0) < 1e-3] = 1.0
    P = predict_shape_trace(E.P, E.sigma, A, R)
    seq = A @ E.P @ A.T
    for r in R.T:
        seq = sequential_shape(seq, E.sigma, r.reshape(-1, 1), [mu_trace(seq, r, E.sigma)])
    assert np.allclose(P, seq, rtol=1e-8, atol=1e-10 * max(1.0, np.abs(P).max()))
    # any other choice of weights gives a larger trace
    mus = data.draw(arrays(float, m, elements=st.floats(0.01, 100)))
    other = A @ E.P @ A.T
    for r, mu in zip(R.T, mus):
        other = sequential_shape(other, E.sigma, r.reshape(-1, 1), [mu])
    assert np.trace(P) <= np.trace(other) * (1 + 1e-9)
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    X = zonotope_points(A @ E.c, R, rng, 300)
    assert in_ellipsoid(A @ E.c, E.sigma * P + 1e-12 * np.eye(n), X).all()


@given(st.integers(2, 4), st.integers(0, 2**32 - 1), st.booleans())
@settings(max_examples=25, deadline=None)
def test_run_keeps_truth_and_scale_monotone(n, seed, grouped):
    sc = build_scenario(ScenarioConfig.benchmark(n, 1, trials=1, seed=seed, horizon=15), 0)
    cfg = EstimatorConfig(ordering=Ordering.GROUPED if grouped else Ordering.INPUT)
    states, reports = run(init(sc.x0_hat, sc.P0, sc.sigma0), sc.steps, sc.measurements, cfg)
    for s, x in zip(states, sc.x_true):
        assert in_ellipsoid(s.x, s.sigma * s.P, x[None, :], 1e-6).all()
    assert all(r.sigma_after <= r.sigma_before for r in reports)
    bars = np.array([s.sigma_bar for s in states])
    assert np.all(np.diff(bars) <= 0)


@given(st.data())
@PROPS
def test_equalities_reduce_rank(data):
    n = data.draw(st.integers(2, 5))
    k = data.draw(st.integers(1, n - 1))
    E = data.draw(ellipsoids(n))
    F = np.linalg.qr(data.draw(arrays(float, (n, n), elements=finite)) + 5 * np.eye(n))[0][:, :k]
    ms = [Measurement.equality(F[:, j], float(F[:, j] @ E.c)) for j in range(k)]
    out, outs = correct_all(E, ms)
    assert all(o.status is CorrectionStatus.UPDATED for o in outs)
    assert out.rank() == n - k
    assert np.allclose(out.P @ F, 0, atol=1e-9 * np.abs(E.P).max())
    # one noise generator outside the flattened directions restores one rank
    r = F[:, :1]
    grown = predict_shape_trace(out.P, out.sigma, np.eye(n), r)
    assert np.linalg.matrix_rank(grown, tol=1e-9 * np.abs(grown).max()) == n - k + 1
