import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from echeuristic import critical_variance as cv
from echeuristic.covariance import (
    IsotropicModel,
    cosine_mixture,
    is_monotone_nonincreasing,
    latitude_circle,
    normalize_second_moment,
    squared_exponential,
)
from echeuristic.optimize import golden_section_max, grid_refine_max

SE = squared_exponential(1.0)
COS = cosine_mixture([1.0], [1.0])
# frozen regression fixture: a two-frequency blend whose covariance turns up before T
BLEND = normalize_second_moment(cosine_mixture([0.5, 0.5], [1.0, 3.0]))
BLEND_T = 3.0
BLEND_SIGMA = 0.6615255861017442


# -- pointwise variances --------------------------------------------------------


def test_interior_variance_examples():
    assert cv.var_fx_interior(SE, 40.0) == pytest.approx(1.0, abs=1e-12)
    assert cv.var_fx_interior(COS, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert abs(cv.var_fx_interior(SE, 1e-3) - 2.0) <= 1e-4


def test_near_diagonal_lag_is_rejected():
    with pytest.raises(ValueError):
        cv.var_fx_interior(SE, 1e-4)
    with pytest.raises(ValueError):
        cv.var_fx_boundary(SE, 0.0)


def test_unnormalized_model_is_rejected():
    with pytest.raises(ValueError):
        cv.var_fx_interior(squared_exponential(2.0), 1.0)
    with pytest.raises(ValueError):
        cv.sigma_local(latitude_circle(0.5))


def test_boundary_variance_examples():
    t = np.linspace(0.01, 8, 300)
    np.testing.assert_array_equal(cv.var_fx_boundary(SE, t), cv.var_fx_interior(SE, t))
    assert cv.var_fx_boundary(COS, 1.5 * math.pi) == pytest.approx(1.0, abs=1e-12)


@given(t=st.floats(1e-3, 30.0), which=st.integers(0, 3))
@settings(max_examples=200, deadline=None)
def test_boundary_dominates_interior(t, which):
    model = (SE, COS, BLEND, normalize_second_moment(latitude_circle(0.6)))[which]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert cv.var_fx_boundary(model, t) >= cv.var_fx_interior(model, t)


@pytest.mark.parametrize(
    "model",
    [SE, squared_exponential(1.0), BLEND, normalize_second_moment(latitude_circle(0.4))],
    ids=["se", "se-again", "blend", "latitude"],
)
def test_interior_variance_tends_to_local_value(model):
    # even expansion in t: two Richardson steps cancel the t^2 and t^4 terms
    t = np.array([1e-2, 5e-3, 2.5e-3])
    v = cv.var_fx_interior(model, t)
    r1 = (4 * v[1:] - v[:-1]) / 3
    r2 = (16 * r1[1] - r1[0]) / 15
    assert abs(r2 - cv.sigma_local(model)) <= 1e-5


def test_local_variance_examples():
    assert cv.sigma_local(SE) == pytest.approx(2.0, abs=1e-14)
    assert cv.sigma_local(COS) == pytest.approx(0.0, abs=1e-14)


@given(r=st.floats(0.05, 0.99))
@settings(max_examples=50, deadline=None)
def test_local_variance_latitude_circle(r):
    model = normalize_second_moment(latitude_circle(r))
    assert cv.sigma_local(model) == pytest.approx((1 - r * r) / (r * r), rel=1e-10)


def test_clamping_policy():
    with pytest.warns(UserWarning):
        out = cv._clamp_nonneg(np.array([1.0, -5e-11]), 0.0, "probe")
    np.testing.assert_array_equal(out, [1.0, 0.0])
    with pytest.raises(ValueError):
        cv._clamp_nonneg(np.array([-1e-6]), 0.0, "probe")


# -- suprema on intervals ---------------------------------------------------------


def test_interval_squared_exponential():
    rep = cv.sigma_critical_interval(SE, 5.0)
    assert rep.sigma_c_sq == pytest.approx(2.0, abs=1e-6)
    assert rep.attained_locally
    assert rep.argmax_t == "local"
    assert rep.method is cv.Method.GRID_REFINE


def test_interval_cosine_is_degenerate():
    rep = cv.sigma_critical_interval(COS, math.pi)
    assert rep.sigma_c_sq == pytest.approx(0.0, abs=1e-12)
    assert math.isinf(rep.exponent)
    assert rep.to_dict()["exponent"] == "inf"


def test_blend_fixture_exceeds_local_value():
    assert not is_monotone_nonincreasing(BLEND, BLEND_T, 4096)
    rep = cv.sigma_critical_interval(BLEND, BLEND_T)
    assert rep.sigma_c_sq == pytest.approx(BLEND_SIGMA, abs=1e-9)
    assert rep.sigma_c_sq > cv.sigma_local(BLEND) + cv.TOL_ATTAIN
    assert not rep.attained_locally
    assert BLEND.derivative(rep.argmax_t, 1) > 0


def test_blend_fixture_against_dense_scan():
    t = np.linspace(cv.EPS_DIAG, BLEND_T, 1_000_001)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        scan = cv.var_fx_boundary(BLEND, t)
    k = int(np.argmax(scan))
    assert abs(scan[k] - BLEND_SIGMA) <= 1e-8
    # at a maximizer where R is increasing the variance reduces to (1 + R) / (1 - R)
    r = BLEND(t[k])
    assert BLEND.derivative(t[k], 1) > 0
    assert (1 + r) / (1 - r) == pytest.approx(scan[k], rel=1e-12)


def test_shortcut_examples():
    rep = cv.sigma_monotone_shortcut(SE, 10.0)
    assert rep.sigma_c_sq == pytest.approx(2.0, abs=1e-14)
    assert rep.method is cv.Method.MONOTONE_SHORTCUT
    assert cv.sigma_monotone_shortcut(BLEND, BLEND_T) is None


@given(ell=st.floats(0.3, 3.0), T=st.floats(0.5, 12.0))
@settings(max_examples=20, deadline=None)
def test_shortcut_agrees_with_grid_search_se(ell, T):
    model = normalize_second_moment(squared_exponential(ell))
    short = cv.sigma_monotone_shortcut(model, T)
    assert short is not None
    assert abs(short.sigma_c_sq - cv.sigma_critical_interval(model, T).sigma_c_sq) <= cv.TOL_ATTAIN


@given(r=st.floats(0.2, 0.95), frac=st.floats(0.1, 1.0))
@settings(max_examples=20, deadline=None)
def test_shortcut_agrees_with_grid_search_latitude(r, frac):
    model = normalize_second_moment(latitude_circle(r))
    T = frac * math.pi * model.scale
    short = cv.sigma_monotone_shortcut(model, T)
    assert short is not None
    assert abs(short.sigma_c_sq - cv.sigma_critical_interval(model, T).sigma_c_sq) <= cv.TOL_ATTAIN


def test_isotropic_convex():
    rep = cv.sigma_isotropic_convex(IsotropicModel(squared_exponential(0.4), 2))
    assert rep.sigma_c_sq == pytest.approx(2.0, abs=1e-12)
    assert rep.attained_locally
    with pytest.raises(ValueError, match="monotone"):
        cv.sigma_isotropic_convex(IsotropicModel(COS, 2))


# -- report conversions --------------------------------------------------------------


@pytest.mark.parametrize("sigma, exponent", [(0.5, 1.5), (1.0, 1.0), (2.0, 0.75), (3.0, 2 / 3)])
def test_exponent_mapping(sigma, exponent):
    rep = cv.CriticalVarianceReport(sigma, "local", True, cv.Method.GRID_REFINE)
    assert rep.exponent == exponent
    assert rep.bound == 2 * exponent
    assert rep.theta_c == pytest.approx(math.atan(1 / math.sqrt(sigma)), rel=1e-15)


def test_zero_variance_sentinel():
    rep = cv.CriticalVarianceReport(0.0, "local", True, cv.Method.GRID_REFINE)
    assert rep.exponent == math.inf
    assert rep.theta_c == pytest.approx(math.pi / 2)


def test_ftilde_diagnostic():
    assert cv.var_ftilde_diagnostic(COS, math.pi / 2) == pytest.approx(1.0, abs=1e-15)
    assert cv.var_ftilde_diagnostic(SE, 1e-6) > 1e10
    t = np.linspace(0.01, 6, 500)
    assert np.all(np.diff(cv.var_ftilde_diagnostic(SE, t)) < 0)
    with pytest.raises(ValueError):
        cv.var_ftilde_diagnostic(SE, 0.0)


# -- finite Karhunen-Loeve curves --------------------------------------------------------


def _brute_force_kl(phi, dphi, band):
    # independent oracle: least-squares projection onto span{phi(x), dphi(x)}
    n = phi.shape[0]
    out = np.full((n, n), -np.inf)
    for i in range(n):
        span = np.column_stack([phi[i], dphi[i]])
        coef, *_ = np.linalg.lstsq(span, phi.T, rcond=None)
        resid = phi.T - span @ coef
        gap = 1 - phi @ phi[i]
        ok = gap >= band
        out[i, ok] = np.sum(resid[:, ok] ** 2, axis=0) / gap[ok] ** 2
    return out


def test_latitude_circle_critical_variance():
    rep = cv.sigma_critical_finite_kl(cv.latitude_circle_embedding(0.5))
    assert rep.sigma_c_sq == pytest.approx(3.0, abs=1e-6)
    assert rep.theta_c == pytest.approx(math.pi / 6, abs=1e-6)
    assert rep.method is cv.Method.FINITE_KL
    rep = cv.sigma_critical_finite_kl(cv.latitude_circle_embedding(1 / math.sqrt(2)))
    assert rep.sigma_c_sq == pytest.approx(1.0, abs=1e-6)
    assert rep.theta_c == pytest.approx(math.pi / 4, abs=1e-6)


def test_latitude_circle_brute_force_grid():
    m = cv.latitude_circle_embedding(0.5, 512)
    grid = _brute_force_kl(m.phi, m.dphi[:, :, 0] if m.dphi.ndim == 3 else m.dphi, 1e-3)
    vals = grid[np.isfinite(grid)]
    assert vals.max() == pytest.approx(3.0, abs=1e-6)
    assert vals.min() == pytest.approx(3.0, abs=1e-6)


def test_latitude_circle_variance_is_constant():
    m = cv.latitude_circle_embedding(0.5, 256)
    vals = np.array([cv.var_fx_finite_kl(m, i, j) for i in range(0, 256, 7) for j in range(256) if j != i])
    assert vals.max() - vals.min() <= 1e-8


def test_near_great_circle_variance_vanishes():
    for r in (0.99, 0.999):
        m = cv.latitude_circle_embedding(r, 128)
        assert cv.var_fx_finite_kl(m, 0, 40) == pytest.approx((1 - r * r) / (r * r), rel=1e-6)


def test_orientation_reversal():
    m = cv.latitude_circle_embedding(0.3, 64)
    phi = np.column_stack([m.phi[:, 0] * (1 + 0.1 * m.phi[:, 1]), m.phi[:, 1], m.phi[:, 2]])
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    fwd = cv.FiniteKLModel(phi)
    rev = cv.FiniteKLModel(phi[::-1].copy())
    n = 64
    for i, j in [(0, 5), (3, 40), (10, 11), (63, 20)]:
        a = cv.var_fx_finite_kl(fwd, i, j)
        b = cv.var_fx_finite_kl(rev, n - 1 - i, n - 1 - j)
        assert a == pytest.approx(b, rel=1e-10)


def test_spectral_tangents_match_exact_ones():
    exact = cv.latitude_circle_embedding(0.5, 128)
    spectral = cv.FiniteKLModel(exact.phi)
    np.testing.assert_allclose(spectral.dphi.reshape(exact.dphi.shape), exact.dphi, atol=1e-12)
    assert cv.sigma_critical_finite_kl(spectral).sigma_c_sq == pytest.approx(3.0, abs=1e-6)


def test_excluded_band_and_identical_points():
    m = cv.latitude_circle_embedding(0.5, 512)
    with pytest.raises(ValueError):
        cv.var_fx_finite_kl(m, 3, 3)
    dense = cv.latitude_circle_embedding(0.001, 64)
    with pytest.raises(ValueError, match="band"):
        cv.var_fx_finite_kl(dense, 0, 1)


def test_invalid_embeddings():
    m = cv.latitude_circle_embedding(0.5, 32)
    with pytest.raises(ValueError):
        cv.FiniteKLModel(m.phi * 1.01)
    repeated = np.vstack([m.phi, m.phi[:1]])
    with pytest.raises(ValueError):
        cv.FiniteKLModel(repeated)


@pytest.mark.parametrize("r", [0.5, 1 / math.sqrt(2), 0.3])
def test_finite_kl_agrees_with_stationary_formula(r):
    kl = cv.sigma_critical_finite_kl(cv.latitude_circle_embedding(r)).sigma_c_sq
    model = normalize_second_moment(latitude_circle(r))
    stationary = cv.sigma_critical_interval(model, math.pi * model.scale).sigma_c_sq
    assert abs(kl - stationary) <= 1e-6


# -- optimizers ------------------------------------------------------------------------------


def test_golden_section_finds_interior_and_endpoint_maxima():
    x, f = golden_section_max(lambda t: -(t - 0.3) ** 2, 0.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-8)
    x, f = golden_section_max(lambda t: t, 0.0, 1.0)
    assert x == 1.0 and f == 1.0


def test_grid_refine_handles_multimodal_functions_and_ties():
    f = lambda t: np.sin(7 * np.asarray(t)) + 0.1 * np.asarray(t)  # noqa: E731
    x, v = grid_refine_max(f, 0.0, 10.0)
    dense = np.linspace(0, 10, 2_000_001)
    assert v == pytest.approx(f(dense).max(), abs=1e-10)
    x, v = grid_refine_max(lambda t: np.zeros_like(np.asarray(t, dtype=float)), 2.0, 5.0)
    assert x == 2.0
