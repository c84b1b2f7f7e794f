"""Critical variance of the auxiliary processes ``f^x`` and derived exponents.

For a stationary process on ``[0, T]`` normalized so that ``-R''(0) = 1``
the variance of ``f^x(y)`` depends only on the lag ``t = |x - y|``:

* interior points:  ``(1 - R^2 - R'^2) / (1 - R)^2``
* end points:       the numerator gains ``max(R', 0)^2``

and its ``t -> 0`` limit is ``R''''(0) - 1``.  For a finite Karhunen-Loeve
process ``f(x) = <phi(x), xi>`` on a closed curve the variance is the squared
norm of the part of ``phi(y)`` orthogonal to ``span{phi(x), dphi(x)}``,
divided by ``(1 - rho(x, y))^2``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceModel, IsotropicModel, is_monotone_nonincreasing, normalize_second_moment
from .optimize import golden_section_max, grid_refine_max

__all__ = [
    "EPS_DIAG",
    "EPS_RHO",
    "TOL_ATTAIN",
    "Method",
    "CriticalVarianceReport",
    "FiniteKLModel",
    "exponent_from_sigma",
    "theta_from_sigma",
    "var_fx_interior",
    "var_fx_boundary",
    "sigma_local",
    "sigma_critical_interval",
    "sigma_monotone_shortcut",
    "sigma_isotropic_convex",
    "var_fx_finite_kl",
    "sigma_critical_finite_kl",
    "var_ftilde_diagnostic",
    "latitude_circle_embedding",
]

EPS_DIAG = 1e-3
EPS_RHO = 1e-6
TOL_ATTAIN = 1e-6
NEG_TOL = 1e-10
N_GRID = 4096
_EPS = np.finfo(float).eps


class Method(str, enum.Enum):
    MONOTONE_SHORTCUT = "monotone-shortcut"
    GRID_REFINE = "grid-refine"
    FINITE_KL = "finite-KL"


def exponent_from_sigma(sigma_c_sq: float) -> float:
    """``(1 + 1/sigma^2) / 2``; infinite when ``sigma^2 = 0``."""
    if sigma_c_sq <= 0:
        return math.inf
    return 0.5 * (1.0 + 1.0 / sigma_c_sq)


def theta_from_sigma(sigma_c_sq: float) -> float:
    """Critical angle ``arccot(sqrt(sigma^2))``."""
    return math.atan2(1.0, math.sqrt(max(sigma_c_sq, 0.0)))


@dataclass(frozen=True)
class CriticalVarianceReport:
    sigma_c_sq: float
    argmax_t: float | str
    attained_locally: bool
    method: Method
    sigma_local: float | None = None

    @property
    def exponent(self) -> float:
        return exponent_from_sigma(self.sigma_c_sq)

    @property
    def theta_c(self) -> float:
        return theta_from_sigma(self.sigma_c_sq)

    @property
    def bound(self) -> float:
        """Decay-rate bound on ``log Diff`` against ``u^2/2``, i.e. ``1 + 1/sigma^2``."""
        return 2.0 * self.exponent

    def to_dict(self) -> dict:
        exp = self.exponent
        return {
            "sigma_c_sq": self.sigma_c_sq,
            "argmax_t": self.argmax_t,
            "attained_locally": self.attained_locally,
            "exponent": "inf" if math.isinf(exp) else exp,
            "theta_c": self.theta_c,
            "method": self.method.value,
            "sigma_local": self.sigma_local,
        }


def _clamp_nonneg(values: np.ndarray, noise: np.ndarray | float, what: str) -> np.ndarray:
    tol = NEG_TOL + noise
    if np.any(values < -tol):
        raise ValueError(f"{what} is negative beyond tolerance (min {np.min(values):.3e})")
    neg = values < 0
    if np.any(neg):
        warnings.warn(f"{what}: clamped {int(np.sum(neg))} slightly negative value(s) to 0", stacklevel=3)
        values = np.where(neg, 0.0, values)
    return values


def _require_normalized(model: CovarianceModel) -> None:
    if not model.normalized:
        raise ValueError("model must be normalized (-R''(0) = 1); call normalize_second_moment")


def _var_fx(model: CovarianceModel, t, boundary: bool):
    _require_normalized(model)
    t = np.asarray(t, dtype=float)
    if np.any(t < EPS_DIAG):
        raise ValueError(f"lag within eps_diag={EPS_DIAG} of 0; use sigma_local instead")
    om = np.asarray(model.one_minus(t))
    rd = np.asarray(model.derivative(t, 1))
    first = om * (2.0 - om)
    num = first - rd * rd
    if boundary:
        num = num + np.maximum(rd, 0.0) ** 2
    denom = om * om
    out = _clamp_nonneg(num / denom, 8 * _EPS * (first + rd * rd) / denom, "var(f^x)")
    return out if out.ndim else float(out)


def var_fx_interior(model: CovarianceModel, t):
    """Variance of ``f^x(y)`` at lag ``t`` for an interior point ``x``."""
    return _var_fx(model, t, boundary=False)


def var_fx_boundary(model: CovarianceModel, t):
    """Variance of ``f^0(y)`` at lag ``t`` for the end point ``x = 0``."""
    return _var_fx(model, t, boundary=True)


def sigma_local(model: CovarianceModel) -> float:
    """``R''''(0) - 1``, the ``t -> 0`` limit of the interior variance."""
    _require_normalized(model)
    val = float(model.derivative(0.0, 4)) - 1.0
    return float(_clamp_nonneg(np.array(val), 0.0, "sigma_local"))


def _report(model: CovarianceModel, sup_val: float, sup_t: float, method: Method) -> CriticalVarianceReport:
    loc = sigma_local(model)
    if sup_val <= loc + TOL_ATTAIN:
        return CriticalVarianceReport(loc, "local", True, method, loc)
    return CriticalVarianceReport(sup_val, sup_t, False, method, loc)


def sigma_critical_interval(model: CovarianceModel, T: float, n_grid: int = N_GRID) -> CriticalVarianceReport:
    """Critical variance of a normalized stationary process on ``[0, T]``.

    The end-point variance dominates the interior one, so the supremum is
    taken over ``var_fx_boundary``: a coarse grid on ``[eps_diag, T]``
    followed by golden-section refinement of the winning bracket.
    """
    _require_normalized(model)
    if not T > 0:
        raise ValueError("T must be positive")
    if T <= EPS_DIAG:
        loc = sigma_local(model)
        return CriticalVarianceReport(loc, "local", True, Method.GRID_REFINE, loc)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t_best, v_best = grid_refine_max(lambda t: var_fx_boundary(model, t), EPS_DIAG, T, n_grid)
    return _report(model, v_best, t_best, Method.GRID_REFINE)


def sigma_monotone_shortcut(model: CovarianceModel, T: float):
    """``sigma_local`` when ``R`` is nonincreasing on ``[0, T]``, else ``None``."""
    _require_normalized(model)
    if not is_monotone_nonincreasing(model, T, N_GRID):
        return None
    loc = sigma_local(model)
    return CriticalVarianceReport(loc, "local", True, Method.MONOTONE_SHORTCUT, loc)


def sigma_isotropic_convex(model: IsotropicModel) -> CriticalVarianceReport:
    """Critical variance of a monotone isotropic field on a convex body.

    The value is ``Var(d^2 f/dt_1^2 | f)`` of the normalized field and does
    not depend on the body.
    """
    iso = model.normalized()
    if not iso.monotone:
        raise ValueError(
            "radial covariance is not monotone nonincreasing; "
            "the local formula does not apply, use sigma_critical_interval's grid search"
        )
    loc = sigma_local(iso.radial)
    return CriticalVarianceReport(loc, "local", True, Method.MONOTONE_SHORTCUT, loc)


def var_ftilde_diagnostic(model: CovarianceModel, t):
    """``(1 + R(t)) / (1 - R(t))``; diverges like ``4 / (lambda2 t^2)`` as ``t -> 0``."""
    t = np.asarray(t, dtype=float)
    if np.any(t == 0):
        raise ValueError("t must be nonzero")
    om = np.asarray(model.one_minus(t))
    out = (2.0 - om) / om
    return out if out.ndim else float(out)


# -- finite Karhunen-Loeve processes on closed curves -------------------------


def _orthonormal_basis(vectors: np.ndarray, drop_tol: float = 1e-12) -> np.ndarray:
    """Modified Gram-Schmidt with one re-orthogonalization pass.

    ``vectors`` has shape (n, m); columns whose residual falls below
    ``drop_tol`` relative to their norm are dropped.
    """
    basis = []
    for v in vectors.T:
        w = v.astype(float).copy()
        norm_v = np.linalg.norm(w)
        for _ in range(2):
            for q in basis:
                w -= (q @ w) * q
        nw = np.linalg.norm(w)
        if norm_v == 0 or nw < drop_tol * norm_v:
            continue
        basis.append(w / nw)
    return np.array(basis).T


def _one_minus_rho(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # 1 - <a, b> = |a - b|^2 / 2 + (1 - |a|^2) / 2 + (1 - |b|^2) / 2
    d = a - b
    return 0.5 * np.sum(d * d, axis=-1) + 0.5 * (1 - np.sum(a * a, axis=-1)) + 0.5 * (1 - np.sum(b * b, axis=-1))


def _spectral_derivative(phi: np.ndarray, period: float) -> np.ndarray:
    n = phi.shape[0]
    k = np.fft.fftfreq(n, d=period / n) * 2 * np.pi
    coef = np.fft.fft(phi, axis=0)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return np.real(np.fft.ifft(1j * k[:, None] * coef, axis=0))


class FiniteKLModel:
    """Closed curve ``x -> phi(x)`` on the unit sphere of ``R^n``.

    Parameters
    ----------
    phi : array (N, n)
        Embedding sampled on a uniform grid of one period ``[0, period)``.
    dphi : array (N, n) or (N, n, k), optional
        Tangent vectors; computed by periodic spectral differentiation when
        omitted.
    period : float
        Parameter period of the closed curve.
    """

    def __init__(self, phi, dphi=None, period: float = 2 * np.pi):
        phi = np.asarray(phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] < 8:
            raise ValueError("phi must be an (N, n) array with N >= 8")
        norms = np.linalg.norm(phi, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-10:
            raise ValueError("phi must take values on the unit sphere (|phi| = 1 within 1e-10)")
        if dphi is None:
            dphi = _spectral_derivative(phi, period)
        dphi = np.asarray(dphi, dtype=float)
        if dphi.ndim == 2:
            dphi = dphi[:, :, None]
        if dphi.shape[:2] != phi.shape:
            raise ValueError("dphi shape does not match phi")
        self.phi = phi
        self.dphi = dphi
        self.period = float(period)
        self._coef = np.fft.fft(phi, axis=0) / phi.shape[0]
        gaps = np.array([_one_minus_rho(phi[i], phi) for i in range(phi.shape[0])])
        np.fill_diagonal(gaps, np.inf)
        # identical points leave only roundoff in 1 - rho
        if np.min(gaps) <= 64 * _EPS:
            raise ValueError("rho(x, y) = 1 for distinct grid points: the curve is not embedded")

    @property
    def n_grid(self) -> int:
        return self.phi.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_grid) * self.period / self.n_grid

    def basis(self, i: int) -> np.ndarray:
        return _orthonormal_basis(np.column_stack([self.phi[i], self.dphi[i]]))

    def interpolate(self, s: float):
        """Trigonometric interpolation of ``(phi, dphi)`` at parameter ``s``."""
        n = self.n_grid
        k = np.fft.fftfreq(n, d=1.0 / n)
        w = 2 * np.pi / self.period
        if n % 2 == 0:
            # split the Nyquist mode symmetrically so the interpolant is real
            k[n // 2] = 0.0
            e = np.exp(1j * w * k * s)
            nyq = self._coef[n // 2] * np.cos(w * (n // 2) * s)
            dnyq = -self._coef[n // 2] * w * (n // 2) * np.sin(w * (n // 2) * s)
            coef = self._coef.copy()
            coef[n // 2] = 0.0
            val = np.real(e @ coef) + np.real(nyq)
            der = np.real((1j * w * k * e) @ coef) + np.real(dnyq)
        else:
            e = np.exp(1j * w * k * s)
            val = np.real(e @ self._coef)
            der = np.real((1j * w * k * e) @ self._coef)
        return val, der[:, None]


def _var_from_vectors(phi_x, dphi_x, phi_y):
    q = _orthonormal_basis(np.column_stack([phi_x, dphi_x]))
    resid = phi_y - (phi_y @ q) @ q.T
    gap = _one_minus_rho(phi_x, phi_y)
    return np.sum(resid * resid, axis=-1), gap


def var_fx_finite_kl(model: FiniteKLModel, x_index: int, y_index: int) -> float:
    """Variance of ``f^x(y)`` for grid points ``x != y`` of a closed curve."""
    if x_index == y_index:
        raise ValueError("x_index and y_index must differ")
    i, j = x_index % model.n_grid, y_index % model.n_grid
    num, gap = _var_from_vectors(model.phi[i], model.dphi[i], model.phi[j])
    if gap < EPS_RHO:
        raise ValueError(f"1 - rho(x, y) = {gap:.3e} is inside the excluded band eps_rho={EPS_RHO}")
    return float(num / gap**2)


def _row_values(model: FiniteKLModel, i: int) -> np.ndarray:
    num, gap = _var_from_vectors(model.phi[i], model.dphi[i], model.phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = num / gap**2
    vals[gap < EPS_RHO] = -np.inf
    vals[i] = -np.inf
    return vals


def _continuous_var(model: FiniteKLModel, sx: float, sy: float) -> float:
    px, dx = model.interpolate(sx)
    py, _ = model.interpolate(sy)
    px /= np.linalg.norm(px)
    py /= np.linalg.norm(py)
    num, gap = _var_from_vectors(px, dx, py)
    if gap < EPS_RHO:
        return -np.inf
    return float(num / gap**2)


def sigma_critical_finite_kl(model: FiniteKLModel, refine_rounds: int = 3) -> CriticalVarianceReport:
    """Double supremum of ``var_fx_finite_kl`` over the grid, then local polish.

    The curve has no boundary, so ``sigma^2 = cot^2(theta_c)`` and the report's
    ``theta_c`` is the critical angle of the embedded curve.
    """
    n = model.n_grid
    rows = np.array([_row_values(model, i) for i in range(n)])
    flat = int(np.argmax(rows))
    i, j = divmod(flat, n)
    best = float(rows[i, j])
    h = model.period / n
    sx, sy = i * h, j * h
    for _ in range(refine_rounds):
        sy, v = golden_section_max(lambda s: _continuous_var(model, sx, s), sy - h, sy + h, tol=1e-10)
        sx, v = golden_section_max(lambda s: _continuous_var(model, s, sy), sx - h, sx + h, tol=1e-10)
        if v > best:
            best = v
    return CriticalVarianceReport(best, float(abs(sy - sx) % model.period), False, Method.FINITE_KL, None)


def latitude_circle_embedding(radius: float, n_grid: int = 512) -> FiniteKLModel:
    """``phi(x) = (r cos x, r sin x, sqrt(1 - r^2))`` with its exact tangent."""
    x = np.arange(n_grid) * 2 * np.pi / n_grid
    h = math.sqrt(1 - radius**2)
    phi = np.column_stack([radius * np.cos(x), radius * np.sin(x), np.full_like(x, h)])
    dphi = np.column_stack([-radius * np.sin(x), radius * np.cos(x), np.zeros_like(x)])
    return FiniteKLModel(phi, dphi)
