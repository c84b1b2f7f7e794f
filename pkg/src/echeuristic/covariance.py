"""Closed-form stationary covariance models with exact derivatives.

Every model is a unit-variance covariance ``R`` with ``R(0) = 1``.  Three
families are supported:

``squared_exponential``
    ``R(t) = exp(-t**2 / (2 l**2))``, params ``(l,)``.
``cosine_mixture``
    ``R(t) = sum_i a_i cos(w_i t)``, params ``(a_1, ..., a_k, w_1, ..., w_k)``
    with ``a_i >= 0`` summing to one and ``w_i > 0``.
``latitude_circle``
    ``R(t) = 1 - r**2 + r**2 cos(t)``, params ``(r,)`` with ``0 < r < 1``.

A model also carries a time ``scale``: the evaluated covariance is
``R_base(t / scale)``.  :func:`normalize_second_moment` picks the scale that
makes ``-R''(0) = 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import hermite_e

__all__ = [
    "Family",
    "CovarianceModel",
    "IsotropicModel",
    "squared_exponential",
    "cosine_mixture",
    "latitude_circle",
    "evaluate",
    "derivatives",
    "normalize_second_moment",
    "is_monotone_nonincreasing",
    "from_spec",
    "TOL_MONO",
]

TOL_MONO = 1e-12
_NORMALIZED_TOL = 1e-12
_BOUND_TOL = 1e-12
MAX_ORDER = 4


class Family(str, enum.Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    COSINE_MIXTURE = "cosine_mixture"
    LATITUDE_CIRCLE = "latitude_circle"


@dataclass(frozen=True)
class CovarianceModel:
    """Immutable closed-form covariance ``R(t) = R_base(t / scale)``."""

    family: Family
    params: tuple[float, ...]
    scale: float = 1.0
    _check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be positive, got {self.scale}")
        _validate_params(self.family, self.params)
        if self._check:
            t = np.linspace(0.0, 60.0, 6001) * self.scale * self._base_length()
            vals = self(t)
            if np.max(np.abs(vals)) > 1.0 + _BOUND_TOL:
                raise ValueError("covariance exceeds 1 in absolute value")

    # -- family internals, in base time tau = t / scale ----------------------
    def _base_length(self) -> float:
        if self.family is Family.SQUARED_EXPONENTIAL:
            return self.params[0]
        if self.family is Family.COSINE_MIXTURE:
            k = len(self.params) // 2
            return 1.0 / min(self.params[k:])
        return 1.0

    def _base_derivative(self, tau: np.ndarray, order: int) -> np.ndarray:
        fam, p = self.family, self.params
        if fam is Family.SQUARED_EXPONENTIAL:
            ell = p[0]
            s = tau / ell
            coef = np.zeros(order + 1)
            coef[order] = 1.0
            return (-1.0) ** order * ell ** (-order) * hermite_e.hermeval(s, coef) * np.exp(-0.5 * s * s)
        if fam is Family.COSINE_MIXTURE:
            k = len(p) // 2
            out = np.zeros_like(tau)
            for a, w in zip(p[:k], p[k:]):
                out = out + a * w**order * _cos_derivative(w * tau, order)
            return out
        r2 = p[0] ** 2
        tau = np.mod(tau, 2 * np.pi)
        if order == 0:
            return 1.0 - r2 + r2 * np.cos(tau)
        return r2 * _cos_derivative(tau, order)

    def _base_one_minus(self, tau: np.ndarray) -> np.ndarray:
        fam, p = self.family, self.params
        if fam is Family.SQUARED_EXPONENTIAL:
            return -np.expm1(-0.5 * (tau / p[0]) ** 2)
        if fam is Family.COSINE_MIXTURE:
            k = len(p) // 2
            out = np.zeros_like(tau)
            for a, w in zip(p[:k], p[k:]):
                out = out + 2.0 * a * np.sin(0.5 * w * tau) ** 2
            return out
        return 2.0 * p[0] ** 2 * np.sin(0.5 * tau) ** 2

    # -- public surface -------------------------------------------------------
    def __call__(self, t):
        return self.derivative(t, 0)

    def derivative(self, t, order: int):
        if order not in range(MAX_ORDER + 1):
            raise ValueError(f"unsupported derivative order {order}; must be 0..{MAX_ORDER}")
        tau = np.asarray(t, dtype=float) / self.scale
        out = self._base_derivative(tau, order) * self.scale ** (-order)
        return out if out.ndim else float(out)

    def one_minus(self, t):
        """``1 - R(t)`` without cancellation near ``t = 0``."""
        tau = np.asarray(t, dtype=float) / self.scale
        out = self._base_one_minus(tau)
        return out if out.ndim else float(out)

    @property
    def lambda2(self) -> float:
        """Second spectral moment ``-R''(0)``."""
        return -float(self.derivative(0.0, 2))

    @property
    def normalized(self) -> bool:
        return abs(self.lambda2 - 1.0) <= _NORMALIZED_TOL

    def spectral_density(self, k, dim: int = 1):
        """Isotropic spectral density ``S`` with ``R(x) = int S(k) exp(i k.x) dk``.

        Only the squared exponential family has a density in every dimension;
        cosine-type covariances are spectrally discrete.
        """
        if self.family is not Family.SQUARED_EXPONENTIAL:
            raise NotImplementedError(f"{self.family.value} has no spectral density")
        ell = self.params[0] * self.scale
        k = np.asarray(k, dtype=float)
        return ell**dim * (2 * np.pi) ** (-dim / 2) * np.exp(-0.5 * (ell * k) ** 2)

    def to_spec(self) -> dict:
        return {"family": self.family.value, "params": list(self.params), "scale": self.scale}


def _cos_derivative(x: np.ndarray, order: int) -> np.ndarray:
    # explicit sign/phase table; cos(x + k pi/2) loses precision near zeros
    sign, fn = ((1, np.cos), (-1, np.sin), (-1, np.cos), (1, np.sin), (1, np.cos))[order]
    return sign * fn(x)


def _validate_params(family: Family, p: tuple[float, ...]) -> None:
    if family is Family.SQUARED_EXPONENTIAL:
        if len(p) != 1 or not p[0] > 0:
            raise ValueError("squared_exponential takes one positive length-scale")
    elif family is Family.COSINE_MIXTURE:
        if len(p) < 2 or len(p) % 2:
            raise ValueError("cosine_mixture takes weights followed by frequencies")
        k = len(p) // 2
        a, w = np.array(p[:k]), np.array(p[k:])
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
            raise ValueError("cosine_mixture weights must be nonnegative and sum to 1")
        if np.any(w <= 0):
            raise ValueError("cosine_mixture frequencies must be positive")
    elif family is Family.LATITUDE_CIRCLE:
        if len(p) != 1 or not 0 < p[0] < 1:
            raise ValueError("latitude_circle radius must lie in (0, 1)")


def squared_exponential(length_scale: float = 1.0) -> CovarianceModel:
    return CovarianceModel(Family.SQUARED_EXPONENTIAL, (length_scale,))


def cosine_mixture(weights, frequencies) -> CovarianceModel:
    weights, frequencies = list(weights), list(frequencies)
    if len(weights) != len(frequencies):
        raise ValueError("weights and frequencies must have equal length")
    return CovarianceModel(Family.COSINE_MIXTURE, tuple(weights) + tuple(frequencies))


def latitude_circle(radius: float) -> CovarianceModel:
    return CovarianceModel(Family.LATITUDE_CIRCLE, (radius,))


def evaluate(model: CovarianceModel, t):
    """Return ``R(t)``.  Latitude-circle lags are reduced mod ``2 pi``."""
    return model(t)


def derivatives(model: CovarianceModel, t, order: int):
    """Exact analytic derivative ``R^(order)(t)`` for ``order`` in 0..4."""
    return model.derivative(t, order)


def normalize_second_moment(model: CovarianceModel) -> CovarianceModel:
    """Rescale time so that ``-R''(0) = 1``.

    The returned model evaluates ``R(t / sqrt(lambda2))``; its ``scale``
    records the accumulated factor.  Already-normalized models are returned
    unchanged, which makes the operation idempotent.
    """
    if model.normalized:
        return model
    lam = model.lambda2
    if not lam > 0:
        raise ValueError(f"degenerate covariance: -R''(0) = {lam} must be positive")
    return replace(model, scale=model.scale * math.sqrt(lam), _check=False)


def is_monotone_nonincreasing(model: CovarianceModel, t_max: float, grid_n: int = 4096) -> bool:
    """True iff ``R'(t) <= TOL_MONO`` at every grid point of ``(0, t_max]``."""
    if grid_n < 1000:
        raise ValueError("grid_n must be at least 1000")
    t = np.linspace(0.0, t_max, grid_n + 1)[1:]
    return bool(np.all(model.derivative(t, 1) <= TOL_MONO))


@dataclass(frozen=True)
class IsotropicModel:
    """Isotropic field on R^m whose covariance is ``radial(||x||)``."""

    radial: CovarianceModel
    dimension: int = 2
    monotone_t_max: float = 50.0

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.radial(np.linalg.norm(x, axis=-1))

    @property
    def coordinate_derivative_variance(self) -> float:
        # Var(d f / d x_1) = -R''(0) for a radial covariance
        return self.radial.lambda2

    @property
    def monotone(self) -> bool:
        t_max = self.monotone_t_max * self.radial.scale * self.radial._base_length()
        return is_monotone_nonincreasing(self.radial, t_max, 20000)

    def normalized(self) -> "IsotropicModel":
        return replace(self, radial=normalize_second_moment(self.radial))


def from_spec(family: str, params, normalize: bool = False) -> CovarianceModel:
    """Build a model from the config-file triple ``(family, params, normalize)``."""
    try:
        fam = Family(family)
    except ValueError:
        raise ValueError(f"unknown covariance family {family!r}") from None
    model = CovarianceModel(fam, tuple(params))
    return normalize_second_moment(model) if normalize else model
