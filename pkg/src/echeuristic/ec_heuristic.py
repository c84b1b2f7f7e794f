"""Expected Euler characteristic approximation and the finite-KL error bound.

The approximation to ``P(sup_M f >= u)`` for a unit-variance Gaussian field
is ``sum_j L_j(M) rho_j(u)`` where ``L_j`` are the Lipschitz-Killing
curvatures of ``M`` in the metric induced by the field and ``rho_j`` the EC
densities.  Hermite polynomials follow the probabilists' convention.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy import special

__all__ = [
    "Shape",
    "ParameterSpace",
    "EcApproximation",
    "gaussian_tail",
    "hermite",
    "ec_density",
    "lk_curvatures",
    "ec_approximation",
    "finite_kl_bound",
    "interval",
    "box",
    "convex_planar",
]


class Shape(str, enum.Enum):
    INTERVAL = "interval"
    BOX = "box"
    CONVEX = "convex"


@dataclass(frozen=True)
class ParameterSpace:
    """An interval ``[0, T]``, a box, or a planar convex body.

    ``dims`` holds ``(T,)`` for an interval, the side lengths for a box and
    ``(area, perimeter)`` for a convex body.  ``lambda2`` is the second
    spectral moment of the (unnormalized) covariance; lengths are converted
    to the induced metric by ``metric_scale = sqrt(lambda2)``.
    """

    shape: Shape
    dims: tuple[float, ...]
    lambda2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shape", Shape(self.shape))
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))
        if not self.lambda2 > 0:
            raise ValueError("lambda2 must be positive")
        if not self.dims or any(not d > 0 for d in self.dims):
            raise ValueError("all lengths must be positive")
        if self.shape is Shape.INTERVAL and len(self.dims) != 1:
            raise ValueError("interval takes a single length T")
        if self.shape is Shape.CONVEX:
            if len(self.dims) != 2:
                raise ValueError("convex body takes (area, perimeter)")
            area, perim = self.dims
            # isoperimetric inequality
            if perim**2 < 4 * np.pi * area * (1 - 1e-12):
                raise ValueError("area and perimeter violate the isoperimetric inequality")

    @property
    def metric_scale(self) -> float:
        return math.sqrt(self.lambda2)

    @property
    def dim(self) -> int:
        if self.shape is Shape.INTERVAL:
            return 1
        if self.shape is Shape.BOX:
            return len(self.dims)
        return 2


def interval(T: float, lambda2: float = 1.0) -> ParameterSpace:
    return ParameterSpace(Shape.INTERVAL, (T,), lambda2)


def box(*sides: float, lambda2: float = 1.0) -> ParameterSpace:
    return ParameterSpace(Shape.BOX, sides, lambda2)


def convex_planar(area: float, perimeter: float, lambda2: float = 1.0) -> ParameterSpace:
    return ParameterSpace(Shape.CONVEX, (area, perimeter), lambda2)


@dataclass(frozen=True)
class EcApproximation:
    u: float
    terms: tuple[float, ...]

    @property
    def total(self) -> float:
        return float(math.fsum(self.terms))


def gaussian_tail(u):
    """Standard normal upper tail ``Q(u)`` via ``erfc``."""
    return 0.5 * special.erfc(np.asarray(u, dtype=float) / math.sqrt(2.0))


def hermite(j: int, x):
    """Probabilists' Hermite polynomial ``He_j(x)`` by three-term recurrence."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), x.copy()
    if j == 0:
        return prev if prev.ndim else float(prev)
    for k in range(1, j):
        prev, cur = cur, x * cur - k * prev
    return cur if cur.ndim else float(cur)


def ec_density(j: int, u):
    """``(2 pi)^(-(j+1)/2) int_u^inf He_j(r) exp(-r^2/2) dr`` in closed form.

    Uses ``d/dr [He_{j-1}(r) e^{-r^2/2}] = -He_j(r) e^{-r^2/2}``.
    """
    if j < 0:
        raise ValueError("j must be nonnegative")
    u = np.asarray(u, dtype=float)
    if j == 0:
        out = gaussian_tail(u)
    else:
        out = (2 * np.pi) ** (-(j + 1) / 2) * hermite(j - 1, u) * np.exp(-0.5 * u * u)
    return out if np.ndim(out) else float(out)


def lk_curvatures(space: ParameterSpace) -> np.ndarray:
    """Lipschitz-Killing curvatures ``(L_0, ..., L_dim)`` in the induced metric."""
    s = space.metric_scale
    if space.shape is Shape.INTERVAL:
        return np.array([1.0, s * space.dims[0]])
    if space.shape is Shape.CONVEX:
        area, perim = space.dims
        return np.array([1.0, s * perim / 2, s * s * area])
    sides = space.dims
    # L_j of a box is the j-th elementary symmetric polynomial of its sides
    out = [1.0]
    for j in range(1, len(sides) + 1):
        e_j = math.fsum(math.prod(c) for c in combinations(sides, j))
        out.append(s**j * e_j)
    return np.array(out)


def ec_approximation(space: ParameterSpace, u: float) -> EcApproximation:
    """Per-term breakdown and total of the expected-EC approximation at ``u``."""
    lk = lk_curvatures(space)
    terms = tuple(float(L * ec_density(j, u)) for j, L in enumerate(lk))
    return EcApproximation(float(u), terms)


def finite_kl_bound(n: int, theta_c: float, u: float, C: float = 1.0) -> float:
    """``C * P(chi2_n >= u^2 / cos^2 theta_c)``.

    ``C`` is not determined analytically; the default of 1 is a placeholder,
    not a known value.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= theta_c < np.pi / 2:
        raise ValueError(f"theta_c must lie in [0, pi/2), got {theta_c}")
    if not C > 0:
        raise ValueError("C must be positive")
    if u < 0:
        raise ValueError("u must be nonnegative")
    x = u * u / math.cos(theta_c) ** 2
    return float(C * special.gammaincc(n / 2, x / 2))
