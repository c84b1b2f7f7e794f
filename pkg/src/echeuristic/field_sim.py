"""Seeded simulation of smooth Gaussian fields and excursion-set Euler characteristics.

1D stationary processes are sampled exactly on a grid by circulant embedding.
The circulant eigenvalues of smooth covariances are negligible outside a few
low frequencies, so paths are synthesized from the active modes only (a
small real matrix product per chunk); a full FFT route is used when the
active set is large.  2D isotropic fields are sampled on a padded torus from
the radial spectral density, evaluated directly on the box grid.

Randomness is organized in fixed-size chunks.  Chunk ``c`` draws from its own
PCG64 stream seeded by ``SeedSequence(master_seed, spawn_key=(c,))``, so a
run is a pure function of the sampler configuration and the master seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy import fft as sp_fft

from .covariance import CovarianceModel, IsotropicModel

__all__ = [
    "SamplerError",
    "GridSampler1D",
    "GridSampler2D",
    "Realization",
    "build_sampler_1d",
    "build_sampler_2d",
    "chunk_rng",
    "sample",
    "sample_chunks",
    "excursion_ec_1d",
    "excursion_ec_1d_cyclic",
    "excursion_ec_2d",
    "sup_on_grid",
    "TOL_PSD",
    "MAX_CLAMPED_MASS",
    "CHUNK_SIZE",
]

TOL_PSD = 1e-12
MAX_CLAMPED_MASS = 1e-6
MODE_DROP_TOL = 1e-15
COV_CHECK_TOL = 1e-8
CHUNK_SIZE = 1024
CHUNK_SIZE_2D = 16


class SamplerError(RuntimeError):
    """Sampler construction failed; ``diagnostics`` holds the details."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def chunk_rng(master_seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=(int(chunk_index),))))


@dataclass(frozen=True)
class Realization:
    values: np.ndarray
    master_seed: int
    chunk: int
    index: int

    @property
    def lineage(self) -> tuple[int, int, int]:
        return (self.master_seed, self.chunk, self.index)


# -- 1D circulant embedding ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridSampler1D:
    covariance: CovarianceModel
    T: float
    n_grid: int
    pad_factor: int
    spectrum: np.ndarray = field(repr=False)
    clamped_mass: float = 0.0
    dropped_mass: float = 0.0
    chunk_size: int = CHUNK_SIZE
    _basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.T / (self.n_grid - 1)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_grid)

    @property
    def n_embed(self) -> int:
        return self.spectrum.size

    @property
    def route(self) -> str:
        return "modes" if self._basis is not None else "fft"

    @property
    def n_modes(self) -> int:
        return self._basis.shape[0] if self._basis is not None else self.n_embed

    def embedded_covariance(self, lags: int = 16) -> np.ndarray:
        """Covariance at lags ``0..lags-1`` implied by the synthesized spectrum."""
        lam = self._synth_spectrum()
        c = np.real(sp_fft.ifft(lam))
        return c[:lags]

    def _synth_spectrum(self) -> np.ndarray:
        lam = np.maximum(self.spectrum, 0.0)
        if self._basis is not None:
            lam = np.where(lam > MODE_DROP_TOL * lam.max(), lam, 0.0)
        return lam

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` paths as an ``(n, n_grid)`` array from ``rng``."""
        if self._basis is not None:
            z = rng.standard_normal((n, self._basis.shape[0]))
            return z @ self._basis
        N = self.n_embed
        m = (n + 1) // 2
        z = rng.standard_normal((m, N)) + 1j * rng.standard_normal((m, N))
        y = sp_fft.fft(z * np.sqrt(np.maximum(self.spectrum, 0.0) / N), axis=1)[:, : self.n_grid]
        return np.concatenate([y.real, y.imag], axis=0)[:n] if m else np.empty((0, self.n_grid))


def _circulant_spectrum(model: CovarianceModel, h: float, N: int) -> np.ndarray:
    k = np.arange(N)
    c = model(h * np.minimum(k, N - k))
    return np.real(sp_fft.fft(c))


def _mode_basis(lam: np.ndarray, n_grid: int) -> np.ndarray:
    N = lam.size
    keep = lam > MODE_DROP_TOL * lam.max()
    j = np.arange(n_grid)
    rows = []
    for k in np.flatnonzero(keep[: N // 2 + 1]):
        edge = k == 0 or 2 * k == N
        w = math.sqrt((1.0 if edge else 2.0) * lam[k] / N)
        theta = 2 * np.pi * k * j / N
        rows.append(w * np.cos(theta))
        if not edge:
            rows.append(w * np.sin(theta))
    return np.array(rows)


def build_sampler_1d(
    model: CovarianceModel,
    T: float,
    n_grid: int,
    pad_factor: int = 4,
    *,
    retries: int = 3,
    route: str = "auto",
    chunk_size: int = CHUNK_SIZE,
) -> GridSampler1D:
    """Circulant-embedding sampler for ``model`` on ``n_grid`` points of ``[0, T]``.

    The embedding circle has ``pad_factor * (n_grid - 1)`` points.  If its
    spectrum has eigenvalues below ``-TOL_PSD * max``, the padding is doubled
    up to ``retries`` times; remaining negative eigenvalues are clamped to 0
    and the construction fails when the clamped mass exceeds
    ``MAX_CLAMPED_MASS`` of the total.
    """
    if n_grid < 1024 or n_grid & (n_grid - 1):
        raise ValueError(f"n_grid must be a power of two >= 1024, got {n_grid}")
    if pad_factor < 2:
        raise ValueError("pad_factor must be >= 2")
    if not T > 0:
        raise ValueError("T must be positive")
    h = T / (n_grid - 1)
    pad = pad_factor
    for attempt in range(retries + 1):
        lam = _circulant_spectrum(model, h, pad * (n_grid - 1))
        if lam.min() >= -TOL_PSD * lam.max() or attempt == retries:
            break
        pad *= 2
    # eigenvalues within TOL_PSD of zero are roundoff, not clamped mass
    neg = lam[lam < -TOL_PSD * lam.max()]
    clamped = float(np.abs(neg).sum() / np.maximum(lam, 0.0).sum())
    diag = {"pad_factor": pad, "min_eigenvalue": float(lam.min()), "max_eigenvalue": float(lam.max()),
            "clamped_mass": clamped}
    if clamped > MAX_CLAMPED_MASS:
        raise SamplerError(f"circulant embedding not nonnegative definite: clamped mass {clamped:.3e}", diag)

    lam_pos = np.maximum(lam, 0.0)
    basis = None
    dropped = 0.0
    if route in ("auto", "modes"):
        candidate = _mode_basis(lam_pos, n_grid)
        if route == "modes" or candidate.shape[0] <= n_grid // 2:
            basis = candidate
            dropped = float(lam_pos[lam_pos <= MODE_DROP_TOL * lam_pos.max()].sum() / lam_pos.sum())
    elif route != "fft":
        raise ValueError(f"unknown route {route!r}")

    sampler = GridSampler1D(model, float(T), n_grid, pad, lam, clamped, dropped, chunk_size, basis)
    target = model(h * np.arange(16))
    err = float(np.max(np.abs(sampler.embedded_covariance(16) - target)))
    if err > COV_CHECK_TOL:
        diag["covariance_error"] = err
        raise SamplerError(f"embedded covariance misses target by {err:.3e}", diag)
    return sampler


# -- 2D torus-spectral sampling ------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridSampler2D:
    isotropic: IsotropicModel
    box: tuple[float, float]
    n_x: int
    n_y: int
    pad_factor: int
    weights: np.ndarray = field(repr=False)
    ex: np.ndarray = field(repr=False)
    ey: np.ndarray = field(repr=False)
    variance_bias: float = 0.0
    chunk_size: int = CHUNK_SIZE_2D

    @property
    def marginal_variance(self) -> float:
        return float(np.sum(self.weights**2))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        kx, ky = self.weights.shape
        z = rng.standard_normal((n, kx, ky)) + 1j * rng.standard_normal((n, kx, ky))
        m = self.ex @ (self.weights * z)
        # one GEMM for all paths: Re(m @ ey.T) = [Re m, Im m] @ [Re ey, -Im ey].T
        stacked = np.concatenate([m.real, m.imag], axis=-1).reshape(n * self.n_x, 2 * ky)
        return (stacked @ self._ey_real_pair).reshape(n, self.n_x, self.n_y)

    @property
    def _ey_real_pair(self) -> np.ndarray:
        return np.concatenate([self.ey.real, -self.ey.imag], axis=1).T


def _torus_frequencies(spec, length: float, other: float, tol: float) -> np.ndarray:
    dk = 2 * np.pi / length
    s0 = spec(0.0)
    j = 0
    while spec(j * dk) > tol * s0:
        j += 1
    return dk * np.arange(-j, j + 1)


def build_sampler_2d(
    model: IsotropicModel,
    box: tuple[float, float],
    n_x: int,
    n_y: int | None = None,
    pad_factor: int = 4,
    *,
    chunk_size: int = CHUNK_SIZE_2D,
) -> GridSampler2D:
    """Torus-spectral sampler for an isotropic field on ``[0, a] x [0, b]``.

    The torus has side lengths ``pad_factor * (a, b)``; its lattice
    frequencies are weighted by the radial spectral density and truncated
    where the density drops below ``1e-16`` of its peak.  The realized
    marginal variance deviates from 1 by the periodization and truncation
    bias, which is recorded and must stay under 1%.
    """
    if model.dimension != 2:
        raise ValueError("2D sampler needs a 2-dimensional isotropic model")
    if pad_factor < 4:
        raise ValueError("pad_factor must be >= 4 for torus sampling")
    n_y = n_x if n_y is None else n_y
    a, b = map(float, box)
    radial = model.radial
    spec = lambda k: float(radial.spectral_density(k, 2))  # noqa: E731
    Lx, Ly = pad_factor * a, pad_factor * b
    kx = _torus_frequencies(spec, Lx, Ly, 1e-16)
    ky = _torus_frequencies(spec, Ly, Lx, 1e-16)
    dens = radial.spectral_density(np.hypot(kx[:, None], ky[None, :]), 2)
    w = np.sqrt(dens * (2 * np.pi / Lx) * (2 * np.pi / Ly))
    var = float(np.sum(w**2))
    bias = var - 1.0
    if abs(bias) > 0.01:
        raise SamplerError(f"torus marginal variance {var:.4f} deviates from 1 by more than 1%",
                           {"variance": var, "Lx": Lx, "Ly": Ly})
    x = np.linspace(0.0, a, n_x)
    y = np.linspace(0.0, b, n_y)
    ex = np.exp(1j * np.outer(x, kx))
    ey = np.exp(1j * np.outer(y, ky))
    return GridSampler2D(model, (a, b), n_x, n_y, pad_factor, w, ex, ey, bias, chunk_size)


# -- streams --------------------------------------------------------------------


def sample_chunks(sampler, n_paths: int, master_seed: int, workers: int = 1) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(chunk_index, paths)`` in chunk order.

    Chunks may be generated concurrently; the output order and content do
    not depend on ``workers``.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    size = sampler.chunk_size
    n_chunks = -(-n_paths // size)

    def make(c):
        n = min(size, n_paths - c * size)
        return c, sampler.draw(chunk_rng(master_seed, c), n)

    if workers <= 1:
        yield from map(make, range(n_chunks))
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # bounded look-ahead keeps memory proportional to the worker count
        pending = []
        for c in range(n_chunks):
            pending.append(pool.submit(make, c))
            if len(pending) > 2 * workers:
                yield pending.pop(0).result()
        for fut in pending:
            yield fut.result()


def sample(sampler, n_paths: int, master_seed: int, workers: int = 1) -> Iterator[Realization]:
    """Stream of ``Realization`` objects ordered by ``(chunk, index)``."""
    for c, paths in sample_chunks(sampler, n_paths, master_seed, workers):
        for i, p in enumerate(paths):
            yield Realization(p, int(master_seed), c, i)


# -- excursion-set functionals ----------------------------------------------------


def _values(r) -> np.ndarray:
    return np.asarray(r.values if isinstance(r, Realization) else r)


def excursion_ec_1d(r, u: float):
    """Number of maximal runs of consecutive grid values ``>= u``.

    Accepts one path or a batch of paths along the last axis.
    """
    x = _values(r)
    above = x >= u
    out = above[..., 0].astype(np.int64) + np.count_nonzero(above[..., 1:] & ~above[..., :-1], axis=-1)
    return int(out) if np.ndim(out) == 0 else out


def excursion_ec_1d_cyclic(r, u: float):
    """EC of the excursion set of a path sampled on a closed curve.

    Values are taken cyclically (no repeated end point).  Arcs count 1 each;
    a path above ``u`` everywhere has the Euler characteristic of a circle, 0.
    """
    x = _values(r)
    above = x >= u
    starts = np.count_nonzero(above & ~np.roll(above, 1, axis=-1), axis=-1)
    return int(starts) if np.ndim(starts) == 0 else starts


def excursion_ec_2d(field_values, u: float):
    """Euler characteristic ``V - E + F`` of the closed cubical excursion complex.

    Vertices are grid points ``>= u``, edges join 4-neighbours that are both
    supra-threshold and squares are grid cells with all four corners
    supra-threshold.  Works on one ``(n_x, n_y)`` field or a batch.
    """
    a = _values(field_values) >= u
    v = np.count_nonzero(a, axis=(-2, -1))
    hx = a[..., 1:, :] & a[..., :-1, :]
    hy = a[..., :, 1:] & a[..., :, :-1]
    e = np.count_nonzero(hx, axis=(-2, -1)) + np.count_nonzero(hy, axis=(-2, -1))
    f = np.count_nonzero(hx[..., :, 1:] & hx[..., :, :-1], axis=(-2, -1))
    out = v - e + f
    return int(out) if np.ndim(out) == 0 else out


def sup_on_grid(r, field_dim: int = 1):
    """Grid maximum over the last ``field_dim`` axes.

    Biased low relative to the continuous supremum, by ``O(h^2)`` for smooth
    paths.
    """
    x = _values(r)
    out = x.max(axis=tuple(range(-field_dim, 0)))
    return float(out) if np.ndim(out) == 0 else out
