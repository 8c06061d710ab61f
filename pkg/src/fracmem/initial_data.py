"""Initial data conventions."""

from __future__ import annotations

import numpy as np

from .spectral import Field, TorusGrid, fft, ifft, l2_norm, sobolev_norm


def data_norm(u0: Field, u1: Field, sigma: float) -> float:
    """||(u0, u1)||_{H^sigma x L^2} = sqrt(||u0||_{H^sigma}^2 + ||u1||_{L^2}^2)."""
    return float(np.hypot(sobolev_norm(u0, sigma), l2_norm(u1)))


def _normalize(u0: Field, u1: Field, sigma: float, epsilon: float):
    norm = data_norm(u0, u1, sigma)
    if epsilon == 0 or norm == 0:
        return Field.zeros(u0.grid), Field.zeros(u0.grid)
    c = epsilon / norm
    return Field(u0.grid, physical=c * u0.physical), Field(u1.grid, physical=c * u1.physical)


def gaussian_data(grid: TorusGrid, sigma: float, epsilon: float):
    """u0 proportional to exp(-|x|^2 / 2), u1 = 0, scaled to data norm ``epsilon``."""
    r2 = sum(x**2 for x in grid.coords)
    u0 = Field(grid, physical=np.exp(-r2 / 2))
    return _normalize(u0, Field.zeros(grid), sigma, epsilon)


def band_limited_field(grid: TorusGrid, rng: np.random.Generator, kmax: int,
                       zero_mean: bool = True) -> Field:
    """Real random trigonometric polynomial with modes |k_i| <= kmax."""
    k = np.abs(np.fft.fftfreq(grid.N, d=1.0 / grid.N))
    mask = np.ones(grid.shape, dtype=bool)
    for ax in range(grid.n):
        shape = [1] * grid.n
        shape[ax] = grid.N
        mask = mask & (k <= kmax).reshape(shape)
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    coeffs = np.where(mask, coeffs, 0.0)
    if zero_mean:
        coeffs[(0,) * grid.n] = 0.0
    # real part of the inverse transform is the Hermitian projection
    values = ifft(coeffs).real
    return Field(grid, physical=values, spectral=fft(values))


def random_data(grid: TorusGrid, sigma: float, epsilon: float, seed: int):
    """Smooth random data: band-limited noise under a Gaussian envelope."""
    rng = np.random.default_rng(seed)
    r2 = sum(x**2 for x in grid.coords)
    envelope = np.exp(-r2 / 2)
    kmax = max(1, grid.N // 16)
    u0 = band_limited_field(grid, rng, kmax, zero_mean=False).physical * envelope
    u1 = band_limited_field(grid, rng, kmax, zero_mean=False).physical * envelope
    return _normalize(Field(grid, physical=u0), Field(grid, physical=u1), sigma, epsilon)


def make_initial_data(kind: str, grid: TorusGrid, sigma: float, epsilon: float, seed: int = 0):
    if kind == "gaussian":
        return gaussian_data(grid, sigma, epsilon)
    if kind == "random":
        return random_data(grid, sigma, epsilon, seed)
    raise ValueError(f"unknown initial data kind {kind!r}")
