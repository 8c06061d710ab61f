"""Mode-wise solution operator of the linear damped Klein-Gordon equation.

Each Fourier mode obeys  u'' + 2a u' + (w + m^2) u = 0  with ``w = |xi|^(2 sigma)``.
With roots ``lam = -a +/- delta``, ``delta = sqrt(a^2 - m^2 - w)``, the
fundamental solutions are

    K2(t) = (e^{lam+ t} - e^{lam- t}) / (lam+ - lam-)      K2(0) = 0, K2'(0) = 1
    K1(t) = (lam+ e^{lam- t} - lam- e^{lam+ t}) / (lam+ - lam-)   K1(0) = 1, K1'(0) = 0

They are evaluated as ``K2 = e^{lam+ t} D`` with ``D = (1 - e^{-2 delta t}) / (2 delta)``
so that nothing cancels or overflows near the double root or for large t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ModelParams, linear_decay_rate
from .spectral import Field, GridMismatch, TorusGrid, sobolev_norm

DEGENERATE_TOL = 1e-8
SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class CharRoots:
    lambda_plus: np.ndarray
    lambda_minus: np.ndarray
    discriminant: np.ndarray
    degenerate: np.ndarray
    a: float
    stiffness: np.ndarray  # m^2 + |xi|^(2 sigma)
    delta: np.ndarray  # sqrt(a^2 - stiffness), zero on degenerate modes


def characteristic_roots(params: ModelParams, xi2sigma) -> CharRoots:
    """Roots of lam^2 + 2 a lam + (m^2 + xi2sigma) = 0."""
    w = np.asarray(xi2sigma, dtype=float)
    if np.any(w < 0):
        raise ValueError("xi2sigma must be nonnegative")
    a, m = params.a, params.m
    disc = a * a - m * m - w
    degenerate = np.abs(disc) <= DEGENERATE_TOL * a * a
    delta = np.sqrt(disc.astype(complex))
    delta = np.where(degenerate, 0.0, delta)
    stiffness = m * m + w
    # slow real root via Vieta; -a + delta cancels when stiffness << a^2
    lam_plus = np.where(disc > 0, -stiffness / (a + delta), -a + delta)
    return CharRoots(
        lambda_plus=lam_plus,
        lambda_minus=-a - delta,
        discriminant=disc,
        degenerate=degenerate,
        a=a,
        stiffness=stiffness,
        delta=delta,
    )


def _sinh_ratio(delta: np.ndarray, t: float) -> np.ndarray:
    """(1 - exp(-2 delta t)) / (2 delta), with its Taylor series near delta t = 0."""
    z = delta * t
    small = np.abs(z) < SERIES_CUTOFF
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = -np.expm1(-2 * z) / (2 * delta)
    series = t * (1 - z + (2.0 / 3.0) * z**2 - z**3 / 3.0)
    return np.where(small, series, direct)


def kernel_multipliers(roots: CharRoots, t: float):
    """(K1, K2, dK1/dt, dK2/dt) at time ``t`` for every mode in ``roots``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    delta = roots.delta
    e_plus = np.exp(roots.lambda_plus * t)
    k2 = e_plus * _sinh_ratio(delta, t)
    c = e_plus * (1 + np.exp(-2 * delta * t)) / 2  # e^{-at} cosh(delta t)
    k1 = c + roots.a * k2
    dk2 = c - roots.a * k2
    dk1 = -roots.stiffness * k2
    return k1.real, k2.real, dk1.real, dk2.real


def grid_roots(grid: TorusGrid, params: ModelParams) -> CharRoots:
    return characteristic_roots(params, grid.symbol(2 * params.sigma))


@dataclass(frozen=True)
class PropagatorTable:
    """Kernel multipliers over all modes of ``grid`` at the fixed step ``dt``."""

    grid: TorusGrid
    dt: float
    k1: np.ndarray
    k2: np.ndarray
    dk1: np.ndarray
    dk2: np.ndarray

    @classmethod
    def build(cls, grid: TorusGrid, params: ModelParams, dt: float) -> "PropagatorTable":
        k1, k2, dk1, dk2 = kernel_multipliers(grid_roots(grid, params), dt)
        for arr in (k1, k2, dk1, dk2):
            arr.setflags(write=False)
        return cls(grid, dt, k1, k2, dk1, dk2)

    def advance(self, uh: np.ndarray, vh: np.ndarray):
        return self.k1 * uh + self.k2 * vh, self.dk1 * uh + self.dk2 * vh


def linear_evolve(u0: Field, u1: Field, t: float, params: ModelParams):
    """Exact solution of the linear problem at time ``t``; returns (u, u_t)."""
    if u0.grid != u1.grid:
        raise GridMismatch("u0 and u1 live on different grids")
    grid = u0.grid
    k1, k2, dk1, dk2 = kernel_multipliers(grid_roots(grid, params), t)
    a0, a1 = u0.spectral, u1.spectral
    return (
        Field(grid, spectral=k1 * a0 + k2 * a1),
        Field(grid, spectral=dk1 * a0 + dk2 * a1),
    )


def verify_lemma21(params: ModelParams, u0: Field, u1: Field, k: float, j: int, times):
    """Ratio e^{rate t} ||d_t^j u(t)||_{H^{2k}} / data norm along ``times``.

    The data norm is ``||u0||_{H^{2k + j sigma}} + ||u1||_{H^{max(2k + (j-1) sigma, 0)}}``.
    Returns ``None`` for zero data.
    """
    if j not in (0, 1):
        raise ValueError("only j in {0, 1} is supported")
    sigma = params.sigma
    data = sobolev_norm(u0, 2 * k + j * sigma) + sobolev_norm(
        u1, max(2 * k + (j - 1) * sigma, 0.0)
    )
    if data == 0:
        return None
    rate = linear_decay_rate(params.a, params.m)
    roots = grid_roots(u0.grid, params)
    a0, a1 = u0.spectral, u1.spectral
    out = []
    for t in times:
        k1, k2, dk1, dk2 = kernel_multipliers(roots, float(t))
        coeff = k1 * a0 + k2 * a1 if j == 0 else dk1 * a0 + dk2 * a1
        norm = sobolev_norm(Field(u0.grid, spectral=coeff), 2 * k)
        out.append(np.exp(rate * t) * norm / data)
    return np.array(out)
