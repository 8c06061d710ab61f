"""Periodic torus discretization and Fourier multipliers.

R^n is replaced by the torus [-L/2, L/2)^n sampled on N points per axis.
Spectral coefficients use the unitary ("ortho") FFT normalization, so the
discrete L2 norm sqrt(sum |f|^2 dx^n) equals sqrt(sum |f_hat|^2 dx^n).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_POINT_BUDGET = 2**22


class GridMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TorusGrid:
    n: int
    L: float
    N: int
    point_budget: int = field(default=DEFAULT_POINT_BUDGET, compare=False)

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.n}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.N**self.n > self.point_budget:
            raise ValueError(
                f"N^n = {self.N ** self.n} exceeds point budget {self.point_budget}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n

    @property
    def volume(self) -> float:
        return self.L**self.n

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.L / 2 + self.dx * np.arange(self.N)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.n), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers 2 pi k / L in FFT ordering."""
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @cached_property
    def xi2(self) -> np.ndarray:
        """|xi|^2 on the full spectral array."""
        k = self.wavenumbers
        out = np.zeros(self.shape)
        for ax in range(self.n):
            shape = [1] * self.n
            shape[ax] = self.N
            out = out + (k**2).reshape(shape)
        return out

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    def symbol(self, power: float) -> np.ndarray:
        """|xi|^power with the zero mode set to zero."""
        out = np.zeros(self.shape)
        nz = self.xi2 > 0
        out[nz] = self.xi2[nz] ** (power / 2)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k_i| < N/3 on every axis."""
        k = np.abs(np.fft.fftfreq(self.N, d=1.0 / self.N))
        keep = k < self.N / 3
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.n):
            shape = [1] * self.n
            shape[ax] = self.N
            mask = mask & keep.reshape(shape)
        return mask

    def as_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "N": self.N}


def fft(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values, norm="ortho")


def ifft(coeffs: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(coeffs, norm="ortho")


class Field:
    """Scalar field on a torus grid with lazily paired representations.

    Treat instances as immutable; operations return new fields.
    """

    __slots__ = ("grid", "_phys", "_spec")

    def __init__(self, grid: TorusGrid, physical=None, spectral=None):
        if physical is None and spectral is None:
            raise ValueError("a field needs a physical or spectral representation")
        for arr in (physical, spectral):
            if arr is not None and arr.shape != grid.shape:
                raise GridMismatch(f"array shape {arr.shape} != grid shape {grid.shape}")
        self.grid = grid
        self._phys = None if physical is None else np.asarray(physical, dtype=float)
        self._spec = None if spectral is None else np.asarray(spectral, dtype=complex)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "Field":
        return cls(grid, physical=np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: TorusGrid, func) -> "Field":
        return cls(grid, physical=func(*grid.coords))

    @property
    def has_physical(self) -> bool:
        return self._phys is not None

    @property
    def has_spectral(self) -> bool:
        return self._spec is not None

    @property
    def physical(self) -> np.ndarray:
        if self._phys is None:
            self._phys = _real_part(ifft(self._spec))
        return self._phys

    @property
    def spectral(self) -> np.ndarray:
        if self._spec is None:
            self._spec = fft(self._phys)
        return self._spec

    def __add__(self, other: "Field") -> "Field":
        _check_grid(self, other)
        return Field(self.grid, physical=self.physical + other.physical)

    def __sub__(self, other: "Field") -> "Field":
        _check_grid(self, other)
        return Field(self.grid, physical=self.physical - other.physical)

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, physical=c * self.physical)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Field(grid={self.grid!r})"


def _check_grid(*fields: Field) -> None:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridMismatch(f"grid {f.grid} does not match {g}")


def _real_part(values: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    scale = np.max(np.abs(values)) if values.size else 0.0
    resid = np.max(np.abs(values.imag)) if values.size else 0.0
    if resid > rtol * max(scale, np.finfo(float).tiny):
        raise ValueError(f"non-Hermitian spectrum: imaginary residue {resid:.3e}")
    return values.real.copy()


def to_spectral(f: Field) -> Field:
    return Field(f.grid, physical=f._phys, spectral=f.spectral)


def to_physical(f: Field) -> Field:
    return Field(f.grid, physical=f.physical, spectral=f._spec)


def apply_multiplier(f: Field, symbol: np.ndarray) -> Field:
    return Field(f.grid, spectral=f.spectral * symbol)


def fractional_laplacian(f: Field, sigma: float) -> Field:
    """(-Delta)^sigma, the multiplier |xi|^(2 sigma)."""
    return apply_multiplier(f, f.grid.symbol(2 * sigma))


def half_power_laplacian(f: Field, sigma: float) -> Field:
    """(-Delta)^(sigma/2), the multiplier |xi|^sigma."""
    return apply_multiplier(f, f.grid.symbol(sigma))


def l2_norm(f: Field) -> float:
    if f.has_physical:
        values = f.physical
    else:
        values = f.spectral
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * f.grid.cell_volume))


def spectral_l2_norm(f: Field) -> float:
    return spectral_norm(f.spectral, f.grid)


def spectral_norm(coeffs: np.ndarray, grid: TorusGrid, weight=None) -> float:
    """sqrt(sum |w c|^2 dx^n) for raw spectral coefficients."""
    c = coeffs if weight is None else coeffs * weight
    return float(np.sqrt(np.sum(np.abs(c) ** 2) * grid.cell_volume))


def sobolev_weight(grid: TorusGrid, s: float) -> np.ndarray:
    """Bessel-potential weight (1 + |xi|^2)^(s/2)."""
    return (1.0 + grid.xi2) ** (s / 2)


def sobolev_norm(f: Field, s: float) -> float:
    """H^s norm ||(1 + |xi|^2)^(s/2) f_hat||."""
    return spectral_norm(f.spectral, f.grid, sobolev_weight(f.grid, s))


def lq_norm(f: Field, q: float) -> float:
    if q < 1:
        raise ValueError("q must be >= 1")
    vals = np.abs(f.physical)
    vmax = vals.max()
    if vmax == 0:
        return 0.0
    # scaled to avoid overflow for large q
    return float(vmax * (np.sum((vals / vmax) ** q) * f.grid.cell_volume) ** (1.0 / q))


def dealias(coeffs: np.ndarray, grid: TorusGrid) -> np.ndarray:
    return np.where(grid.dealias_mask, coeffs, 0.0)


def power_abs_values(values: np.ndarray, p: float, grid: TorusGrid) -> np.ndarray:
    """Dealiased |f|^p for a raw physical array; returns a physical array."""
    g = np.abs(values) ** p
    return ifft(dealias(fft(g), grid)).real


def pointwise_power_abs(f: Field, p: float) -> Field:
    """|f|^p evaluated pointwise, then truncated by the 2/3 rule."""
    g = np.abs(f.physical) ** p
    return Field(f.grid, spectral=dealias(fft(g), f.grid))
