"""Product-integration quadrature for the weakly singular memory term

    F(t) = int_0^t (t - s)^(-gamma) g(s) ds,   0 < gamma < 1.

``g`` is replaced by its piecewise-linear interpolant on the time nodes and the
kernel is integrated exactly against each hat function.
"""

from __future__ import annotations

from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import beta as beta_fn

DEFAULT_MAX_VALUES = 2**26
NEAR_CELLS = 4.0
_GAUSS = np.polynomial.legendre.leggauss(10)


class MemoryBudgetExceeded(MemoryError):
    pass


class MissingSamples(IndexError):
    pass


def _check_gamma(gamma: float) -> None:
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


def hat_weights(gamma: float, nodes: np.ndarray) -> np.ndarray:
    """Weights w_k with int_0^t (t-s)^-gamma g(s) ds = sum_k w_k g(nodes[k]), t = nodes[-1].

    Exact for ``g`` piecewise linear on ``nodes`` (which need not be uniform).
    """
    _check_gamma(gamma)
    s = np.asarray(nodes, dtype=float)
    w = np.zeros(s.size)
    if s.size < 2:
        return w
    t = s[-1]
    h = np.diff(s)
    r_lo = t - s[1:]
    r_hi = t - s[:-1]
    left = np.empty(h.size)  # weight on the cell's left node
    right = np.empty(h.size)

    # closed form near the singularity; cancels badly once r_lo >> h
    near = r_lo < NEAR_CELLS * h
    a1, a2 = 1.0 - gamma, 2.0 - gamma
    lo, hi, hn = r_lo[near], r_hi[near], h[near]
    p0 = (hi**a1 - lo**a1) / a1  # int r^-gamma dr
    p1 = (hi**a2 - lo**a2) / a2  # int r^(1-gamma) dr
    left[near] = (p1 - lo * p0) / hn
    right[near] = (hi * p0 - p1) / hn

    far = ~near
    if np.any(far):
        lo, hn = r_lo[far], h[far]
        x, wq = _GAUSS
        frac = (x + 1) / 2  # position from r_lo, as a fraction of h
        r = lo[:, None] + hn[:, None] * frac[None, :]
        kern = r**-gamma * (wq / 2)[None, :]
        left[far] = hn * (kern @ frac)
        right[far] = hn * (kern @ (1 - frac))

    w[:-1] += left
    w[1:] += right
    return w


def product_integration_weights(gamma: float, dt: float, j: int) -> np.ndarray:
    """Weights w_{j,0..j} on the uniform grid t_k = k dt, by direct cell integration."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if j < 1:
        raise ValueError("j must be >= 1")
    return hat_weights(gamma, dt * np.arange(j + 1))


class StationaryWeights:
    """Uniform-grid weights in the translation-invariant form.

    ``w_{j,k} = interior[j-k]`` for ``1 <= k <= j`` and ``w_{j,0} = start[j]``.
    """

    def __init__(self, gamma: float, dt: float, size: int = 0):
        _check_gamma(gamma)
        self.gamma = gamma
        self.dt = dt
        self.interior = np.zeros(0)
        self.start = np.zeros(0)
        self.ensure(size)

    def ensure(self, size: int) -> None:
        if size < self.interior.size:
            return
        size = max(size + 1, 2 * self.interior.size, 16)
        alpha = 2.0 - self.gamma
        c = self.dt ** (1.0 - self.gamma) / ((1.0 - self.gamma) * alpha)
        n = np.arange(size, dtype=float)
        interior = np.empty(size)
        interior[0] = c
        nn = n[1:]
        with np.errstate(divide="ignore"):
            # second difference of n^alpha without cancellation
            interior[1:] = c * nn**alpha * (
                np.expm1(alpha * np.log1p(1.0 / nn)) + np.expm1(alpha * np.log1p(-1.0 / nn))
            )
            start = np.zeros(size)
            start[1:] = c * nn**alpha * (np.expm1(alpha * np.log1p(-1.0 / nn)) + alpha / nn)
        self.interior = interior
        self.start = start

    def row(self, j: int) -> np.ndarray:
        if j < 1:
            return np.zeros(max(j + 1, 1))
        self.ensure(j)
        w = np.empty(j + 1)
        w[0] = self.start[j]
        w[1:] = self.interior[:j][::-1]
        return w


class MemoryHistory:
    """Stored samples g_j = g(j dt) and their memory integrals.

    ``max_values`` caps samples * points; exceeding it raises
    ``MemoryBudgetExceeded``.
    """

    def __init__(self, gamma: float, dt: float, max_values: int = DEFAULT_MAX_VALUES):
        _check_gamma(gamma)
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.gamma = gamma
        self.dt = dt
        self.max_values = max_values
        self.weights = StationaryWeights(gamma, dt)
        self._data: np.ndarray | None = None
        self._len = 0

    def __len__(self) -> int:
        return self._len

    @property
    def samples(self) -> np.ndarray:
        if self._data is None:
            return np.zeros((0,))
        return self._data[: self._len]

    def append(self, g: np.ndarray) -> None:
        g = np.asarray(g, dtype=float)
        if self._data is None:
            self._data = np.empty((16,) + g.shape)
        elif g.shape != self._data.shape[1:]:
            raise ValueError(f"sample shape {g.shape} != {self._data.shape[1:]}")
        if (self._len + 1) * g.size > self.max_values:
            raise MemoryBudgetExceeded(
                f"memory history would hold {(self._len + 1) * g.size} values "
                f"(cap {self.max_values}); reduce the horizon T or the resolution N"
            )
        if self._len == self._data.shape[0]:
            cap = min(2 * self._len, max(self.max_values // g.size, self._len + 1))
            grown = np.empty((cap,) + g.shape)
            grown[: self._len] = self._data[: self._len]
            self._data = grown
        self._data[self._len] = g
        self._len += 1

    def replace_last(self, g: np.ndarray) -> None:
        """Overwrite the newest sample (predictor-corrector refinement)."""
        if self._len == 0:
            raise MissingSamples("history is empty")
        self._data[self._len - 1] = g

    def evaluate(self, j: int) -> np.ndarray:
        """sum_k w_{j,k} g_k using samples 0..j."""
        if j < 0 or j >= self._len:
            raise MissingSamples(f"need samples 0..{j}, have {self._len}")
        if j == 0:
            return np.zeros(self._data.shape[1:])
        w = self.weights.row(j)
        flat = self._data[: j + 1].reshape(j + 1, -1)
        return (w @ flat).reshape(self._data.shape[1:])


def evaluate_memory_integral(history: MemoryHistory, j: int) -> np.ndarray:
    return history.evaluate(j)


def fractional_integral_monomial(gamma: float, k: float, t):
    """int_0^t (t-s)^-gamma s^k ds = B(1-gamma, k+1) t^(k+1-gamma)."""
    return beta_fn(1.0 - gamma, k + 1.0) * np.asarray(t, dtype=float) ** (k + 1.0 - gamma)


class OrderProbe(NamedTuple):
    order: float  # nan when every error is at rounding level
    residual: float
    errors: np.ndarray
    dts: np.ndarray
    exact: bool


def convergence_order_probe(
    gamma: float,
    g: Callable[[np.ndarray], np.ndarray],
    exact: float,
    dts: Sequence[float],
    t_end: float = 1.0,
    rounding: float = 1e-13,
) -> OrderProbe:
    """Observed order of the uniform-grid quadrature at ``t_end``.

    ``exact`` is the true value of the integral at ``t_end``.  The order is the
    least-squares slope of log(error) against log(dt).
    """
    dts = np.asarray(dts, dtype=float)
    errors = []
    for dt in dts:
        j = int(round(t_end / dt))
        if not np.isclose(j * dt, t_end, rtol=1e-12, atol=0):
            raise ValueError(f"dt={dt} does not divide t_end={t_end}")
        w = StationaryWeights(gamma, dt).row(j)
        errors.append(abs(w @ g(dt * np.arange(j + 1)) - exact))
    errors = np.array(errors)
    scale = max(abs(exact), 1.0)
    if np.all(errors <= rounding * scale):
        return OrderProbe(float("nan"), 0.0, errors, dts, True)
    x, y = np.log(dts), np.log(np.maximum(errors, np.finfo(float).tiny))
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(np.sqrt(res[0] / len(x))) if res.size else 0.0
    return OrderProbe(float(coef[0]), residual, errors, dts, False)
