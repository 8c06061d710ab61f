"""Model parameters and exponent arithmetic.

The model is

    u_tt + (-Delta)^sigma u + 2 a u_t + m^2 u = int_0^t (t-s)^(-gamma) |u(s)|^p ds

on R^n.  Small-data global existence with (1+t)^(-gamma) decay holds when
``1/gamma < p`` and, for ``n > 2 sigma``, ``p <= n / (n - 2 sigma)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, NamedTuple

REL_TOL = 1e-12


class ParameterError(ValueError):
    """Invalid model parameter; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _exact(x: Any) -> Fraction | None:
    """Exact rational for ints, Fractions and short decimal floats, else None."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float) and math.isfinite(x):
        text = repr(x)
        digits = text.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
        if len(digits) <= 15:
            return Fraction(text)
    return None


def compare(x: Any, y: Any) -> int:
    """Three-way comparison, exact on rationals, relative tolerance otherwise."""
    fx, fy = _exact(x), _exact(y)
    if fx is not None and fy is not None:
        return (fx > fy) - (fx < fy)
    x, y = float(x), float(y)
    if math.isclose(x, y, rel_tol=REL_TOL, abs_tol=0.0):
        return 0
    return 1 if x > y else -1


def _ratio(num: Any, den: Any) -> Fraction | float:
    fn, fd = _exact(num), _exact(den)
    if fn is not None and fd is not None:
        return fn / fd
    return float(num) / float(den)


class AdmissibleRange(NamedTuple):
    """Exponent window ``lower < p <= upper``; ``upper is None`` means unbounded."""

    lower: Fraction | float
    upper: Fraction | float | None
    empty: bool

    def contains(self, p: float) -> bool:
        if self.empty or compare(p, self.lower) <= 0:
            return False
        return self.upper is None or compare(p, self.upper) <= 0

    def __str__(self) -> str:
        if self.empty:
            return "empty"
        hi = "inf)" if self.upper is None else f"{float(self.upper):.6g}]"
        return f"({float(self.lower):.6g}, {hi}"


def admissible_exponent_interval(n: int, sigma: float, gamma: float) -> AdmissibleRange:
    """Range of ``p`` covered by the small-data global existence result."""
    if n < 1:
        raise ParameterError("n", "n must be a positive integer")
    if compare(sigma, 0) <= 0:
        raise ParameterError("sigma", "sigma must be positive")
    if compare(gamma, 0) <= 0 or compare(gamma, 1) >= 0:
        raise ParameterError("gamma", "gamma must lie in (0, 1)")

    inv_gamma = _ratio(1, gamma)
    lower = inv_gamma if compare(inv_gamma, 1) > 0 else Fraction(1)
    two_sigma = _exact(sigma) * 2 if _exact(sigma) is not None else 2.0 * sigma
    if compare(n, two_sigma) <= 0:
        return AdmissibleRange(lower, None, False)

    upper = _ratio(n, n - two_sigma)
    empty = compare(lower, upper) >= 0
    # gamma window form: non-empty iff 1 - 2 sigma / n < gamma
    window_nonempty = compare(1 - _ratio(two_sigma, n), gamma) < 0
    if window_nonempty == empty:
        raise AssertionError(
            f"inconsistent admissibility for n={n}, sigma={sigma}, gamma={gamma}"
        )
    return AdmissibleRange(lower, upper, empty)


def linear_decay_rate(a: float, m: float) -> float:
    """Exponential decay rate ``a - sqrt(max(a^2 - m^2, 0))`` of the linear flow."""
    if m >= a:
        return a
    # conjugate form; a - sqrt(a^2 - m^2) cancels when m << a
    return m * m / (a + math.sqrt((a - m) * (a + m)))


class GNExponent(NamedTuple):
    theta: float
    valid: bool  # theta in [0, 1]


def gn_theta(n: int, sigma: float, q: float) -> GNExponent:
    """Gagliardo-Nirenberg interpolation exponent ``(n/sigma)(1/2 - 1/q)``."""
    if compare(q, 1) <= 0:
        raise ParameterError("q", "q must exceed 1")
    exact = [_exact(v) for v in (n, sigma, q)]
    if all(v is not None for v in exact):
        fn, fs, fq = exact
        theta = fn / fs * (Fraction(1, 2) - 1 / fq)
        return GNExponent(float(theta), 0 <= theta <= 1)
    theta = n / sigma * (0.5 - 1.0 / q)
    valid = compare(theta, 0) >= 0 and compare(theta, 1) <= 0
    return GNExponent(theta, valid)


@dataclass(frozen=True)
class ModelParams:
    a: float
    m: float
    gamma: float
    p: float
    sigma: float
    n: int

    def __post_init__(self):
        checks = [
            ("a", self.a > 0, "a must be positive"),
            ("m", self.m > 0, "m must be positive"),
            ("gamma", 0 < self.gamma < 1, "gamma must lie in (0, 1)"),
            ("p", self.p > 1, "p must exceed 1"),
            ("sigma", self.sigma > 0, "sigma must be positive"),
            ("n", self.n >= 1, "n must be a positive integer"),
        ]
        for field, ok, message in checks:
            if not ok:
                raise ParameterError(field, message)

    @property
    def decay_rate(self) -> float:
        return linear_decay_rate(self.a, self.m)

    @property
    def exponent_range(self) -> AdmissibleRange:
        return admissible_exponent_interval(self.n, self.sigma, self.gamma)

    @property
    def theorem_compliant(self) -> bool:
        """Whether ``p`` lies in the proven window and ``sigma >= 1``."""
        return compare(self.sigma, 1) >= 0 and self.exponent_range.contains(self.p)

    def as_dict(self) -> dict:
        return {
            "a": self.a,
            "m": self.m,
            "gamma": self.gamma,
            "p": self.p,
            "sigma": self.sigma,
            "n": self.n,
        }


_FIELDS = ("a", "m", "gamma", "p", "sigma", "n")


def validate_params(raw: Mapping[str, Any]) -> ModelParams:
    """Build ``ModelParams`` from a plain mapping, rejecting bad entries.

    ``sigma < 1`` is accepted with a warning: the linear estimates hold for any
    ``sigma > 0`` but the nonlinear result assumes ``sigma >= 1``.
    """
    missing = [k for k in _FIELDS if k not in raw]
    if missing:
        raise ParameterError(missing[0], f"missing parameter(s): {', '.join(missing)}")
    values = {}
    for key in _FIELDS:
        value = raw[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterError(key, f"{key} must be a number, got {value!r}")
        if not math.isfinite(value):
            raise ParameterError(key, f"{key} must be finite")
        values[key] = value
    n = values["n"]
    if isinstance(n, float):
        if not n.is_integer():
            raise ParameterError("n", "n must be a positive integer")
        values["n"] = int(n)
    params = ModelParams(**values)
    if params.sigma < 1:
        warnings.warn(
            f"sigma={params.sigma} < 1: linear estimates apply, "
            "global existence result does not",
            stacklevel=2,
        )
    return params
