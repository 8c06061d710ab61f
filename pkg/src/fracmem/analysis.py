"""Decay-rate fitting and numerical checks of the integral and interpolation inequalities.

An estimate ``A(t) <~ B(t)`` is certified on [0, T] when the ratio A/B is
finite and its running supremum grows by less than 5% over the last decade
[T/10, T], i.e. the implied constant has settled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

from .memory import hat_weights
from .params import gn_theta
from .spectral import Field, TorusGrid, fft, half_power_laplacian, ifft, l2_norm, lq_norm

STABILIZATION_TOL = 0.05
SUPER_POLYNOMIAL_SLOPE = -3.0


# Decay fitting


class DecayFit(NamedTuple):
    slope: float
    residual: float  # RMS residual in log space
    intercept: float
    samples: int
    label: str  # "power-law" or "super-polynomial"


def fit_decay_rate(times, norms, window=None, min_samples: int = 10) -> DecayFit:
    """Least-squares slope of log(norm) against log(1+t) inside ``window``.

    ``window`` defaults to [T/5, T] with T the last time.
    """
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if window is None:
        window = (times[-1] / 5, times[-1])
    lo, hi = window
    sel = (times >= lo) & (times <= hi)
    if sel.sum() < min_samples:
        raise ValueError(f"need >= {min_samples} samples in window {window}, got {sel.sum()}")
    y = norms[sel]
    if np.any(~(y > 0)):
        raise ValueError("norms must be positive inside the fit window")
    x = np.log1p(times[sel])
    ly = np.log(y)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    label = "super-polynomial" if slope < SUPER_POLYNOMIAL_SLOPE else "power-law"
    return DecayFit(float(slope), rms, float(intercept), int(sel.sum()), label)


DIAGNOSTICS = ("l2_u", "hsigma_u", "l2_ut")


@dataclass
class DecayReport:
    window: tuple
    target_slope: float
    tolerance: float
    fits: dict
    xT_norm: float
    boundedness_constant: float  # sup (1+t)^gamma * sum / data norm
    verdict: str
    theorem_compliant: bool
    lemma_constants: dict = field(default_factory=dict)

    @property
    def matches_target(self) -> dict:
        return {k: abs(f.slope - self.target_slope) <= self.tolerance for k, f in self.fits.items()}

    @property
    def decay_compatible(self) -> bool:
        """Global-looking and every diagnostic decays at least like (1+t)^-gamma."""
        if self.verdict != "global-looking" or not self.fits:
            return False
        return all(f.slope <= self.target_slope + self.tolerance for f in self.fits.values())

    def to_dict(self) -> dict:
        return {
            "window": list(self.window),
            "target_slope": self.target_slope,
            "tolerance": self.tolerance,
            "fits": {k: f._asdict() for k, f in self.fits.items()},
            "matches_target": self.matches_target,
            "decay_compatible": self.decay_compatible,
            "xT_norm": self.xT_norm,
            "boundedness_constant": self.boundedness_constant,
            "verdict": self.verdict,
            "theorem_compliant": self.theorem_compliant,
            "lemma_constants": self.lemma_constants,
        }


def decay_report(traj, params, window=None, tolerance: float = 0.15,
                 threshold: float = 1e3) -> DecayReport:
    from .solver import detect_blow_up, xT_norm

    verdict = detect_blow_up(traj, threshold)
    if window is None:
        window = (traj.times[-1] / 5, traj.times[-1])
    fits = {}
    if verdict.global_looking:
        for name, values in traj.diagnostics().items():
            try:
                fits[name] = fit_decay_rate(traj.times, values, window)
            except ValueError:
                pass
    xt = xT_norm(traj, params.gamma)
    bound = xt / traj.data_norm if traj.data_norm > 0 else 0.0
    return DecayReport(
        window=tuple(float(w) for w in window),
        target_slope=-params.gamma,
        tolerance=tolerance,
        fits=fits,
        xT_norm=xt,
        boundedness_constant=bound,
        verdict=verdict.kind,
        theorem_compliant=params.theorem_compliant,
    )


# Integral inequalities


class LemmaCheck(NamedTuple):
    sup_ratio: float
    variation: float  # growth of sup ratio over [T/10, T], relative to the final sup
    spread: float  # (max - min) / max of the ratio itself over [T/10, T]
    times: np.ndarray
    ratios: np.ndarray

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)))

    @property
    def stabilized(self) -> bool:
        return self.variation < STABILIZATION_TOL

    @property
    def passed(self) -> bool:
        return self.finite and self.stabilized


def time_nodes(T: float, per_decade: int = 512, t_min: float = 1e-4) -> np.ndarray:
    """0 followed by log-spaced nodes from ``t_min`` to ``T``."""
    decades = np.log10(T / t_min)
    count = int(np.ceil(decades * per_decade)) + 1
    return np.concatenate([[0.0], np.logspace(np.log10(t_min), np.log10(T), count)])


def _phi(z: np.ndarray, k: int) -> np.ndarray:
    """phi_k(-z) = sum_i (-z)^i / (i+k)!, i.e. phi_1 = (1-e^-z)/z, phi_2 = (z-1+e^-z)/z^2."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 0.1
    zs = z[small]
    term = np.ones_like(zs) / np.prod(np.arange(1, k + 1))
    acc = term.copy()
    for i in range(1, 12):
        term = term * (-zs) / (i + k)
        acc += term
    out[small] = acc
    zb = z[~small]
    if k == 1:
        out[~small] = -np.expm1(-zb) / zb
    else:
        out[~small] = (zb + np.expm1(-zb)) / zb**2
    return out


def exp_convolution(c: float, nodes: np.ndarray, values: np.ndarray) -> np.ndarray:
    """I(t_i) = int_0^{t_i} e^{-c(t_i - s)} f(s) ds for f piecewise linear on ``nodes``."""
    h = np.diff(nodes)
    z = c * h
    decay = np.exp(-z)
    w_right = h * _phi(z, 2)
    w_left = h * _phi(z, 1) - w_right
    out = np.zeros(nodes.size)
    for i in range(h.size):
        out[i + 1] = decay[i] * out[i] + w_left[i] * values[i] + w_right[i] * values[i + 1]
    return out


def _last_decade(times, ratios, T):
    """(sup growth, ratio spread) over [T/10, T]."""
    if not np.all(np.isfinite(ratios)) or ratios.max() <= 0:
        return float("inf"), float("inf")
    late = ratios[times >= T / 10]
    early = ratios[times <= T / 10]
    sup_all = ratios.max()
    growth = (sup_all - early.max()) / sup_all if early.size else float("inf")
    spread = (late.max() - late.min()) / late.max()
    return float(growth), float(spread)


def _lemma_check(t, ratios, T) -> LemmaCheck:
    growth, spread = _last_decade(t, ratios, T)
    sup = float(np.max(ratios)) if np.all(np.isfinite(ratios)) else float("inf")
    return LemmaCheck(sup, growth, spread, t, ratios)


def check_lemma22(c: float, alpha: float, T: float = 1e3, per_decade: int = 512) -> LemmaCheck:
    """R(t) = (1+t)^alpha int_0^t e^{-c(t-s)} (1+s)^-alpha ds on a log grid up to T."""
    if c <= 0:
        raise ValueError("c must be positive")
    nodes = time_nodes(T, per_decade)
    integral = exp_convolution(c, nodes, (1 + nodes) ** -alpha)
    t, ratios = nodes[1:], ((1 + nodes) ** alpha * integral)[1:]
    return _lemma_check(t, ratios, T)


def memory_profile(beta: float, gamma: float, nodes: np.ndarray) -> np.ndarray:
    """M(tau_i) = int_0^{tau_i} (tau_i - s)^-gamma (1+s)^-beta ds by product integration."""
    g = (1 + nodes) ** -beta
    out = np.zeros(nodes.size)
    for i in range(1, nodes.size):
        out[i] = hat_weights(gamma, nodes[: i + 1]) @ g[: i + 1]
    return out


def lemma23_bound(beta: float, gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    if beta > 1:
        return lambda t: (1 + t) ** -gamma
    return lambda t: (1 + t) ** (1 - gamma - beta)


def check_lemma23(c: float, beta: float, gamma: float, T: float = 1e3,
                  per_decade: int = 512, bound=None, profile=None) -> LemmaCheck:
    """sup of D(t) / bound(t), D(t) = int_0^t e^{-c(t-tau)} int_0^tau (tau-s)^-gamma (1+s)^-beta ds dtau.

    ``bound`` overrides the default two-case bound; ``profile`` reuses a
    precomputed ``memory_profile`` on ``time_nodes(T, per_decade)``.
    """
    if c <= 0 or beta <= 0:
        raise ValueError("c and beta must be positive")
    if beta == 1:
        raise ValueError("beta = 1 is not covered by the two-case bound")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    nodes = time_nodes(T, per_decade)
    if profile is None:
        profile = memory_profile(beta, gamma, nodes)
    bound = bound or lemma23_bound(beta, gamma)
    D = exp_convolution(c, nodes, profile)
    t = nodes[1:]
    ratios = D[1:] / bound(t)
    return _lemma_check(t, ratios, T)


def double_integral(c: float, beta: float, gamma: float, T: float, per_decade: int = 512):
    """(nodes, D(nodes)) for the double integral in ``check_lemma23``."""
    nodes = time_nodes(T, per_decade)
    return nodes, exp_convolution(c, nodes, memory_profile(beta, gamma, nodes))


# Gagliardo-Nirenberg


def gn_ratio(y: Field, q: float, sigma: float) -> float:
    """||y||_q / (||(-Delta)^(sigma/2) y||^theta ||y||_2^(1-theta)); nan for a zero field."""
    theta = gn_theta(y.grid.n, sigma, q).theta
    l2 = l2_norm(y)
    if l2 == 0:
        return float("nan")
    dnorm = l2_norm(half_power_laplacian(y, sigma))
    return lq_norm(y, q) / (dnorm**theta * l2 ** (1 - theta))


class GNCheck(NamedTuple):
    max_ratio: float
    ratios: np.ndarray
    theta: float
    skipped: int

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.max_ratio))


def check_gn_inequality(fields: Iterable[Field], q: float, sigma: float) -> GNCheck:
    fields = list(fields)
    if not fields:
        raise ValueError("no fields given")
    theta = gn_theta(fields[0].grid.n, sigma, q)
    if not theta.valid:
        raise ValueError(f"theta_q = {theta.theta} outside [0, 1]")
    ratios = np.array([gn_ratio(y, q, sigma) for y in fields])
    kept = ratios[np.isfinite(ratios)]
    skipped = ratios.size - kept.size
    return GNCheck(float(kept.max()) if kept.size else float("nan"), kept, theta.theta, skipped)


def refine_field(f: Field, factor: int = 2) -> Field:
    """Spectral interpolation onto a grid with ``factor`` times more points per axis."""
    g = f.grid
    fine = TorusGrid(g.n, g.L, g.N * factor, point_budget=max(g.point_budget, (g.N * factor) ** g.n))
    coarse = np.fft.fftshift(f.spectral)
    padded = np.zeros(fine.shape, dtype=complex)
    off = (fine.N - g.N) // 2
    sl = tuple(slice(off, off + g.N) for _ in range(g.n))
    padded[sl] = coarse
    # orthonormal scaling changes with the point count
    padded *= factor ** (g.n / 2)
    coeffs = np.fft.ifftshift(padded)
    values = ifft(coeffs).real
    return Field(fine, physical=values, spectral=fft(values))


def gn_refinement_gap(f: Field, q: float, sigma: float, factor: int = 2) -> float:
    """Relative change of the GN ratio when the field is resampled on a finer grid."""
    r0 = gn_ratio(f, q, sigma)
    r1 = gn_ratio(refine_field(f, factor), q, sigma)
    return abs(r1 - r0) / abs(r0)


def gn_scale_gap(f: Field, q: float, sigma: float, lam: float) -> float:
    r0 = gn_ratio(f, q, sigma)
    r1 = gn_ratio(Field(f.grid, physical=lam * f.physical), q, sigma)
    return abs(r1 - r0) / abs(r0)
