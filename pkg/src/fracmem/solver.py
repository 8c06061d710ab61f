"""Time integration of the damped fractional Klein-Gordon equation with memory.

The stepper is an exponential integrator: the linear part is propagated
exactly mode by mode, and the Duhamel integral over one step,

    int_0^dt K2(dt - tau) F(t_j + tau) dtau,

uses the two-point rule (dt/2) [K2(dt) F_j + K2(0) F_{j+1}] with K2(0) = 0.
F is the memory integral of g = |u|^p, evaluated by product integration.

``picard_iterate`` is an independent route to the same discrete solution: it
iterates the Duhamel map on the whole time grid, building the linear part
from closed-form kernels at every t_k and the nonlinear part as a discrete
time convolution.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .checkpoint import write_checkpoint
from .memory import DEFAULT_MAX_VALUES, MemoryBudgetExceeded, MemoryHistory, hat_weights
from .params import ModelParams
from .propagator import PropagatorTable, grid_roots, kernel_multipliers
from .spectral import Field, TorusGrid, dealias, fft, ifft, power_abs_values, spectral_norm

log = logging.getLogger(__name__)


class BlowUp(ArithmeticError):
    """Non-finite values appeared; ``state`` is the last finite state."""

    def __init__(self, message: str, state: "SimState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    epsilon: float = 1e-3
    blowup_threshold: float = 1e3
    corrector_passes: int = 1
    sample_every: int = 1
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None
    forcing: bool = True  # False drops the memory term (test hook)
    max_history_values: int = DEFAULT_MAX_VALUES

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.T >= self.dt:
            raise ValueError("T must be at least dt")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if self.corrector_passes < 0:
            raise ValueError("corrector_passes must be >= 0")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class SimState:
    t: float
    j: int
    u: Field
    v: Field
    history: MemoryHistory | None
    memory: np.ndarray  # F(t_j), physical values
    u_prev: np.ndarray | None = None  # u(t_{j-1}), for the extrapolated predictor


@dataclass
class Trajectory:
    times: np.ndarray
    l2_u: np.ndarray
    hsigma_u: np.ndarray
    l2_ut: np.ndarray
    data_norm: float = 0.0
    overflow_time: float | None = None
    stopped: str | None = None  # "growth" or "overflow" when the run ended early
    checkpoints: list = field(default_factory=list)

    def weighted_sum(self, gamma: float) -> np.ndarray:
        return (1 + self.times) ** gamma * (self.l2_u + self.hsigma_u + self.l2_ut)

    def diagnostics(self) -> dict:
        return {"l2_u": self.l2_u, "hsigma_u": self.hsigma_u, "l2_ut": self.l2_ut}


def _diagnostics(uh: np.ndarray, vh: np.ndarray, grid: TorusGrid, sigma: float):
    return (
        spectral_norm(uh, grid),
        spectral_norm(uh, grid, grid.symbol(sigma)),
        spectral_norm(vh, grid),
    )


def initial_state(u0: Field, u1: Field, params: ModelParams, cfg: SolverConfig) -> SimState:
    if u0.grid != u1.grid:
        raise ValueError("u0 and u1 live on different grids")
    history = None
    if cfg.forcing:
        history = MemoryHistory(params.gamma, cfg.dt, cfg.max_history_values)
        history.append(power_abs_values(u0.physical, params.p, u0.grid))
    return SimState(
        t=0.0,
        j=0,
        u=Field(u0.grid, physical=u0.physical, spectral=u0.spectral),
        v=Field(u1.grid, physical=u1.physical, spectral=u1.spectral),
        history=history,
        memory=np.zeros(u0.grid.shape),
    )


def step(state: SimState, cfg: SolverConfig, prop: PropagatorTable, params: ModelParams) -> SimState:
    """Advance one step of size ``prop.dt``."""
    grid = state.u.grid
    dt = prop.dt
    uh, vh = state.u.spectral, state.v.spectral
    u_new_h, v_base_h = prop.advance(uh, vh)
    u_new_prev = state.u.physical
    if state.history is None:
        memory = np.zeros(grid.shape)
        v_new_h = v_base_h
    else:
        fh = fft(state.memory)
        u_new_h = u_new_h + 0.5 * dt * prop.k2 * fh
        v_base_h = v_base_h + 0.5 * dt * prop.dk2 * fh
        if state.u_prev is None:
            u_pred = state.u.physical + dt * state.v.physical
        else:
            u_pred = 2 * state.u.physical - state.u_prev
        history = state.history
        history.append(power_abs_values(u_pred, params.p, grid))
        memory = history.evaluate(state.j + 1)
        u_new = ifft(u_new_h).real
        for _ in range(cfg.corrector_passes):
            history.replace_last(power_abs_values(u_new, params.p, grid))
            memory = history.evaluate(state.j + 1)
        v_new_h = v_base_h + 0.5 * dt * fft(memory)

    new = SimState(
        t=(state.j + 1) * dt,
        j=state.j + 1,
        u=Field(grid, spectral=u_new_h),
        v=Field(grid, spectral=v_new_h),
        history=state.history,
        memory=memory,
        u_prev=u_new_prev,
    )
    if not (np.all(np.isfinite(u_new_h)) and np.all(np.isfinite(v_new_h))):
        raise BlowUp(f"non-finite values at t={new.t}", state)
    return new


def simulate(u0: Field, u1: Field, params: ModelParams, cfg: SolverConfig,
             prop: PropagatorTable | None = None) -> Trajectory:
    """Run the stepper to ``cfg.T`` and collect diagnostics every ``sample_every`` steps.

    Stops early on non-finite values ("overflow") or once ||u||_{L2} exceeds
    ``blowup_threshold`` times its initial value ("growth").
    """
    from .initial_data import data_norm

    grid = u0.grid
    if prop is None:
        prop = PropagatorTable.build(grid, params, cfg.dt)
    state = initial_state(u0, u1, params, cfg)
    times, diags = [0.0], [_diagnostics(state.u.spectral, state.v.spectral, grid, params.sigma)]
    traj_extra = {"data_norm": data_norm(u0, u1, params.sigma)}
    initial_l2 = diags[0][0]
    checkpoints = []
    stopped, overflow_time = None, None
    ckpt_dir = Path(cfg.checkpoint_dir) if cfg.checkpoint_dir else None
    for _ in range(cfg.n_steps):
        try:
            state = step(state, cfg, prop, params)
        except BlowUp as exc:
            stopped, overflow_time = "overflow", exc.state.t + cfg.dt
            log.warning("overflow after t=%g", exc.state.t)
            break
        if state.j % cfg.sample_every == 0 or state.j == cfg.n_steps:
            d = _diagnostics(state.u.spectral, state.v.spectral, grid, params.sigma)
            if not np.all(np.isfinite(d)):
                stopped, overflow_time = "overflow", state.t
                break
            times.append(state.t)
            diags.append(d)
            if initial_l2 > 0 and d[0] > cfg.blowup_threshold * initial_l2:
                stopped = "growth"
                log.warning("growth beyond threshold at t=%g", state.t)
                break
        if ckpt_dir is not None and cfg.checkpoint_every and state.j % cfg.checkpoint_every == 0:
            ckpt_dir.mkdir(parents=True, exist_ok=True)
            path = ckpt_dir / f"checkpoint_{state.j:08d}.bin"
            write_checkpoint(path, grid, params, state.t, state.j,
                             {"u": state.u.physical, "v": state.v.physical})
            checkpoints.append(str(path))
    d = np.array(diags)
    return Trajectory(
        times=np.array(times),
        l2_u=d[:, 0],
        hsigma_u=d[:, 1],
        l2_ut=d[:, 2],
        overflow_time=overflow_time,
        stopped=stopped,
        checkpoints=checkpoints,
        **traj_extra,
    )


def xT_norm(traj: Trajectory, gamma: float) -> float:
    """sup_t (1+t)^gamma (||u|| + ||(-Delta)^(sigma/2) u|| + ||u_t||) over the samples."""
    if traj.times.size == 0:
        return 0.0
    return float(np.max(traj.weighted_sum(gamma)))


class BlowUpVerdict(NamedTuple):
    kind: str  # "global-looking", "growth" or "overflow"
    time: float | None

    @property
    def global_looking(self) -> bool:
        return self.kind == "global-looking"


def detect_blow_up(traj: Trajectory, threshold: float) -> BlowUpVerdict:
    """Heuristic classification of a finite-horizon run; not a proof of anything."""
    if traj.times.size == 0:
        raise ValueError("empty trajectory")
    if traj.stopped == "overflow" or not np.all(np.isfinite(traj.l2_u)):
        return BlowUpVerdict("overflow", traj.overflow_time)
    initial = traj.l2_u[0]
    if initial > 0:
        over = np.nonzero(traj.l2_u > threshold * initial)[0]
        if over.size:
            return BlowUpVerdict("growth", float(traj.times[over[0]]))
    return BlowUpVerdict("global-looking", None)


# Picard oracle


@dataclass
class PicardResult:
    trajectory: Trajectory
    factors: list
    differences: list
    iterations: int
    converged: bool
    status: str  # "converged", "non-contraction" or "max-iter"
    residual: float
    u_hat: np.ndarray = field(repr=False, default=None)
    v_hat: np.ndarray = field(repr=False, default=None)


def _trajectory_from_arrays(times, uh, vh, grid, sigma, norm=0.0) -> Trajectory:
    axes = tuple(range(1, uh.ndim))
    cell = grid.cell_volume
    sym = grid.symbol(sigma)
    return Trajectory(
        times=times,
        l2_u=np.sqrt(np.sum(np.abs(uh) ** 2, axis=axes) * cell),
        hsigma_u=np.sqrt(np.sum(np.abs(uh * sym) ** 2, axis=axes) * cell),
        l2_ut=np.sqrt(np.sum(np.abs(vh) ** 2, axis=axes) * cell),
        data_norm=norm,
    )


def memory_matrix(gamma: float, dt: float, n_steps: int) -> np.ndarray:
    """Dense lower-triangular matrix of direct product-integration weights."""
    nodes = dt * np.arange(n_steps + 1)
    W = np.zeros((n_steps + 1, n_steps + 1))
    for j in range(1, n_steps + 1):
        W[j, : j + 1] = hat_weights(gamma, nodes[: j + 1])
    return W


def picard_iterate(u0: Field, u1: Field, params: ModelParams, cfg: SolverConfig,
                   tol: float = 1e-14, max_iter: int = 50) -> PicardResult:
    """Fixed-point iteration u <- u_lin + N(u) on the full time grid.

    Convergence is measured in the weighted sup norm of successive differences.
    ``factors[k]`` is the ratio of the (k+1)-th to the k-th difference.
    """
    from .initial_data import data_norm

    grid = u0.grid
    nt = cfg.n_steps
    dt = cfg.dt
    times = dt * np.arange(nt + 1)
    spatial_axes = tuple(range(1, grid.n + 1))

    roots = grid_roots(grid, params)
    tables = [kernel_multipliers(roots, float(t)) for t in times]
    K1 = np.stack([tb[0] for tb in tables])
    K2 = np.stack([tb[1] for tb in tables])
    dK1 = np.stack([tb[2] for tb in tables])
    dK2 = np.stack([tb[3] for tb in tables])
    del tables

    lin_u = K1 * u0.spectral + K2 * u1.spectral
    lin_v = dK1 * u0.spectral + dK2 * u1.spectral
    W = memory_matrix(params.gamma, dt, nt) if cfg.forcing else None
    mask = grid.dealias_mask

    def nonlinear(uh):
        if W is None:
            return np.zeros_like(uh), np.zeros_like(uh)
        u = np.fft.ifftn(uh, axes=spatial_axes, norm="ortho").real
        gh = np.fft.fftn(np.abs(u) ** params.p, axes=spatial_axes, norm="ortho")
        # .real is a strided view; matmul needs a contiguous operand to reach BLAS
        g = np.ascontiguousarray(
            np.fft.ifftn(np.where(mask, gh, 0.0), axes=spatial_axes, norm="ortho").real
        )
        F = (W @ g.reshape(nt + 1, -1)).reshape(g.shape)
        Fh = np.fft.fftn(F, axes=spatial_axes, norm="ortho")
        # trapezoid rule in time: dt * sum_i K(t_k - t_i) F_i with halved end weights
        conv_u = fftconvolve(K2, Fh, axes=0)[: nt + 1]
        conv_v = fftconvolve(dK2, Fh, axes=0)[: nt + 1]
        nu = dt * (conv_u - 0.5 * K2 * Fh[0])
        nv = dt * (conv_v - 0.5 * dK2 * Fh[0] - 0.5 * dK2[0] * Fh)
        nu[0] = 0.0
        nv[0] = 0.0
        return nu, nv

    def weighted_norm(du, dv):
        tr = _trajectory_from_arrays(times, du, dv, grid, params.sigma)
        return xT_norm(tr, params.gamma)

    uh, vh = lin_u, lin_v
    diffs, factors = [], []
    status, converged, bad = "max-iter", False, 0
    it = 0
    for it in range(1, max_iter + 1):
        nu, nv = nonlinear(uh)
        new_u, new_v = lin_u + nu, lin_v + nv
        d = weighted_norm(new_u - uh, new_v - vh)
        if not np.isfinite(d):
            status = "non-contraction"
            break
        if diffs:
            factor = d / diffs[-1] if diffs[-1] > 0 else 0.0
            factors.append(factor)
            bad = bad + 1 if factor >= 1 else 0
        diffs.append(d)
        uh, vh = new_u, new_v
        if d < tol:
            status, converged = "converged", True
            break
        if bad >= 3:
            status = "non-contraction"
            break
    nu, nv = nonlinear(uh)
    residual = weighted_norm(uh - lin_u - nu, vh - lin_v - nv)
    traj = _trajectory_from_arrays(times, uh, vh, grid, params.sigma, data_norm(u0, u1, params.sigma))
    return PicardResult(traj, factors, diffs, it, converged, status, residual, uh, vh)


def with_overrides(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, **kw)
