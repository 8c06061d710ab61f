import numpy as np
import pytest

from fracmem.checkpoint import read_checkpoint, write_checkpoint
from fracmem.initial_data import data_norm, gaussian_data, make_initial_data, random_data
from fracmem.memory import MemoryBudgetExceeded
from fracmem.params import ModelParams
from fracmem.propagator import PropagatorTable, linear_evolve
from fracmem.solver import (
    SolverConfig,
    Trajectory,
    detect_blow_up,
    initial_state,
    picard_iterate,
    simulate,
    step,
    with_overrides,
    xT_norm,
)
from fracmem.spectral import Field, TorusGrid

P = ModelParams(1.0, 1.0, 0.75, 2.0, 1.0, 1)


@pytest.fixture
def grid():
    return TorusGrid(1, 32.0, 64)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0.0, T=1.0)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, T=0.01)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, T=1.0, sample_every=0)
    assert SolverConfig(dt=0.02, T=200.0).n_steps == 10000


def test_gaussian_data_norm(grid):
    u0, u1 = gaussian_data(grid, 1.0, 1e-3)
    assert data_norm(u0, u1, 1.0) == pytest.approx(1e-3, rel=1e-12)
    assert np.all(u1.physical == 0)
    assert np.argmax(u0.physical) == grid.N // 2  # centred at x = 0


def test_random_data_is_seeded(grid):
    a = random_data(grid, 1.0, 0.5, seed=4)
    b = random_data(grid, 1.0, 0.5, seed=4)
    c = random_data(grid, 1.0, 0.5, seed=5)
    assert np.array_equal(a[0].physical, b[0].physical)
    assert not np.array_equal(a[0].physical, c[0].physical)
    assert data_norm(*a, 1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        make_initial_data("bogus", grid, 1.0, 0.1)


def test_zero_data_stays_zero(grid):
    z = Field.zeros(grid)
    traj = simulate(z, z, P, SolverConfig(dt=0.05, T=5.0))
    assert traj.times.size == 101
    for values in traj.diagnostics().values():
        assert np.all(values == 0)
    assert detect_blow_up(traj, 1e3).kind == "global-looking"


@pytest.mark.parametrize("sigma", [1.0, 1.5])
def test_forcing_off_matches_linear_flow(grid, sigma):
    params = ModelParams(1.0, 2.0, 0.75, 2.0, sigma, 1)
    u0, u1 = random_data(grid, sigma, 0.3, seed=1)
    cfg = SolverConfig(dt=0.1, T=3.0, forcing=False)
    prop = PropagatorTable.build(grid, params, cfg.dt)
    state = initial_state(u0, u1, params, cfg)
    for _ in range(cfg.n_steps):
        state = step(state, cfg, prop, params)
        u, ut = linear_evolve(u0, u1, state.t, params)
        assert np.max(np.abs(state.u.physical - u.physical)) <= 1e-10
        assert np.max(np.abs(state.v.physical - ut.physical)) <= 1e-10


def test_linear_only_run_is_global_looking(grid):
    u0, u1 = gaussian_data(grid, 1.0, 1.0)
    traj = simulate(u0, u1, P, SolverConfig(dt=0.05, T=10.0, forcing=False))
    assert detect_blow_up(traj, 1e3).global_looking


def test_memory_pushes_solution_up(grid):
    # the forcing is nonnegative, so the spatial mean of u exceeds the linear one
    u0, u1 = gaussian_data(grid, 1.0, 0.5)
    cfg = SolverConfig(dt=0.05, T=5.0)
    prop = PropagatorTable.build(grid, P, cfg.dt)
    state = initial_state(u0, u1, P, cfg)
    for _ in range(cfg.n_steps):
        state = step(state, cfg, prop, P)
    lin, _ = linear_evolve(u0, u1, state.t, P)
    assert state.u.physical.mean() > lin.physical.mean()


def test_corrector_converges_in_one_pass(grid):
    u0, u1 = gaussian_data(grid, 1.0, 0.5)
    one = simulate(u0, u1, P, SolverConfig(dt=0.05, T=5.0, corrector_passes=1))
    three = simulate(u0, u1, P, SolverConfig(dt=0.05, T=5.0, corrector_passes=3))
    assert np.allclose(one.l2_u, three.l2_u, rtol=1e-13)


def test_self_convergence_order():
    # spatially constant data reduce the model to a memory ODE; fine run as reference
    g = TorusGrid(1, 2 * np.pi, 8)
    for gamma in (0.25, 0.5):
        params = ModelParams(1.0, 1.0, gamma, 2.0, 1.0, 1)
        u0, u1 = Field(g, physical=np.full(8, 0.5)), Field.zeros(g)
        ref = simulate(u0, u1, params, SolverConfig(dt=2**-12, T=2.0)).l2_u[-1]
        dts = [2.0**-k for k in range(4, 9)]
        errs = [abs(simulate(u0, u1, params, SolverConfig(dt=d, T=2.0)).l2_u[-1] - ref) for d in dts]
        order = np.polyfit(np.log(dts), np.log(errs), 1)[0]
        assert order >= 1.5


def test_sampling_keeps_final_time(grid):
    u0, u1 = gaussian_data(grid, 1.0, 1e-2)
    traj = simulate(u0, u1, P, SolverConfig(dt=0.1, T=2.0, sample_every=7))
    assert traj.times[-1] == pytest.approx(2.0)
    assert np.allclose(traj.times[1:-1], 0.7 * np.arange(1, 3))


def test_large_data_blow_up():
    grid = TorusGrid(1, 64.0, 256)
    params = ModelParams(1.0, 1.0, 0.2, 3.0, 1.0, 1)
    u0, u1 = gaussian_data(grid, 1.0, 10.0)
    traj = simulate(u0, u1, params, SolverConfig(dt=0.02, T=50.0, epsilon=10.0))
    verdict = detect_blow_up(traj, 1e3)
    assert verdict.kind in ("growth", "overflow")
    assert traj.stopped in ("growth", "overflow")


def test_budget_is_enforced(grid):
    u0, u1 = gaussian_data(grid, 1.0, 1e-3)
    with pytest.raises(MemoryBudgetExceeded):
        simulate(u0, u1, P, SolverConfig(dt=0.1, T=10.0, max_history_values=64 * 50))


def synthetic(times, values):
    return Trajectory(times=times, l2_u=values, hsigma_u=values, l2_ut=values)


def test_xT_norm_examples():
    t = np.linspace(0, 100, 1001)
    assert xT_norm(synthetic(t, np.zeros_like(t)), 0.75) == 0
    assert xT_norm(synthetic(t, (1 + t) ** -0.75 / 3), 0.75) == pytest.approx(1.0, rel=1e-14)


def test_xT_norm_grows_with_amplitude(grid):
    norms = []
    for eps in (1e-3, 2e-3, 4e-3):
        u0, u1 = gaussian_data(grid, 1.0, eps)
        norms.append(xT_norm(simulate(u0, u1, P, SolverConfig(dt=0.05, T=10.0)), 0.75))
    assert norms[0] < norms[1] < norms[2]


def test_detect_blow_up_classes():
    t = np.linspace(0, 10, 11)
    assert detect_blow_up(synthetic(t, np.ones(11)), 10).kind == "global-looking"
    grow = synthetic(t, np.exp(t))
    verdict = detect_blow_up(grow, 1e3)
    assert verdict.kind == "growth" and verdict.time == 7.0
    bad = synthetic(t, np.where(t > 5, np.inf, 1.0))
    assert detect_blow_up(bad, 1e3).kind == "overflow"


def test_picard_zero_data(grid):
    z = Field.zeros(grid)
    res = picard_iterate(z, z, P, SolverConfig(dt=0.1, T=2.0))
    assert res.converged and res.iterations == 1
    assert np.all(res.trajectory.l2_u == 0)


def test_picard_matches_stepper(grid):
    u0, u1 = gaussian_data(grid, 1.0, 0.05)
    cfg = SolverConfig(dt=0.05, T=5.0)
    res = picard_iterate(u0, u1, P, cfg, tol=1e-14)
    traj = simulate(u0, u1, P, cfg)
    assert res.status == "converged"
    assert res.residual < 2e-14
    for name, values in traj.diagnostics().items():
        other = res.trajectory.diagnostics()[name]
        assert np.max(np.abs(values - other)) <= 1e-10 * np.max(np.abs(values))
    assert all(f < 1 for f in res.factors)


def test_picard_forcing_off_is_linear(grid):
    u0, u1 = gaussian_data(grid, 1.0, 0.1)
    cfg = SolverConfig(dt=0.1, T=3.0, forcing=False)
    res = picard_iterate(u0, u1, P, cfg)
    u, _ = linear_evolve(u0, u1, 3.0, P)
    assert res.iterations == 1
    assert np.allclose(np.fft.ifft(res.u_hat[-1], norm="ortho").real, u.physical, atol=1e-13)


def test_picard_large_data_does_not_contract():
    grid = TorusGrid(1, 16.0, 32)
    params = ModelParams(1.0, 1.0, 0.2, 3.0, 1.0, 1)
    u0, u1 = gaussian_data(grid, 1.0, 5.0)
    res = picard_iterate(u0, u1, params, SolverConfig(dt=0.05, T=5.0), max_iter=20)
    assert not res.converged
    assert res.status in ("non-contraction", "max-iter")


def test_picard_factor_scales_with_amplitude(grid):
    cfg = SolverConfig(dt=0.05, T=5.0)
    first = []
    for eps in (0.02, 0.01):
        u0, u1 = gaussian_data(grid, 1.0, eps)
        first.append(picard_iterate(u0, u1, P, cfg).factors[0])
    assert first[0] / first[1] == pytest.approx(2.0 ** (P.p - 1), rel=0.25)


def test_checkpoint_round_trip(tmp_path, grid):
    rng = np.random.default_rng(0)
    fields = {"u": rng.standard_normal(grid.shape), "v": rng.standard_normal(grid.shape)}
    path = write_checkpoint(tmp_path / "c.bin", grid, P, 1.5, 30, fields)
    header, back = read_checkpoint(path)
    assert header["t"] == 1.5 and header["step"] == 30
    assert header["params"] == P.as_dict() and header["grid"]["N"] == 64
    for k in fields:
        assert np.array_equal(back[k], fields[k])


def test_checkpoint_rejects_foreign_files(tmp_path):
    bad = tmp_path / "x.bin"
    bad.write_bytes(b'{"format": "other"}\n')
    with pytest.raises(ValueError):
        read_checkpoint(bad)


def test_simulate_writes_checkpoints(tmp_path, grid):
    u0, u1 = gaussian_data(grid, 1.0, 1e-2)
    cfg = SolverConfig(dt=0.1, T=2.0, checkpoint_every=5, checkpoint_dir=str(tmp_path))
    traj = simulate(u0, u1, P, cfg)
    assert len(traj.checkpoints) == 4
    header, fields = read_checkpoint(traj.checkpoints[-1])
    assert header["step"] == 20
    assert np.sqrt(np.sum(fields["u"] ** 2) * grid.dx) == pytest.approx(traj.l2_u[-1], rel=1e-12)


def test_with_overrides():
    cfg = SolverConfig(dt=0.1, T=1.0)
    assert with_overrides(cfg, epsilon=2.0).epsilon == 2.0
    assert cfg.epsilon == 1e-3
