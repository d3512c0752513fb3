import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from langot import rng
from langot.errors import DomainError, StabilityError
from langot.kernels import KernelParams, TimeGrid, kernel_K
from langot.sde import (
    SDEConfig,
    decompose,
    exact_step_coefficients,
    overdamped_batch,
    reconstruction_residual,
    simulate_overdamped,
    simulate_underdamped_euler,
    simulate_underdamped_exact,
    underdamped_exact_batch,
)

KP = KernelParams(m=0.5, gamma=1.0)
NO_NOISE = SDEConfig(params=KP, dimension=1, sigma=np.zeros((1, 1)))


def zero_control(t, x, y):
    return np.zeros_like(x)


def const_control(c):
    return lambda t, x, y: np.full_like(x, c)


def test_euler_free_relaxation():
    y0 = np.array([0.8])
    grid = TimeGrid.uniform(4096)
    traj = simulate_underdamped_euler(NO_NOISE, zero_control, np.array([0.3]), y0, grid, seed=0)
    t = grid.nodes
    closed = 0.3 + (KP.m * (y0 / KP.m) / KP.gamma) * (1 - np.exp(-KP.gamma * t / KP.m))
    assert np.max(np.abs(traj.X[:, 0] - closed)) <= 5.0 / 4096


def test_euler_constant_path():
    grid = TimeGrid.uniform(64)
    traj = simulate_underdamped_euler(
        NO_NOISE, zero_control, np.array([1.1]), np.array([0.0]), grid, seed=0
    )
    assert np.all(traj.X == 1.1)
    assert np.all(traj.Y == 0.0)


def test_euler_matches_ode_reference():
    c = 0.7
    errs = []
    for n in (256, 1024):
        grid = TimeGrid.uniform(n)
        traj = simulate_underdamped_euler(
            NO_NOISE, const_control(c), np.array([0.1]), np.array([-0.3]), grid, seed=0
        )
        sol = solve_ivp(
            lambda t, z: [z[1] / KP.m, c - KP.gamma / KP.m * z[1]],
            (0, 1),
            [0.1, -0.3],
            rtol=1e-12,
            atol=1e-14,
            dense_output=True,
        )
        ref = sol.sol(grid.nodes)
        errs.append(np.max(np.abs(traj.X[:, 0] - ref[0])))
    assert errs[0] <= 10.0 / 256
    assert errs[1] <= errs[0] / 2  # first order in the step


def test_euler_stability_guard():
    stiff = SDEConfig(params=KernelParams(m=1e-3, gamma=1.0), dimension=1)
    with pytest.raises(StabilityError):
        simulate_underdamped_euler(
            stiff, zero_control, np.array([0.0]), np.array([0.0]), TimeGrid.uniform(16), seed=0
        )


def test_exact_step_mean_matches_quadrature():
    dt = 0.37
    c = exact_step_coefficients(KP, dt)
    lam = KP.rate
    ref_int_e = quad(lambda s: np.exp(-lam * (dt - s)), 0, dt, epsabs=1e-14)[0]
    ref_int_k = quad(lambda s: kernel_K(KP, dt - s), 0, dt, epsabs=1e-14)[0]
    assert c["int_e"] == pytest.approx(ref_int_e, abs=1e-12)
    assert c["int_K"] == pytest.approx(ref_int_k, abs=1e-12)
    # one noiseless step with constant control reproduces the exact solution
    u0 = 1.3
    grid = TimeGrid(np.array([0.0, dt]))
    traj = simulate_underdamped_exact(
        NO_NOISE, const_control(u0), np.array([0.2]), np.array([-0.4]), grid, seed=0
    )
    x_ref = 0.2 + kernel_K(KP, dt) * (-0.4) + u0 * ref_int_k
    y_ref = np.exp(-lam * dt) * (-0.4) + u0 * ref_int_e
    assert traj.X[-1, 0] == pytest.approx(x_ref, abs=1e-12)
    assert traj.Y[-1, 0] == pytest.approx(y_ref, abs=1e-12)


def test_exact_step_covariances_match_quadrature():
    dt = 0.1
    c = exact_step_coefficients(KernelParams(m=0.5, gamma=1.0), dt)
    lam = 1.0 / 0.5
    k = lambda s: (1 - np.exp(-lam * s)) / 1.0
    i_yy = quad(lambda s: np.exp(-2 * lam * s), 0, dt, epsabs=1e-14)[0]
    i_xy = quad(lambda s: k(s) * np.exp(-lam * s), 0, dt, epsabs=1e-14)[0]
    i_xx = quad(lambda s: k(s) ** 2, 0, dt, epsabs=1e-14)[0]
    assert c["i_yy"] == pytest.approx(i_yy, abs=1e-10)
    assert c["i_xy"] == pytest.approx(i_xy, abs=1e-10)
    assert c["i_xx"] == pytest.approx(i_xx, abs=1e-10)
    # the conditional sampling pair reproduces the same second moments
    assert c["alpha"] ** 2 * dt + c["beta"] ** 2 == pytest.approx(i_yy, abs=1e-12)
    assert c["alpha"] * dt == pytest.approx(lam**-1 * 0 + c["int_e"], abs=1e-14)


def test_exact_deterministic_step_count_free():
    for n1, n2 in ((16, 256), (8, 64)):
        a = simulate_underdamped_exact(
            NO_NOISE, const_control(0.5), np.array([0.3]), np.array([-0.2]),
            TimeGrid.uniform(n1), seed=1,
        )
        b = simulate_underdamped_exact(
            NO_NOISE, const_control(0.5), np.array([0.3]), np.array([-0.2]),
            TimeGrid.uniform(n2), seed=1,
        )
        assert abs(a.X[-1, 0] - b.X[-1, 0]) <= 1e-12
        assert abs(a.Y[-1, 0] - b.Y[-1, 0]) <= 1e-12


def test_exact_endpoint_law_step_free():
    cfg = SDEConfig(params=KernelParams(m=0.3, gamma=1.0), dimension=1)
    n_paths = 10_000
    stats = []
    for seed, n_steps in ((3, 16), (99, 256)):
        noise = rng.noise_block(seed, range(n_paths), n_steps, draws=2)
        X, Y, _, _ = underdamped_exact_batch(
            cfg, const_control(0.4), np.zeros((n_paths, 1)), np.zeros((n_paths, 1)),
            np.linspace(0, 1, n_steps + 1), noise,
        )
        stats.append((X[-1, :, 0], Y[-1, :, 0]))
    for idx in (0, 1):
        a, b = stats[0][idx], stats[1][idx]
        se = np.sqrt(a.var() / a.size + b.var() / b.size)
        assert abs(a.mean() - b.mean()) <= 3 * se
        var_se = np.sqrt(2.0) * np.sqrt(2.0 / a.size) * max(a.var(), b.var())
        assert abs(a.var() - b.var()) <= 3 * var_se


def test_overdamped_brownian_variance():
    cfg = SDEConfig(params=KernelParams(m=1.0, gamma=1.0), dimension=1)
    n_paths = 10_000
    noise = rng.noise_block(3, range(n_paths), 64)
    X, _, _ = overdamped_batch(
        cfg, lambda t, x: np.zeros_like(x), np.zeros((n_paths, 1)), np.linspace(0, 1, 65), noise
    )
    var = X[-1, :, 0].var()
    assert abs(var - 1.0) <= 3 * np.sqrt(2.0 / n_paths)


def test_overdamped_straight_line():
    cfg = SDEConfig(params=KernelParams(m=1.0, gamma=2.0), dimension=1, sigma=np.zeros((1, 1)))
    grid = TimeGrid.uniform(32)
    traj = simulate_overdamped(cfg, lambda t, x: np.full_like(x, 0.8), np.array([0.1]), grid, seed=0)
    assert np.max(np.abs(traj.X[:, 0] - (0.1 + grid.nodes * 0.8 / 2.0))) <= 1e-14


def test_decompose_trivial_parts():
    grid = TimeGrid.uniform(32)
    traj = simulate_underdamped_exact(
        NO_NOISE, zero_control, np.array([0.5]), np.array([0.7]), grid, seed=0
    )
    u_path, m_path = decompose(traj, NO_NOISE)
    assert np.all(u_path.values == 0.0)
    assert np.all(m_path.values == 0.0)
    cfg = SDEConfig(params=KP, dimension=1)
    noisy = simulate_underdamped_exact(
        cfg, const_control(0.3), np.array([0.0]), np.array([0.0]), grid, seed=2
    )
    u_path, m_path = decompose(noisy, cfg)
    assert u_path.values[-1, 0] == pytest.approx(0.3, abs=1e-12)
    assert m_path.values[-1, 0] == pytest.approx(noisy.dW.sum(), abs=1e-12)


def _master_and_views(seed, n_master=1024):
    cfg = SDEConfig(params=KernelParams(m=0.2, gamma=1.0), dimension=1)
    control = lambda t, x, y: np.sin(2 * np.pi * t) - 0.3 * x
    grid = TimeGrid.uniform(n_master)
    traj = simulate_underdamped_exact(
        cfg, control, np.array([0.1]), np.array([0.0]), grid, seed=seed
    )
    views = []
    for stride in (4, 2, 1):
        sub = slice(None, None, stride)
        nodes = grid.nodes[sub]
        dw = traj.dW.reshape(-1, stride, 1).sum(axis=1) if stride > 1 else traj.dW
        views.append(
            type(traj)(
                TimeGrid(nodes), traj.X[sub], traj.Y[sub], traj.u[sub], dw, seed, 0
            )
        )
    return cfg, views


def test_reconstruction_residual_refines_at_half_order():
    orders = []
    for seed in range(12):
        cfg, views = _master_and_views(seed)
        res = [reconstruction_residual(v, cfg) for v in views]
        orders.append(np.log2(np.array(res[:-1]) / np.array(res[1:])))
    mean_orders = np.mean(orders, axis=0)
    assert np.all(mean_orders >= 0.5)


def test_momentum_identity_refines():
    cfg = SDEConfig(params=KernelParams(m=0.2, gamma=1.0), dimension=1)
    control = lambda t, x, y: np.sin(2 * np.pi * t) - 0.3 * x
    defects = []
    for n in (128, 512):
        traj = simulate_underdamped_exact(
            cfg, control, np.array([0.1]), np.array([0.0]), TimeGrid.uniform(n), seed=5
        )
        u_path, m_path = decompose(traj, cfg)
        lhs = traj.Y - traj.Y[0] + cfg.params.gamma * (traj.X - traj.X[0])
        defects.append(np.max(np.abs(lhs - (u_path.values + m_path.values))))
    # the defect is the quadrature gap of the frozen control, first order
    assert defects[1] <= 0.75 * defects[0]


def test_determinism_and_batch_consistency():
    cfg = SDEConfig(params=KP, dimension=1)
    grid = TimeGrid.uniform(32)
    a = simulate_underdamped_exact(cfg, const_control(0.2), np.array([0.0]), np.array([0.1]), grid, seed=9)
    b = simulate_underdamped_exact(cfg, const_control(0.2), np.array([0.0]), np.array([0.1]), grid, seed=9)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.dW, b.dW)
    c = simulate_underdamped_exact(cfg, const_control(0.2), np.array([0.0]), np.array([0.1]), grid, seed=10)
    assert not np.array_equal(a.X, c.X)
    # batched run with the same per-path streams is bit-identical to single runs
    noise = rng.noise_block(9, [0, 1], 32, draws=2)
    X, Y, _, _ = underdamped_exact_batch(
        cfg, const_control(0.2), np.zeros((2, 1)), np.full((2, 1), 0.1), grid.nodes, noise
    )
    assert np.array_equal(X[:, 0], a.X)


def test_decompose_requires_controls():
    grid = TimeGrid.uniform(8)
    traj = simulate_overdamped(
        SDEConfig(params=KP, dimension=1), lambda t, x: np.zeros_like(x), np.array([0.0]), grid, 0
    )
    object.__setattr__(traj, "u", None)
    with pytest.raises(DomainError):
        decompose(traj, SDEConfig(params=KP, dimension=1))


def test_trajectory_csv_roundtrip(tmp_path):
    cfg = SDEConfig(params=KP, dimension=1)
    grid = TimeGrid.uniform(8)
    traj = simulate_underdamped_exact(
        cfg, const_control(0.2), np.array([0.0]), np.array([0.1]), grid, seed=12
    )
    path = tmp_path / "traj.csv"
    meta = tmp_path / "traj_meta.jsonl"
    traj.to_csv(path, meta)
    header = path.read_text().splitlines()[0]
    assert header == "t,x_1,y_1,u_1"
    import json

    rec = json.loads(meta.read_text())
    assert rec["seed"] == 12 and rec["n_steps"] == 8 and rec["has_momentum"]
    over = simulate_overdamped(cfg, lambda t, x: np.zeros_like(x), np.array([0.0]), grid, 0)
    over.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,x_1,u_1"
