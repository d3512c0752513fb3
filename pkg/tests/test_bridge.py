import numpy as np
import pytest

from langot.bridge import (
    SinkhornPotentials,
    bridge_drift_m0,
    entropic_objective,
    gaussian_density,
    grad_phi,
    hjb_residual_phi,
    hjb_residual_psi,
    log_gaussian_density,
    make_reward,
    optimal_control_m,
    phi_value,
    psi_m_value,
    sinkhorn,
)
from langot.errors import ConvergenceError, DomainError
from langot.kernels import KernelParams, kernel_K, kernel_phi
from langot.measures import EmpiricalMeasure

KP = KernelParams(m=0.1, gamma=1.0)


def test_gaussian_density_values():
    assert gaussian_density(1.0, np.array([0.0])) == pytest.approx(
        0.39894228040143267794, abs=1e-15
    )
    x = np.array([0.3, -1.1])
    assert gaussian_density(0.7, x) == gaussian_density(0.7, -x)
    assert gaussian_density(2.0, np.zeros(3)) / gaussian_density(1.0, np.zeros(3)) == pytest.approx(
        2.0 ** (-1.5), abs=1e-14
    )
    with pytest.raises(DomainError):
        gaussian_density(0.0, np.array([0.0]))


def test_sinkhorn_single_point():
    p = EmpiricalMeasure.point_mass([0.4])
    pot = sinkhorn(p, p, 1.0)
    assert pot.residual == 0.0
    plan = pot.plan()
    assert plan.plan.shape == (1, 1) and plan.plan[0, 0] == pytest.approx(1.0, abs=1e-15)


def test_sinkhorn_symmetric_two_point():
    p = EmpiricalMeasure(np.array([-0.8, 0.8]))
    pot = sinkhorn(p, p, 1.0)
    u, v = pot.source_potentials, pot.target_potentials
    assert u[0] == pytest.approx(u[1], abs=1e-9)
    assert v[0] == pytest.approx(v[1], abs=1e-9)
    plan = pot.plan().plan
    assert plan[0, 0] == pytest.approx(plan[1, 1], abs=1e-10)
    assert plan[0, 1] == pytest.approx(plan[1, 0], abs=1e-10)


def _golden_section(fn, lo, hi, iters=200):
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def _two_by_two_objective(pot, p, q):
    lo = max(0.0, q.weights[0] - p.weights[1])
    hi = min(p.weights[0], q.weights[0])

    def objective(theta):
        plan = np.array(
            [
                [theta, p.weights[0] - theta],
                [q.weights[0] - theta, p.weights[1] - q.weights[0] + theta],
            ]
        )
        return entropic_objective(pot, plan)

    return objective, lo, hi


def test_sinkhorn_two_by_two_matches_golden_section():
    p = EmpiricalMeasure(np.array([-0.5, 0.9]))
    q = EmpiricalMeasure(np.array([-1.1, 0.4]))
    pot = sinkhorn(p, q, 1.0, tol=1e-12)
    objective, lo, hi = _two_by_two_objective(pot, p, q)
    theta_star = _golden_section(objective, lo + 1e-12, hi - 1e-12)
    plan_star = np.array(
        [
            [theta_star, p.weights[0] - theta_star],
            [q.weights[0] - theta_star, p.weights[1] - q.weights[0] + theta_star],
        ]
    )
    assert np.max(np.abs(pot.plan().plan - plan_star)) <= 1e-8


def test_sinkhorn_residuals_across_sizes():
    gen = np.random.default_rng(0)
    for n in (2, 3, 4, 8, 16, 32):
        p = EmpiricalMeasure(gen.normal(size=n))
        q = EmpiricalMeasure(gen.normal(size=n) + 0.5)
        pot = sinkhorn(p, q, 1.0)
        assert pot.residual <= 1e-10
        plan = pot.plan().plan
        assert np.abs(plan.sum(axis=1) - p.weights).max() <= 1e-10
        assert np.abs(plan.sum(axis=0) - q.weights).max() <= 1e-10


def test_sinkhorn_three_by_three_perturbation_optimality():
    gen = np.random.default_rng(1)
    p = EmpiricalMeasure(np.array([-1.0, 0.0, 1.0]))
    q = EmpiricalMeasure(np.array([-0.5, 0.3, 1.2]))
    pot = sinkhorn(p, q, 1.0, tol=1e-12)
    plan = pot.plan().plan
    base = entropic_objective(pot, plan)
    for _ in range(1000):
        i1, i2 = gen.choice(3, size=2, replace=False)
        j1, j2 = gen.choice(3, size=2, replace=False)
        eps = min(plan[i1, j2], plan[i2, j1]) * gen.uniform(0.0, 0.5) + 1e-9
        pert = plan.copy()
        pert[i1, j1] += eps
        pert[i2, j2] += eps
        pert[i1, j2] -= eps
        pert[i2, j1] -= eps
        if pert.min() < 0:
            continue
        assert entropic_objective(pot, pert) >= base - 1e-12


def test_sinkhorn_budget_error():
    p = EmpiricalMeasure(np.array([-1.0, 0.3, 1.0]), np.array([0.2, 0.3, 0.5]))
    q = EmpiricalMeasure(np.array([-2.0, 0.1, 2.0]), np.array([0.4, 0.4, 0.2]))
    with pytest.raises(ConvergenceError) as err:
        sinkhorn(p, q, 1.0, tol=1e-300, max_iter=2)
    assert err.value.residual is not None and err.value.residual > 0


def test_bridge_drift_single_target_and_symmetry():
    p0 = EmpiricalMeasure(np.array([-1.0, 1.0]))
    pot = sinkhorn(p0, EmpiricalMeasure.point_mass([0.7]), 1.0)
    for t, x in ((0.0, 0.2), (0.6, -1.4)):
        u = bridge_drift_m0(pot, t, np.array([x]))
        assert u[0] == pytest.approx(1.0 * (0.7 - x) / (1.0 - t), rel=1e-12)
    sym = sinkhorn(p0, EmpiricalMeasure(np.array([-0.9, 0.9])), 1.0)
    assert bridge_drift_m0(sym, 0.4, np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DomainError):
        bridge_drift_m0(pot, 1.0, np.array([0.0]))


def test_bridge_drift_matches_finite_differences():
    gen = np.random.default_rng(2)
    p0 = EmpiricalMeasure(gen.normal(size=4))
    p1 = EmpiricalMeasure(gen.normal(size=5) + 1.0)
    pot = sinkhorn(p0, p1, 1.3, tol=1e-12)
    gamma = 1.3

    def log_density(t, x):
        var = (1.0 - t) / gamma**2
        logits = pot.log_target_scaling - (pot.target.points[:, 0] - x) ** 2 / (2 * var)
        m = logits.max()
        return m + np.log(np.exp(logits - m).sum())

    h = 1e-6
    for _ in range(20):
        t = gen.uniform(0.0, 0.9)
        x = gen.normal()
        fd = (log_density(t, x + h) - log_density(t, x - h)) / (2 * h) / gamma
        u = bridge_drift_m0(pot, t, np.array([x]))[0]
        assert abs(u - fd) <= 1e-6 * max(1.0, abs(u))


COS = make_reward("cosine", 1.0)
HALF_COS = make_reward("cosine", 0.5)


def test_phi_value_constant_and_boundary():
    const = make_reward("constant", 0.37)
    for t, x in ((0.0, 0.5), (0.5, -2.0), (1.0, 3.0)):
        assert phi_value(const, 1.0, t, np.array([x])) == pytest.approx(0.37, abs=1e-12)
    assert phi_value(COS, 1.0, 1.0, np.array([0.3])) == pytest.approx(np.cos(0.3), abs=1e-15)


def test_phi_value_cosine_oracle():
    # frozen 1e6-node trapezoid of log int e^{cos y} N(y; 0, 1) dy
    assert phi_value(COS, 1.0, 0.0, np.array([0.0])) == pytest.approx(
        0.6875695550555073, abs=1e-8
    )


def test_phi_value_bounded_by_reward_range():
    gen = np.random.default_rng(3)
    for _ in range(50):
        t = gen.uniform(0.0, 1.0)
        x = gen.normal(size=1) * 2
        v = phi_value(HALF_COS, 1.0, t, x)
        assert -0.5 - 1e-12 <= v <= 0.5 + 1e-12


def test_psi_m_value_composition():
    gen = np.random.default_rng(4)
    assert psi_m_value(COS, KP, 1.0, np.array([0.4]), np.array([2.0])) == pytest.approx(
        np.cos(0.4), abs=1e-14
    )
    x = np.array([0.3])
    assert psi_m_value(COS, KP, 0.2, x, np.array([0.0])) == pytest.approx(
        phi_value(COS, 1.0, float(kernel_phi(KP, 0.2)), x), abs=1e-14
    )
    # independent oracle: fine trapezoid of the smoothed payoff
    t, xv, yv = 0.3, 0.25, -0.6
    arg = xv + float(kernel_K(KP, 1.0 - t)) * yv
    s2 = (1.0 - float(kernel_phi(KP, t))) / 1.0**2
    y = np.linspace(arg - 14, arg + 14, 400001)
    dens = np.exp(np.cos(y)) * np.exp(-((y - arg) ** 2) / (2 * s2)) / np.sqrt(2 * np.pi * s2)
    ref = np.log(np.trapezoid(dens, y))
    assert psi_m_value(COS, KP, t, np.array([xv]), np.array([yv])) == pytest.approx(ref, abs=1e-8)


def test_psi_m_depends_on_lifted_coordinate_only():
    gen = np.random.default_rng(5)
    k1 = float(kernel_K(KP, 1.0))
    for _ in range(20):
        x1, y1 = gen.normal(), gen.normal()
        shift = gen.normal()
        x2 = x1 + k1 * shift
        y2 = y1 - shift
        a = psi_m_value(COS, KP, 0.0, np.array([x1]), np.array([y1]))
        b = psi_m_value(COS, KP, 0.0, np.array([x2]), np.array([y2]))
        assert a == pytest.approx(b, abs=1e-12)


def test_optimal_control_trivials_and_fd():
    const = make_reward("constant", 1.2)
    assert optimal_control_m(const, KP, 0.3, np.array([0.5]), np.array([0.1]))[0] == 0.0
    near_one = optimal_control_m(COS, KP, 1.0 - 1e-9, np.array([0.5]), np.array([0.1]))
    assert abs(near_one[0]) <= 1e-8
    gen = np.random.default_rng(6)
    h = 1e-6
    for _ in range(20):
        t = gen.uniform(0.0, 0.95)
        x = gen.normal(size=1)
        y = gen.normal(size=1)
        u = optimal_control_m(COS, KP, t, x, y)[0]
        fd = (
            psi_m_value(COS, KP, t, x, y + h) - psi_m_value(COS, KP, t, x, y - h)
        ) / (2 * h)
        assert abs(u - fd) <= 1e-6 * max(1.0, abs(u))
    with pytest.raises(DomainError):
        optimal_control_m(COS, KP, 1.0, np.array([0.0]), np.array([0.0]))


def test_grad_phi_matches_fd_in_2d():
    bump = make_reward("gaussian_bump", 0.8, 1.5)
    gen = np.random.default_rng(7)
    h = 1e-6
    for _ in range(10):
        t = gen.uniform(0.0, 0.9)
        x = gen.normal(size=2)
        g = grad_phi(bump, 1.0, t, x)
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            fd = (phi_value(bump, 1.0, t, x + e) - phi_value(bump, 1.0, t, x - e)) / (2 * h)
            assert g[i] == pytest.approx(fd, abs=1e-7)


def test_hjb_residual_phi_refines_second_order():
    gen = np.random.default_rng(8)
    ratios = []
    for _ in range(10):
        t = gen.uniform(0.1, 0.9)
        x = gen.normal(size=1)
        r1 = hjb_residual_phi(HALF_COS, 1.0, t, x, 0.02)
        r2 = hjb_residual_phi(HALF_COS, 1.0, t, x, 0.01)
        ratios.append((r1, r2))
    r1 = np.sqrt(np.mean([a**2 for a, _ in ratios]))
    r2 = np.sqrt(np.mean([b**2 for _, b in ratios]))
    assert 3.5 <= r1 / r2 <= 4.5


def test_hjb_residual_phi_flags_perturbation():
    # adding a linear ramp breaks the equation by |slope|^2 / (2 gamma^2)
    t, x, h = 0.5, np.array([0.2]), 0.01
    base = hjb_residual_phi(HALF_COS, 1.0, t, x, h)

    def perturbed(tt, xx):
        return phi_value(HALF_COS, 1.0, tt, xx) + 0.1 * xx[0]

    center = perturbed(t, x)
    dt = (perturbed(t + h, x) - perturbed(t - h, x)) / (2 * h)
    fp, fm = perturbed(t, x + h), perturbed(t, x - h)
    lap = (fp - 2 * center + fm) / h**2
    grad_sq = ((fp - fm) / (2 * h)) ** 2
    res = dt + 0.5 * lap + 0.5 * grad_sq
    assert abs(res) >= abs(base) + 1e-3


def test_hjb_residual_psi_refines_and_boundary():
    gen = np.random.default_rng(9)
    params = KernelParams(m=0.1, gamma=1.0)
    r1 = []
    r2 = []
    for _ in range(10):
        t = gen.uniform(0.1, 0.9)
        x = gen.normal(size=1)
        y = gen.normal(size=1)
        r1.append(hjb_residual_psi(HALF_COS, params, t, x, y, 0.02))
        r2.append(hjb_residual_psi(HALF_COS, params, t, x, y, 0.01))
    ratio = np.sqrt(np.mean(np.array(r1) ** 2)) / np.sqrt(np.mean(np.array(r2) ** 2))
    assert 3.5 <= ratio <= 4.5
    const = make_reward("constant", 0.9)
    assert abs(hjb_residual_psi(const, params, 0.5, np.array([0.1]), np.array([0.2]), 0.01)) <= 1e-10
    # terminal condition
    assert psi_m_value(HALF_COS, params, 1.0, np.array([1.3]), np.array([-2.0])) == pytest.approx(
        0.5 * np.cos(1.3), abs=1e-14
    )


def test_bridge_drift_is_gradient_field_2d():
    gen = np.random.default_rng(10)
    p0 = EmpiricalMeasure(gen.normal(size=(3, 2)))
    p1 = EmpiricalMeasure(gen.normal(size=(4, 2)) + 0.5)
    pot = sinkhorn(p0, p1, 1.0, tol=1e-12)
    h = 1e-5
    for _ in range(10):
        t = gen.uniform(0.0, 0.8)
        x = gen.normal(size=2)
        du1_dx2 = (
            bridge_drift_m0(pot, t, x + np.array([0.0, h]))[0]
            - bridge_drift_m0(pot, t, x - np.array([0.0, h]))[0]
        ) / (2 * h)
        du2_dx1 = (
            bridge_drift_m0(pot, t, x + np.array([h, 0.0]))[1]
            - bridge_drift_m0(pot, t, x - np.array([h, 0.0]))[1]
        ) / (2 * h)
        assert du1_dx2 == pytest.approx(du2_dx1, abs=1e-5)


def test_reward_bound_enforced():
    liar = type(COS)(fn=lambda y: 2.0 * np.cos(np.sum(y, axis=-1)), bound=0.5, grad=None)
    with pytest.raises(DomainError):
        phi_value(liar, 1.0, 0.5, np.array([0.0]))


def test_potentials_serialization(tmp_path):
    p = EmpiricalMeasure(np.array([-1.0, 1.0]))
    q = EmpiricalMeasure(np.array([0.0, 2.0]))
    pot = sinkhorn(p, q, 1.0)
    src = tmp_path / "src.csv"
    tgt = tmp_path / "tgt.csv"
    meta = tmp_path / "meta.json"
    pot.to_csv(src, tgt, meta)
    assert src.read_text().startswith("x_1,potential")
    assert '"gamma": 1.0' in meta.read_text()
