"""Entropic bridge construction and the explicit value functions.

The first-order reference dynamics is ``X(0) + W(t)/gamma``, so endpoint
couplings are scored against the Gibbs kernel ``g(1/gamma^2, y - x)`` and the
steering drift of the conditioned process uses the remaining variance
``(1 - t)/gamma^2``.  ``sinkhorn`` computes the discrete potentials in the
log domain; ``bridge_drift_m0`` turns them into a feedback control.

For a bounded terminal reward the log-heat value function ``phi`` and its
mass-m lift ``psi^m(t, x, y) = phi(phi^m(t), x + K^m(1-t) y)`` are evaluated
by Gauss-Hermite quadrature, together with the feedback control
``K^m(1-t) grad phi`` and finite-difference residuals of the dynamic
programming equations both functions satisfy.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConvergenceError, DomainError, NumericalError
from .kernels import kernel_K, kernel_phi
from .measures import DiscreteCoupling, _write_csv, round_to_marginals

DEFAULT_SINKHORN_TOL = 1e-10
DEFAULT_SINKHORN_MAX_ITER = 100_000
#: feedback drifts are singular at t = 1; callers stop one guard early
DRIFT_END_GUARD = 1e-6
DEFAULT_QUAD_NODES = 64


def log_gaussian_density(t, x):
    """log of the centered Gaussian density with variance t per coordinate."""
    if t <= 0:
        raise DomainError("variance parameter must be positive")
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    d = x.shape[-1]
    sq = np.sum(x * x, axis=-1)
    return -0.5 * d * np.log(2.0 * np.pi * t) - sq / (2.0 * t)


def gaussian_density(t, x):
    return np.exp(log_gaussian_density(t, x))


@dataclass(frozen=True)
class SinkhornPotentials:
    """Discrete bridge potentials over the two marginal supports."""

    source_potentials: np.ndarray
    target_potentials: np.ndarray
    gamma: float
    source: "object"
    target: "object"
    iterations_used: int
    residual: float
    tol: float

    @property
    def log_target_scaling(self):
        # log(w1_j) - v_j: the target-side factor of the induced plan
        return np.log(self.target.weights) - self.target_potentials

    @property
    def log_source_scaling(self):
        return np.log(self.source.weights) - self.source_potentials

    def log_plan(self):
        lg = _log_gibbs(self.source, self.target, self.gamma)
        return self.log_source_scaling[:, None] + lg + self.log_target_scaling[None, :]

    def plan(self, rounded=True):
        pi = np.exp(self.log_plan())
        if rounded:
            pi = round_to_marginals(pi, self.source.weights, self.target.weights)
        return DiscreteCoupling(self.source, self.target, pi)

    def to_csv(self, source_path, target_path, meta_path=None):
        for measure, pots, path in (
            (self.source, self.source_potentials, source_path),
            (self.target, self.target_potentials, target_path),
        ):
            header = [f"x_{i + 1}" for i in range(measure.dimension)] + ["potential"]
            _write_csv(path, header, np.column_stack([measure.points, pots]))
        if meta_path is not None:
            meta = {
                "gamma": self.gamma,
                "tol": self.tol,
                "residual": self.residual,
                "iterations": self.iterations_used,
            }
            with open(meta_path, "w") as fh:
                json.dump(meta, fh, sort_keys=True)
                fh.write("\n")


def _log_gibbs(p0, p1, gamma):
    diff = p1.points[None, :, :] - p0.points[:, None, :]
    return log_gaussian_density(1.0 / gamma**2, diff)


def sinkhorn(p0, p1, gamma, tol=DEFAULT_SINKHORN_TOL, max_iter=DEFAULT_SINKHORN_MAX_ITER):
    """Log-domain alternating scaling on the Gibbs matrix.

    Stops when the total-variation defect of the worse marginal of the
    induced plan drops below tol; raises ConvergenceError (carrying the last
    residual) when the iteration budget runs out.
    """
    if p0.dimension != p1.dimension:
        raise DomainError("marginals must share a dimension")
    if tol <= 0:
        raise DomainError("tol must be positive")
    if np.any(p0.weights <= 0) or np.any(p1.weights <= 0):
        raise DomainError("sinkhorn requires strictly positive weights")
    logp = np.log(p0.weights)
    logq = np.log(p1.weights)
    lg = _log_gibbs(p0, p1, gamma)
    lb = np.zeros(len(p1))
    la = np.zeros(len(p0))
    residual = np.inf
    for it in range(1, max_iter + 1):
        la = logp - logsumexp(lg + lb[None, :], axis=1)
        lb = logq - logsumexp(lg + la[:, None], axis=0)
        rows = np.exp(la + logsumexp(lg + lb[None, :], axis=1))
        residual = float(np.abs(rows - p0.weights).sum())
        if residual <= tol:
            break
    else:
        raise ConvergenceError(
            f"sinkhorn reached {max_iter} iterations at residual {residual:.3e}",
            residual=residual,
        )
    return SinkhornPotentials(
        source_potentials=logp - la,
        target_potentials=logq - lb,
        gamma=gamma,
        source=p0,
        target=p1,
        iterations_used=it,
        residual=residual,
        tol=tol,
    )


def entropic_objective(pot, plan):
    """H(plan || P0 x Gibbs kernel), the quantity the potentials minimize."""
    lg = _log_gibbs(pot.source, pot.target, pot.gamma)
    log_ref = np.log(pot.source.weights)[:, None] + lg
    pi = plan.plan if isinstance(plan, DiscreteCoupling) else np.asarray(plan)
    pos = pi > 0
    return float(np.sum(pi[pos] * (np.log(pi[pos]) - log_ref[pos])))


def bridge_drift_m0(pot, t, x):
    """Feedback control of the conditioned first-order dynamics.

    u(t, x) = (1/gamma) grad_x log sum_j exp(-v_j) w_j g((1-t)/gamma^2, y_j - x),
    evaluated in log space; equals gamma (ybar(x) - x) / (1 - t) with ybar
    the softmax-weighted target point.
    """
    if t >= 1.0:
        raise DomainError("bridge drift is undefined at t >= 1")
    if t < 0.0:
        raise DomainError("time must be nonnegative")
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xb = x[None, :] if squeeze else x
    gamma = pot.gamma
    var = (1.0 - t) / gamma**2
    diff = pot.target.points[None, :, :] - xb[:, None, :]
    logits = pot.log_target_scaling[None, :] - np.sum(diff * diff, axis=-1) / (2.0 * var)
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    norm = w.sum(axis=1, keepdims=True)
    if not np.all(np.isfinite(norm)) or np.any(norm == 0):
        raise NumericalError("bridge drift weights degenerated")
    ybar = (w @ pot.target.points) / norm
    u = gamma * (ybar - xb) / (1.0 - t)
    return u[0] if squeeze else u


class SchrodingerDrift:
    """Markov control wrapper around solved potentials."""

    def __init__(self, potentials):
        self.potentials = potentials

    def __call__(self, t, x):
        return bridge_drift_m0(self.potentials, t, x)


_gh_cache = {}


def _gh_rule(n_nodes, d):
    key = (n_nodes, d)
    if key not in _gh_cache:
        xi, w = np.polynomial.hermite.hermgauss(n_nodes)
        grids = np.meshgrid(*([xi] * d), indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        logw = np.zeros(n_nodes**d)
        for g in np.meshgrid(*([np.log(w)] * d), indexing="ij"):
            logw += g.ravel()
        logw -= 0.5 * d * np.log(np.pi)
        _gh_cache[key] = (nodes, logw)
    return _gh_cache[key]


@dataclass(frozen=True)
class TerminalReward:
    """Bounded terminal payoff with (optionally) an analytic gradient."""

    fn: object
    bound: float
    grad: object = None
    n_nodes: int = DEFAULT_QUAD_NODES

    def __post_init__(self):
        if not (np.isfinite(self.bound) and self.bound >= 0):
            raise DomainError("declared bound must be finite and nonnegative")
        if self.n_nodes < 2:
            raise DomainError("need at least two quadrature nodes")

    def check_bound(self, vals):
        if np.max(np.abs(vals)) > self.bound * (1.0 + 1e-9) + 1e-12:
            raise DomainError("reward exceeds its declared bound on quadrature nodes")


def make_reward(name, *args, n_nodes=DEFAULT_QUAD_NODES):
    """Built-in bounded smooth rewards: cosine, gaussian_bump, constant."""
    if name == "cosine":
        amp = float(args[0]) if args else 0.5
        freq = float(args[1]) if len(args) > 1 else 1.0

        def fn(y):
            return amp * np.cos(freq * np.sum(y, axis=-1))

        def grad(y):
            s = -amp * freq * np.sin(freq * np.sum(y, axis=-1))
            return s[..., None] * np.ones_like(y)

        return TerminalReward(fn, abs(amp), grad, n_nodes)
    if name == "gaussian_bump":
        amp = float(args[0]) if args else 1.0
        width = float(args[1]) if len(args) > 1 else 1.0

        def fn(y):
            return amp * np.exp(-np.sum(y * y, axis=-1) / (2.0 * width**2))

        def grad(y):
            return fn(y)[..., None] * (-y / width**2)

        return TerminalReward(fn, abs(amp), grad, n_nodes)
    if name == "constant":
        c = float(args[0]) if args else 0.0

        def fn(y):
            return np.full(y.shape[:-1], c)

        def grad(y):
            return np.zeros_like(y)

        return TerminalReward(fn, abs(c), grad, n_nodes)
    raise DomainError(f"unknown reward '{name}'")


def _quad_points(reward, t, gamma, x):
    d = x.shape[-1]
    xi, logw = _gh_rule(reward.n_nodes, d)
    scale = np.sqrt(2.0 * (1.0 - t)) / gamma
    y = x[..., None, :] + scale * xi
    return y, logw


def phi_value(reward, gamma, t, x):
    """log E[exp f(Y)] with Y ~ N(x, (1-t)/gamma^2 I); f(x) at t = 1.

    Vectorized over a batch of states: x has shape (..., d) and the result
    shape (...).  Monotone in f, hence bounded between min f and max f.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError("time must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xb = x[None, :] if squeeze else x
    if t == 1.0:
        vals = reward.fn(xb)
        reward.check_bound(vals)
        return float(vals[0]) if squeeze else vals
    y, logw = _quad_points(reward, t, gamma, xb)
    vals = reward.fn(y)
    reward.check_bound(vals)
    out = logsumexp(vals + logw, axis=-1)
    return float(out[0]) if squeeze else out


def grad_phi(reward, gamma, t, x):
    """Analytic x-gradient of phi_value through the quadrature."""
    if reward.grad is None:
        raise DomainError("reward does not provide a gradient")
    if not 0.0 <= t <= 1.0:
        raise DomainError("time must lie in [0, 1]")
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    xb = x[None, :] if squeeze else x
    if t == 1.0:
        g = reward.grad(xb)
        return g[0] if squeeze else g
    y, logw = _quad_points(reward, t, gamma, xb)
    vals = reward.fn(y) + logw
    vals -= logsumexp(vals, axis=-1, keepdims=True)
    p = np.exp(vals)
    g = np.sum(p[..., None] * reward.grad(y), axis=-2)
    return g[0] if squeeze else g


def psi_m_value(reward, params, t, x, y):
    """phi(phi^m(t), x + K^m(1-t) y); equals f(x) at t = 1."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return phi_value(
        reward, params.gamma, float(kernel_phi(params, t)), x + kernel_K(params, 1.0 - t) * y
    )


def optimal_control_m(reward, params, t, x, y):
    """K^m(1-t) grad phi at the lifted state; the optimal feedback control."""
    if t >= 1.0:
        raise DomainError("control is evaluated strictly before t = 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = kernel_K(params, 1.0 - t)
    return k * grad_phi(reward, params.gamma, float(kernel_phi(params, t)), x + k * y)


class ValueControl:
    """Feedback control (t, x, y) -> K^m(1-t) grad phi for the simulators."""

    def __init__(self, reward, params, factor=1.0):
        self.reward = reward
        self.params = params
        self.factor = factor

    def __call__(self, t, x, y):
        return self.factor * optimal_control_m(self.reward, self.params, t, x, y)


def hjb_residual_phi(reward, gamma, t, x, h):
    """Central finite-difference residual of the log-heat equation.

    Assembles d phi/dt + Lap(phi)/(2 gamma^2) + |grad phi|^2/(2 gamma^2); for
    the true value function this is O(h^2).
    """
    if h <= 0:
        raise DomainError("step must be positive")
    if not (h < t < 1.0 - h):
        raise DomainError("time stencil must stay inside [0, 1]")
    x = np.asarray(x, dtype=float)
    d = x.size
    pv = lambda tt, xx: phi_value(reward, gamma, tt, xx)
    center = pv(t, x)
    dt = (pv(t + h, x) - pv(t - h, x)) / (2.0 * h)
    lap = 0.0
    grad_sq = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fp, fm = pv(t, x + e), pv(t, x - e)
        lap += (fp - 2.0 * center + fm) / h**2
        grad_sq += ((fp - fm) / (2.0 * h)) ** 2
    return float(dt + lap / (2.0 * gamma**2) + grad_sq / (2.0 * gamma**2))


def hjb_residual_psi(reward, params, t, x, y, h):
    """Finite-difference residual of the lifted dynamic-programming equation.

    With identity diffusion and quadratic Hamiltonian the equation reads
    psi_t + Lap_y(psi)/2 + <D_x psi/m - gamma D_y psi/m, y> + |D_y psi|^2/2 = 0.
    """
    if h <= 0:
        raise DomainError("step must be positive")
    if not (h < t < 1.0 - h):
        raise DomainError("time stencil must stay inside [0, 1]")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.size
    pv = lambda tt, xx, yy: psi_m_value(reward, params, tt, xx, yy)
    center = pv(t, x, y)
    dt = (pv(t + h, x, y) - pv(t - h, x, y)) / (2.0 * h)
    lap_y = 0.0
    grad_y = np.zeros(d)
    grad_x = np.zeros(d)
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        fp, fm = pv(t, x, y + e), pv(t, x, y - e)
        lap_y += (fp - 2.0 * center + fm) / h**2
        grad_y[i] = (fp - fm) / (2.0 * h)
        grad_x[i] = (pv(t, x + e, y) - pv(t, x - e, y)) / (2.0 * h)
    m, g = params.m, params.gamma
    drift_term = float(np.dot(grad_x / m - (g / m) * grad_y, y))
    return float(dt + 0.5 * lap_y + drift_term + 0.5 * np.dot(grad_y, grad_y))
