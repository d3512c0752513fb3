"""Small-mass lifts of a first-order bridge path.

Given a path X of the first-order dynamics sampled along the warped times
``phi^m(t_k)``, ``build_zm`` assembles the position/momentum pair driven by
the warped increments,

    X^m(t) = X(0) + K(t) Y^m(0) + int_0^t K(t-s)/K(1-s) dX(phi(s)),
    Y^m(t) = e^{-gamma t/m} Y^m(0) + int_0^t e^{-gamma(t-s)/m}/K(1-s) dX(phi(s)),

with Y^m(0) = (X(phi(0)) - X(0))/K(1).  The terminal position coincides
with X(1) identically (at t = 1 the integrand weight is 1 and the
increments telescope), and the pair collapses onto (X, 0) as the mass
vanishes.  The equivalent smoothing-operator closed form
``(1 - K(t)/K(1)) X(0) + f(t) Psi(X(phi(.))/f(.)^2)(t)`` is kept as an
independent cross-check route.  ``build_zm_beta`` shifts the construction
to a prescribed initial momentum by adding the closed-form response to the
constant control correction
beta = gamma (X(phi(0)) - X(0) - K(1) Y0) / (1 - phi(0)).
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .kernels import (
    KernelParams,
    SampledPath,
    TimeGrid,
    kernel_K,
    kernel_f,
    kernel_phi,
    kernel_phi_inverse,
    psi_nodes,
)

#: matching tolerance when locating warped nodes inside a simulation grid
NODE_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class CouplingResult:
    """Lifted pair plus the effective control fed to the cost."""

    Xm: SampledPath
    Ym: SampledPath
    control: SampledPath
    terminal_gap: float
    params: KernelParams

    @property
    def initial_momentum(self):
        return self.Ym.values[0]

    def to_csv(self, path, meta_path=None):
        """Columns t, xm_1..xm_d, ym_1..ym_d, v_1..v_d plus a JSON sidecar."""
        from .measures import _write_csv

        xm = np.atleast_2d(self.Xm.values.T).T
        ym = np.atleast_2d(self.Ym.values.T).T
        v = np.atleast_2d(self.control.values.T).T
        d = xm.shape[1]
        header = (
            ["t"]
            + [f"xm_{i + 1}" for i in range(d)]
            + [f"ym_{i + 1}" for i in range(d)]
            + [f"v_{i + 1}" for i in range(d)]
        )
        _write_csv(path, header, np.hstack([self.Xm.grid.nodes[:, None], xm, ym, v]))
        if meta_path is not None:
            import json

            meta = {
                "m": self.params.m,
                "gamma": self.params.gamma,
                "terminal_gap": self.terminal_gap,
            }
            with open(meta_path, "w") as fh:
                json.dump(meta, fh, sort_keys=True)
                fh.write("\n")


def warped_eval_grid(params, n_steps, end_cap=None):
    """Uniform evaluation nodes whose warped images stay clear of t = 1.

    Keeps the nodes t_k = k/n with phi^m(t_k) <= 1 - end_cap; the default
    cap is one uniform step, so warped and plain evaluations truncate the
    singular terminal layer at the same warped time.
    """
    if end_cap is None:
        end_cap = 1.0 / n_steps
    nodes = np.linspace(0.0, 1.0, n_steps + 1)
    t_max = kernel_phi_inverse(params, 1.0 - end_cap)
    return TimeGrid(nodes[nodes <= t_max + 1e-14])


def union_grid(base_nodes, extra_nodes):
    """Sorted union with tolerance dedup; returns (nodes, idx_base, idx_extra)."""
    merged = np.sort(np.concatenate([np.asarray(base_nodes), np.asarray(extra_nodes)]))
    keep = np.concatenate([[True], np.diff(merged) > NODE_MATCH_TOL * 0.01])
    nodes = merged[keep]
    return nodes, locate_nodes(nodes, base_nodes), locate_nodes(nodes, extra_nodes)


def locate_nodes(haystack, needles):
    """Indices of needles inside haystack, matched within NODE_MATCH_TOL."""
    haystack = np.asarray(haystack)
    needles = np.asarray(needles)
    idx = np.clip(np.searchsorted(haystack, needles), 0, haystack.size - 1)
    left = np.clip(idx - 1, 0, haystack.size - 1)
    idx = np.where(
        np.abs(haystack[left] - needles) < np.abs(haystack[idx] - needles), left, idx
    )
    if np.any(np.abs(haystack[idx] - needles) > NODE_MATCH_TOL):
        worst = float(np.max(np.abs(haystack[idx] - needles)))
        raise DomainError(f"grid does not contain required nodes (off by {worst:.2e})")
    return idx


def _cell_log_ratios(params, t):
    """Per-cell quantities of the warped-response quadrature.

    Returns (L, w_mom, w_flat) with, for the cell ending at t_{k+1},
    a = gamma (1 - t_{k+1})/m, delta = gamma dt/m:

        L      = log f(t_k) - log f(t_{k+1})                    (>= 0)
        w_mom  = gamma int_cell e^{-gamma(t_{k+1}-s)/m}/K(1-s) ds
               = gamma e^a L / lambda
        w_flat = gamma int_cell ds / K(1-s) = gamma (dt + L/lambda)

    The asymptotic branch of w_mom covers e^a overflow (where it tends to
    gamma (1 - e^{-delta})/lambda).
    """
    lam = params.rate
    a = lam * (1.0 - t[1:])
    delta = lam * np.diff(t)
    safe = a < 500.0
    a_s = np.where(safe, a, 1.0)
    log_ratio = np.log1p(-np.exp(-a_s - delta)) - np.log1p(-np.exp(-a_s))
    log_ratio = np.where(safe, log_ratio, 0.0)
    w_mom = params.gamma * np.where(
        safe, np.exp(a_s) * log_ratio / lam, -np.expm1(-delta) / lam
    )
    w_flat = params.gamma * (np.diff(t) + log_ratio / lam)
    if not (np.all(np.isfinite(w_mom)) and np.all(np.isfinite(w_flat))):
        bad = t[1:][~(np.isfinite(w_mom) & np.isfinite(w_flat))]
        raise NumericalError(
            f"degenerate right-end kernel weights at t={bad[:3]}; "
            "trim the evaluation grid away from 1"
        )
    return log_ratio, w_mom, w_flat


def _coupling_pieces(params, eval_nodes, x_warp, x0):
    """Shared interior assembly; x_warp has shape (n_nodes, ...).

    Uses the integration-by-parts form of the lift: the warped path
    increments drive the two exact kernel responses

        G(t) = int_0^t e^{-gamma(t-s)/m} / K(1-s) dX(phi(s)),
        H(t) = int_0^t 1 / K(1-s) dX(phi(s)),

    and with Y^m(0) = (X(phi(0)) - X(0))/K(1)

        X^m(t) = X(0) + K(t) Y^m(0) + (H(t) - G(t))/gamma,
        Y^m(t) = e^{-gamma t/m} Y^m(0) + G(t).

    This is algebraically identical to the smoothing-operator closed form
    (see ``smoothing_route_xm``) but treats the sampled path itself as the
    piecewise-linear object, so a constant path is reproduced exactly and
    the near-terminal 1/f^2 weights never appear.
    """
    t = np.asarray(eval_nodes, dtype=float)
    if t.size == 0 or t[0] != 0.0:
        raise DomainError("evaluation grid must start at 0")
    if t[-1] >= 1.0:
        raise DomainError("interior evaluation nodes must stay below t = 1")
    f_t = kernel_f(params, t)
    shape = (t.size,) + (1,) * (x_warp.ndim - 1)
    dt = np.diff(t)
    decay_step = np.exp(-params.rate * dt)
    _, w_mom, w_flat = _cell_log_ratios(params, t)
    slopes = np.diff(x_warp, axis=0) / dt.reshape((dt.size,) + (1,) * (x_warp.ndim - 1))
    flat_resp = np.zeros_like(x_warp)
    mom_resp = np.zeros_like(x_warp)
    acc_h = np.zeros(x_warp.shape[1:])
    acc_g = np.zeros(x_warp.shape[1:])
    for k in range(dt.size):
        acc_h = acc_h + w_flat[k] * slopes[k]
        acc_g = decay_step[k] * acc_g + w_mom[k] * slopes[k]
        flat_resp[k + 1] = acc_h
        mom_resp[k + 1] = acc_g
    k_one = float(kernel_K(params, 1.0))
    y0 = (x_warp[0] - x0) / k_one
    k_t = kernel_K(params, t).reshape(shape)
    decay = np.exp(-params.rate * t).reshape(shape)
    xm = x0 + k_t * y0 + (flat_resp - mom_resp) / params.gamma
    ym = decay * y0 + mom_resp
    return xm, ym, f_t.reshape(shape)


def smoothing_route_xm(params, eval_nodes, x_warp, x0):
    """Literal smoothing-operator form of the position lift.

    (1 - K(t)/K(1)) X(0) + f(t) Psi( X(phi(.))/f(.)^2 )(t) with the operator
    applied to the piecewise-linear interpolant of the weighted path; kept
    as an independent route for cross-validating ``_coupling_pieces``.
    """
    t = np.asarray(eval_nodes, dtype=float)
    f_sq = kernel_f(params, t) ** 2
    shape = (t.size,) + (1,) * (x_warp.ndim - 1)
    smoothed = psi_nodes(t, x_warp / f_sq.reshape(shape), params)
    k_t = kernel_K(params, t).reshape(shape)
    k_one = float(kernel_K(params, 1.0))
    return (1.0 - k_t / k_one) * x0 + np.sqrt(f_sq).reshape(shape) * smoothed


def build_zm_arrays(params, eval_nodes, x_warp, u_warp, x0, x1):
    """Vectorized core of build_zm; trailing axes are carried through.

    Returns (grid_nodes, Xm, Ym, control) with the terminal node t = 1
    appended: X^m(1) := X(1) (exact by the telescoping identity), Y^m(1)
    reported as the last interior value, control(1) = 0 since f(1) = 0.
    """
    xm, ym, f_t = _coupling_pieces(params, eval_nodes, x_warp, x0)
    control = u_warp * f_t
    nodes = np.concatenate([eval_nodes, [1.0]])
    xm = np.concatenate([xm, x1[None]], axis=0)
    ym = np.concatenate([ym, ym[-1:]], axis=0)
    control = np.concatenate([control, np.zeros_like(control[-1:])], axis=0)
    return nodes, xm, ym, control


def build_zm(traj, params, eval_grid):
    """Lift one first-order trajectory to a mass-m admissible pair.

    The trajectory grid must contain the warped nodes phi^m(t_k) of the
    evaluation grid (simulate on ``union_grid`` of the two), all of which
    must be interior; the terminal position is taken from the final
    trajectory node, which must be t = 1.
    """
    t = eval_grid.nodes if isinstance(eval_grid, TimeGrid) else np.asarray(eval_grid)
    if traj.grid.nodes[-1] != 1.0:
        raise DomainError("source trajectory must end at t = 1")
    warped = kernel_phi(params, t)
    idx = locate_nodes(traj.grid.nodes, warped)
    nodes, xm, ym, control = build_zm_arrays(
        params, t, traj.X[idx], traj.u[idx], traj.X[0], traj.X[-1]
    )
    grid = TimeGrid(nodes)
    return CouplingResult(
        Xm=SampledPath(grid, xm),
        Ym=SampledPath(grid, ym),
        control=SampledPath(grid, control),
        terminal_gap=0.0,
        params=params,
    )


def offset_response_integrals(params, t):
    """Closed forms of int_0^t K(t-s) f(s) ds and int_0^t e^{-g(t-s)/m} f(s) ds.

    These are the position and momentum responses to a constant unit control
    modulated by f; at t = 1 the first equals (1 - phi(0))/gamma.
    """
    t = np.asarray(t, dtype=float)
    m, g = params.m, params.gamma
    k_t = kernel_K(params, t)
    e_left = np.exp(-g * (1.0 - t) / m)
    e_mid = np.exp(-g / m)
    e_far = np.exp(-g * (1.0 + t) / m)
    j_resp = m * k_t - (m / (2.0 * g)) * (e_left - e_far)
    i_resp = (t - m * k_t - (m / g) * (e_left - e_mid) + (m / (2.0 * g)) * (e_left - e_far)) / g
    return i_resp, j_resp


def beta_correction(params, x_at_phi0, x0, y0_sample):
    """gamma (X(phi(0)) - X(0) - K(1) Y0) / (1 - phi(0))."""
    k_one = float(kernel_K(params, 1.0))
    phi0 = float(kernel_phi(params, 0.0))
    return params.gamma * (x_at_phi0 - x0 - k_one * y0_sample) / (1.0 - phi0)


def build_zm_beta(traj, params, eval_grid, y0_sample):
    """Variant with prescribed initial momentum and constant control shift.

    The output is the base lift plus the deterministic linear response to
    (momentum offset, constant control beta); the terminal correction
    vanishes identically, and the realized defect before snapping is
    recorded as ``terminal_gap``.
    """
    t = eval_grid.nodes if isinstance(eval_grid, TimeGrid) else np.asarray(eval_grid)
    if traj.grid.nodes[-1] != 1.0:
        raise DomainError("source trajectory must end at t = 1")
    y0_sample = np.asarray(y0_sample, dtype=float)
    warped = kernel_phi(params, t)
    idx = locate_nodes(traj.grid.nodes, warped)
    x_warp, u_warp = traj.X[idx], traj.u[idx]
    x0, x1 = traj.X[0], traj.X[-1]
    xm, ym, f_t = _coupling_pieces(params, t, x_warp, x0)
    dy0 = y0_sample - ym[0]
    beta = -params.gamma * float(kernel_K(params, 1.0)) * dy0 / (1.0 - float(kernel_phi(params, 0.0)))
    i_resp, j_resp = offset_response_integrals(params, t)
    shape = (t.size,) + (1,) * (xm.ndim - 1)
    k_t = kernel_K(params, t).reshape(shape)
    decay = np.exp(-params.rate * t).reshape(shape)
    xm = xm + k_t * dy0 + i_resp.reshape(shape) * beta
    ym = ym + decay * dy0 + j_resp.reshape(shape) * beta
    control = (u_warp + beta) * f_t
    i_end, _ = offset_response_integrals(params, 1.0)
    terminal_offset = float(kernel_K(params, 1.0)) * dy0 + float(i_end) * beta
    gap = float(np.max(np.abs(terminal_offset)))
    nodes = np.concatenate([t, [1.0]])
    xm = np.concatenate([xm, x1[None]], axis=0)
    ym = np.concatenate([ym, ym[-1:]], axis=0)
    control = np.concatenate([control, np.zeros_like(control[-1:])], axis=0)
    grid = TimeGrid(nodes)
    return CouplingResult(
        Xm=SampledPath(grid, xm),
        Ym=SampledPath(grid, ym),
        control=SampledPath(grid, control),
        terminal_gap=gap,
        params=params,
    )


def eta_transform(traj, params):
    """eta(t) = X(t) + K(1-t) Y(t); eta(1) = X(1) since K(0) = 0."""
    if traj.Y is None:
        raise DomainError("eta transform needs the momentum component")
    t = traj.grid.nodes
    shape = (t.size,) + (1,) * (traj.X.ndim - 1)
    k = kernel_K(params, 1.0 - t).reshape(shape)
    return SampledPath(traj.grid, traj.X + k * traj.Y)


def psi_quadrature_selftest(params, n_steps=256, end_cap=None):
    """Max defect of f(t) Psi(1/f^2)(t) = K(t)/K(1) on a capped grid.

    Exercises exactly the near-singular smoothing weights the lift uses.
    """
    grid = warped_eval_grid(params, n_steps, end_cap)
    t = grid.nodes
    f_sq = kernel_f(params, t) ** 2
    smoothed = psi_nodes(t, 1.0 / f_sq, params)
    lhs = np.sqrt(f_sq) * smoothed
    rhs = kernel_K(params, t) / kernel_K(params, 1.0)
    return float(np.max(np.abs(lhs - rhs)))


GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def momentum_bound(params, v0_plus_1, c1_lower, dimension):
    """Explicit admissible first-moment radius for the initial momentum.

    (1/f(0)) inf_{R > 0} [ R phi(0) + v0_plus_1 / C_{1,R} + sqrt(d phi(0)) ],
    minimized by golden-section search over log R in [1e-6, 1e6].
    """
    if v0_plus_1 <= 0 or dimension < 1:
        raise DomainError("need a positive value bound and dimension >= 1")
    phi0 = float(kernel_phi(params, 0.0))
    f0 = float(kernel_f(params, 0.0))
    tail = np.sqrt(dimension * phi0)

    def objective(log_r):
        r = np.exp(log_r)
        c = c1_lower(r)
        if not np.isfinite(c) or c <= 0:
            return np.inf
        return r * phi0 + v0_plus_1 / c + tail

    lo, hi = np.log(1e-6), np.log(1e6)
    a, b = lo, hi
    c_pt = b - GOLDEN * (b - a)
    d_pt = a + GOLDEN * (b - a)
    fc, fd = objective(c_pt), objective(d_pt)
    for _ in range(200):
        if fc <= fd:
            b, d_pt, fd = d_pt, c_pt, fc
            c_pt = b - GOLDEN * (b - a)
            fc = objective(c_pt)
        else:
            a, c_pt, fc = c_pt, d_pt, fd
            d_pt = a + GOLDEN * (b - a)
            fd = objective(d_pt)
        if b - a < 1e-12:
            break
    best = min(objective(0.5 * (a + b)), fc, fd, objective(lo), objective(hi))
    if not np.isfinite(best):
        raise NumericalError("momentum bound objective has no finite value")
    return best / f0
