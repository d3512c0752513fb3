"""Experiment pipelines and verdict machinery.

Scenarios (a closed registry): ``zero_mass`` and ``zero_mass_beta`` verify
the small-mass convergence of the lifted couplings against the first-order
bridge value; ``duality`` checks the explicit value function against
simulated optimal control; ``marginal`` verifies endpoint laws;
``deterministic`` exercises the noiseless action decomposition;
``assumptions`` runs the cost-assumption falsifiers.

Every verdict records the rule id it applied, the tolerance, and the
measured value.  Emitted CSV files are byte-stable given identical inputs;
the JSONL metadata additionally carries wall-clock timing.
"""

import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__, rng
from .bridge import (
    SchrodingerDrift,
    ValueControl,
    hjb_residual_phi,
    hjb_residual_psi,
    make_reward,
    phi_value,
    psi_m_value,
    sinkhorn,
)
from .costs import (
    CostFunction,
    check_assumptions,
    deterministic_identity_check,
    evaluate,
    mc_value,
    midpoint_convexity_check,
    remark_counterexample,
)
from .coupling import (
    _coupling_pieces,
    beta_correction,
    locate_nodes,
    momentum_bound,
    offset_response_integrals,
    union_grid,
    warped_eval_grid,
)
from .errors import ConfigError
from .kernels import KernelParams, kernel_K, kernel_phi
from .measures import (
    EmpiricalMeasure,
    _write_csv,
    energy_distance,
    wasserstein2_squared_1d,
)
from .sde import SDEConfig, overdamped_batch, underdamped_exact_batch

SCENARIOS = (
    "zero_mass",
    "zero_mass_beta",
    "duality",
    "marginal",
    "deterministic",
    "assumptions",
)

CHUNK_PATHS = 1024


@dataclass
class ExperimentConfig:
    """Flat experiment description; every field has a config-file key."""

    scenario: str = "zero_mass"
    p0: str = "gaussian 0.0 1.0"
    p1: str = "gaussian 1.0 0.5"
    p0_alt: str = "gaussian 1.5 0.7"
    gamma: float = 1.0
    m_grid: tuple = (0.2, 0.1, 0.05, 0.02)
    n_paths: int = 4096
    grid_size: int = 2048
    support: int = 48
    cost_kind: str = "quadratic"
    cost_a: tuple = ()
    cost_p: tuple = ()
    cost_potential: str = "zero"
    reward: str = "cosine 0.5 1.0"
    y_star: float = 0.7
    y0_scale: float = 1.0
    counterexample_p: float = 1.5
    seed: int = 7
    sinkhorn_tol: float = 1e-10
    sinkhorn_max_iter: int = 100_000
    tol_w2: float = 0.01
    tol_energy: float = 0.05
    quad_nodes: int = 64
    hjb_step: float = 0.02
    out_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario '{self.scenario}'")
        m = np.asarray(self.m_grid, dtype=float)
        if m.size == 0 or np.any(m <= 0) or np.any(np.diff(m) >= 0):
            raise ConfigError("m_grid must be strictly decreasing and positive")
        cap = self.cost().epsilon0 * self.gamma / 2.0
        if np.any(m > cap):
            raise ConfigError(f"m_grid entries must stay within the admissible cap {cap}")
        if self.n_paths < 100:
            raise ConfigError("n_paths must be at least 100")
        if self.grid_size < 2 or self.grid_size & (self.grid_size - 1):
            raise ConfigError("grid_size must be a power of two")
        if self.support < 1:
            raise ConfigError("support must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    def cost(self):
        return CostFunction(
            kind=self.cost_kind,
            coefficients=tuple(self.cost_a),
            exponents=tuple(self.cost_p),
            potential_name=self.cost_potential,
        )

    def measure(self, spec):
        parts = str(spec).split()
        if not parts:
            raise ConfigError("empty marginal spec")
        if parts[0] == "gaussian" and len(parts) == 3:
            return EmpiricalMeasure.gaussian_quantiles(
                float(parts[1]), float(parts[2]), self.support
            )
        if parts[0] == "point" and len(parts) >= 2:
            return EmpiricalMeasure.point_mass([float(v) for v in parts[1:]])
        if parts[0] == "csv" and len(parts) == 2:
            return EmpiricalMeasure.from_csv(parts[1])
        raise ConfigError(f"cannot parse marginal spec '{spec}'")

    def reward_fn(self):
        parts = str(self.reward).split()
        return make_reward(parts[0], *parts[1:], n_nodes=self.quad_nodes)

    def echo(self):
        out = dataclasses.asdict(self)
        out["m_grid"] = list(self.m_grid)
        out["cost_a"] = list(self.cost_a)
        out["cost_p"] = list(self.cost_p)
        return out


_TUPLE_KEYS = {"m_grid", "cost_a", "cost_p"}
_INT_KEYS = {"n_paths", "grid_size", "support", "seed", "sinkhorn_max_iter", "quad_nodes", "threads"}
_STR_KEYS = {"scenario", "p0", "p1", "p0_alt", "cost_kind", "cost_potential", "reward", "out_dir"}


def parse_config(text):
    """Flat ``key = value`` lines; '#' comments; unknown keys are errors."""
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        if key in _TUPLE_KEYS:
            values[key] = tuple(float(v) for v in val.split())
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _STR_KEYS:
            values[key] = val
        else:
            values[key] = float(val)
    return ExperimentConfig(**values)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())


@dataclass(frozen=True)
class Verdict:
    rule_id: str
    passed: bool
    tolerance: float
    measured: float
    detail: str = ""

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return (
            f"[{status}] {self.rule_id}: measured={self.measured:.6g} "
            f"tolerance={self.tolerance:.6g}{extra}"
        )


@dataclass(frozen=True)
class ConvergenceRow:
    m: float
    cost_mean: float
    cost_stderr: float
    sup_dev_x: float
    sup_dev_y: float
    terminal_gap_max: float
    mean_abs_y0: float
    momentum_bound_c: float
    y0_moment: float = float("nan")


def emit(obj, fmt, path):
    """Write a row table (csv) or a report mapping (jsonl)."""
    try:
        if fmt == "csv":
            rows = list(obj)
            if not rows:
                raise ConfigError("nothing to emit")
            first = rows[0]
            header = [f.name for f in dataclasses.fields(first)]
            data = np.array(
                [[getattr(r, name) for name in header] for r in rows], dtype=float
            )
            _write_csv(path, header, data)
        elif fmt == "jsonl":
            records = obj if isinstance(obj, list) else [obj]
            with open(path, "w") as fh:
                for rec in records:
                    json.dump(rec, fh, sort_keys=True, default=_json_default)
                    fh.write("\n")
        else:
            raise ConfigError(f"unknown emission format '{fmt}'")
    except OSError as exc:
        raise OSError(f"while writing {path}: {exc}") from exc


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def _run_chunks(n_paths, threads, worker):
    """Split path indices into chunks and merge per-path result dicts."""
    n_chunks = max(1, int(np.ceil(n_paths / CHUNK_PATHS)))
    ranges = np.array_split(np.arange(n_paths), n_chunks)
    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(worker, ranges))
    else:
        results = [worker(r) for r in ranges]
    merged = {}
    for key in results[0]:
        parts = [r[key] for r in results]
        merged[key] = np.concatenate(parts, axis=-1 if parts[0].ndim == 1 else 1)
    return merged


def _draw_initial_atoms(measure, seed, path_indices):
    cum = np.cumsum(measure.weights)
    u = rng.uniform_vector(seed, path_indices, rng.SCENARIO)
    idx = np.clip(np.searchsorted(cum, u, side="right"), 0, len(measure) - 1)
    return measure.points[idx]


def _trapz_cost(nodes, x, y, u, cost):
    z = np.concatenate([x, np.zeros_like(x) if y is None else y], axis=-1)
    integrand = evaluate(cost, nodes[:, None], z, u)
    return np.trapezoid(integrand, nodes, axis=0)


class _BridgeEngine:
    """Shared machinery of the scenarios driven by the first-order bridge."""

    def __init__(self, config):
        self.config = config
        self.cost = config.cost()
        self.p0 = config.measure(config.p0)
        self.p1 = config.measure(config.p1)
        if self.p0.dimension != 1 or self.p1.dimension != 1:
            raise ConfigError("bridge scenarios support dimension 1 marginals")
        self.potentials = sinkhorn(
            self.p0, self.p1, config.gamma, config.sinkhorn_tol, config.sinkhorn_max_iter
        )
        self.drift = SchrodingerDrift(self.potentials)
        self.sde = SDEConfig(params=KernelParams(m=1.0, gamma=config.gamma), dimension=1)

    def base_run(self):
        """Uniform-grid run: per-path plain action and terminal position."""
        cfg = self.config
        nodes = np.linspace(0.0, 1.0, cfg.grid_size + 1)

        def worker(paths):
            x0 = _draw_initial_atoms(self.p0, cfg.seed, paths)
            noise = rng.noise_block(cfg.seed, paths, nodes.size - 1)
            X, U, _ = overdamped_batch(self.sde, self.drift, x0, nodes, noise)
            # the controlled segment stops one step short of the horizon
            act = _trapz_cost(nodes[:-1], X[:-1], None, U[:-1], self.cost)
            return {"action": act, "x_last": X[-1, :, 0]}

        return _run_chunks(cfg.n_paths, cfg.threads, worker)

    def mass_legs(self, m_values, grid_size, beta=False):
        """Shared-path lifts for a whole mass grid.

        One simulation per path covers the union of the uniform grid with
        the warped evaluation nodes of every requested mass, so the lifted
        pairs of different masses are driven by the same realized path and
        the cross-mass deviation comparison is pathwise meaningful.

        Returns one dict per mass with per-path arrays: cost, sup deviation
        of X^m and of Y^m up to t = 0.9, |Y^m(0)|, the pre-snap terminal
        defect, and (beta variant) |Y0|^{r0}.
        """
        cfg = self.config
        uniform = np.linspace(0.0, 1.0, grid_size + 1)
        legs = []
        all_nodes = uniform
        for m in m_values:
            params = KernelParams(m=m, gamma=cfg.gamma)
            teval = warped_eval_grid(params, grid_size).nodes
            warped = kernel_phi(params, teval)
            legs.append({"m": m, "params": params, "teval": teval, "warped": warped})
            all_nodes = np.union1d(all_nodes, warped)
        union, _, uni_idx = union_grid(all_nodes, uniform)
        for leg in legs:
            leg["warp_idx"] = locate_nodes(union, leg["warped"])
            leg["n_09"] = int(np.searchsorted(leg["teval"], 0.9 + 1e-12))
        r0 = self.cost.r0

        def worker(paths):
            x0 = _draw_initial_atoms(self.p0, cfg.seed, paths)
            noise = rng.noise_block(cfg.seed, paths, union.size - 1)
            X, U, _ = overdamped_batch(self.sde, self.drift, x0, union, noise)
            del noise
            out = {"x_last": X[-1, :, 0]}
            for slot, leg in enumerate(legs):
                params, teval, n_09 = leg["params"], leg["teval"], leg["n_09"]
                x_warp = X[leg["warp_idx"]]
                u_warp = U[leg["warp_idx"]]
                x_uni = X[uni_idx[:n_09]]
                xm, ym, f_t = _coupling_pieces(params, teval, x_warp, x0)
                gap = np.zeros(len(paths))
                y0_moment = np.full(len(paths), np.nan)
                if beta:
                    z = rng.normal_matrix(cfg.seed, paths, 1, rng.INITIAL_MOMENTUM).T
                    y0s = cfg.y0_scale * np.sqrt(leg["m"]) * z
                    dy0 = y0s - ym[0]
                    bconst = beta_correction(params, x_warp[0], x0, y0s)
                    i_resp, j_resp = offset_response_integrals(params, teval)
                    shape = (teval.size, 1, 1)
                    xm = xm + kernel_K(params, teval).reshape(shape) * dy0
                    xm = xm + i_resp.reshape(shape) * bconst
                    ym = ym + np.exp(-params.rate * teval).reshape(shape) * dy0
                    ym = ym + j_resp.reshape(shape) * bconst
                    i_end, _ = offset_response_integrals(params, 1.0)
                    term_off = float(kernel_K(params, 1.0)) * dy0 + float(i_end) * bconst
                    gap = np.abs(term_off).max(axis=-1)
                    control = (u_warp + bconst) * f_t
                    y0_moment = np.abs(y0s[:, 0]) ** r0
                else:
                    control = u_warp * f_t
                cost_vals = _trapz_cost(teval, xm, ym, control, self.cost)
                out[f"cost_{slot}"] = cost_vals
                abs_dx = np.abs(xm[:n_09] - x_uni)
                abs_dy = np.abs(ym[:n_09])
                out[f"dev_x_{slot}"] = np.max(abs_dx, axis=(0, 2))
                out[f"dev_y_{slot}"] = np.max(abs_dy, axis=(0, 2))
                out[f"dev_x_l1_{slot}"] = np.trapezoid(abs_dx[..., 0], teval[:n_09], axis=0)
                out[f"dev_y_l1_{slot}"] = np.trapezoid(abs_dy[..., 0], teval[:n_09], axis=0)
                out[f"abs_y0_{slot}"] = np.linalg.norm(ym[0], axis=-1)
                out[f"gap_{slot}"] = gap
                out[f"y0_moment_{slot}"] = y0_moment
            return out

        merged = _run_chunks(cfg.n_paths, cfg.threads, worker)
        results = []
        for slot, leg in enumerate(legs):
            results.append(
                {
                    "m": leg["m"],
                    "cost": merged[f"cost_{slot}"],
                    "dev_x": merged[f"dev_x_{slot}"],
                    "dev_y": merged[f"dev_y_{slot}"],
                    "dev_x_l1": merged[f"dev_x_l1_{slot}"],
                    "dev_y_l1": merged[f"dev_y_l1_{slot}"],
                    "abs_y0": merged[f"abs_y0_{slot}"],
                    "gap": merged[f"gap_{slot}"],
                    "y0_moment": merged[f"y0_moment_{slot}"],
                    "x_last": merged["x_last"],
                }
            )
        return results


def run_zero_mass(config, beta=False):
    """Small-mass convergence table plus verdicts; see module docstring."""
    t_start = time.monotonic()
    engine = _BridgeEngine(config)
    base = engine.base_run()
    v0_mean, v0_se = mc_value(base["action"])
    rows = []
    y0_stderrs = []
    dev_x_paths = []
    dev_y_paths = []
    dev_x_l1_paths = []
    dev_y_l1_paths = []
    cost_min = None
    for leg in engine.mass_legs(config.m_grid, config.grid_size, beta=beta):
        cost_mean, cost_se = mc_value(leg["cost"])
        y0_mean, y0_se = mc_value(leg["abs_y0"])
        params = KernelParams(m=leg["m"], gamma=config.gamma)
        bound = momentum_bound(params, v0_mean + 1.0, engine.cost.c1_lower, 1)
        rows.append(
            ConvergenceRow(
                m=leg["m"],
                cost_mean=cost_mean,
                cost_stderr=cost_se,
                sup_dev_x=float(leg["dev_x"].mean()),
                sup_dev_y=float(leg["dev_y"].mean()),
                terminal_gap_max=float(leg["gap"].max()),
                mean_abs_y0=y0_mean,
                momentum_bound_c=bound,
                y0_moment=float(np.mean(leg["y0_moment"])) if beta else float("nan"),
            )
        )
        y0_stderrs.append(y0_se)
        dev_x_paths.append(leg["dev_x"])
        dev_y_paths.append(leg["dev_y"])
        dev_x_l1_paths.append(leg["dev_x_l1"])
        dev_y_l1_paths.append(leg["dev_y_l1"])
        cost_min = (cost_mean, cost_se)
    # measured discretization margin: rerun the smallest mass at twice the grid
    (leg_fine,) = engine.mass_legs([config.m_grid[-1]], 2 * config.grid_size, beta=beta)
    margin = abs(cost_min[0] - float(np.mean(leg_fine["cost"])))

    dev_x_paths = np.vstack(dev_x_paths)
    dev_y_paths = np.vstack(dev_y_paths)

    def chain_fraction(dev):
        if dev.shape[0] < 2:
            return 1.0
        return float(np.mean(np.all(np.diff(dev, axis=0) < 0.0, axis=0)))

    mono_x = chain_fraction(dev_x_paths)
    mono_y = chain_fraction(dev_y_paths)
    mono_x_l1 = chain_fraction(np.vstack(dev_x_l1_paths))
    mono_y_l1 = chain_fraction(np.vstack(dev_y_l1_paths))
    combined_se = float(np.hypot(v0_se, cost_min[1]))
    bound_gap = cost_min[0] - (v0_mean + 3.0 * combined_se + margin)
    gap_max = max(r.terminal_gap_max for r in rows)
    adm_excess = max(
        r.mean_abs_y0 - (r.momentum_bound_c + 3.0 * se)
        for r, se in zip(rows, y0_stderrs)
    )
    verdicts = [
        Verdict("terminal-gap", gap_max <= 1e-12, 1e-12, gap_max,
                "max |X^m(1) - X(1)| over the mass grid"),
        Verdict("cost-upper-bound", bound_gap <= 0.0, 0.0, bound_gap,
                f"cost(m={config.m_grid[-1]}) - (V0 + 3 stderr + margin)"),
        Verdict("momentum-admissible", adm_excess <= 0.0, 0.0, adm_excess,
                "worst row of mean|Y^m(0)| - C(m) - 3 stderr"),
        Verdict("momentum-bound-monotone",
                all(rows[i].momentum_bound_c > rows[i + 1].momentum_bound_c
                    for i in range(len(rows) - 1)),
                0.0, rows[-1].momentum_bound_c, "C(m) decreasing along the mass grid"),
    ]
    if not beta:
        # the prescribed-momentum variant adds an independent random initial
        # offset, which breaks pathwise sup-trend comparability by design
        verdicts[1:1] = [
            Verdict("supdev-x-monotone", mono_x >= 0.95, 0.95, mono_x,
                    "fraction of paths with strictly decreasing sup|X^m - X| on [0, 0.9]"),
            Verdict("supdev-y-monotone", mono_y >= 0.95, 0.95, mono_y,
                    "fraction of paths with strictly decreasing sup|Y^m| on [0, 0.9]"),
        ]
    if beta:
        moments = [r.y0_moment for r in rows]
        verdicts.append(
            Verdict("y0-moment-decreasing",
                    all(moments[i] > moments[i + 1] for i in range(len(moments) - 1)),
                    0.0, moments[-1], "E|Y0|^r0 strictly decreasing in m")
        )
    meta = {
        "scenario": "zero_mass_beta" if beta else "zero_mass",
        "config": config.echo(),
        "version": __version__,
        "v0_mean": v0_mean,
        "v0_stderr": v0_se,
        "discretization_margin": margin,
        "monotone_fraction_dev_x": mono_x,
        "monotone_fraction_dev_y": mono_y,
        "monotone_fraction_dev_x_time_avg": mono_x_l1,
        "monotone_fraction_dev_y_time_avg": mono_y_l1,
        "sinkhorn_residual": engine.potentials.residual,
        "sinkhorn_iterations": engine.potentials.iterations_used,
        "wall_clock_s": time.monotonic() - t_start,
    }
    return rows, verdicts, meta


def run_zero_mass_beta(config):
    return run_zero_mass(config, beta=True)


def _paired_stats(values):
    mean, se = mc_value(values)
    return mean, se if se > 0 else 1e-300


def run_duality(config):
    """Value-function checks for the quadratic-cost control problem."""
    t_start = time.monotonic()
    cfg = config
    reward = cfg.reward_fn()
    m = cfg.m_grid[0]
    params = KernelParams(m=m, gamma=cfg.gamma)
    sde_cfg = SDEConfig(params=params, dimension=1)
    nodes = np.linspace(0.0, 1.0, cfg.grid_size + 1)
    quad = CostFunction(kind="quadratic")

    # consistency gate: the dynamic-programming residuals must refine at
    # second order before any simulation is trusted
    gate_rng = np.random.default_rng(cfg.seed)
    h = cfg.hjb_step
    pts = [
        (gate_rng.uniform(2 * h, 1.0 - 2 * h), gate_rng.normal(size=1), gate_rng.normal(size=1))
        for _ in range(50)
    ]
    res_phi_h = np.array([hjb_residual_phi(reward, cfg.gamma, t, x, h) for t, x, _ in pts])
    res_phi_h2 = np.array([hjb_residual_phi(reward, cfg.gamma, t, x, h / 2) for t, x, _ in pts])
    res_psi_h = np.array([hjb_residual_psi(reward, params, t, x, y, h) for t, x, y in pts])
    res_psi_h2 = np.array([hjb_residual_psi(reward, params, t, x, y, h / 2) for t, x, y in pts])
    rms = lambda v: float(np.sqrt(np.mean(v**2)))
    ratio_phi = rms(res_phi_h) / rms(res_phi_h2)
    ratio_psi = rms(res_psi_h) / rms(res_psi_h2)

    def gaussian_sample(spec, paths, purpose):
        parts = str(spec).split()
        if parts[0] != "gaussian":
            raise ConfigError("duality initial laws must be gaussian")
        z = rng.normal_matrix(cfg.seed, paths, 1, purpose).T
        return float(parts[1]) + float(parts[2]) * z

    def value_leg(x0_spec, y0_mode, factor=1.0, noise_purpose=rng.NOISE):
        def worker(paths):
            x0 = gaussian_sample(x0_spec, paths, rng.SCENARIO)
            if y0_mode == "zero":
                y0 = np.zeros_like(x0)
            else:
                y0 = (cfg.y_star - x0) / float(kernel_K(params, 1.0))
            control = ValueControl(reward, params, factor)
            noise = rng.noise_block(cfg.seed, paths, nodes.size - 1, draws=2, purpose=noise_purpose)
            X, Y, U, _ = underdamped_exact_batch(sde_cfg, control, x0, y0, nodes, noise)
            act = _trapz_cost(nodes, X, Y, U, quad)
            value = reward.fn(X[-1]) - act
            psi0 = psi_m_value(reward, params, 0.0, x0, y0)
            return {"value": value, "psi0": psi0}

        return _run_chunks(cfg.n_paths, cfg.threads, worker)

    # (a) optimal feedback from the primary initial law, zero initial momentum
    leg_a = value_leg(cfg.p0, "zero")
    diff_a = leg_a["value"] - leg_a["psi0"]
    mean_a, se_a = _paired_stats(diff_a)

    # (b) momentum matched to a fixed terminal anchor: the value must not
    # depend on the initial law and equals phi(phi(0), y_star)
    anchor = float(
        phi_value(reward, cfg.gamma, float(kernel_phi(params, 0.0)), np.array([cfg.y_star]))
    )
    # the lifted state cancels X(0) exactly, so the second leg must run on
    # an independent noise stream for the agreement test to carry information
    leg_b1 = value_leg(cfg.p0, "matched")
    leg_b2 = value_leg(cfg.p0_alt, "matched", noise_purpose=rng.ALT_NOISE)
    mean_b1, se_b1 = _paired_stats(leg_b1["value"] - anchor)
    mean_b2, se_b2 = _paired_stats(leg_b2["value"] - anchor)
    cross = abs(mean_b1 - mean_b2)
    cross_se = float(np.hypot(se_b1, se_b2))

    # (c) a deliberately suboptimal (halved) control scores lower; the same
    # noise streams make the comparison a paired test
    leg_c = value_leg(cfg.p0, "zero", factor=0.5)
    diff_c = leg_a["value"] - leg_c["value"]
    mean_c, se_c = _paired_stats(diff_c)

    verdicts = [
        Verdict("hjb-gate-phi", 3.0 <= ratio_phi <= 5.5, 4.0, ratio_phi,
                "rms Richardson ratio of the log-heat residual under h -> h/2"),
        Verdict("hjb-gate-psi", 3.0 <= ratio_psi <= 5.5, 4.0, ratio_psi,
                "rms Richardson ratio of the lifted residual under h -> h/2"),
        Verdict("value-matches-psi0", abs(mean_a) <= 3.0 * se_a, 3.0 * se_a, mean_a,
                "simulated value minus psi(0, Z(0)), paired"),
        Verdict("anchored-value-p0", abs(mean_b1) <= 3.0 * se_b1, 3.0 * se_b1, mean_b1,
                "value minus phi(phi(0), y*) under the primary initial law"),
        Verdict("anchored-value-p0-alt", abs(mean_b2) <= 3.0 * se_b2, 3.0 * se_b2, mean_b2,
                "value minus phi(phi(0), y*) under the alternate initial law"),
        Verdict("p0-independence", cross <= 3.0 * cross_se, 3.0 * cross_se, cross,
                "difference of the two anchored value estimates"),
        Verdict("suboptimal-scores-lower", mean_c >= 3.0 * se_c, 3.0 * se_c, mean_c,
                "optimal minus halved-control value, paired"),
    ]
    meta = {
        "scenario": "duality",
        "config": cfg.echo(),
        "version": __version__,
        "anchor_value": anchor,
        "value_estimate": float(np.mean(leg_a["value"])),
        "psi0_estimate": float(np.mean(leg_a["psi0"])),
        "hjb_ratio_phi": ratio_phi,
        "hjb_ratio_psi": ratio_psi,
        "wall_clock_s": time.monotonic() - t_start,
    }
    return [], verdicts, meta


def run_marginal_check(config):
    """Terminal-law verification of the simulated bridge."""
    t_start = time.monotonic()
    engine = _BridgeEngine(config)
    base = engine.base_run()
    terminal = EmpiricalMeasure.from_samples(base["x_last"])
    w2 = wasserstein2_squared_1d(terminal, engine.p1)
    sub = min(len(base["x_last"]), 2048)
    e_dist = energy_distance(
        EmpiricalMeasure.from_samples(base["x_last"][:sub]), engine.p1
    )
    (leg,) = engine.mass_legs([config.m_grid[0]], config.grid_size)
    lift_gap = float(np.max(leg["gap"]))
    verdicts = [
        Verdict("terminal-w2", w2 <= config.tol_w2, config.tol_w2, w2,
                "squared 1-d transport distance between simulated X(1) and the target"),
        Verdict("terminal-energy", e_dist <= config.tol_energy, config.tol_energy, e_dist,
                "energy distance between simulated X(1) and the target"),
        Verdict("sinkhorn-residual",
                engine.potentials.residual <= config.sinkhorn_tol,
                config.sinkhorn_tol, engine.potentials.residual,
                "marginal defect of the bridge potentials"),
        Verdict("lift-terminal-identity", lift_gap == 0.0, 0.0, lift_gap,
                "X^m(1) equals the source terminal sample exactly"),
    ]
    meta = {
        "scenario": "marginal",
        "config": config.echo(),
        "version": __version__,
        "w2_squared": w2,
        "energy_distance": e_dist,
        "wall_clock_s": time.monotonic() - t_start,
    }
    return [], verdicts, meta


@dataclass(frozen=True)
class DeterministicRow:
    path_id: int
    lhs: float
    rhs: float
    abs_gap: float


def run_deterministic(config):
    """Noiseless second-order action decomposition on random cubic paths."""
    t_start = time.monotonic()
    params = KernelParams(m=config.m_grid[0], gamma=config.gamma)
    gen = np.random.default_rng(config.seed)
    rows = []
    for k in range(20):
        coeffs = gen.normal(size=(4, 1))
        lhs, (integral_part, boundary) = deterministic_identity_check(coeffs, params)
        rhs = integral_part + boundary
        rows.append(DeterministicRow(k, lhs, rhs, abs(lhs - rhs)))
    worst = max(r.abs_gap for r in rows)
    # straight line: the effort is exactly gamma^2 |dx|^2
    dx = gen.normal(size=(1,))
    line = np.vstack([np.zeros((1, 1)), dx[:, None]])
    lhs_line, (int_line, corr_line) = deterministic_identity_check(line, params)
    expected = float(np.dot(config.gamma * dx, config.gamma * dx))
    verdicts = [
        Verdict("decomposition-agrees", worst <= 1e-10, 1e-10, worst,
                "max |lhs - rhs| over 20 random cubic paths"),
        Verdict("straight-line-exact",
                lhs_line == expected and corr_line == 0.0,
                0.0, abs(lhs_line - expected),
                "linear path effort equals gamma^2 |dx|^2 with zero correction"),
    ]
    meta = {
        "scenario": "deterministic",
        "config": config.echo(),
        "version": __version__,
        "wall_clock_s": time.monotonic() - t_start,
    }
    return rows, verdicts, meta


def run_assumptions(config):
    """Cost-assumption falsification report plus quadratic exactness checks."""
    t_start = time.monotonic()
    cost = config.cost()
    report = check_assumptions(cost, n_samples=2000, seed=config.seed)
    verdicts = []
    if config.cost_kind == "quadratic" and config.cost_potential == "zero":
        c2_err = float(np.max(np.abs(report.c2 - 0.5)))
        verdicts.extend(
            [
                Verdict("quadratic-c2-exact", c2_err == 0.0, 0.0, c2_err,
                        "sampled C_{2,R} equals 1/2 on the whole R grid"),
                Verdict("scaling-margin-zero", abs(report.scaling_margin) <= 1e-12,
                        1e-12, report.scaling_margin,
                        "relative defect of the sub-quadratic scaling inequality"),
                Verdict("growth-margin-nonnegative", report.growth_margin >= -1e-12,
                        1e-12, report.growth_margin,
                        "relative defect of the increment growth inequality"),
            ]
        )
    else:
        verdicts.append(
            Verdict("scaling-margin-nonnegative", report.scaling_margin >= -1e-12,
                    1e-12, report.scaling_margin),
        )
        verdicts.append(
            Verdict("growth-margin-nonnegative", report.growth_margin >= -1e-12,
                    1e-12, report.growth_margin),
        )
    convex_probe, violation = midpoint_convexity_check(
        remark_counterexample(config.counterexample_p), 2, seed=config.seed
    )
    verdicts.append(
        Verdict("counterexample-nonconvex", not convex_probe, 0.0, violation,
                "|u|^2 - |u|^p + 1 flagged non-convex by midpoint sampling")
    )
    meta = {
        "scenario": "assumptions",
        "config": config.echo(),
        "version": __version__,
        "r_grid": list(report.r_grid),
        "c1": list(report.c1),
        "c2": list(report.c2),
        "cr0": list(report.cr0),
        "scaling_margin": report.scaling_margin,
        "growth_margin": report.growth_margin,
        "growth_constant": report.growth_constant,
        "delta_l": {str(k): v for k, v in report.delta_l.items()},
        "cost_convex": report.convex,
        "convexity_violation": report.convexity_violation,
        "n_samples": report.n_samples,
        "wall_clock_s": time.monotonic() - t_start,
    }
    return [], verdicts, meta


RUNNERS = {
    "zero_mass": run_zero_mass,
    "zero_mass_beta": run_zero_mass_beta,
    "duality": run_duality,
    "marginal": run_marginal_check,
    "deterministic": run_deterministic,
    "assumptions": run_assumptions,
}


def run_scenario(config):
    return RUNNERS[config.scenario](config)
