"""Lifting one first-order bridge path to inertial pairs of shrinking mass.

One realized path drives every lift: the same Brownian increments are
simulated on the union of the uniform grid with each mass's warped nodes,
and the lifted positions X^m collapse onto the path while the momenta Y^m
collapse to zero, with the terminal position matched identically.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from langot import EmpiricalMeasure, KernelParams, SchrodingerDrift, SDEConfig, sinkhorn
from langot.coupling import _coupling_pieces, locate_nodes, union_grid, warped_eval_grid
from langot.kernels import kernel_phi
from langot.rng import noise_block
from langot.sde import overdamped_batch

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

masses = [0.2, 0.05, 0.01]
n_eval = 512
uniform = np.linspace(0, 1, n_eval + 1)
pot = sinkhorn(
    EmpiricalMeasure.gaussian_quantiles(0.0, 1.0, 32),
    EmpiricalMeasure.gaussian_quantiles(1.0, 0.5, 32),
    gamma=1.0,
)
drift = SchrodingerDrift(pot)

legs = []
all_nodes = uniform
for m in masses:
    p = KernelParams(m=m, gamma=1.0)
    teval = warped_eval_grid(p, n_eval).nodes
    legs.append((p, teval, kernel_phi(p, teval)))
    all_nodes = np.union1d(all_nodes, legs[-1][2])
nodes, _, uni_idx = union_grid(all_nodes, uniform)

cfg = SDEConfig(params=KernelParams(m=1.0, gamma=1.0), dimension=1)
x0 = np.array([[-0.8]])
noise = noise_block(5, [0], nodes.size - 1)
X, U, _ = overdamped_batch(cfg, drift, x0, nodes, noise)

fig, axes = plt.subplots(1, 2, figsize=(11, 3.8))
axes[0].plot(uniform, X[uni_idx, 0, 0], "k-", lw=1.2, label="source path X")
for p, teval, warped in legs:
    wi = locate_nodes(nodes, warped)
    xm, ym, _ = _coupling_pieces(p, teval, X[wi], X[0])
    axes[0].plot(teval, xm[:, 0, 0], lw=0.9, label=f"X^m, m={p.m}")
    axes[1].plot(teval, ym[:, 0, 0], lw=0.9, label=f"Y^m, m={p.m}")
    print(
        f"m={p.m:<5} sup|X^m - X| on [0,0.9] = "
        f"{np.abs(xm[: int(0.9 * n_eval)] - X[uni_idx[: int(0.9 * n_eval)]]).max():.4f}   "
        f"sup|Y^m| = {np.abs(ym[: int(0.9 * n_eval)]).max():.4f}"
    )
axes[0].set_title("lifted positions collapse onto the path")
axes[1].set_title("lifted momenta collapse to zero")
axes[0].legend(fontsize=8)
axes[1].legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "small_mass_lift.png", dpi=120)
print(f"wrote {OUT/'small_mass_lift.png'}")
