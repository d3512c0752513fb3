"""Entropic bridge between two Gaussians, solved and then simulated.

Solves the discrete potentials on quantile supports, turns them into a
steering drift for the first-order dynamics, simulates a path bundle, and
compares the terminal sample with the target marginal.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from langot import (
    EmpiricalMeasure,
    KernelParams,
    SchrodingerDrift,
    SDEConfig,
    energy_distance,
    sinkhorn,
    wasserstein2_squared_1d,
)
from langot.rng import noise_block, uniform_vector
from langot.sde import overdamped_batch

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

p0 = EmpiricalMeasure.gaussian_quantiles(0.0, 1.0, 48)
p1 = EmpiricalMeasure.gaussian_quantiles(1.0, 0.5, 48)
pot = sinkhorn(p0, p1, gamma=1.0)
print(f"potentials solved: residual {pot.residual:.2e} in {pot.iterations_used} sweeps")

drift = SchrodingerDrift(pot)
cfg = SDEConfig(params=KernelParams(m=1.0, gamma=1.0), dimension=1)
nodes = np.linspace(0, 1, 513)
n_paths = 512
u = uniform_vector(3, range(n_paths))
x0 = p0.points[np.minimum(np.searchsorted(np.cumsum(p0.weights), u), 47)]
noise = noise_block(3, range(n_paths), 512)
X, U, _ = overdamped_batch(cfg, drift, x0, nodes, noise)

terminal = EmpiricalMeasure.from_samples(X[-1, :, 0])
print(f"terminal vs target:  W2^2 = {wasserstein2_squared_1d(terminal, p1):.5f}   "
      f"energy distance = {energy_distance(terminal, p1):.5f}")

fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
axes[0].imshow(pot.plan().plan, origin="lower", aspect="auto", cmap="viridis")
axes[0].set_title("bridge plan (source x target)")
axes[1].plot(nodes, X[:, :24, 0], lw=0.6, alpha=0.7)
axes[1].set_title("24 steered paths")
axes[2].hist(X[-1, :, 0], bins=40, density=True, alpha=0.6, label="simulated X(1)")
grid = np.linspace(-1, 3, 300)
axes[2].plot(grid, np.exp(-((grid - 1) ** 2) / (2 * 0.25)) / np.sqrt(2 * np.pi * 0.25),
             "k-", label="target density")
axes[2].legend()
axes[2].set_title("terminal law")
fig.tight_layout()
fig.savefig(OUT / "bridge.png", dpi=120)
print(f"wrote {OUT/'bridge.png'}")
