"""Kernel tour: the exponential kernels and the time change they induce.

Plots K(t), f(t) = gamma K(1-t), and the warp phi(t) for a few masses, and
prints the sandwich 0 <= phi(t) - t <= 2m/gamma that makes the warp collapse
onto the identity as the mass vanishes.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from langot import KernelParams, kernel_K, kernel_f, kernel_phi, kernel_phi_inverse

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

t = np.linspace(0.0, 1.0, 401)
masses = [0.5, 0.2, 0.05, 0.01]

fig, axes = plt.subplots(1, 3, figsize=(13, 3.6))
for m in masses:
    p = KernelParams(m=m, gamma=1.0)
    axes[0].plot(t, kernel_K(p, t), label=f"m={m}")
    axes[1].plot(t, kernel_f(p, t))
    axes[2].plot(t, kernel_phi(p, t))
axes[2].plot(t, t, "k--", lw=0.8, label="identity")
axes[0].set_title("position kernel K")
axes[1].set_title("right-end kernel f")
axes[2].set_title("time change phi")
axes[0].legend()
axes[2].legend()
fig.tight_layout()
fig.savefig(OUT / "kernels.png", dpi=120)
print(f"wrote {OUT/'kernels.png'}")

print("\nsandwich 0 <= phi(t) - t <= 2m/gamma:")
for m in masses:
    p = KernelParams(m=m, gamma=1.0)
    gap = kernel_phi(p, t) - t
    print(f"  m={m:<5} max(phi - t) = {gap.max():.5f}   bound 2m/gamma = {2*m:.5f}")

p = KernelParams(m=0.1, gamma=1.0)
s = 0.73
t_inv = kernel_phi_inverse(p, s)
print(f"\ninversion check at m=0.1: phi({t_inv:.12f}) = {float(kernel_phi(p, t_inv)):.12f} (target {s})")
