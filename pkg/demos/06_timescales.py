"""The smoothing window and when the rate-matrix picture applies.

Averaging the oscillating phases over a window of length dt keeps only
transitions inside an energy shell of half-width pi*hbar/dt.  The kernel
chi and its box stand-in carry the same L2 mass; the window itself must sit
between the fastest discarded oscillation and the amplitude timescale.
Saves a kernel plot to demos/output/.
"""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from dephase import (
    applicability_window,
    chi,
    chi_bar,
    chi_bar_squared_integral,
    chi_squared_integral,
    random_degenerate_system,
)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

dt = 1.0
de = np.linspace(-6.0 * math.pi, 6.0 * math.pi, 1201)
smooth = np.abs(chi(de, dt)) ** 2
box = chi_bar(de, dt)

print(f"int |chi|^2 dE      = {chi_squared_integral(dt):.9f}")
print(f"int |chi_bar|^2 dE  = {chi_bar_squared_integral(dt):.9f}")
print(f"2 pi hbar / dt      = {2.0 * math.pi / dt:.9f}")

fig, ax = plt.subplots(figsize=(7, 4))
ax.plot(de, smooth, label=r"$|\chi(\Delta E)|^2$")
ax.plot(de, box, label="box window, equal $L^2$ mass")
ax.set_xlabel(r"$\Delta E \cdot dt / \hbar$")
ax.set_ylabel("weight")
ax.legend()
fig.tight_layout()
target = OUT / "smoothing_window.png"
fig.savefig(target, dpi=120)
print(f"wrote {target}")

print("\nwindow admissibility for a 10-level shell at three couplings:")
for coupling in (0.002, 0.02, 0.2):
    spec = random_degenerate_system(10, coupling, dt=1.0, seed=8)
    r = applicability_window(spec)
    print(f"  coupling {coupling:5.3f}: amplitude timescale "
          f"{r.t_slow:9.2f}, window dt {r.dt}, admissible: {r.admissible}")
