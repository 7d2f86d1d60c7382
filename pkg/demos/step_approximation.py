"""How the analytic shears are made: smooth a rational step function and
truncate its Fourier series, keeping every frequency a multiple of the
period divisor so rotation commutation survives exactly.

Run:  python demos/step_approximation.py    (writes step_approximation.png)
"""
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from abctorus import approximate_step
from abctorus.blockslide import StepFunction

sf = StepFunction((Fraction(0), Fraction(1, 2)), (Fraction(0), Fraction(1, 2)))
xs = np.linspace(0, 1, 2000, endpoint=False)
exact = np.where(xs < 0.5, 0.0, 0.5)

fig, (ax, ax2) = plt.subplots(1, 2, figsize=(10, 4), dpi=110)
ax.plot(xs, exact, "k", lw=1, label="step")
for m in (8, 32, 128):
    tp = approximate_step(sf, 1, 1e-6, 0.05, harmonics=m)
    ax.plot(xs, tp.eval(xs), lw=1, label=f"m = {m}")
ax.legend()
ax.set_title("smoothed Fourier truncations")

# adaptive order: the sampled sup error outside the breakpoint strips
tp = approximate_step(sf, 1, 1e-3, 0.05)
width = 0.05 / 4
dist = np.abs(xs / 0.5 - np.round(xs / 0.5)) * 0.5
mask = dist > width
ax2.semilogy(xs[mask], np.abs(tp.eval(xs[mask]) - exact[mask]), ".", ms=1)
ax2.axhline(1e-3, color="r", lw=1)
ax2.set_title(f"error outside the strips, adaptive m = {tp.harmonics}")
fig.tight_layout()
fig.savefig("step_approximation.png", metadata={"Software": None})
print(f"adaptive order m = {tp.harmonics}, "
      f"sup error {tp.achieved_error:.2e} (target 1e-3)")
print("wrote step_approximation.png")
