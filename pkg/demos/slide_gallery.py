"""Render the exact slide gadgets as before/after grid pictures: the
two-column interchange, the double 2-cycle, and a cell transposition.

Run:  python demos/slide_gallery.py        (writes slide_gallery.png)
"""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from abctorus import column_interchange, double_two_cycle, transposition

CASES = [
    ("interchange, k=4 q=3", column_interchange(0, 4, 3), 12, 4, 3),
    ("double 2-cycle, k=6 q=3", double_two_cycle(6, 3, 4), 18, 4, 3),
    ("transposition (2,1), k=4 q=2", transposition(2, 1, 4, 2, 3), 8, 3, 2),
]

fig, axes = plt.subplots(len(CASES), 2, figsize=(9, 10), dpi=110)
for row, (title, gadget, cols, rows, q) in enumerate(CASES):
    act = gadget.atom_action(cols, rows)
    src = np.arange(cols * rows).reshape(cols, rows)
    dst = np.zeros_like(src)
    for (c, r), (c2, r2) in act.items():
        dst[c2, r2] = src[c, r]
    for col, (img, label) in enumerate(((src, "cells"), (dst, "images"))):
        ax = axes[row, col]
        ax.imshow(img.T, origin="lower", cmap="tab20",
                  extent=(0, 1, 0, 1), interpolation="nearest")
        for b in range(1, q):
            ax.axvline(b / q, color="k", lw=1.2)
        ax.set_title(f"{title}: {label}", fontsize=9)
        ax.set_xticks([]), ax.set_yticks([])
fig.tight_layout()
fig.savefig("slide_gallery.png", metadata={"Software": None})
print("wrote slide_gallery.png")
print("block lines mark the 1/q rotation cells every gadget commutes with")
