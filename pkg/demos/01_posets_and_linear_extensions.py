"""Posets from multivariate data, their linear extensions and mean heights.

Five elements measured on two variables are compared componentwise: one
element sits below another when it is no larger on every variable. The
resulting partial order has several linear extensions (total orders that
respect it), and the mean height of an element across them is the basis of
the CPOR design.

    python3 demos/01_posets_and_linear_extensions.py
"""

import numpy as np

from posetrss import build_poset, count_extensions, enumerate_extensions, mean_heights, sample_extensions
from posetrss.poset import Poset

labels = ("a", "b", "c", "d", "e")
x = np.array([[0, 1], [2, 1], [1, 2], [3, 3], [0, 4]], dtype=float)
p = build_poset(x, labels=labels)

print("cover relations (lower < upper):")
for i, j in p.cover_edges:
    print(f"  {labels[i]} < {labels[j]}")

# %% every linear extension, printed highest element first
exts = enumerate_extensions(p)
print(f"\n{count_extensions(p)} linear extensions:")
for e in exts:
    print("  " + " ".join(labels[i] for i in reversed(e)))

# %% exact mean heights (1 = bottom) and their half-up rounding
h = mean_heights(p)
print("\nelement  mean height  rounded")
for lab, mh, r in zip(labels, h.mean_height, h.rounded_height):
    print(f"  {lab}      {mh:6.3f}       {r}")

# %% counting never lists extensions, so larger posets are fine
rng = np.random.default_rng(1)
y = rng.normal(size=(16, 2))
big = build_poset(y)
print(f"\n16 random bivariate points: {count_extensions(big):,} linear extensions")
mc = mean_heights(big, "mc", draws=20_000, rng=2)
exact = mean_heights(big)
print(f"Monte Carlo heights from 20,000 uniform draws: max error {np.abs(mc.mean_height - exact.mean_height).max():.3f}")

# %% uniform sampling: exact unranking or the adjacent-transposition chain
draws = sample_extensions(Poset.antichain(3), 6_000, 3, method="mcmc")
_, counts = np.unique(draws, axis=0, return_counts=True)
print(f"\nMCMC on a 3-element antichain, 6,000 draws, counts per order: {counts.tolist()}")
