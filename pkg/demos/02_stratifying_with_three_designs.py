"""Placing ranked sets into strata under MVSR, CPOR and RPOR.

MVSR sorts each set on a single ranking variable. CPOR uses the rounded
mean height over all linear extensions, so strata can be empty or uneven.
RPOR picks one uniformly random linear extension per set, so every stratum
holds exactly ``K`` elements.

    python3 demos/02_stratifying_with_three_designs.py
"""

import numpy as np

from posetrss import DesignConfig, build_cpor, build_mvsr, build_rpor, draw_samples
from posetrss.designs import allocation_for

labels = ("a", "b", "c", "d", "e")
one_set = np.array([[0, 1], [2, 1], [1, 2], [3, 3], [0, 4]], dtype=float)
sets = np.stack([one_set, one_set])  # K = 2 copies of the same set


def show(pop, title):
    print(title)
    for h in range(1, pop.m + 1):
        members = [f"{labels[e]}(set {s})" for e, s, st in zip(pop.element, pop.set_index, pop.stratum) if st == h]
        print(f"  stratum {h}: {', '.join(members) or '-'}")


show(build_mvsr(sets, DesignConfig(5, 2, 1, "MVSR", (0,), (0, 1), seed=1)), "MVSR on the first variable:")
cpor = build_cpor(sets, DesignConfig(5, 2, 1, "CPOR", (0, 1), (0, 1)))
show(cpor, "\nCPOR (rounded mean heights):")
print(f"  stratum sizes K_h = {cpor.stratum_sizes.tolist()}")
show(build_rpor(sets, DesignConfig(5, 2, 1, "RPOR", (0, 1), (0, 1), seed=0)), "\nRPOR (one random extension per set):")

# %% proportional allocation of a budget of n*m = 5 draws over the CPOR strata
alloc = allocation_for(cpor, 1)
print(f"\nCPOR allocation of 5 draws: {alloc.n_h.tolist()}")
samples = draw_samples(cpor, alloc, np.random.default_rng(3))
print("sampled rows per stratum:", [s.tolist() for s in samples])
