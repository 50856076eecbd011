"""Regenerate the bundled synthetic 59-region pollution table.

The table is SYNTHETIC. It only mimics the correlation signs of the herb-layer
case study (Cd and Zn negatively related to Pb and S, Pb-Zn strong, Cd-S
weak) and plausible concentration levels; it is not measured data.

    python demos/make_synthetic_pollution.py
"""

from pathlib import Path

import numpy as np

names = ["Pb", "Cd", "Zn", "S"]
corr = np.array(
    [
        [1.00, -0.30, -0.60, 0.27],
        [-0.30, 1.00, 0.48, -0.06],
        [-0.60, 0.48, 1.00, -0.20],
        [0.27, -0.06, -0.20, 1.00],
    ]
)
means = np.array([0.9, 0.1, 133.0, 1788.0])
scales = np.array([0.25, 0.03, 30.0, 250.0])

rng = np.random.default_rng(59)
z = rng.standard_normal((59, 4)) @ np.linalg.cholesky(corr).T
values = np.abs(means + scales * z)

out = Path(__file__).resolve().parents[1] / "src" / "posetrss" / "data" / "synthetic_pollution_59.csv"
with out.open("w") as fh:
    fh.write("region," + ",".join(names) + "\n")
    for i, row in enumerate(values, start=1):
        fh.write(f"R{i:02d}," + ",".join(f"{v:.4f}" for v in row) + "\n")
print(f"wrote {out}")
