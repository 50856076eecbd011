"""Working from a CSV table: validation, sign flips and one design pass.

Uses the bundled synthetic 59-region pollution table. Its values are
simulated, not measured; ``make_synthetic_pollution.py`` regenerates it.

    python3 demos/05_empirical_csv.py
"""

from importlib import resources

import numpy as np

from posetrss import pairwise_correlations, suggest_sign_flips
from posetrss.dataio import load_config, plan_from_config, validate_csv
from posetrss.simulation import emit_table, run_plan

path = resources.files("posetrss.data").joinpath("synthetic_pollution_59.csv")
schema = validate_csv(path, label_column="region")
print(f"{schema.n_rows} rows, numeric columns {schema.columns}")

corr = pairwise_correlations(schema.data, schema.columns)
print("correlations:\n", np.round(corr, 2))
flips = suggest_sign_flips(corr[np.ix_([0, 2], [0, 2])])
print(f"ranking on Pb and Zn; negate {[c for c, f in zip(('Pb', 'Zn'), flips) if f] or 'nothing'}")

# %% resampling the table as a finite population
plan = plan_from_config(load_config("synthetic_pollution.json"), iterations=3_000)
print(emit_table(run_plan(plan), "md"))
print("One design pass from the command line:")
print("  posetrss estimate synthetic_pollution_59.csv --design RPOR --m 3 --K 5 --n 2 \\")
print("      --ranking Pb,Zn --target Pb,Zn --flips auto --label-column region --seed 1")
