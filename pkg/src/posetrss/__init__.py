"""Ranked set sampling for several variables via partial orders.

Submodules
----------
poset        dominance posets, correlations and sign flips
linext       linear extensions: counting, enumeration, sampling, mean heights
designs      MVSR / CPOR / RPOR stratified populations and SRSWOR
estimators   point and variance estimators, theoretical MVSR variance
simulation   population models and the Monte Carlo efficiency study
dataio       CSV validation, JSON configs and run artifacts
"""

__version__ = "0.1.0"

from .designs import (
    Allocation,
    DesignConfig,
    StratifiedPopulation,
    allocate_proportional,
    build_cpor,
    build_mvsr,
    build_rpor,
    draw_samples,
    draw_srswor,
)
from .estimators import (
    EstimateReport,
    ModelParams,
    estimate_cpor,
    estimate_mvsr,
    estimate_rpor,
    srs_baseline,
    theoretical_variance_mvsr,
)
from .linext import (
    CapExceeded,
    HeightSummary,
    count_extensions,
    enumerate_extensions,
    mean_heights,
    sample_extension,
    sample_extensions,
)
from .poset import Ordering, Poset, SetOfElements, build_poset, compare, pairwise_correlations, suggest_sign_flips
from .simulation import BivariateNormal, Cell, EmpiricalCSV, RegressionLinked, SimulationPlan, emit_table, generate_sets, run_plan
