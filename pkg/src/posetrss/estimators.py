"""Point and variance estimators for the three designs and the SRS baseline.

MVSR and RPOR share one unbiased variance estimator: written with stratum
sample means ``xbar_h`` and sample variances ``s2_h`` it is

    (K - 1) / (m (mK - 1)) * sum_h s2_h / n  +  1 / (m (mK - 1)) * sum_h (xbar_h - mu_hat)^2

CPOR has no unbiased variance estimator; the same form is reported with a
conservative flag.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special, stats

from .designs import Allocation, StratifiedPopulation

SMALL_SAMPLE = "variance-needs-n>=2"


@dataclass
class EstimateReport:
    design_kind: str
    mu_hat: np.ndarray
    var_hat: np.ndarray | None
    sample_sizes: np.ndarray
    variables: tuple = ()
    conservative: bool = False
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        names = self.variables or tuple(range(len(self.mu_hat)))
        out = {
            "design": self.design_kind,
            "sample_sizes": [int(x) for x in self.sample_sizes],
            "conservative_variance": self.conservative,
            "warnings": list(self.warnings),
            "estimates": [],
        }
        for j, name in enumerate(names):
            var = None if self.var_hat is None else float(self.var_hat[j])
            out["estimates"].append({"variable": name, "mu_hat": float(self.mu_hat[j]), "var_hat": var})
        return out


# vectorised kernels -----------------------------------------------------------


def stratum_moments(values, strata, selected, m: int):
    """Sample means and variances (divisor ``n_h - 1``) per stratum.

    ``values`` has shape ``(B, N, T)``; ``strata`` and ``selected`` ``(B, N)``.
    Returns ``(n_h, means, s2)`` with shapes ``(B, m)``, ``(B, m, T)``,
    ``(B, m, T)``. Empty samples give mean 0; singletons give ``s2 = nan``.
    """
    onehot = (strata[..., None] == np.arange(m)) & selected[..., None]
    w = onehot.astype(float)
    n_h = w.sum(axis=1)
    sums = np.einsum("bnh,bnt->bht", w, values)
    safe = np.where(n_h > 0, n_h, 1.0)[..., None]
    means = np.where(n_h[..., None] > 0, sums / safe, 0.0)
    dev = values[:, :, None, :] - means[:, None, :, :]
    ss = np.einsum("bnh,bnht->bht", w, dev * dev)
    with np.errstate(invalid="ignore", divide="ignore"):
        s2 = np.where(n_h[..., None] > 1, ss / (n_h[..., None] - 1), np.nan)
    return n_h.astype(np.int64), means, s2


def rss_variance(means, s2, mu_hat, K: int, n) -> np.ndarray:
    """The shared MVSR/RPOR variance estimator, vectorised over leading axes.

    ``means`` and ``s2`` have shape ``(..., m, T)``, ``mu_hat`` ``(..., T)``.
    Strata with ``nan`` sample variance are left out of the within term.
    """
    m = means.shape[-2]
    within = np.nansum(s2, axis=-2) / n
    between = np.sum((means - mu_hat[..., None, :]) ** 2, axis=-2)
    return ((K - 1) * within + between) / (m * (m * K - 1))


# single-population estimators -------------------------------------------------


def _sample_arrays(pop: StratifiedPopulation, samples: Sequence[np.ndarray]):
    if len(samples) != pop.m:
        raise ValueError(f"expected {pop.m} stratum samples, got {len(samples)}")
    tgt = pop.targets
    out = []
    for h, idx in enumerate(samples, start=1):
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and np.any(pop.stratum[idx] != h):
            raise ValueError(f"sample for stratum {h} contains rows from another stratum")
        out.append(tgt[idx])
    return out


def _variable_names(pop: StratifiedPopulation) -> tuple:
    return tuple(pop.target_columns)


def _equal_design(pop, samples, kind) -> EstimateReport:
    if pop.design_kind != kind:
        raise ValueError(f"expected a {kind} population, got {pop.design_kind}")
    groups = _sample_arrays(pop, samples)
    sizes = np.array([g.shape[0] for g in groups])
    if np.any(sizes != sizes[0]) or sizes[0] < 1:
        raise ValueError(f"{kind} needs the same positive sample size in every stratum")
    n = int(sizes[0])
    means = np.stack([g.mean(axis=0) for g in groups])
    mu_hat = means.mean(axis=0)
    report = EstimateReport(kind, mu_hat, None, sizes, _variable_names(pop))
    if n < 2:
        report.warnings.append(SMALL_SAMPLE)
        warnings.warn("variance estimate needs at least 2 draws per stratum", RuntimeWarning, stacklevel=3)
        return report
    s2 = np.stack([g.var(axis=0, ddof=1) for g in groups])
    report.var_hat = np.maximum(rss_variance(means, s2, mu_hat, pop.K, n), 0.0)
    return report


def estimate_mvsr(pop: StratifiedPopulation, samples: Sequence[np.ndarray]) -> EstimateReport:
    """Mean of the stratum sample means, with the MVSR variance estimator."""
    return _equal_design(pop, samples, "MVSR")


def estimate_rpor(pop: StratifiedPopulation, samples: Sequence[np.ndarray]) -> EstimateReport:
    """Mean of the stratum sample means, with the RPOR variance estimator.

    Computed literally as ``[sum_h sum_i (x - mu_hat)^2 + (K - n) sum_h s2_h] / (n m (Km - 1))``,
    which equals :func:`rss_variance`.
    """
    report = _equal_design(pop, samples, "RPOR")
    if report.var_hat is not None:
        groups = _sample_arrays(pop, samples)
        n, m, K = groups[0].shape[0], pop.m, pop.K
        spread = sum(((g - report.mu_hat) ** 2).sum(axis=0) for g in groups)
        s2 = sum(g.var(axis=0, ddof=1) for g in groups)
        report.var_hat = np.maximum((spread + (K - n) * s2) / (n * m * (K * m - 1)), 0.0)
    return report


def estimate_cpor(
    pop: StratifiedPopulation, samples: Sequence[np.ndarray], alloc: Allocation | None = None
) -> EstimateReport:
    """Stratum means weighted by ``W_h = K_h / (K m)``.

    Empty strata carry zero weight. The variance is the RPOR form evaluated
    at ``n = (total draws) / m`` over strata with at least two draws, and is
    flagged conservative.
    """
    if pop.design_kind != "CPOR":
        raise ValueError(f"expected a CPOR population, got {pop.design_kind}")
    groups = _sample_arrays(pop, samples)
    sizes = np.array([g.shape[0] for g in groups])
    if alloc is not None and not np.array_equal(np.asarray(alloc.n_h), sizes):
        raise ValueError("samples do not match the allocation")
    w = pop.weights
    if np.any((w > 0) & (sizes == 0)):
        raise ValueError("every non-empty stratum needs at least one draw")
    T = len(pop.target_columns)
    means = np.stack([g.mean(axis=0) if g.shape[0] else np.zeros(T) for g in groups])
    mu_hat = w @ means
    report = EstimateReport("CPOR", mu_hat, None, sizes, _variable_names(pop), conservative=True)
    s2 = np.stack([g.var(axis=0, ddof=1) if g.shape[0] > 1 else np.full(T, np.nan) for g in groups])
    if np.all(np.isnan(s2)):
        report.warnings.append(SMALL_SAMPLE)
        return report
    n = sizes.sum() / pop.m
    spread = sum(((g - mu_hat) ** 2).sum(axis=0) for g in groups)
    report.var_hat = np.maximum(
        (spread + (pop.K - n) * np.nansum(s2, axis=0)) / (n * pop.m * (pop.K * pop.m - 1)), 0.0
    )
    return report


def estimate(pop: StratifiedPopulation, samples, alloc: Allocation | None = None) -> EstimateReport:
    if pop.design_kind == "MVSR":
        return estimate_mvsr(pop, samples)
    if pop.design_kind == "CPOR":
        return estimate_cpor(pop, samples, alloc)
    return estimate_rpor(pop, samples)


def srs_baseline(values) -> EstimateReport:
    """Sample mean and ``s^2 / N`` for an iid sample (rows) of one or more variables."""
    x = np.asarray(values, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise ValueError("empty sample")
    report = EstimateReport("SRS", x.mean(axis=0), None, np.array([x.shape[0]]))
    if x.shape[0] > 1:
        report.var_hat = x.var(axis=0, ddof=1) / x.shape[0]
    else:
        report.warnings.append(SMALL_SAMPLE)
    return report


# theory -----------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    mu: np.ndarray
    sigma: np.ndarray
    rho: np.ndarray | None = None
    stratum_means: np.ndarray | None = None

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if mu.shape != sigma.shape or np.any(sigma <= 0):
            raise ValueError("mu and sigma must match and sigma must be positive")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if self.rho is not None:
            rho = np.asarray(self.rho, dtype=float)
            if rho.shape != (mu.size, mu.size) or not np.allclose(rho, rho.T) or np.any(np.abs(rho) > 1):
                raise ValueError("rho must be a symmetric correlation matrix")
            if not np.allclose(np.diag(rho), 1.0):
                raise ValueError("rho must have a unit diagonal")
            object.__setattr__(self, "rho", rho)
        if self.stratum_means is not None:
            object.__setattr__(self, "stratum_means", np.asarray(self.stratum_means, dtype=float))


def normal_order_statistic_means(m: int, mu: float = 0.0, sigma: float = 1.0) -> np.ndarray:
    """Expected order statistics of ``m`` iid normals by numerical quadrature."""
    out = np.empty(m)
    for h in range(1, m + 1):
        logc = special.gammaln(m + 1) - special.gammaln(h) - special.gammaln(m - h + 1)

        def integrand(z, h=h, logc=logc):
            return z * math.exp(
                logc
                + (h - 1) * stats.norm.logcdf(z)
                + (m - h) * stats.norm.logsf(z)
                + stats.norm.logpdf(z)
            )

        val, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-12, epsrel=1e-10)
        out[h - 1] = val
    return mu + sigma * out


def theoretical_variance_mvsr(params: ModelParams, m: int, K: int, n: int, regression: bool = False) -> np.ndarray:
    """Model-design variance of the MVSR estimator of every variable.

    ``params.stratum_means`` is ``(m, R)``: order-statistic means for the
    ranking variable (column 0) and concomitant means for the others. With
    ``regression=True`` the concomitant means are replaced by the linear
    regression link on the ranking variable, i.e. the between-strata term of
    variable ``j`` is ``rho_1j^2 (sigma_j / sigma_1)^2`` times that of
    variable 1.
    """
    if params.stratum_means is None:
        raise ValueError("stratum means are required")
    sm = params.stratum_means
    if sm.ndim == 1:
        sm = sm[:, None]
    if sm.shape[0] != m:
        raise ValueError(f"need {m} stratum means, got {sm.shape[0]}")
    fpc = 1.0 - n / K
    mu, sigma = params.mu, params.sigma
    between = ((sm - mu[: sm.shape[1]]) ** 2).sum(axis=0)
    if regression:
        if params.rho is None:
            raise ValueError("the regression form needs rho")
        base = between[0]
        between = np.array(
            [base if j == 0 else params.rho[0, j] ** 2 * (sigma[j] / sigma[0]) ** 2 * base for j in range(mu.size)]
        )
    return (sigma[: between.size] ** 2 - fpc / m * between) / (n * m)
