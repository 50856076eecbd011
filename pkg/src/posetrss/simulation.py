"""Population models and the Monte Carlo efficiency study.

A study cell fixes ``(m, K, n)`` and a population model. Each replication
draws ``K`` sets of ``m`` elements, builds every requested design on the same
sets, samples within strata and records the estimates. Efficiency is the Monte
Carlo variance of an iid sample mean of size ``n * m`` divided by the Monte
Carlo MSE of the design estimator.

Replications are processed in fixed-size chunks. Chunk ``c`` of cell ``i``
uses its own Philox stream keyed by ``(seed, i, c)``, so results do not depend
on how many worker threads process the chunks.
"""

from __future__ import annotations

import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import designs as dz
from .estimators import rss_variance, stratum_moments
from .poset import apply_flips, pairwise_correlations, suggest_sign_flips

log = logging.getLogger(__name__)

LOW_PRECISION_ITERATIONS = 100


# population models ------------------------------------------------------------


@dataclass(frozen=True)
class BivariateNormal:
    mu1: float = 0.0
    mu2: float = 0.0
    sigma1: float = 1.0
    sigma2: float = 1.0
    rho: float = 0.0
    names: tuple = ("X1", "X2")

    def __post_init__(self):
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise ValueError("standard deviations must be positive")
        if abs(self.rho) > 1:
            raise ValueError("|rho| must not exceed 1")

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2])

    @property
    def variance(self) -> np.ndarray:
        return np.array([self.sigma1, self.sigma2]) ** 2

    def correlation(self) -> np.ndarray:
        return np.array([[1.0, self.rho], [self.rho, 1.0]])

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((size, 2))
        x1 = self.mu1 + self.sigma1 * z[:, 0]
        x2 = self.mu2 + self.sigma2 * (self.rho * z[:, 0] + math.sqrt(1.0 - self.rho**2) * z[:, 1])
        return np.column_stack([x1, x2])


@dataclass(frozen=True)
class RegressionLinked:
    """Normal base variable with others linked by a linear regression.

    ``X_j = mu_j + rho_j * sigma_j / sigma_1 * (X_1 - mu_1) + eps_j`` with
    independent normal ``eps_j`` scaled so that ``Var(X_j) = sigma_j^2``.
    """

    mu: tuple
    sigma: tuple
    rho: tuple
    names: tuple = ()

    def __post_init__(self):
        mu, sigma, rho = tuple(map(float, self.mu)), tuple(map(float, self.sigma)), tuple(map(float, self.rho))
        if len(mu) != len(sigma) or len(rho) != len(mu) - 1 or len(mu) < 2:
            raise ValueError("need R means, R standard deviations and R-1 correlations with the first variable")
        if any(s <= 0 for s in sigma) or any(abs(r) > 1 for r in rho):
            raise ValueError("sigma must be positive and |rho| <= 1")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "rho", rho)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"X{j + 1}" for j in range(len(mu))))

    @property
    def mean(self) -> np.ndarray:
        return np.array(self.mu)

    @property
    def variance(self) -> np.ndarray:
        return np.array(self.sigma) ** 2

    def correlation(self) -> np.ndarray:
        r = np.concatenate([[1.0], self.rho])
        corr = np.outer(r, r)
        np.fill_diagonal(corr, 1.0)
        return corr

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((size, len(self.mu)))
        mu, sigma = np.array(self.mu), np.array(self.sigma)
        rho = np.array(self.rho)
        out = np.empty_like(z)
        out[:, 0] = mu[0] + sigma[0] * z[:, 0]
        out[:, 1:] = mu[1:] + sigma[1:] * (rho * z[:, :1] + np.sqrt(1.0 - rho**2) * z[:, 1:])
        return out


@dataclass(frozen=True, eq=False)
class EmpiricalCSV:
    """The empirical distribution of a data table; draws are rows with replacement."""

    data: np.ndarray
    names: tuple = ()
    source: str = ""

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 2 or data.shape[0] < 2:
            raise ValueError("an empirical population needs at least 2 rows")
        if not np.all(np.isfinite(data)):
            raise ValueError("empirical data must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"X{j + 1}" for j in range(data.shape[1])))

    @property
    def mean(self) -> np.ndarray:
        return self.data.mean(axis=0)

    @property
    def variance(self) -> np.ndarray:
        return self.data.var(axis=0)

    def correlation(self) -> np.ndarray:
        return pairwise_correlations(self.data, self.names)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.data[rng.integers(0, self.data.shape[0], size=size)]


def generate_sets(model, m: int, K: int, rng: np.random.Generator) -> np.ndarray:
    """``K`` iid sets of ``m`` draws from ``model``, shape ``(K, m, R)``."""
    x = model.sample(K * m, rng)
    return x.reshape(K, m, -1)


# plan and results -------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    m: int
    K: int
    n: int
    label: str = ""
    model: object = None
    sign_flips: object = None


@dataclass(frozen=True)
class SimulationPlan:
    """A grid of study cells sharing designs, iterations and seed.

    ``sign_flips`` is ``None`` (compare raw values), ``"auto"`` (greedy mask
    from the model's correlation matrix) or an explicit boolean mask over the
    ranking columns. A cell may override the model and the flip policy.
    """

    model: object
    grid: tuple
    seed: int
    designs: tuple = dz.DESIGNS
    iterations: int = 20_000
    sign_flips: object = None
    ranking_columns: tuple = (0, 1)
    target_columns: tuple = (0, 1)
    chunk_size: int = 500
    exact_cutoff: int = 100_000
    mc_height_draws: int = 2_000

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if not self.grid:
            raise ValueError("the design grid is empty")
        grid = tuple(c if isinstance(c, Cell) else Cell(*c) for c in self.grid)
        object.__setattr__(self, "grid", grid)
        kinds = tuple(d.upper() for d in self.designs)
        if not kinds or any(d not in dz.DESIGNS for d in kinds):
            raise ValueError(f"designs must be a non-empty subset of {dz.DESIGNS}")
        object.__setattr__(self, "designs", kinds)
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")


COLUMNS = (
    "scenario",
    "m",
    "K",
    "n",
    "design",
    "variable",
    "efficiency",
    "mc_mean",
    "mc_mse",
    "mc_variance",
    "mc_bias",
    "mean_var_hat",
    "srs_variance",
    "srs_variance_analytic",
    "true_mean",
    "iterations",
    "flags",
)


@dataclass
class EfficiencyTable:
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def lookup(self, design: str, variable, scenario: str | None = None, m=None, K=None, n=None) -> dict:
        hits = [
            r
            for r in self.rows
            if r["design"] == design
            and r["variable"] == variable
            and (scenario is None or r["scenario"] == scenario)
            and (m is None or r["m"] == m)
            and (K is None or r["K"] == K)
            and (n is None or r["n"] == n)
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {design}/{variable}/{scenario}")
        return hits[0]

    def efficiency(self, design, variable, scenario=None, **kw) -> float:
        return self.lookup(design, variable, scenario, **kw)["efficiency"]


@dataclass
class CellResult:
    """Per-replication estimates of one cell (kept for diagnostics and tests)."""

    mu_hat: dict
    var_hat: dict
    srs_mean: np.ndarray
    true_mean: np.ndarray
    height_paths: dict


def _resolve_flips(policy, model, ranking_columns):
    if policy is None or policy is False or policy == "none":
        return None
    if isinstance(policy, str):
        if policy.lower() != "auto":
            raise ValueError(f"unknown sign-flip policy {policy!r}")
        corr = model.correlation()[np.ix_(ranking_columns, ranking_columns)]
        flips = suggest_sign_flips(corr)
        return tuple(bool(f) for f in flips) if flips.any() else None
    flips = tuple(bool(f) for f in policy)
    if len(flips) != len(ranking_columns):
        raise ValueError("sign-flip mask must cover the ranking columns")
    return flips if any(flips) else None


def _chunk_rng(seed: int, cell: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(cell, chunk))
    return np.random.Generator(np.random.Philox(ss))


def _run_chunk(args):
    (model, cell, plan, flips, cell_index, chunk_index, size) = args
    rng = _chunk_rng(plan.seed, cell_index, chunk_index)
    m, K, n = cell.m, cell.K, cell.n
    rank_cols = list(plan.ranking_columns)
    tgt_cols = list(plan.target_columns)
    sets = model.sample(size * K * m, rng).reshape(size, K, m, -1)
    srs = model.sample(size * n * m, rng).reshape(size, n * m, -1)[..., tgt_cols].mean(axis=1)
    values = sets[..., tgt_cols].reshape(size, K * m, len(tgt_cols))
    view = sets[..., rank_cols]
    if flips is not None:
        view = apply_flips(view, flips)
    mu_hat, var_hat, paths = {}, {}, {}
    for kind in plan.designs:
        if kind == "MVSR":
            strata = dz.mvsr_assignment(sets[..., rank_cols[0]], rng)
        elif kind == "RPOR":
            strata = dz.rpor_assignment(view, rng, plan.exact_cutoff)
        else:
            strata, _, exact = dz.cpor_assignment(view, rng, plan.exact_cutoff, plan.mc_height_draws)
            paths[kind] = int(np.count_nonzero(~exact))
        strata = strata.reshape(size, K * m)
        if kind == "CPOR":
            k_h = np.stack([np.count_nonzero(strata == h, axis=1) for h in range(m)], axis=1)
            n_h = np.stack([dz.allocate_proportional(row, n * m).n_h for row in k_h])
            weights = k_h / (K * m)
        else:
            n_h = np.full((size, m), n, dtype=np.int64)
            weights = np.full((size, m), 1.0 / m)
        selected = dz.select_within_strata(strata, n_h, rng)
        _, means, s2 = stratum_moments(values, strata, selected, m)
        mu = np.einsum("bh,bht->bt", weights, means)
        mu_hat[kind] = mu
        if kind == "CPOR":
            nbar = n_h.sum(axis=1) / m
            within = np.nansum(s2, axis=1)
            spread = np.nansum(np.where(np.isnan(s2), 0.0, s2) * (np.maximum(n_h, 1) - 1)[..., None], axis=1)
            spread = spread + np.einsum("bh,bht->bt", n_h, (means - mu[:, None, :]) ** 2)
            v = (spread + (K - nbar)[:, None] * within) / (nbar * m * (K * m - 1))[:, None]
        else:
            v = rss_variance(means, s2, mu, K, n) if n > 1 else np.full_like(mu, np.nan)
        var_hat[kind] = v
    return mu_hat, var_hat, srs, paths


def run_cell(plan: SimulationPlan, cell: Cell, cell_index: int, threads: int = 1) -> CellResult:
    model = cell.model if cell.model is not None else plan.model
    policy = cell.sign_flips if cell.sign_flips is not None else plan.sign_flips
    flips = _resolve_flips(policy, model, list(plan.ranking_columns))
    if flips is not None:
        log.info("cell %s: sign flips %s on ranking columns", cell.label or cell_index, flips)
    sizes = [plan.chunk_size] * (plan.iterations // plan.chunk_size)
    if plan.iterations % plan.chunk_size:
        sizes.append(plan.iterations % plan.chunk_size)
    jobs = [(model, cell, plan, flips, cell_index, c, s) for c, s in enumerate(sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    mu_hat = {k: np.concatenate([p[0][k] for p in parts]) for k in plan.designs}
    var_hat = {k: np.concatenate([p[1][k] for p in parts]) for k in plan.designs}
    srs = np.concatenate([p[2] for p in parts])
    paths = {k: sum(p[3].get(k, 0) for p in parts) for k in plan.designs if k == "CPOR"}
    true_mean = np.asarray(model.mean, dtype=float)[list(plan.target_columns)]
    return CellResult(mu_hat, var_hat, srs, true_mean, paths)


def _analytic_srs(model, cols, size):
    if isinstance(model, EmpiricalCSV):
        return [math.nan] * len(cols)
    return list(np.asarray(model.variance)[cols] / size)


def run_plan(plan: SimulationPlan, threads: int = 1, keep_results: bool = False):
    """Run every cell of ``plan`` and return an :class:`EfficiencyTable`.

    With ``keep_results=True`` the per-replication :class:`CellResult` objects
    are returned as a second value.
    """
    table = EfficiencyTable()
    results = {}
    if plan.iterations < LOW_PRECISION_ITERATIONS:
        table.notes.append(f"low precision: only {plan.iterations} iteration(s) per cell")
    for ci, cell in enumerate(plan.grid):
        label = cell.label or f"cell{ci}"
        if not 1 <= cell.n < cell.K or cell.m < 2:
            table.skipped.append({"scenario": label, "m": cell.m, "K": cell.K, "n": cell.n, "reason": "need m >= 2 and 1 <= n < K"})
            continue
        res = run_cell(plan, cell, ci, threads)
        results[label] = res
        model = cell.model if cell.model is not None else plan.model
        names = [model.names[c] for c in plan.target_columns]
        srs_var = res.srs_mean.var(axis=0)
        analytic = _analytic_srs(model, list(plan.target_columns), cell.n * cell.m)
        for kind in plan.designs:
            est = res.mu_hat[kind]
            mean = est.mean(axis=0)
            mse = ((est - res.true_mean) ** 2).mean(axis=0)
            var = est.var(axis=0)
            vh = res.var_hat[kind]
            mean_vh = np.where(np.all(np.isnan(vh), axis=0), np.nan, np.nanmean(np.where(np.isnan(vh), 0, vh), axis=0))
            for j, name in enumerate(names):
                flags = []
                if mse[j] == 0.0 or plan.iterations < 2:
                    eff = math.nan
                    flags.append("indeterminate")
                else:
                    eff = float(srs_var[j] / mse[j])
                if plan.iterations < LOW_PRECISION_ITERATIONS:
                    flags.append("low-precision")
                if kind == "CPOR":
                    flags.append("conservative-variance")
                    if res.height_paths.get(kind):
                        flags.append(f"mc-heights:{res.height_paths[kind]}")
                table.rows.append(
                    {
                        "scenario": label,
                        "m": cell.m,
                        "K": cell.K,
                        "n": cell.n,
                        "design": kind,
                        "variable": name,
                        "efficiency": eff,
                        "mc_mean": float(mean[j]),
                        "mc_mse": float(mse[j]),
                        "mc_variance": float(var[j]),
                        "mc_bias": float(mean[j] - res.true_mean[j]),
                        "mean_var_hat": float(mean_vh[j]),
                        "srs_variance": float(srs_var[j]),
                        "srs_variance_analytic": float(analytic[j]),
                        "true_mean": float(res.true_mean[j]),
                        "iterations": plan.iterations,
                        "flags": ";".join(flags),
                    }
                )
    if keep_results:
        return table, results
    return table


# emission ---------------------------------------------------------------------


def _csv_value(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def emit_table(table: EfficiencyTable, fmt: str = "csv") -> str:
    """Render an efficiency table.

    CSV is long format with full round-trip precision. Markdown is the wide
    layout used for reporting: one row per cell and variable, one efficiency
    column per design, two decimals.
    """
    fmt = fmt.lower()
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(COLUMNS) + "\n")
        for row in table.rows:
            buf.write(",".join(_csv_value(row[c]) for c in COLUMNS) + "\n")
        for skip in table.skipped:
            buf.write(f"# skipped {skip['scenario']} (m={skip['m']}, K={skip['K']}, n={skip['n']}): {skip['reason']}\n")
        for note in table.notes:
            buf.write(f"# {note}\n")
        return buf.getvalue()
    if fmt not in ("md", "markdown"):
        raise ValueError(f"unknown format {fmt!r}")
    kinds = list(dict.fromkeys(r["design"] for r in table.rows))
    head = ["scenario", "m", "K", "n", "variable"] + kinds
    lines = ["| " + " | ".join(head) + " |", "|" + "|".join("---" for _ in head) + "|"]
    keyed = {}
    for r in table.rows:
        key = (r["scenario"], r["m"], r["K"], r["n"], r["variable"])
        keyed.setdefault(key, {})[r["design"]] = r["efficiency"]
    for key, effs in keyed.items():
        cells = [str(k) for k in key] + [_fmt2(effs.get(k)) for k in kinds]
        lines.append("| " + " | ".join(cells) + " |")
    out = "\n".join(lines) + "\n"
    for skip in table.skipped:
        out += f"\nSkipped {skip['scenario']} (m={skip['m']}, K={skip['K']}, n={skip['n']}): {skip['reason']}\n"
    for note in table.notes:
        out += f"\nNote: {note}\n"
    return out


def _fmt2(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "n/a"
    return f"{v:.2f}"


def with_iterations(plan: SimulationPlan, iterations: int) -> SimulationPlan:
    return replace(plan, iterations=iterations)


