"""CSV ingestion, simulation-config parsing and run artifacts."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .simulation import BivariateNormal, Cell, EmpiricalCSV, RegressionLinked, SimulationPlan

ROLES = ("ranking", "target", "both", "ignored")


class DataError(ValueError):
    """Problems with a data file. ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


class ConfigError(ValueError):
    pass


@dataclass
class DatasetSchema:
    columns: list
    roles: dict
    n_rows: int
    data: np.ndarray = field(repr=False, default=None)
    labels: list = field(repr=False, default=None)

    @property
    def ranking(self) -> list:
        return [c for c in self.columns if self.roles.get(c) in ("ranking", "both")]

    @property
    def target(self) -> list:
        return [c for c in self.columns if self.roles.get(c) in ("target", "both")]

    def column(self, name) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def validate_csv(path, roles: dict | None = None, label_column: str | None = None) -> DatasetSchema:
    """Parse a header-driven numeric CSV and check it against declared roles.

    ``roles`` maps column names to ``ranking``, ``target``, ``both`` or
    ``ignored``; undeclared columns are parsed and treated as ``both`` when
    no roles are given, ``ignored`` otherwise. ``label_column`` holds
    free-text element labels and is not parsed. Every problem in the file is
    collected before :class:`DataError` is raised.
    """
    path = Path(path)
    errors = []
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(cell.strip() for cell in rows[0]):
        raise DataError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        errors.append(f"{path}: duplicate column names in header")
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if any(c.strip() for c in r)]
    if not body:
        raise DataError(f"{path}: no data rows")
    if roles:
        for name, role in roles.items():
            if name not in header:
                errors.append(f"{path}: column {name!r} not found in header")
            if role not in ROLES:
                errors.append(f"{path}: column {name!r} has unknown role {role!r}")
        resolved = {h: roles.get(h, "ignored") for h in header}
    else:
        resolved = {h: "both" for h in header}
    if label_column is not None:
        if label_column not in header:
            errors.append(f"{path}: label column {label_column!r} not found in header")
        resolved[label_column] = "ignored"
    numeric = [h for h in header if resolved.get(h) != "ignored"]
    if not any(resolved[h] in ("ranking", "both") for h in numeric):
        errors.append(f"{path}: no ranking column declared")
    if not any(resolved[h] in ("target", "both") for h in numeric):
        errors.append(f"{path}: no target column declared")
    data = np.full((len(body), len(numeric)), np.nan)
    labels = []
    idx = {h: header.index(h) for h in header}
    for r, (line, row) in enumerate(body):
        if len(row) != len(header):
            errors.append(f"line {line}: expected {len(header)} fields, found {len(row)}")
            continue
        if label_column in idx:
            labels.append(row[idx[label_column]].strip())
        for c, name in enumerate(numeric):
            cell = row[idx[name]].strip()
            try:
                value = float(cell)
            except ValueError:
                errors.append(f"line {line}, column {name!r}: {cell!r} is not a number")
                continue
            if not math.isfinite(value):
                errors.append(f"line {line}, column {name!r}: {cell!r} is not finite")
                continue
            data[r, c] = value
    if errors:
        raise DataError(errors)
    return DatasetSchema(numeric, {h: resolved[h] for h in numeric}, len(body), data, labels or None)


# simulation configs -------------------------------------------------------------


def _schema() -> dict:
    return json.loads(resources.files("posetrss.data").joinpath("plan.schema.json").read_text())


def _column_index(spec, names, what):
    out = []
    for c in spec:
        if isinstance(c, int):
            if not 0 <= c < len(names):
                raise ConfigError(f"{what}: column index {c} out of range")
            out.append(c)
        elif c in names:
            out.append(names.index(c))
        else:
            raise ConfigError(f"{what}: unknown column {c!r}")
    return tuple(out)


def model_from_config(spec: dict, base_dir: Path):
    kind = spec["kind"]
    if kind == "bivariate_normal":
        return BivariateNormal(
            spec.get("mu1", 0.0), spec.get("mu2", 0.0), spec.get("sigma1", 1.0), spec.get("sigma2", 1.0), spec["rho"]
        )
    if kind == "regression_linked":
        return RegressionLinked(tuple(spec["mu"]), tuple(spec["sigma"]), tuple(spec["rho"]))
    if kind == "empirical_csv":
        path = Path(spec["path"])
        if not path.is_absolute():
            candidate = base_dir / path
            path = candidate if candidate.exists() else _bundled(spec["path"])
        schema = validate_csv(path, label_column=spec.get("label_column"))
        cols = spec.get("columns") or schema.columns
        missing = [c for c in cols if c not in schema.columns]
        if missing:
            raise DataError([f"{path}: column {c!r} not found" for c in missing])
        data = np.column_stack([schema.column(c) for c in cols])
        return EmpiricalCSV(data, tuple(cols), str(spec["path"]))
    raise ConfigError(f"model.kind: unknown kind {kind!r}")


def _bundled(name: str) -> Path:
    return Path(str(resources.files("posetrss.data").joinpath(Path(name).name)))


def plan_from_config(config: dict, base_dir=".", seed: int | None = None, iterations: int | None = None) -> SimulationPlan:
    """Validate a JSON config (see ``plan.schema.json``) and build the plan.

    Raises :class:`ConfigError` with the offending field path.
    """
    if "plan" in config and "cells" not in config:
        config = config["plan"]
    validator = jsonschema.Draft7Validator(_schema())
    errs = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errs:
        msgs = []
        for e in errs:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{where}: {e.message}")
        raise ConfigError("; ".join(msgs))
    base_dir = Path(base_dir)
    seed = config.get("seed") if seed is None else seed
    if seed is None:
        raise ConfigError("seed: a seed is required (config field or --seed)")
    model = model_from_config(config["model"], base_dir)
    names = list(model.names)
    ranking = _column_index(config.get("ranking_columns", [0, 1]), names, "ranking_columns")
    target = _column_index(config.get("target_columns", [0, 1]), names, "target_columns")
    cells = []
    for i, c in enumerate(config["cells"]):
        cell_model = model_from_config(c["model"], base_dir) if "model" in c else None
        if cell_model is not None and list(cell_model.names) != names:
            raise ConfigError(f"cells/{i}/model: variables must match the plan model")
        cells.append(Cell(c["m"], c["K"], c["n"], c.get("label", ""), cell_model, c.get("sign_flips")))
    return SimulationPlan(
        model=model,
        grid=tuple(cells),
        seed=int(seed),
        designs=tuple(config.get("designs", ["MVSR", "CPOR", "RPOR"])),
        iterations=int(iterations if iterations is not None else config.get("iterations", 20_000)),
        sign_flips=config.get("sign_flips"),
        ranking_columns=ranking,
        target_columns=target,
        chunk_size=int(config.get("chunk_size", 500)),
        exact_cutoff=int(config.get("exact_cutoff", 100_000)),
        mc_height_draws=int(config.get("mc_height_draws", 2_000)),
    )


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        bundled = _bundled(path.name)
        if bundled.exists():
            path = bundled
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def resolved_config(config: dict, plan: SimulationPlan) -> dict:
    """Config echo with the effective seed and iteration count filled in."""
    if "plan" in config and "cells" not in config:
        config = config["plan"]
    out = json.loads(json.dumps(config))
    out["seed"] = plan.seed
    out["iterations"] = plan.iterations
    return out


def run_artifact(config: dict, plan: SimulationPlan, table, started: float, finished: float) -> dict:
    """Everything needed to rerun a study, plus its results.

    Replaying the artifact through ``posetrss simulate`` reproduces the
    table files byte for byte.
    """
    return {
        "software": {"name": "posetrss", "version": __version__},
        "plan": resolved_config(config, plan),
        "seed": plan.seed,
        "results": table.rows,
        "skipped": table.skipped,
        "notes": table.notes,
        "timing": {"started_unix": started, "seconds": round(finished - started, 3)},
    }


def now() -> float:
    return time.time()
