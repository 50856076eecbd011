import math

import numpy as np
import pytest

from posetrss.simulation import (
    COLUMNS,
    BivariateNormal,
    Cell,
    EmpiricalCSV,
    RegressionLinked,
    SimulationPlan,
    _resolve_flips,
    emit_table,
    generate_sets,
    run_plan,
)


def test_bivariate_normal_moments():
    model = BivariateNormal(1.0, -2.0, 2.0, 0.5, 0.6)
    x = generate_sets(model, 3, 40_000, np.random.default_rng(0)).reshape(-1, 2)
    assert x.shape == (120_000, 2)
    np.testing.assert_allclose(x.mean(axis=0), [1.0, -2.0], atol=0.02)
    np.testing.assert_allclose(x.std(axis=0), [2.0, 0.5], rtol=0.01)
    assert np.corrcoef(x.T)[0, 1] == pytest.approx(0.6, abs=0.01)


def test_perfect_correlation_is_affine():
    x = BivariateNormal(0, 1, 1, 3, 1.0).sample(100, np.random.default_rng(1))
    np.testing.assert_allclose(x[:, 1], 1 + 3 * x[:, 0])


def test_regression_linked_model():
    model = RegressionLinked((0.0, 0.0, 5.0), (1.0, 2.0, 1.0), (0.8, -0.3))
    x = model.sample(200_000, np.random.default_rng(2))
    np.testing.assert_allclose(np.corrcoef(x.T)[0, 1:], [0.8, -0.3], atol=0.01)
    np.testing.assert_allclose(x.std(axis=0), [1, 2, 1], rtol=0.01)
    np.testing.assert_allclose(model.correlation()[0], [1, 0.8, -0.3])


def test_model_validation():
    with pytest.raises(ValueError):
        BivariateNormal(rho=1.5)
    with pytest.raises(ValueError):
        BivariateNormal(sigma1=0)
    with pytest.raises(ValueError):
        EmpiricalCSV(np.array([[1.0, 2.0]]), ("a", "b"))


def test_two_row_empirical_population():
    model = EmpiricalCSV(np.array([[0.0, 1.0], [2.0, 3.0]]), ("a", "b"))
    x = generate_sets(model, 3, 2000, np.random.default_rng(3)).reshape(-1, 2)
    assert set(map(tuple, x.tolist())) == {(0.0, 1.0), (2.0, 3.0)}
    assert abs((x[:, 0] == 0).mean() - 0.5) < 0.03
    np.testing.assert_allclose(model.mean, [1.0, 2.0])


def test_point_mass_is_indeterminate():
    model = EmpiricalCSV(np.array([[1.0, 1.0], [1.0, 1.0]]), ("a", "b"))
    table = run_plan(SimulationPlan(model, (Cell(3, 4, 2, "pm"),), seed=1, iterations=200))
    for row in table.rows:
        assert math.isnan(row["efficiency"])
        assert "indeterminate" in row["flags"]
        assert row["mc_mse"] == 0.0


def plan(**kw):
    base = dict(model=BivariateNormal(rho=0.6), grid=(Cell(3, 5, 2, "a"), Cell(2, 4, 3, "b")), seed=7, iterations=700)
    base.update(kw)
    return SimulationPlan(**base)


def test_table_statistics_are_consistent():
    table, results = run_plan(plan(), keep_results=True)
    assert len(table.rows) == 2 * 3 * 2
    for row in table.rows:
        assert abs(row["mc_mse"] - (row["mc_variance"] + row["mc_bias"] ** 2)) < 1e-10
        assert row["efficiency"] == pytest.approx(row["srs_variance"] / row["mc_mse"])
        assert row["efficiency"] > 0
    res = results["a"]
    assert res.mu_hat["RPOR"].shape == (700, 2)
    assert res.srs_mean.shape == (700, 2)


def test_srs_baseline_variance_matches_analytic():
    table = run_plan(plan(iterations=20_000, designs=("MVSR",), grid=(Cell(3, 5, 2, "a"),)))
    for row in table.rows:
        assert row["srs_variance"] == pytest.approx(row["srs_variance_analytic"], rel=0.05)
        assert row["srs_variance_analytic"] == pytest.approx(1 / 6)


def test_results_do_not_depend_on_threads_or_chunking_order():
    a = run_plan(plan(chunk_size=100))
    b = run_plan(plan(chunk_size=100), threads=4)
    assert emit_table(a, "csv") == emit_table(b, "csv")
    c = run_plan(plan(chunk_size=100, seed=8))
    assert emit_table(a, "csv") != emit_table(c, "csv")


def test_skipped_cells_and_notes():
    table = run_plan(plan(grid=(Cell(3, 4, 4, "bad"), Cell(3, 4, 2, "ok")), iterations=20))
    assert [s["scenario"] for s in table.skipped] == ["bad"]
    assert {r["scenario"] for r in table.rows} == {"ok"}
    assert all("low-precision" in r["flags"] for r in table.rows)
    assert table.notes


def test_single_iteration_is_indeterminate():
    table = run_plan(plan(iterations=1))
    assert all(math.isnan(r["efficiency"]) for r in table.rows)


def test_sign_flip_policies():
    model = BivariateNormal(rho=-0.7)
    assert _resolve_flips("auto", model, [0, 1]) == (False, True)
    assert _resolve_flips("auto", BivariateNormal(rho=0.7), [0, 1]) is None
    assert _resolve_flips(None, model, [0, 1]) is None
    assert _resolve_flips([True, False], model, [0, 1]) == (True, False)
    with pytest.raises(ValueError):
        _resolve_flips("sometimes", model, [0, 1])


def test_emit_table_formats():
    table = run_plan(plan(grid=(Cell(3, 5, 2, "a"), Cell(3, 4, 4, "bad")), iterations=300))
    csv = emit_table(table, "csv").splitlines()
    assert csv[0] == ",".join(COLUMNS)
    assert len([l for l in csv if not l.startswith("#")]) == 1 + 6
    assert any(l.startswith("# skipped bad") for l in csv)
    md = emit_table(table, "md").splitlines()
    assert md[0] == "| scenario | m | K | n | variable | MVSR | CPOR | RPOR |"
    assert len([l for l in md if l.startswith("| a")]) == 2
    with pytest.raises(ValueError):
        emit_table(table, "xml")


def test_plan_validation():
    with pytest.raises(ValueError):
        plan(iterations=0)
    with pytest.raises(ValueError):
        plan(designs=("ABC",))
    with pytest.raises(ValueError):
        plan(grid=())


@pytest.mark.slow
def test_engine_agrees_with_naive_simulator():
    import oracles

    naive = oracles.naive_efficiency(0.3, 3, 12, 4, 5000, 2024)
    table = run_plan(SimulationPlan(BivariateNormal(rho=0.3), (Cell(3, 12, 4, "x"),), seed=2024, iterations=20_000))
    for design, effs in naive.items():
        for var, eff in zip(("X1", "X2"), effs):
            assert table.efficiency(design, var) == pytest.approx(eff, abs=0.15)


def test_grid_markdown_and_all_skipped():
    from posetrss.dataio import load_config, plan_from_config

    table = run_plan(plan_from_config(load_config("efficiency_grid.json"), iterations=20))
    rows = [l for l in emit_table(table, "md").splitlines() if l.startswith("| rho")]
    assert len(rows) == 16
    empty = run_plan(plan(grid=(Cell(3, 4, 4, "bad"),), iterations=20))
    csv = emit_table(empty, "csv").splitlines()
    assert csv[0] == ",".join(COLUMNS) and csv[1].startswith("# skipped bad")
    one = run_plan(plan(grid=(Cell(3, 4, 2, "one"),), designs=("RPOR",), iterations=20))
    one.rows = one.rows[:1]
    assert len([l for l in emit_table(one, "csv").splitlines() if not l.startswith("#")]) == 2
