"""Tests for drifts, the Picard solver, the dense oracle and the a priori check."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lattice_spde.errors import ConfigurationError, NonConvergenceError
from lattice_spde.green_kernel import apply_green, lattice_kernel
from lattice_spde.lattice_core import CellField, GridSpec, LatticeField
from lattice_spde.noise_field import CorrelationModel, NoiseRealization, covariance_table, sample
from lattice_spde.spde_solver import (
    DriftSpec,
    SolveConfig,
    apriori_norm_check,
    cell_midpoints,
    comparison_test,
    dense_solve_oracle,
    make_g_n,
    make_source,
    materialize_operator,
    solve,
    step_error,
)


def _cfg(**kwargs):
    params = {"theta": 12.0, "lam": 0.8, "alpha": 1.25, "tolerance": 1e-12}
    params.update(kwargs)
    return SolveConfig(**params)


def _noise(grid, rng, scale=1e-3):
    return NoiseRealization(grid, scale * rng.standard_normal(grid.cell_shape))


def test_drift_audits_pass_for_arctan():
    drift = DriftSpec.from_terms("arctan", shift=0.5, f2_slope=-0.2)
    assert drift.M == pytest.approx(math.pi / 2 + 0.5)
    assert drift.L == pytest.approx(0.2)
    assert drift.monotonicity_audit().passed
    assert drift.bound_audit().passed


def test_monotonicity_audit_catches_understated_lipschitz():
    drift = DriftSpec(f1=np.zeros_like, f2=lambda u: -u, M=0.0, L=0.5)
    assert not drift.monotonicity_audit().passed


def test_bound_audit_catches_understated_bound():
    drift = DriftSpec(f1=np.arctan, f2=np.zeros_like, M=1.0, L=0.0)
    assert not drift.bound_audit().passed


def test_shifted_drift():
    drift = DriftSpec.from_terms("tanh").shifted(2.0)
    assert drift.M == pytest.approx(3.0)
    assert drift(np.zeros(1))[0] == pytest.approx(2.0)


def test_unknown_drift_and_source_kinds():
    with pytest.raises(ConfigurationError):
        DriftSpec.from_terms("cubic")
    with pytest.raises(ConfigurationError):
        make_source("gaussian_bump")


def test_sources_on_points():
    points = np.array([[0.0, 0.0], [0.5, 0.25]])
    np.testing.assert_allclose(make_source("constant", 2.0)(points), [2.0, 2.0])
    np.testing.assert_allclose(make_source("linear")(points), [0.0, 0.5])
    np.testing.assert_allclose(make_source("cosine_product")(points), [1.0, 0.0], atol=1e-15)


def test_cell_midpoints_order():
    mids = cell_midpoints(GridSpec(2, 2))
    np.testing.assert_allclose(mids, [[0.25, 0.25], [0.25, 0.75], [0.75, 0.25], [0.75, 0.75]])


def test_make_g_n_uses_midpoints():
    g_n = make_g_n(make_source("linear"), GridSpec(2, 4))
    np.testing.assert_allclose(g_n.values[:, 0], [0.125, 0.375, 0.625, 0.875])


@pytest.mark.parametrize("d", [1, 2])
def test_step_error_linear_source(d):
    g = make_source("linear")
    coarse = step_error(g, GridSpec(d, 4))
    fine = step_error(g, GridSpec(d, 8))
    assert coarse == pytest.approx(1.0 / (4 * math.sqrt(12.0)), rel=1e-12)
    assert fine / coarse <= 0.6


def test_zero_data_gives_zero_solution(mollifier):
    grid = GridSpec(2, 6)
    drift = DriftSpec.from_terms("zero")
    sol = solve(grid, drift, CellField(grid, np.zeros(grid.cell_shape)), NoiseRealization.zeros(grid), _cfg(), mollifier)
    assert sol.iterations == 1
    assert sol.field.sup_norm() == 0.0
    assert sol.converged


def test_dense_oracle_reports_convergence(mollifier, rng):
    grid = GridSpec(2, 4)
    drift = DriftSpec.from_terms("zero", f2_slope=0.05)
    g_n = make_g_n(make_source("cosine_product"), grid)
    noise = _noise(grid, rng)
    assert dense_solve_oracle(grid, drift, g_n, noise, 0.3, mollifier).converged
    assert not dense_solve_oracle(grid, drift, g_n, noise, 0.3, mollifier, max_iter=1).converged


@pytest.mark.parametrize(
    "d,n,drift",
    [
        (2, 4, DriftSpec.from_terms("zero")),
        (2, 4, DriftSpec.from_terms("zero", f2_slope=0.05)),
        (4, 3, DriftSpec.from_terms("arctan", f2_slope=0.05)),
    ],
)
def test_solver_matches_dense_oracle(d, n, drift, mollifier, rng):
    grid = GridSpec(d, n)
    cfg = _cfg(eps=0.3)
    g_n = make_g_n(make_source("cosine_product"), grid)
    noise = _noise(grid, rng)
    sol = solve(grid, drift, g_n, noise, cfg, mollifier)
    oracle = dense_solve_oracle(grid, drift, g_n, noise, 0.3, mollifier)
    np.testing.assert_allclose(sol.field.values, oracle.field.values, atol=1e-10)
    assert oracle.residual <= 1e-9


def test_constant_drift_is_a_linear_solve(mollifier, rng):
    grid = GridSpec(2, 5)
    drift = DriftSpec.from_terms("constant", shift=0.7)
    g_n = make_g_n(make_source("cosine_product"), grid)
    noise = _noise(grid, rng)
    sol = solve(grid, drift, g_n, noise, _cfg(), mollifier)
    rhs = 0.7 + g_n.interior().values + 25.0 * noise.interior()
    kernel = lattice_kernel(grid, sol.eps, mollifier)
    expected = apply_green(kernel, LatticeField(grid, rhs)).values
    np.testing.assert_allclose(sol.field.values, expected, atol=1e-12)


def test_materialized_operator_is_strictly_negative(mollifier):
    grid = GridSpec(2, 5)
    a = materialize_operator(grid, 0.3, mollifier)
    np.testing.assert_allclose(a, a.T, atol=1e-9)
    assert np.max(np.linalg.eigvalsh(a)) <= -4 * grid.d


def test_dense_operator_size_limit():
    with pytest.raises(ConfigurationError):
        materialize_operator(GridSpec(3, 12), 0.1)


def test_lipschitz_gate(mollifier):
    grid = GridSpec(4, 3)
    drift = DriftSpec.from_terms("zero", f2_slope=100.0)
    with pytest.raises(ConfigurationError, match="contraction gate"):
        solve(grid, drift, CellField(grid, np.zeros(grid.cell_shape)), NoiseRealization.zeros(grid), _cfg(), mollifier)


def test_config_gates():
    grid = GridSpec(4, 4)
    drift = DriftSpec.from_terms("zero")
    for bad in (_cfg(theta=4.0), _cfg(lam=1.0), _cfg(alpha=1.0), _cfg(damping=0.0), _cfg(max_iter=0)):
        with pytest.raises(ConfigurationError):
            bad.validate(grid, drift)


def test_non_convergence_carries_history(mollifier, rng):
    grid = GridSpec(2, 4)
    drift = DriftSpec.from_terms("arctan")
    g_n = make_g_n(make_source("cosine_product"), grid)
    with pytest.raises(NonConvergenceError) as info:
        solve(grid, drift, g_n, _noise(grid, rng), _cfg(max_iter=1), mollifier)
    assert len(info.value.residual_history) == 1
    assert info.value.partial.shape == grid.interior_shape


def test_contraction_ratios_bounded(mollifier, rng):
    grid = GridSpec(4, 4)
    drift = DriftSpec.from_terms("zero", f2_slope=0.05)
    g_n = make_g_n(make_source("cosine_product"), grid)
    sol = solve(grid, drift, g_n, _noise(grid, rng), _cfg(tolerance=1e-10), mollifier)
    assert sol.contraction_ratios
    assert sol.max_contraction <= drift.L / (4 * grid.d) + 0.05
    assert sol.residual <= 1e-10


def test_contraction_on_benchmark(mollifier):
    grid = GridSpec(4, 8)
    drift = DriftSpec.from_terms("arctan", f2_slope=0.05)
    table = covariance_table(grid, CorrelationModel("gaussian", 0.1, 4))
    g_n = make_g_n(make_source("cosine_product"), grid)
    cfg = SolveConfig(theta=12.0, lam=0.8, alpha=1.25, tolerance=1e-10)
    for index in range(3):
        sol = solve(grid, drift, g_n, sample(grid, table, 0, index), cfg, mollifier)
        assert sol.converged
        assert sol.contraction_ratios
        assert sol.max_contraction <= drift.L / (4 * grid.d) + 0.05


def test_transpose_invariance(mollifier, rng):
    grid = GridSpec(2, 6)
    drift = DriftSpec.from_terms("arctan", f2_slope=0.05)
    g_n = make_g_n(make_source("cosine_product"), grid)
    values = 1e-2 * rng.standard_normal(grid.cell_shape)
    u = solve(grid, drift, g_n, NoiseRealization(grid, values), _cfg(), mollifier).field.values
    u_t = solve(grid, drift, g_n, NoiseRealization(grid, values.T), _cfg(), mollifier).field.values
    np.testing.assert_allclose(u_t, u.T, atol=1e-11)


def test_comparison_principle(mollifier, rng):
    grid = GridSpec(2, 6)
    cfg = _cfg(eps=0.0)
    upper = DriftSpec.from_terms("arctan", shift=1.0)
    lower = DriftSpec.from_terms("arctan")
    g_n = make_g_n(make_source("cosine_product"), grid)
    noise = _noise(grid, rng, 1e-2)
    report = comparison_test(grid, upper, lower, g_n, noise, cfg, mollifier)
    assert report.valid
    assert report.ordered
    assert report.max_violation < 0

    reversed_report = comparison_test(grid, lower, upper, g_n, noise, cfg, mollifier)
    assert not reversed_report.valid


def test_comparison_principle_on_coupled_draws(mollifier):
    grid = GridSpec(4, 6)
    table = covariance_table(grid, CorrelationModel("gaussian", 0.1, 4))
    lower = DriftSpec.from_terms("arctan", f2_slope=0.05)
    upper = DriftSpec.from_terms("arctan", shift=1.0, f2_slope=0.05)
    g_n = make_g_n(make_source("cosine_product"), grid)
    cfg = SolveConfig(theta=12.0, lam=0.8, alpha=1.25, tolerance=1e-10)
    for index in range(20):
        report = comparison_test(grid, upper, lower, g_n, sample(grid, table, 0, index), cfg, mollifier)
        assert report.valid
        assert report.ordered, f"draw {index} violates the ordering by {report.max_violation:.3e}"


def test_solution_summary_fields(mollifier):
    grid = GridSpec(1, 8)
    sol = solve(grid, DriftSpec.from_terms("zero"), make_g_n(make_source("constant"), grid), NoiseRealization.zeros(grid), _cfg(), mollifier)
    summary = sol.to_dict()
    assert summary["n"] == 8
    assert summary["converged"]
    assert summary["apriori_norm"] == pytest.approx(sol.field.lp_norm(5.0))


def test_apriori_check_zero_data(mollifier):
    drift = DriftSpec.from_terms("zero")
    sols = {}
    for n in (4, 8):
        grid = GridSpec(2, n)
        sols[n] = [solve(grid, drift, CellField(grid, np.zeros(grid.cell_shape)), NoiseRealization.zeros(grid), _cfg(), mollifier)]
    report = apriori_norm_check(sols, p=2.0, alpha_prime=5.0, drift=drift)
    assert report.bounded
    assert all(row.estimate == 0.0 for row in report.rows)
    assert report.kappa == pytest.approx(0.0)


def test_apriori_check_rejects_p():
    with pytest.raises(ConfigurationError):
        apriori_norm_check({4: []}, p=6.0, alpha_prime=5.0)
    with pytest.raises(ConfigurationError):
        apriori_norm_check({4: []}, p=2.0, alpha_prime=5.0)


@given(
    f1=st.sampled_from(["zero", "constant", "arctan", "tanh"]),
    shift=st.floats(min_value=-3.0, max_value=3.0),
    slope=st.floats(min_value=-5.0, max_value=5.0),
    seed=st.integers(min_value=0, max_value=1000),
)
@settings(max_examples=30, deadline=None)
def test_named_drifts_pass_their_audits(f1, shift, slope, seed):
    drift = DriftSpec.from_terms(f1, shift=shift, f2_slope=slope)
    assert drift.monotonicity_audit(samples=500, seed=seed).passed
    assert drift.bound_audit(samples=500, seed=seed).passed
