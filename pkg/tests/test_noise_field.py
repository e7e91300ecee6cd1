"""Tests for cell covariances, samplers, aggregation and stochastic integrals."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lattice_spde.errors import ConfigurationError, ModelError
from lattice_spde.green_kernel import eval_kernel, lattice_kernel
from lattice_spde.lattice_core import GridSpec
from lattice_spde.noise_field import (
    CorrelationModel,
    NoiseRealization,
    aggregate,
    axis_covariance,
    backend_agreement,
    cell_covariance,
    check_integrability,
    check_passed,
    covariance_table,
    default_check_pairs,
    describe_sampler,
    get_sampler,
    integrate_kernel,
    integrate_kernel_field,
    kernel_integral_variance,
    noise_variance_check,
    riesz_unit_covariance,
    sample,
    sample_batch,
    select_backend,
)


def test_riesz_exponent_gate():
    with pytest.raises(ModelError, match="integrability"):
        CorrelationModel("riesz", 4.0, 4)
    with pytest.raises(ModelError):
        CorrelationModel("riesz", 0.0, 2)
    CorrelationModel("riesz", 3.9, 4)


def test_unknown_model_kind():
    with pytest.raises(ModelError):
        CorrelationModel("matern", 1.0, 2)


def test_nonpositive_parameter_rejected():
    with pytest.raises(ModelError):
        CorrelationModel("gaussian", 0.0, 2)


@pytest.mark.parametrize("k", [0, 1, 3])
def test_gaussian_axis_covariance_matches_dblquad(k):
    model = CorrelationModel("gaussian", 0.1, 1)
    h = 0.25
    expected, _ = integrate.dblquad(
        lambda y, x: math.exp(-((x - y) ** 2) / (2 * 0.01)),
        0.0,
        h,
        k * h,
        (k + 1) * h,
        epsabs=1e-13,
        epsrel=1e-12,
    )
    assert cell_covariance((k,), GridSpec(1, 4), model) == pytest.approx(expected, abs=1e-8)


def test_separable_covariance_is_product():
    model = CorrelationModel("gaussian", 0.2, 2)
    grid = GridSpec(2, 5)
    expected = axis_covariance(model, grid.h, 1) * axis_covariance(model, grid.h, 2)
    assert cell_covariance((1, -2), grid, model) == pytest.approx(expected, rel=1e-14)


def test_constant_correlation_gives_cell_volume_squared():
    model = CorrelationModel("factorized", math.inf, 2)
    grid = GridSpec(2, 4)
    for offset in [(0, 0), (1, 3), (2, 2)]:
        assert cell_covariance(offset, grid, model) == pytest.approx(4.0**-4, rel=1e-12)


def test_factorized_covariance_vanishes_beyond_support():
    model = CorrelationModel("factorized", 0.25, 1)
    assert cell_covariance((3,), GridSpec(1, 8), model) == 0.0
    assert cell_covariance((1,), GridSpec(1, 8), model) > 0.0


def test_riesz_unit_covariance_closed_forms():
    assert riesz_unit_covariance((0,), 0.5) == pytest.approx(8.0 / 3.0, abs=1e-10)
    expected = 2.0 / 3.0 + (8.0 * math.sqrt(2.0) - 10.0) / 3.0
    assert riesz_unit_covariance((1,), 0.5) == pytest.approx(expected, abs=1e-10)


def test_riesz_covariance_scaling():
    model = CorrelationModel("riesz", 1.0, 2)
    coarse = cell_covariance((1, 0), GridSpec(2, 4), model)
    fine = cell_covariance((1, 0), GridSpec(2, 8), model)
    assert fine / coarse == pytest.approx(2.0 ** -(4 - 1.0), rel=1e-12)


def test_riesz_covariance_symmetric_in_offset():
    model = CorrelationModel("riesz", 1.5, 2)
    grid = GridSpec(2, 6)
    assert cell_covariance((2, -1), grid, model) == pytest.approx(cell_covariance((1, 2), grid, model))


def test_coarse_covariance_is_block_sum():
    model = CorrelationModel("gaussian", 0.1, 1)
    coarse = covariance_table(GridSpec(1, 4), model)
    fine = covariance_table(GridSpec(1, 8), model)
    for k in range(3):
        block = sum(fine.entry((2 * k + a - b,)) for a in (0, 1) for b in (0, 1))
        assert coarse.entry((k,)) == pytest.approx(block, rel=1e-10)


def test_dense_matrix_is_symmetric():
    table = covariance_table(GridSpec(2, 4), CorrelationModel("gaussian", 0.3, 2))
    matrix = table.dense_matrix()
    assert matrix.shape == (16, 16)
    np.testing.assert_allclose(matrix, matrix.T)
    assert table.psd_report()["psd"]


def test_variance_check_d4():
    table = covariance_table(GridSpec(4, 6), CorrelationModel("gaussian", 0.1, 4))
    rows = noise_variance_check(table, seed=3, samples=2000)
    off_diagonal = [r for r in rows if r["cells"][0] != r["cells"][1]]
    assert len(rows) == 7
    assert len(off_diagonal) == 4
    assert any(r["expected"] > 0.1 * table.variance for r in off_diagonal)
    for row in rows:
        assert abs(row["empirical"] - row["expected"]) <= 3 * row["stderr"], row
    assert check_passed(rows)


def test_check_pairs_stay_on_the_grid():
    for n in (2, 3, 6):
        grid = GridSpec(3, n)
        for a, b in default_check_pairs(grid):
            assert all(0 <= c < n for c in (*a, *b))


def test_check_passed_uses_three_sigma():
    row = {"empirical": 1.0, "expected": 0.0, "stderr": 0.3}
    assert not check_passed([row])
    assert check_passed([dict(row, stderr=0.34)])


def test_aggregation_is_associative(rng):
    fine = NoiseRealization(GridSpec(2, 8), rng.standard_normal((8, 8)))
    twice = aggregate(aggregate(fine, 2), 2)
    once = aggregate(fine, 4)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
    assert once.grid == GridSpec(2, 2)
    assert once.values.sum() == pytest.approx(fine.values.sum())


def test_aggregation_factor_must_divide(rng):
    fine = NoiseRealization(GridSpec(1, 6), rng.standard_normal(6))
    with pytest.raises(ConfigurationError):
        aggregate(fine, 4)
    assert aggregate(fine, 1) is fine


def test_realization_shape_checked():
    with pytest.raises(ConfigurationError):
        NoiseRealization(GridSpec(2, 4), np.zeros((3, 3)))


def test_sampling_is_deterministic():
    grid = GridSpec(2, 4)
    table = covariance_table(grid, CorrelationModel("gaussian", 0.2, 2))
    a = sample(grid, table, seed=7, index=3)
    b = sample(grid, table, seed=7, index=3)
    c = sample(grid, table, seed=7, index=4)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.backend == "cholesky"


def test_sampling_rejects_grid_mismatch():
    table = covariance_table(GridSpec(2, 4), CorrelationModel("gaussian", 0.2, 2))
    with pytest.raises(ConfigurationError):
        sample(GridSpec(2, 8), table, seed=0)


def test_unknown_backend():
    table = covariance_table(GridSpec(1, 4), CorrelationModel("gaussian", 0.2, 1))
    with pytest.raises(ConfigurationError):
        get_sampler(table, "fft")


def test_circulant_and_cholesky_agree_in_distribution():
    grid = GridSpec(2, 16)
    table = covariance_table(grid, CorrelationModel("gaussian", 0.1, 2))
    rows = backend_agreement(table, seed=1, samples=2000)
    assert {r["statistic"] for r in rows} == {"mean", "variance", "covariance"}
    for row in rows:
        assert abs(row["z"]) <= 3.0, row
    variances = [r for r in rows if r["statistic"] == "variance"]
    for row in variances:
        assert row["circulant"] == pytest.approx(table.variance, rel=0.15)


def test_describe_sampler_reports_backend():
    table = covariance_table(GridSpec(2, 4), CorrelationModel("gaussian", 0.2, 2))
    report = describe_sampler(table, "circulant")
    assert report["backend"] in {"circulant", "cholesky"}
    assert report["psd"]
    assert report["variance"] == pytest.approx(table.variance)


@pytest.mark.parametrize("backend", ["cholesky", "circulant"])
def test_describe_sampler_symmetry_comes_from_sampler(backend):
    table = covariance_table(GridSpec(2, 6), CorrelationModel("factorized", 0.3, 2))
    report = describe_sampler(table, backend)
    assert report["symmetric"] is get_sampler(table, backend).symmetric
    assert report["symmetric"]


def test_auto_backend_counts_interior_cells():
    model = CorrelationModel("gaussian", 0.1, 2)
    # 141^2 interior cells fit under the limit although 142^2 cells do not
    assert select_backend(covariance_table(GridSpec(2, 142), model), "auto") == "cholesky"
    assert select_backend(covariance_table(GridSpec(2, 143), model), "auto") == "circulant"


def test_integrate_kernel_matches_field_and_pointwise_sum(mollifier, rng):
    grid = GridSpec(2, 8)
    kernel = lattice_kernel(grid, 0.3, mollifier)
    noise = NoiseRealization(grid, rng.standard_normal(grid.cell_shape))
    field_ = integrate_kernel_field(noise, kernel)
    assert integrate_kernel(noise, kernel, (3 / 8, 5 / 8)) == pytest.approx(field_.values[2, 4], rel=1e-10)

    x = (0.37, 0.81)
    direct = sum(
        eval_kernel(kernel, x, (i / 8, j / 8)) * noise.values[i, j] for i in range(1, 8) for j in range(1, 8)
    )
    assert integrate_kernel(noise, kernel, x) == pytest.approx(direct, rel=1e-10)


def test_kernel_integral_variance_matches_monte_carlo(mollifier):
    grid = GridSpec(2, 8)
    table = covariance_table(grid, CorrelationModel("gaussian", 0.2, 2))
    kernel = lattice_kernel(grid, 0.3, mollifier)
    x = (0.45, 0.55)
    n = 3000
    values = np.array([integrate_kernel(sample(grid, table, 11, i), kernel, x) for i in range(n)])
    squares = values**2
    expected = kernel_integral_variance(table, kernel, x)
    assert abs(squares.mean() - expected) <= 4 * squares.std(ddof=1) / math.sqrt(n)


def test_integrability_report():
    report = check_integrability(CorrelationModel("riesz", 1.0, 4), alpha=1.25, lam=0.8, d=4)
    assert report.alpha_prime == pytest.approx(5.0)
    assert not report.in_l_alpha_prime
    assert report.in_l_half_alpha_prime
    assert report.member

    rough = check_integrability(CorrelationModel("riesz", 3.5, 4), alpha=1.25, lam=0.8, d=4)
    assert not rough.member

    smooth = check_integrability(CorrelationModel("gaussian", 0.1, 4), alpha=1.25, lam=0.8, d=4)
    assert smooth.in_l_alpha_prime and math.isfinite(smooth.norm_alpha_prime)
    assert "member" in smooth.to_dict()


def test_integrability_needs_alpha_above_one():
    with pytest.raises(ConfigurationError):
        check_integrability(CorrelationModel("gaussian", 0.1, 2), alpha=1.0, lam=0.8, d=2)


@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    d=st.integers(min_value=1, max_value=3),
    factor=st.sampled_from([2, 4]),
)
@settings(max_examples=25, deadline=None)
def test_aggregation_preserves_block_sums(seed, d, factor):
    n = 2 * factor
    values = np.random.default_rng(seed).standard_normal((n,) * d)
    coarse = aggregate(NoiseRealization(GridSpec(d, n), values), factor)
    assert coarse.grid.n == 2
    assert coarse.values[(0,) * d] == pytest.approx(values[(slice(0, factor),) * d].sum())
    assert coarse.values.sum() == pytest.approx(values.sum())
