"""Tests for the lattice index sets, step fields and the difference operator."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lattice_spde.errors import ConfigurationError, DomainError, GridIndexError
from lattice_spde.lattice_core import (
    CellField,
    GridSpec,
    LatticeField,
    MultiIndex,
    apply_A,
    c_factor,
    eigenvalue,
    eigenvalues,
    from_spectral,
    kappa_n,
    kappa_points,
    multi_indices,
    sampled_basis,
    sine_basis,
    sine_transform,
    to_spectral,
)


def test_grid_rejects_bad_parameters():
    with pytest.raises(ConfigurationError):
        GridSpec(0, 4)
    with pytest.raises(ConfigurationError):
        GridSpec(2, 1)


def test_grid_shapes():
    grid = GridSpec(3, 5)
    assert grid.interior_shape == (4, 4, 4)
    assert grid.cell_shape == (5, 5, 5)
    assert grid.size == 64
    assert grid.cell_count == 125


def test_coarsen_requires_divisor():
    assert GridSpec(2, 8).coarsen(2) == GridSpec(2, 4)
    with pytest.raises(ConfigurationError):
        GridSpec(2, 8).coarsen(3)


def test_kappa_examples():
    grid = GridSpec(1, 4)
    assert kappa_n((0.5,), grid) == (2,)
    assert kappa_n((0.25,), grid) == (1,)
    assert kappa_n((0.0,), grid) == (0,)
    assert kappa_n((0.999,), grid) == (3,)


def test_kappa_rejects_points_outside():
    grid = GridSpec(2, 4)
    with pytest.raises(DomainError):
        kappa_n((1.0, 0.2), grid)
    with pytest.raises(DomainError):
        kappa_n((0.2,), grid)
    with pytest.raises(DomainError):
        kappa_points(np.array([[0.1, -0.1]]), grid)


@given(x=st.floats(min_value=0.0, max_value=1.0, exclude_max=True), n=st.integers(min_value=2, max_value=64))
def test_kappa_brackets_point(x, n):
    (j,) = kappa_n((x,), GridSpec(1, n))
    assert 0 <= j <= n - 1
    assert j / n <= x
    assert x < (j + 1) / n


def test_multi_index_validation():
    with pytest.raises(GridIndexError):
        MultiIndex((0, 1))
    beta = MultiIndex((1, 2))
    assert beta.norm_sq == 5
    assert beta.in_lattice(GridSpec(2, 3))
    assert not beta.in_lattice(GridSpec(2, 2))


def test_multi_indices_lexicographic():
    grid = GridSpec(2, 4)
    indices = list(multi_indices(grid))
    assert len(indices) == 9
    assert indices[0].components == (1, 1)
    assert indices[1].components == (1, 2)
    assert indices[-1].components == (3, 3)


def test_sine_basis_vanishes_on_boundary():
    assert sine_basis((1, 2), (0.0, 0.3)) == 0.0
    assert sine_basis((3,), (1.0,)) == 0.0
    assert sine_basis((1,), (0.5,)) == pytest.approx(1.0)


def test_eigenvalue_closed_form():
    assert abs(eigenvalue((1, 1, 1, 1), GridSpec(4, 2)) + 32.0) <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 8, 33])
def test_c_factor_bounds_and_eigenvalue_form(n):
    grid = GridSpec(2, n)
    for l in range(1, n):
        assert 4.0 / math.pi**2 - 1e-12 <= c_factor(l, n) <= 1.0
    for beta in multi_indices(grid):
        expected = -(math.pi**2) * sum(b * b * c_factor(b, n) for b in beta.components)
        assert abs(eigenvalue(beta, grid) - expected) <= 1e-9 * abs(expected)


def test_eigenvalue_outside_lattice():
    with pytest.raises(GridIndexError):
        eigenvalue((4,), GridSpec(1, 4))


@pytest.mark.parametrize("d", [1, 2, 4])
@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_eigen_suite(d, n):
    grid = GridSpec(d, n)
    for beta in multi_indices(grid):
        lam = eigenvalue(beta, grid)
        u = sampled_basis(beta, grid)
        residual = apply_A(u).values - lam * u.values
        assert np.max(np.abs(residual)) <= 1e-10 * abs(lam)
        assert 4 * beta.norm_sq <= -lam <= math.pi**2 * beta.norm_sq


def test_eigenvalue_array_matches_scalar():
    grid = GridSpec(2, 5)
    table = eigenvalues(grid)
    for beta in multi_indices(grid):
        assert table[beta.position()] == pytest.approx(eigenvalue(beta, grid), rel=1e-14)


def test_sine_transform_methods_agree(rng):
    values = rng.standard_normal((7, 7))
    dst = sine_transform(values, 8, "dst")
    direct = sine_transform(values, 8, "direct")
    np.testing.assert_allclose(dst, direct, atol=1e-12)
    np.testing.assert_allclose(sine_transform(dst, 8), values, atol=1e-12)


def test_sine_transform_unknown_method():
    with pytest.raises(ConfigurationError):
        sine_transform(np.zeros(3), 4, "fft")


def test_spectral_round_trip_keeps_norm(rng):
    grid = GridSpec(3, 6)
    field = LatticeField(grid, rng.standard_normal(grid.interior_shape))
    coeffs = to_spectral(field)
    assert coeffs.hs_norm() == pytest.approx(field.hs_norm(), rel=1e-12)
    np.testing.assert_allclose(from_spectral(coeffs).values, field.values, atol=1e-12)


def test_field_norms(rng):
    grid = GridSpec(2, 4)
    field = LatticeField(grid, rng.standard_normal(grid.interior_shape))
    assert field.l2_norm() == pytest.approx(field.hs_norm() / 4.0)
    assert field.lp_norm(2.0) == pytest.approx(field.l2_norm())
    assert field.lp_norm(math.inf) == field.sup_norm()
    with pytest.raises(ConfigurationError):
        field.lp_norm(0.5)


def test_field_evaluate_uses_step_map():
    grid = GridSpec(1, 4)
    field = LatticeField(grid, [1.0, 2.0, 3.0])
    assert field.evaluate((0.1,)) == 0.0
    assert field.evaluate((0.3,)) == 1.0
    assert field.evaluate((0.9,)) == 3.0
    np.testing.assert_array_equal(field.evaluate_points(np.array([[0.1], [0.6]])), [0.0, 2.0])


def test_field_shape_checked():
    with pytest.raises(ConfigurationError):
        LatticeField(GridSpec(2, 4), np.zeros((4, 4)))


def test_field_values_read_only():
    field = LatticeField.zeros(GridSpec(1, 3))
    with pytest.raises(ValueError):
        field.values[0] = 1.0


def test_cells_and_interior():
    grid = GridSpec(2, 3)
    cells = CellField(grid, np.arange(9.0).reshape(3, 3))
    np.testing.assert_array_equal(cells.interior().values, [[4.0, 5.0], [7.0, 8.0]])
    padded = cells.interior().to_cells()
    assert padded.shape == (3, 3)
    assert padded[0].sum() == 0.0 and padded[:, 0].sum() == 0.0
