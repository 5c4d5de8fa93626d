import numpy as np
import pytest

from spinlab.errors import DimensionMismatchError
from spinlab.grid import (
    MetricField,
    TorusGrid,
    codifferential,
    curvature,
    exterior_d,
    field_from_json,
    field_to_json,
    form_inner,
    gradient,
    partial_derivative,
    volume_integrate,
)
from conftest import smooth_spd_field


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid((7,))
    with pytest.raises(ValueError):
        TorusGrid((4, 16))
    assert TorusGrid((16, 8)).npoints == 128


def test_derivative_examples(rng):
    grid = TorusGrid((64, 32))
    assert np.max(np.abs(partial_derivative(grid, np.full(grid.shape, 3.0), 0))) < 1e-14
    x, y = grid.coords()
    assert np.max(np.abs(partial_derivative(grid, np.sin(x), 0) - np.cos(x))) <= 1e-5
    f, g = rng.normal(size=(2,) + grid.shape)
    lhs = partial_derivative(grid, 2 * f - 3 * g, 1)
    rhs = 2 * partial_derivative(grid, f, 1) - 3 * partial_derivative(grid, g, 1)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_derivative_fourth_order():
    errs = []
    for n in (32, 64):
        grid = TorusGrid((n,))
        x = grid.coords()[0]
        errs.append(np.max(np.abs(partial_derivative(grid, np.sin(3 * x), 0) - 3 * np.cos(3 * x))))
    assert errs[0] / errs[1] > 14


def test_twisted_derivative():
    grid = TorusGrid((64,))
    x = grid.coords()[0]
    f = np.exp(0.5j * x)
    err = np.max(np.abs(partial_derivative(grid, f, 0, -1.0) - 0.5j * f))
    assert err < 1e-6


def test_christoffel_examples():
    grid = TorusGrid((32, 32))
    assert np.max(np.abs(MetricField.flat(grid).christoffels)) == 0
    line = TorusGrid((128,))
    x = line.coords()[0]
    u = 0.3 * np.sin(x)
    g = MetricField.conformal(line, u)
    np.testing.assert_allclose(g.christoffels[..., 0, 0, 0], 0.3 * np.cos(x), atol=1e-6)
    h = MetricField(grid, smooth_spd_field(grid), (2, 0))
    G = h.christoffels
    assert np.max(np.abs(G - np.swapaxes(G, -1, -2))) < 1e-14


def test_curvature_examples():
    grid = TorusGrid((64, 64))
    for g in (MetricField.flat(grid), MetricField.constant(grid, [[2.0, 0.5], [0.5, 1.0]])):
        ric, scal = curvature(g)
        assert np.max(np.abs(ric)) < 1e-13 and np.max(np.abs(scal)) < 1e-13
    x, y = grid.coords()
    u = 0.3 * np.sin(x) * np.cos(y)
    _, scal = curvature(MetricField.conformal(grid, u))
    expected = -2 * np.exp(-2 * u) * (-2 * u)  # Laplacian of u is -2u
    assert np.max(np.abs(scal - expected)) / np.max(np.abs(expected)) <= 1e-4


def test_exterior_d_examples(rng):
    grid = TorusGrid((64, 64))
    x, y = grid.coords()
    f = np.sin(x) * np.cos(2 * y) + 0.3 * np.cos(x + y)
    assert np.max(np.abs(exterior_d(grid, gradient(grid, f)))) <= 1e-10
    assert np.max(np.abs(exterior_d(grid, np.broadcast_to([1.0, 2.0], grid.shape + (2,))))) == 0
    A = np.stack([0 * x, np.sin(x)], -1)
    F = exterior_d(grid, A)
    assert np.max(np.abs(F[..., 0, 1] - np.cos(x))) < 1e-5
    np.testing.assert_allclose(F[..., 1, 0], -F[..., 0, 1])


def test_codifferential_examples():
    grid = TorusGrid((64, 64))
    g = MetricField.flat(grid)
    assert np.max(np.abs(codifferential(g, np.zeros(grid.shape + (2, 2))))) == 0
    x, y = grid.coords()
    F = np.zeros(grid.shape + (2, 2))
    F[..., 0, 1] = np.cos(x)
    F[..., 1, 0] = -np.cos(x)
    d = codifferential(g, F)
    assert np.max(np.abs(d[..., 1] - np.sin(x))) < 1e-5
    assert np.max(np.abs(d[..., 0])) < 1e-14


def test_codifferential_adjoint():
    grid = TorusGrid((64, 64))
    x, y = grid.coords()
    g = MetricField(grid, smooth_spd_field(grid), (2, 0))
    A = np.stack([np.sin(x + y) + 0.2 * np.cos(2 * y), np.cos(x) * np.sin(y)], -1)
    F = np.zeros(grid.shape + (2, 2))
    F[..., 0, 1] = np.sin(2 * x) * np.cos(y) + np.exp(0.3 * np.sin(x + 2 * y)) * np.cos(x)
    F[..., 1, 0] = -F[..., 0, 1]
    lhs = volume_integrate(g, form_inner(g, exterior_d(grid, A), F))
    rhs = volume_integrate(g, np.einsum("...i,...ij,...j->...", A, g.inverse, codifferential(g, F)))
    assert abs(lhs - rhs) / abs(lhs) <= 1e-6


def test_volume_integrate_examples():
    grid = TorusGrid((32, 32))
    g = MetricField.flat(grid)
    x, y = grid.coords()
    assert volume_integrate(g, np.ones(grid.shape)) == pytest.approx((2 * np.pi) ** 2, rel=1e-14)
    assert abs(volume_integrate(g, np.sin(x))) <= 1e-12

    def conformal_total(n):
        grd = TorusGrid((n, n))
        X, Y = grd.coords()
        return volume_integrate(MetricField.conformal(grd, 0.3 * np.sin(X) * np.cos(Y)), np.ones(grd.shape))

    assert abs(conformal_total(32) - conformal_total(256)) / conformal_total(256) <= 1e-8


def test_field_json_round_trip(rng):
    grid = TorusGrid((8, 8))
    vals = rng.normal(size=grid.shape + (2,)) + 1j * rng.normal(size=grid.shape + (2,))
    grid2, back = field_from_json(field_to_json(grid, vals))
    assert grid2 == grid
    np.testing.assert_array_equal(back, vals)
    with pytest.raises(DimensionMismatchError):
        field_to_json(grid, np.zeros((4, 8)))
