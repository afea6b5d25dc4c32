import numpy as np
import pytest

from src.core.errors import GridError
from src.core.params import Boundary, StringParams
from src.numerics.grid_ops import (
    BandedMatrix,
    Grid,
    apply,
    build_operators,
    build_subsystem,
    check_grid,
    compute_grid,
    dump_operator,
    lagrange_interpolant,
    lagrange_weights,
    min_spacing_t,
)

FS = 48000.0


def test_reference_grid_counts():
    grid = compute_grid(StringParams(gamma=600.0, kappa=0.0, alpha=3.0, theta=1.0), FS)
    assert grid.n_t == 80
    assert grid.n_l == 26
    assert grid.h_t == pytest.approx(0.0125)
    assert grid.k == 1.0 / FS


def test_stiffness_widens_transverse_spacing():
    params = StringParams(gamma=600.0, kappa=9.63, alpha=1.0)
    grid = compute_grid(params, FS)
    assert grid.h_t > params.gamma / FS


def test_theta_default_coarsens_grid():
    fine = compute_grid(StringParams(gamma=600.0, kappa=2.0, theta=1.0), FS)
    default = compute_grid(StringParams(gamma=600.0, kappa=2.0), FS)
    assert default.n_t < fine.n_t


def test_gamma_too_large():
    with pytest.raises(GridError, match="too large"):
        compute_grid(StringParams(gamma=96000.0), FS)


def test_theta_half_has_no_margin():
    with pytest.raises(GridError, match="theta"):
        compute_grid(StringParams(gamma=600.0, theta=0.5), FS)


def test_stability_equality_at_minimum():
    params = StringParams(gamma=600.0, kappa=0.0, theta=1.0)
    grid = compute_grid(params, FS)
    report = check_grid(grid, params)
    assert report.stable
    assert report.ratio_t == pytest.approx(1.0, abs=1e-9)


def test_finer_grid_is_flagged():
    params = StringParams(gamma=600.0, kappa=0.0, alpha=3.0, theta=1.0)
    grid = compute_grid(params, FS)
    finer = Grid(k=grid.k, h_t=grid.h_t * 0.98, h_l=grid.h_l, n_t=grid.n_t, n_l=grid.n_l)
    report = check_grid(finer, params)
    assert not report.stable
    assert report.ratio_t > 1.0
    assert "transverse" in report.messages[0]


@pytest.mark.parametrize("kappa", [0.5, 2.0, 5.88, 9.63])
def test_computed_grid_is_stable(kappa):
    params = StringParams(gamma=600.0, kappa=kappa, alpha=2.0)
    grid = compute_grid(params, FS)
    assert check_grid(grid, params).stable
    assert grid.h_t >= min_spacing_t(params, grid.k) * (1 - 1e-12)


def test_from_counts_rejects_tiny_grids():
    with pytest.raises(GridError):
        Grid.from_counts(FS, 2, 10)


def test_second_difference_row():
    ops = build_subsystem(4, 0.25)
    dense = ops.d_xx.to_dense()
    assert dense.shape == (3, 3)
    np.testing.assert_allclose(dense[1], [16.0, -32.0, 16.0])
    np.testing.assert_allclose(dense[0], [-32.0, 16.0, 0.0])


def test_fourth_difference_simply_supported():
    ops = build_subsystem(10, 0.1, Boundary.SIMPLY_SUPPORTED)
    d_xx = ops.d_xx.to_dense()
    np.testing.assert_allclose(ops.d_xxxx.to_dense(), d_xx @ d_xx)


def test_fourth_difference_clamped_corners():
    h = 0.1
    ops = build_subsystem(10, h, Boundary.CLAMPED)
    d_xx = ops.d_xx.to_dense()
    diff = ops.d_xxxx.to_dense() - d_xx @ d_xx
    expected = np.zeros_like(diff)
    expected[0, 0] = expected[-1, -1] = 2.0 / h ** 4
    np.testing.assert_allclose(diff, expected, atol=1e-6)


def test_difference_operators_are_adjoint():
    ops = build_subsystem(12, 1.0 / 12)
    np.testing.assert_allclose(ops.d_xp.to_dense(), -ops.d_xm.to_dense().T)


def test_apply_identity_and_constant(rng):
    v = rng.standard_normal(7)
    np.testing.assert_allclose(apply(BandedMatrix.identity(7), v), v)
    const = BandedMatrix.from_diagonals(7, 7, {0: 2.5})
    np.testing.assert_allclose(apply(const, v), 2.5 * v)


def test_apply_matches_dense(rng):
    op = BandedMatrix.from_diagonals(9, 9, {-2: rng.standard_normal(7), 0: 1.0, 1: rng.standard_normal(8)})
    v = rng.standard_normal(9)
    np.testing.assert_allclose(apply(op, v), op.to_dense() @ v)
    assert op.offsets == [-2, 0, 1]


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        apply(BandedMatrix.identity(4), np.ones(5))


def test_lagrange_weights_partition_of_unity():
    for s in (0.3, 1.7, 2.5):
        assert lagrange_weights(s, 0, 3).sum() == pytest.approx(1.0)


def test_read_on_node_is_unit_weight():
    grid = Grid.from_counts(FS, 20, 10)
    ops = build_operators(grid)
    weights = ops.read(7 * grid.h_t)
    assert weights[6] == pytest.approx(1.0)
    assert np.abs(np.delete(weights, 6)).max() == pytest.approx(0.0, abs=1e-12)


def test_spread_is_scaled_read():
    grid = Grid.from_counts(FS, 20, 10)
    ops = build_operators(grid)
    np.testing.assert_allclose(ops.spread(0.37), ops.read(0.37) / grid.h_t)


def test_read_interior_sums_to_one():
    ops = build_operators(Grid.from_counts(FS, 20, 10))
    assert ops.read(0.51).sum() == pytest.approx(1.0)


def test_cross_grid_interpolation_is_exact_for_cubics():
    grid = Grid.from_counts(FS, 30, 11)
    ops = build_operators(grid, interpolation_order=3)

    def f(x):
        return x * (1 - x) * (x + 0.5)

    np.testing.assert_allclose(ops.interp_l_to_t @ f(grid.nodes_l()), f(grid.nodes_t()), atol=1e-12)


def test_interpolant_reproduces_source_nodes():
    src = np.linspace(0.0, 1.0, 11)
    values = np.sin(src)
    matrix = lagrange_interpolant(src, src, 3)
    np.testing.assert_allclose(matrix @ values, values, atol=1e-12)


def test_order_too_high():
    with pytest.raises(GridError):
        build_operators(Grid.from_counts(FS, 4, 4), interpolation_order=5)


def test_dump_operator(tmp_path):
    ops = build_subsystem(5, 0.2)
    path = dump_operator(ops.d_xx, tmp_path / "ops" / "dxx.txt")
    np.testing.assert_allclose(np.loadtxt(path), ops.d_xx.to_dense())
