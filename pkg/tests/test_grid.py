"""Grid, field, stencil and norm tests against closed-form oracles."""

import math

import numpy as np
import pytest

from chs.errors import GridMismatchError, SolverFailure
from chs.grid import (Field, Grid, dual_norm, grad_norm_sq, h_norm, inner_h,
                      integral, laplacian_neumann, mean, norms, read_field,
                      riesz_apply, riesz_solve, v_norm, write_field)


def stencil_eigenvalue(k, n, length):
    """Exact eigenvalue of the Neumann second-difference stencil."""
    h = length / n
    return 2.0 * (1.0 - math.cos(k * math.pi * h / length)) / h**2


def cosine_mode(grid, ks):
    """Tensor-product stencil eigenvector cos(k pi (j+1/2) h / L)."""
    vals = np.ones(grid.extents)
    for ax, k in enumerate(ks):
        x = grid.meshgrid()[ax]
        vals = vals * np.cos(k * np.pi * x / grid.lengths[ax])
    return Field(grid, vals)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid((), ())
    with pytest.raises(ValueError):
        Grid((4, 4, 4, 4), (1.0,) * 4)
    with pytest.raises(ValueError):
        Grid((1,), (1.0,))
    with pytest.raises(ValueError):
        Grid((4,), (-1.0,))
    g = Grid((8, 4), (2.0, 1.0))
    assert g.dim == 2
    assert g.spacing == (0.25, 0.25)
    assert math.isclose(g.cell_volume, 0.0625)
    assert g.ncells == 32
    assert math.isclose(g.volume, 2.0)


def test_field_immutable_and_grid_checked():
    g = Grid((8,), (1.0,))
    u = Field(g, np.arange(8.0))
    with pytest.raises(AttributeError):
        u.values = np.zeros(8)
    with pytest.raises(ValueError):
        u.values[0] = 5.0
    with pytest.raises(ValueError):
        Field(g, [np.nan] * 8)
    other = Field(Grid((8,), (2.0,)), np.arange(8.0))
    with pytest.raises(GridMismatchError):
        u + other


def test_laplacian_eigenvectors_exact():
    """The stencil acts exactly as -lambda_h on its cosine eigenvectors."""
    for grid, ks in (
        (Grid((32,), (1.0,)), (3,)),
        (Grid((32,), (2.5,)), (5,)),
        (Grid((16, 12), (1.0, 0.75)), (2, 3)),
        (Grid((8, 8, 8), (1.0, 1.0, 1.0)), (1, 2, 3)),
    ):
        u = cosine_mode(grid, ks)
        lam = sum(stencil_eigenvalue(k, n, l)
                  for k, n, l in zip(ks, grid.extents, grid.lengths))
        lap = laplacian_neumann(u)
        assert np.allclose(lap.values, -lam * u.values, rtol=1e-11, atol=1e-11)


def test_laplacian_second_order():
    errors = []
    for n in (32, 64, 128):
        g = Grid((n,), (1.0,))
        x = g.meshgrid()[0]
        u = Field(g, np.cos(np.pi * x))
        err = np.max(np.abs(laplacian_neumann(u).values
                            + np.pi**2 * np.cos(np.pi * x)))
        errors.append(err)
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(1.9 <= o <= 2.1 for o in orders)


def test_discrete_divergence_theorem():
    """Zero-flux boundary makes integral(Lap u) vanish to rounding."""
    rng = np.random.default_rng(3)
    for grid in (Grid((64,), (1.0,)), Grid((16, 8), (1.0, 0.5)),
                 Grid((6, 5, 4), (1.0, 0.7, 0.3))):
        for _ in range(20):
            u = Field(grid, rng.standard_normal(grid.extents))
            scale = np.max(np.abs(laplacian_neumann(u).values))
            assert abs(integral(laplacian_neumann(u))) <= 1e-12 * max(scale, 1.0)


def test_norms_on_eigenvectors():
    """V and dual norms follow sqrt(lambda_h + 1) on stencil eigenvectors."""
    g = Grid((64,), (1.0,))
    for k in (1, 4, 9):
        u = cosine_mode(g, (k,))
        lam = stencil_eigenvalue(k, 64, 1.0)
        t = norms(u, 1e-12)
        assert math.isclose(t.v_norm, t.h_norm * math.sqrt(lam + 1.0),
                            rel_tol=1e-10)
        assert math.isclose(t.dual_norm, t.h_norm / math.sqrt(lam + 1.0),
                            rel_tol=1e-9)


def test_constant_field_norms():
    g = Grid((32, 32), (1.0, 2.0))
    c = -0.7
    u = Field.full(g, c)
    root = abs(c) * math.sqrt(g.volume)
    t = norms(u)
    assert math.isclose(t.h_norm, root, rel_tol=1e-13)
    assert math.isclose(t.v_norm, root, rel_tol=1e-13)
    assert math.isclose(t.dual_norm, root, rel_tol=1e-10)
    assert math.isclose(mean(u), c, rel_tol=1e-13)
    assert math.isclose(integral(u), c * g.volume, rel_tol=1e-13)


def test_riesz_apply_and_solve_are_inverse():
    rng = np.random.default_rng(5)
    for grid in (Grid((48,), (1.0,)), Grid((10, 14), (1.0, 1.0))):
        for _ in range(10):
            f = Field(grid, rng.standard_normal(grid.extents))
            u = riesz_solve(f, tol=1e-11)
            assert np.allclose(riesz_apply(u).values, f.values,
                               rtol=1e-10, atol=1e-10)


def test_riesz_solve_cg_matches_direct():
    rng = np.random.default_rng(6)
    g = Grid((40,), (1.0,))
    f = Field(g, rng.standard_normal(40))
    u_direct = riesz_solve(f, tol=1e-12, method="direct")
    u_cg = riesz_solve(f, tol=1e-10, method="cg")
    assert np.allclose(u_direct.values, u_cg.values, rtol=1e-8, atol=1e-10)


def test_riesz_solve_failure_reports_residual():
    rng = np.random.default_rng(7)
    g = Grid((64,), (1.0,))
    f = Field(g, rng.standard_normal(64))
    with pytest.raises(SolverFailure) as exc:
        riesz_solve(f, tol=1e-14, method="cg", maxiter=1)
    assert exc.value.residual > 0


def test_interpolation_inequality_random_fields():
    """|u|_H^2 <= |u|_V |u|_* within 1e-10 relative, 100 fields per dimension."""
    rng = np.random.default_rng(11)
    for grid in (Grid((64,), (1.0,)), Grid((12, 10), (1.0, 0.8)),
                 Grid((6, 5, 4), (1.0, 1.0, 0.5))):
        for _ in range(100):
            u = Field(grid, rng.standard_normal(grid.extents))
            t = norms(u, 1e-12)
            assert t.h_norm**2 <= t.v_norm * t.dual_norm * (1.0 + 1e-10)


def test_grad_norm_matches_v_norm_decomposition():
    """|u|_V^2 = |grad u|^2 + |u|_H^2 with the operator-consistent gradient."""
    rng = np.random.default_rng(13)
    g = Grid((32, 8), (1.0, 0.5))
    for _ in range(20):
        u = Field(g, rng.standard_normal(g.extents))
        assert math.isclose(v_norm(u)**2, grad_norm_sq(u) + h_norm(u)**2,
                            rel_tol=1e-12)


def test_snapshot_roundtrip(tmp_path):
    rng = np.random.default_rng(17)
    for grid in (Grid((32,), (1.0,)), Grid((6, 4), (1.0, 0.25))):
        u = Field(grid, rng.standard_normal(grid.extents))
        path = tmp_path / "snap.csv"
        write_field(u, path)
        v = read_field(path)
        assert v.grid == grid
        assert np.array_equal(v.values, u.values)   # %.17g is lossless
    with open(tmp_path / "snap.csv") as fh:
        assert fh.readline().startswith("# grid d=2 n=6,4 L=1,0.25")


def test_read_field_rejects_garbage(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("not a snapshot\n1.0\n")
    with pytest.raises(ValueError):
        read_field(path)


def test_dual_norm_of_laplacian_image():
    """(A_h u, u) duality: dual_norm(A_h u) == v_norm(u)."""
    rng = np.random.default_rng(19)
    g = Grid((48,), (1.0,))
    for _ in range(10):
        u = Field(g, rng.standard_normal(48))
        assert math.isclose(dual_norm(riesz_apply(u), 1e-12), v_norm(u),
                            rel_tol=1e-9)


def test_inner_h_weighting():
    g = Grid((10,), (2.0,))
    u = Field.full(g, 3.0)
    v = Field.full(g, -2.0)
    assert math.isclose(inner_h(u, v), -12.0, rel_tol=1e-14)
