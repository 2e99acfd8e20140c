"""Residual assembly, reaction structure, prepared data, energy and mass."""

import math

import numpy as np
import pytest

from chs.grid import Field, Grid, inner_h, integral, lap_array
from chs.model import (ModelParams, conserved_mean, energy, init_consistent,
                       make_state, reaction, residual_limit, residual_viscous)
from chs.potentials import CouplingSpec, PotentialSpec


def default_params(alpha=0.1, beta=0.2):
    pot = PotentialSpec.double_well()
    return ModelParams(alpha, beta, pot, CouplingSpec.model_derived(1.0, pot))


def random_state(grid, rng, t=0.0, params=None):
    params = params or default_params()
    return make_state(
        t,
        Field(grid, rng.uniform(-0.5, 0.5, grid.extents)),
        Field(grid, rng.uniform(-0.9, 0.9, grid.extents)),
        Field(grid, rng.uniform(0.0, 1.0, grid.extents)),
        params)


def face_loop_laplacian(grid, a):
    """Independent flux-sum reference for the Neumann Laplacian (slow)."""
    out = np.zeros_like(a)
    for ax, h in enumerate(grid.spacing):
        sl = [slice(None)] * grid.dim
        flux = np.diff(a, axis=ax) / h   # interior face fluxes; boundary = 0
        lo = list(sl)
        lo[ax] = slice(0, -1)
        hi = list(sl)
        hi[ax] = slice(1, None)
        out[tuple(lo)] += flux / h
        out[tuple(hi)] -= flux / h
    return out


def test_laplacian_matches_face_loop():
    rng = np.random.default_rng(31)
    for grid in (Grid((32,), (1.0,)), Grid((9, 7), (1.0, 0.4))):
        a = rng.standard_normal(grid.extents)
        assert np.allclose(lap_array(grid, a), face_loop_laplacian(grid, a),
                           rtol=1e-12, atol=1e-12)


def test_params_validation():
    pot = PotentialSpec.double_well()
    coup = CouplingSpec.zero()
    with pytest.raises(ValueError):
        ModelParams(1.0, 0.0, pot, coup)
    with pytest.raises(ValueError):
        ModelParams(0.0, -0.1, pot, coup)
    p = ModelParams(0.0, 0.0, pot, coup)
    assert p.is_limit
    assert not p.with_viscosity(0.1, 0.0).is_limit


def test_reaction_identity():
    """R (sigma - mu) = S^2 >= 0 pointwise."""
    rng = np.random.default_rng(37)
    grid = Grid((64,), (1.0,))
    params = default_params()
    for _ in range(10):
        s = random_state(grid, rng, params=params)
        r_f, s_f = reaction(s.phi, s.sigma, s.mu, params.coupling)
        prod = r_f.values * (s.sigma.values - s.mu.values)
        assert np.allclose(prod, s_f.values**2, rtol=1e-12, atol=1e-14)
        assert np.all(prod >= -1e-15)


def test_mass_identity_precursor():
    """integral(res_mu + res_sigma) reduces to the conserved-mean increment:
    the Laplacian and reaction contributions cancel exactly."""
    rng = np.random.default_rng(41)
    grid = Grid((48,), (1.0,))
    params = default_params()
    dt = 1e-3
    prev = random_state(grid, rng, params=params)
    nxt = random_state(grid, rng, t=dt, params=params)
    rm, _, rs = residual_viscous(prev, nxt, dt, params)
    lhs = integral(rm) + integral(rs)
    expected = (conserved_mean(nxt, params) - conserved_mean(prev, params)) \
        * grid.volume / dt
    assert math.isclose(lhs, expected, rel_tol=1e-10, abs_tol=1e-10)


def test_limit_residual_is_viscous_with_zero_parameters():
    rng = np.random.default_rng(43)
    grid = Grid((32,), (1.0,))
    pot = PotentialSpec.double_well()
    limit = ModelParams(0.0, 0.0, pot, CouplingSpec.model_derived(1.0, pot))
    prev = random_state(grid, rng, params=limit)
    nxt = random_state(grid, rng, t=1e-3, params=limit)
    lm, lp, ls = residual_limit(prev, nxt, 1e-3, limit)
    vm, vp, vs = residual_viscous(prev, nxt, 1e-3, limit)
    assert np.array_equal(lm.values, vm.values)
    assert np.array_equal(lp.values, vp.values)
    assert np.array_equal(ls.values, vs.values)
    with pytest.raises(ValueError):
        residual_limit(prev, nxt, 1e-3, default_params())


def test_prepared_mu0_eigenvector_oracle():
    """On a stencil eigenvector, prepared mu0 = lambda_h phi0 + F'(phi0)."""
    n, k = 64, 3
    grid = Grid((n,), (1.0,))
    x = grid.meshgrid()[0]
    h = 1.0 / n
    lam = 2.0 * (1.0 - math.cos(k * math.pi * h)) / h**2
    phi0 = Field(grid, 0.3 * np.cos(k * np.pi * x))
    sigma0 = Field.full(grid, 0.5)
    params = default_params()
    init = init_consistent(phi0, sigma0, params)
    expected = lam * phi0.values + (phi0.values**3 - phi0.values)
    assert np.allclose(init.mu.values, expected, rtol=1e-11, atol=1e-11)
    assert init.t == 0.0
    # Prepared data zeroes the phi-equation residual of the limit system.
    limit = params.with_viscosity(0.0, 0.0)
    init_l = init_consistent(phi0, sigma0, limit)
    _, rp, _ = residual_limit(init_l, init_l, 1.0, limit)
    assert np.max(np.abs(rp.values)) <= 1e-10


def test_explicit_mu0_is_respected():
    grid = Grid((16,), (1.0,))
    params = default_params()
    mu0 = Field.full(grid, 0.25)
    init = init_consistent(Field.full(grid, 0.1), Field.full(grid, 0.2),
                           params, mu0=mu0)
    assert np.array_equal(init.mu.values, mu0.values)


def test_state_derived_fields():
    grid = Grid((16,), (1.0,))
    params = default_params()
    phi = Field.full(grid, 2.0)   # outside the wells: B_hat'(2) = 2*3 = 6
    s = make_state(0.0, Field.full(grid, 0.0), phi, Field.full(grid, 1.0),
                   params)
    assert np.allclose(s.xi.values, 6.0)
    assert np.allclose(s.r.values, 0.0)   # p vanishes outside |phi| <= 1


def test_energy_closed_form():
    grid = Grid((20,), (2.0,))
    params = default_params(alpha=0.5, beta=0.0)
    c, m, sg = 0.5, 1.5, -0.25
    s = make_state(0.0, Field.full(grid, m), Field.full(grid, c),
                   Field.full(grid, sg), params)
    f_c = 0.25 * (c * c - 1.0) ** 2
    expected = (0.5 * params.alpha * m * m + f_c + 0.5 * sg * sg) * grid.volume
    assert math.isclose(energy(s, params), expected, rel_tol=1e-13)


def test_forcing_shifts_residuals():
    rng = np.random.default_rng(47)
    grid = Grid((24,), (1.0,))
    params = default_params()
    prev = random_state(grid, rng, params=params)
    nxt = random_state(grid, rng, t=1e-3, params=params)
    f = tuple(rng.standard_normal(grid.extents) for _ in range(3))
    base = residual_viscous(prev, nxt, 1e-3, params)
    forced = residual_viscous(prev, nxt, 1e-3, params, forcing=f)
    for b, w, g in zip(base, forced, f):
        assert np.allclose(w.values, b.values - g, rtol=1e-14, atol=1e-14)
