"""Potential splittings, couplings and the rate-study admissibility gate."""

import math

import numpy as np
import pytest

from chs.errors import DomainError
from chs.potentials import (CouplingSpec, PotentialSpec, check_rate_admissible,
                            coupling_eval, potential_eval)


def central_diff(fn, r, eps=1e-6):
    return (fn(r + eps) - fn(r - eps)) / (2.0 * eps)


def test_double_well_values():
    pot = PotentialSpec.double_well()
    v = pot.evaluate(np.array([0.0, 1.0, -1.0, 2.0]))
    assert np.allclose(v.f, [0.25, 0.0, 0.0, 2.25])
    assert np.allclose(v.df, [0.0, 0.0, 0.0, 6.0])
    assert np.allclose(v.d2f, [-1.0, 2.0, 2.0, 11.0])
    # Convex/concave split: B_hat vanishes inside the wells, pi_hat outside.
    assert np.allclose(v.b_hat, [0.0, 0.0, 0.0, 2.25])
    assert np.allclose(v.pi_hat, [0.25, 0.0, 0.0, 0.0])


def test_split_reassembles_f():
    rng = np.random.default_rng(23)
    r = rng.uniform(-3.0, 3.0, 200)
    for pot in (PotentialSpec.double_well(),
                PotentialSpec.polynomial((0.0, 0.0, 0.0, 0.0, 0.25),
                                         (0.1, 0.0, 0.3))):
        v = pot.evaluate(r)
        assert np.allclose(v.f, v.b_hat + v.pi_hat, rtol=1e-13, atol=1e-13)
        assert np.allclose(v.df, v.db_hat + v.dpi, rtol=1e-13, atol=1e-13)


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(29)
    cases = [
        (PotentialSpec.double_well(), rng.uniform(-2.0, 2.0, 100)),
        (PotentialSpec.logarithmic(1.5), rng.uniform(-0.95, 0.95, 100)),
        (PotentialSpec.polynomial((1.0, 0.0, 0.5, 0.0, 0.25), (0.2, 0.1)),
         rng.uniform(-2.0, 2.0, 100)),
    ]
    for pot, r in cases:
        # Keep double-well samples away from the kink of the split at |r|=1.
        if pot.kind == "doublewell":
            r = r[np.abs(np.abs(r) - 1.0) > 1e-3]
        v = pot.evaluate(r)
        assert np.allclose(v.df, central_diff(lambda s: pot.evaluate(s).f, r),
                           rtol=1e-6, atol=1e-6)
        assert np.allclose(v.d2f, central_diff(lambda s: pot.evaluate(s).df, r),
                           rtol=1e-5, atol=1e-5)
        assert np.allclose(v.db_hat,
                           central_diff(lambda s: pot.evaluate(s).b_hat, r),
                           rtol=1e-6, atol=1e-6)


def test_logarithmic_values_and_domain():
    kappa = 2.0
    pot = PotentialSpec.logarithmic(kappa)
    v = pot.evaluate(np.array([0.0]))
    assert math.isclose(float(v.b_hat[0]), 0.0, abs_tol=1e-12)
    assert math.isclose(float(v.pi_hat[0]), kappa, rel_tol=1e-12)
    assert math.isclose(float(v.f[0]), kappa, rel_tol=1e-12)
    # F'' at 0 is 2 - 2 kappa.
    assert math.isclose(float(v.d2f[0]), 2.0 - 2.0 * kappa, rel_tol=1e-12)
    with pytest.raises(DomainError) as exc:
        pot.evaluate(np.array([0.0, 1.5]))
    assert exc.value.value == 1.5
    # Values exactly at +-1 are admitted through the clamp band.
    assert np.all(np.isfinite(pot.evaluate(np.array([-1.0, 1.0])).f))
    with pytest.raises(ValueError):
        PotentialSpec.logarithmic(0.0)


def test_model_coupling_closed_form():
    """p = 2 p0 sqrt(F) on |r| <= 1; the double-well closed form is p0(1-r^2)."""
    pot = PotentialSpec.double_well()
    p0 = 1.7
    coup = CouplingSpec.model_derived(p0, pot)
    r = np.linspace(-1.0, 1.0, 101)
    assert np.allclose(coup.p(r), 2.0 * p0 * np.sqrt(pot.f(r)),
                       rtol=1e-12, atol=1e-12)
    assert np.allclose(coup.p(r), p0 * (1.0 - r * r), rtol=1e-12, atol=1e-12)
    assert np.all(coup.p(np.array([-1.5, 1.5, 3.0])) == 0.0)
    assert math.isclose(coup.bound(), p0, rel_tol=1e-12)
    # Nonnegative and bounded everywhere.
    wide = np.linspace(-5, 5, 400)
    assert np.all(coup.p(wide) >= 0.0)
    assert np.max(coup.p(wide)) <= coup.bound() + 1e-12


def test_coupling_derivative_matches_finite_difference():
    pot = PotentialSpec.double_well()
    coup = CouplingSpec.model_derived(0.8, pot)
    r = np.linspace(-0.95, 0.95, 50)
    fd = central_diff(coup.p, r)
    assert np.allclose(coup.dp(r), fd, rtol=1e-7, atol=1e-7)


def test_zero_and_constant_couplings():
    z = CouplingSpec.zero()
    c = CouplingSpec.constant(0.3)
    r = np.linspace(-2, 2, 11)
    assert np.all(coupling_eval(z, r) == 0.0)
    assert np.all(coupling_eval(c, r) == 0.3)
    assert np.all(z.dp(r) == 0.0)
    assert np.all(c.dp(r) == 0.0)
    assert z.bound() == 0.0
    assert c.bound() == 0.3
    with pytest.raises(ValueError):
        CouplingSpec.constant(-1.0)
    with pytest.raises(ValueError):
        CouplingSpec.model_derived(0.0, PotentialSpec.double_well())


def test_admissibility_gate():
    assert check_rate_admissible(PotentialSpec.double_well()).admissible
    log_rep = check_rate_admissible(PotentialSpec.logarithmic(1.0))
    assert not log_rep.admissible
    assert any("D(B_hat)" in r for r in log_rep.reasons)

    quartic = PotentialSpec.polynomial((1.0, 0.0, 0.0, 0.0, 0.25), (0.5, 0.0))
    assert check_rate_admissible(quartic).admissible

    too_high = PotentialSpec.polynomial((0.0,) * 8 + (1.0,), ())
    rep = check_rate_admissible(too_high)
    assert not rep.admissible and any("degree" in r for r in rep.reasons)

    nonconvex = PotentialSpec.polynomial((0.0, 0.0, -1.0, 0.0, 0.25), ())
    rep = check_rate_admissible(nonconvex)
    assert not rep.admissible and any("convex" in r for r in rep.reasons)

    steep_pi = PotentialSpec.polynomial((0.0, 0.0, 1.0),
                                        (1.0, 0.0, 0.0, 0.0, 1.0))
    rep = check_rate_admissible(steep_pi)
    assert not rep.admissible and any("Lipschitz" in r for r in rep.reasons)


def test_potential_eval_helper():
    pot = PotentialSpec.double_well()
    v = potential_eval(pot, 0.5)
    assert math.isclose(float(v.f), 0.25 * (0.25 - 1.0) ** 2, rel_tol=1e-14)
