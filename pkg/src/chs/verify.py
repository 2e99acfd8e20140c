"""Scheme-verification suites: stencil order, conservation, energy balance,
decoupled heat equation, manufactured solutions, Jacobian exactness.

Each suite returns a SuiteResult; `chs verify` exits nonzero iff any fails.
The manufactured-solution forcing is derived symbolically (sympy) from a
smooth (mu, phi, sigma) triple and substituted into the continuous system,
so the oracle is independent of the solver assembly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy as sym

from . import grid as grid_module
from .grid import Field, Grid, h_norm, inner_h, mean, norms
from .model import (ModelParams, init_consistent, make_state)
from .potentials import CouplingSpec, PotentialSpec
from .stepper import SolveConfig, integrate, newton_linear_system

TEMPORAL_ORDER_WINDOW = (0.9, 1.1)
SPATIAL_ORDER_WINDOW = (1.9, 2.1)


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def __str__(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.detail}"


def _observed_orders(errors, factor=2.0):
    return [math.log(a / b) / math.log(factor)
            for a, b in zip(errors, errors[1:])]


def suite_laplacian() -> SuiteResult:
    """Second-order consistency of the Neumann stencil on cos(pi x / L)."""
    errors = []
    for n in (32, 64, 128):
        g = Grid((n,), (1.0,))
        x = g.meshgrid()[0]
        u = Field(g, np.cos(np.pi * x))
        lap = grid_module.laplacian_neumann(u)
        exact = -(np.pi**2) * np.cos(np.pi * x)
        errors.append(float(np.max(np.abs(lap.values - exact))))
    orders = _observed_orders(errors)
    ok = all(1.9 <= o <= 2.1 for o in orders)
    return SuiteResult("laplacian", ok,
                       f"observed orders {['%.3f' % o for o in orders]}")


def suite_interpolation() -> SuiteResult:
    """|u|_H^2 <= |u|_V |u|_* for 100 random fields in d = 1, 2, 3."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for grid in (Grid((64,), (1.0,)), Grid((12, 10), (1.0, 0.8)),
                 Grid((6, 5, 4), (1.0, 1.0, 0.5))):
        for _ in range(100):
            u = Field(grid, rng.standard_normal(grid.extents))
            t = norms(u, 1e-12)
            worst = max(worst, t.h_norm**2 / (t.v_norm * t.dual_norm))
    ok = worst <= 1.0 + 1e-10
    return SuiteResult("interpolation", ok, f"max H^2/(V*dual) = {worst:.12f}")


def _short_run(alpha, beta, n=64, dt=2e-4, t_end=2e-2):
    grid = Grid((n,), (1.0,))
    pot = PotentialSpec.double_well()
    coup = CouplingSpec.model_derived(1.0, pot)
    params = ModelParams(alpha, beta, pot, coup)
    x = grid.meshgrid()[0]
    phi0 = Field(grid, np.tanh((x - 0.5) / 0.1))
    sigma0 = Field(grid, 0.5 + 0.25 * np.cos(np.pi * x))
    init = init_consistent(phi0, sigma0, params)
    cfg = SolveConfig(dt=dt, t_end=t_end, newton_tol=1e-11)
    return integrate(init, params, cfg), params, cfg


def suite_mass() -> SuiteResult:
    """mean(alpha mu + phi + sigma) constant along viscous and limit runs."""
    worst = 0.0
    for alpha, beta in ((0.05, 0.05), (0.0, 0.0)):
        traj, params, _ = _short_run(alpha, beta)
        m0 = None
        for s in traj.states:
            m = mean(Field(s.grid, params.alpha * s.mu.values + s.phi.values
                           + s.sigma.values))
            m0 = m if m0 is None else m0
            worst = max(worst, abs(m - m0))
    ok = worst <= 1e-9
    return SuiteResult("mass", ok, f"max mean drift {worst:.3e}")


def suite_energy() -> SuiteResult:
    """Per-step dissipation: E(next) <= E(prev) + 10 newton_tol (1 + E(prev))."""
    from .model import energy
    traj, params, cfg = _short_run(0.05, 0.05, dt=1e-4, t_end=1e-2)
    worst = -np.inf
    e_prev = energy(traj.states[0], params)
    for s in traj.states[1:]:
        e = energy(s, params)
        worst = max(worst, e - e_prev - 10 * cfg.newton_tol * (1.0 + e_prev))
        e_prev = e
    ok = worst <= 0.0
    return SuiteResult("energy", ok, f"max dissipation violation {worst:.3e}")


def heat_error(n: int, dt: float, t_end: float) -> float:
    """Max-norm error vs the closed-form Neumann heat solution at t_end."""
    grid = Grid((n,), (1.0,))
    pot = PotentialSpec.double_well()
    params = ModelParams(0.1, 0.1, pot, CouplingSpec.zero())
    x = grid.meshgrid()[0]
    phi0 = Field.full(grid, 1.0)   # F'(1) = 0: phi and mu stay put
    sigma0 = Field(grid, np.cos(np.pi * x))
    init = init_consistent(phi0, sigma0, params)
    traj = integrate(init, params, SolveConfig(dt=dt, t_end=t_end))
    exact = math.exp(-np.pi**2 * t_end) * np.cos(np.pi * x)
    return float(np.max(np.abs(traj.states[-1].sigma.values - exact)))


def heat_orders():
    """Observed temporal and spatial orders of the decoupled heat problem."""
    t_end = 0.2
    e_dt = [heat_error(256, dt, t_end) for dt in (0.02, 0.01, 0.005)]
    temporal = _observed_orders(e_dt)
    e_h = [heat_error(n, 2e-3 * (16 / n) ** 2, 0.1) for n in (16, 32, 64)]
    spatial = _observed_orders(e_h)
    return temporal, spatial


def suite_heat() -> SuiteResult:
    temporal, spatial = heat_orders()
    ok = (all(TEMPORAL_ORDER_WINDOW[0] <= o <= TEMPORAL_ORDER_WINDOW[1]
              for o in temporal)
          and all(SPATIAL_ORDER_WINDOW[0] <= o <= SPATIAL_ORDER_WINDOW[1]
                  for o in spatial))
    return SuiteResult(
        "heat", ok,
        f"temporal orders {['%.3f' % o for o in temporal]}, "
        f"spatial orders {['%.3f' % o for o in spatial]}")


def _manufactured(alpha: float, beta: float, p0: float = 1.0):
    """Smooth exact triple and symbolically derived forcing for the
    double-well / model-coupling system on [0, 1]."""
    x, t = sym.symbols("x t")
    c = sym.cos(sym.pi * x)
    mu_e = sym.Rational(3, 10) * c * (1 + t - t**2)
    phi_e = sym.Rational(2, 5) * c * (1 - t / 2 + t**2 / 4)
    sig_e = sym.Rational(1, 2) + sym.Rational(1, 5) * c * (1 - t + t**2 / 2)
    p = p0 * (1 - phi_e**2)
    df = phi_e**3 - phi_e
    r = p * (sig_e - mu_e)
    f_mu = (alpha * sym.diff(mu_e, t) + sym.diff(phi_e, t)
            - sym.diff(mu_e, x, 2) - r)
    f_phi = beta * sym.diff(phi_e, t) - sym.diff(phi_e, x, 2) + df - mu_e
    f_sig = sym.diff(sig_e, t) - sym.diff(sig_e, x, 2) + r
    lam = lambda e: sym.lambdify((x, t), e, "numpy")
    return (lam(mu_e), lam(phi_e), lam(sig_e)), (lam(f_mu), lam(f_phi),
                                                 lam(f_sig))


def mms_error(n: int, dt: float, t_end: float, alpha: float,
              beta: float) -> float:
    """Combined H-norm error at t_end for the manufactured coupled system."""
    (mu_f, phi_f, sig_f), (f1, f2, f3) = _manufactured(alpha, beta)
    grid = Grid((n,), (1.0,))
    x = grid.meshgrid()[0]
    pot = PotentialSpec.double_well()
    params = ModelParams(alpha, beta, pot,
                         CouplingSpec.model_derived(1.0, pot))
    init = make_state(0.0,
                      Field(grid, mu_f(x, 0.0)),
                      Field(grid, phi_f(x, 0.0)),
                      Field(grid, sig_f(x, 0.0)), params)

    def forcing(tv):
        return (np.asarray(f1(x, tv), dtype=float),
                np.asarray(f2(x, tv), dtype=float),
                np.asarray(f3(x, tv), dtype=float))

    traj = integrate(init, params, SolveConfig(dt=dt, t_end=t_end),
                     forcing=forcing)
    last = traj.states[-1]
    tv = last.t
    err = 0.0
    for f, exact in ((last.mu, mu_f), (last.phi, phi_f), (last.sigma, sig_f)):
        err += h_norm(Field(grid, f.values - exact(x, tv)))**2
    return math.sqrt(err)


def mms_orders(alpha: float = 0.1, beta: float = 0.1):
    t_end = 0.2
    e_dt = [mms_error(256, dt, t_end, alpha, beta)
            for dt in (0.02, 0.01, 0.005)]
    temporal = _observed_orders(e_dt)
    e_h = [mms_error(n, 2e-3 * (16 / n) ** 2, 0.1, alpha, beta)
           for n in (16, 32, 64)]
    spatial = _observed_orders(e_h)
    return temporal, spatial


def suite_mms() -> SuiteResult:
    temporal, spatial = mms_orders()
    ok = (all(TEMPORAL_ORDER_WINDOW[0] <= o <= TEMPORAL_ORDER_WINDOW[1]
              for o in temporal)
          and all(SPATIAL_ORDER_WINDOW[0] <= o <= SPATIAL_ORDER_WINDOW[1]
                  for o in spatial))
    return SuiteResult(
        "mms", ok,
        f"temporal orders {['%.3f' % o for o in temporal]}, "
        f"spatial orders {['%.3f' % o for o in spatial]}")


def jacobian_max_error(nstates: int = 10, seed: int = 11) -> float:
    """Worst relative mismatch between J v and a central finite difference."""
    rng = np.random.default_rng(seed)
    grid = Grid((32,), (1.0,))
    pot = PotentialSpec.double_well()
    params = ModelParams(0.1, 0.1, pot, CouplingSpec.model_derived(1.0, pot))
    dt = 1e-2
    n = grid.ncells
    worst = 0.0
    from .model import residual_arrays
    for _ in range(nstates):
        prev = make_state(
            0.0,
            Field(grid, rng.uniform(-0.5, 0.5, n)),
            Field(grid, rng.uniform(-0.8, 0.8, n)),
            Field(grid, rng.uniform(0.0, 1.0, n)), params)
        guess = make_state(
            dt,
            Field(grid, rng.uniform(-0.5, 0.5, n)),
            Field(grid, rng.uniform(-0.8, 0.8, n)),
            Field(grid, rng.uniform(0.0, 1.0, n)), params)
        j, _ = newton_linear_system(guess, prev, dt, params)
        v = rng.standard_normal(3 * n)
        eps = 1e-6

        def res_vec(mu, phi, sig):
            rm, rp, rs = residual_arrays(prev, mu, phi, sig, dt, params)
            return np.concatenate([rm, rp, rs])

        u0 = np.concatenate([guess.mu.flat, guess.phi.flat, guess.sigma.flat])
        up = u0 + eps * v
        um = u0 - eps * v
        fd = (res_vec(up[:n], up[n:2 * n], up[2 * n:])
              - res_vec(um[:n], um[n:2 * n], um[2 * n:])) / (2 * eps)
        jv = j @ v
        worst = max(worst, float(np.linalg.norm(jv - fd)
                                 / max(np.linalg.norm(fd), 1e-300)))
    return worst


def suite_jacobian() -> SuiteResult:
    worst = jacobian_max_error()
    ok = worst <= 1e-6
    return SuiteResult("jacobian", ok, f"max relative J v mismatch {worst:.3e}")


SUITES = {
    "laplacian": suite_laplacian,
    "interpolation": suite_interpolation,
    "mass": suite_mass,
    "energy": suite_energy,
    "heat": suite_heat,
    "mms": suite_mms,
    "jacobian": suite_jacobian,
}


def run_verify(suites=None) -> list[SuiteResult]:
    names = list(SUITES) if not suites else list(suites)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites: {unknown} (available: {list(SUITES)})")
    return [SUITES[name]() for name in names]
