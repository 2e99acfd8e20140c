"""Discrete-in-space assembly of the coupled (mu, phi, sigma) system.

Backward-Euler strong-form residuals of the viscous system

    alpha (mu+ - mu)/dt + (phi+ - phi)/dt - Lap mu+ = R+
    mu+ = beta (phi+ - phi)/dt - Lap phi+ + B_hat'(phi+) + pi(phi+)
    (sigma+ - sigma)/dt - Lap sigma+ = -R+

with R = p(phi)(sigma - mu), and of the alpha = beta = 0 limit system,
which is the same assembly with the viscous terms deleted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, Grid, inner_h, integral, lap_array, mean
from .potentials import CouplingSpec, PotentialSpec


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    beta: float
    potential: PotentialSpec
    coupling: CouplingSpec

    def __post_init__(self):
        if not (0.0 <= self.alpha < 1.0):
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")

    @property
    def is_limit(self) -> bool:
        return self.alpha == 0.0 and self.beta == 0.0

    def with_viscosity(self, alpha: float, beta: float) -> "ModelParams":
        return ModelParams(alpha, beta, self.potential, self.coupling)


@dataclass(frozen=True)
class State:
    """One time slice: (mu, phi, sigma) plus the derived xi and R fields."""

    t: float
    mu: Field
    phi: Field
    sigma: Field
    xi: Field
    r: Field

    @property
    def grid(self) -> Grid:
        return self.mu.grid


def reaction(phi: Field, sigma: Field, mu: Field,
             coupling: CouplingSpec) -> tuple[Field, Field]:
    """R = p(phi)(sigma - mu) and S = sqrt(p(phi))(sigma - mu)."""
    p = coupling.p(phi.values)
    diff = sigma.values - mu.values
    return Field(phi.grid, p * diff), Field(phi.grid, np.sqrt(p) * diff)


def make_state(t: float, mu: Field, phi: Field, sigma: Field,
               params: ModelParams) -> State:
    """Populate the derived fields xi = B_hat'(phi) and R."""
    xi = Field(phi.grid, params.potential.db_hat(phi.values))
    r, _ = reaction(phi, sigma, mu, params.coupling)
    return State(t=float(t), mu=mu, phi=phi, sigma=sigma, xi=xi, r=r)


def init_consistent(phi0: Field, sigma0: Field, params: ModelParams,
                    mu0: Field | None = None) -> State:
    """Initial state at t = 0.

    When mu0 is omitted, the well-prepared choice
    mu0 = -Lap phi0 + F'(phi0) (the limit relation at t = 0) is used, so
    viscous and limit runs start from comparable data.
    """
    grid = phi0.grid
    if mu0 is None:
        mu0 = Field(grid, -lap_array(grid, phi0.values)
                    + params.potential.df(phi0.values))
    return make_state(0.0, mu0, phi0, sigma0, params)


def residual_arrays(prev: State, mu1, phi1, sigma1, dt: float,
                    params: ModelParams, forcing=None):
    """Residual triple on raw shaped arrays (fast path used by the stepper)."""
    grid = prev.grid
    pot = params.potential.evaluate(phi1)
    p = params.coupling.p(phi1)
    r1 = p * (sigma1 - mu1)
    res_mu = (params.alpha * (mu1 - prev.mu.values) / dt
              + (phi1 - prev.phi.values) / dt
              - lap_array(grid, mu1) - r1)
    res_phi = (params.beta * (phi1 - prev.phi.values) / dt
               - lap_array(grid, phi1) + pot.db_hat + pot.dpi - mu1)
    res_sigma = ((sigma1 - prev.sigma.values) / dt
                 - lap_array(grid, sigma1) + r1)
    if forcing is not None:
        f_mu, f_phi, f_sigma = forcing
        res_mu = res_mu - f_mu
        res_phi = res_phi - f_phi
        res_sigma = res_sigma - f_sigma
    return res_mu, res_phi, res_sigma


def residual_viscous(prev: State, nxt: State, dt: float, params: ModelParams,
                     forcing=None) -> tuple[Field, Field, Field]:
    """Backward-Euler residuals of the viscous system between two states."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    rm, rp, rs = residual_arrays(prev, nxt.mu.values, nxt.phi.values,
                                 nxt.sigma.values, dt, params, forcing)
    grid = prev.grid
    return Field(grid, rm), Field(grid, rp), Field(grid, rs)


def residual_limit(prev: State, nxt: State, dt: float, params: ModelParams,
                   forcing=None) -> tuple[Field, Field, Field]:
    """Residuals of the alpha = beta = 0 limit system (term deletion)."""
    if not params.is_limit:
        raise ValueError("residual_limit requires alpha = beta = 0")
    return residual_viscous(prev, nxt, dt, params, forcing)


def energy(state: State, params: ModelParams) -> float:
    """E = (alpha/2)|mu|_H^2 + (1/2)|grad phi|^2 + int F(phi) + (1/2)|sigma|_H^2."""
    grid = state.grid
    grad_phi_sq = max(0.0, -inner_h(Field(grid, lap_array(grid, state.phi.values)),
                                    state.phi))
    f_int = integral(Field(grid, params.potential.f(state.phi.values)))
    return (0.5 * params.alpha * inner_h(state.mu, state.mu)
            + 0.5 * grad_phi_sq + f_int
            + 0.5 * inner_h(state.sigma, state.sigma))


def conserved_mean(state: State, params: ModelParams) -> float:
    """mean(alpha mu + phi + sigma); the exactly conserved quantity."""
    return mean(Field(state.grid,
                      params.alpha * state.mu.values + state.phi.values
                      + state.sigma.values))
