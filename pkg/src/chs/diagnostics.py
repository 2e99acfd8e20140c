"""Trajectory-level norm accumulators, viscous-vs-limit error norms, rate fits.

Time quadrature is the right-endpoint rectangle rule everywhere, consistent
with backward Euler: L2(0,T;X)^2 accumulates dt * |field(t_k)|_X^2 over the
step endpoints k = 1..N, and L-infinity norms are running maxima (which do
include t = 0 when a whole trajectory is measured).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComparisonError, FitError
from .grid import (Field, dual_norm, h_norm, inner_h, integral, lap_array,
                   norms, riesz_apply, v_norm)
from .model import ModelParams, State, reaction
from .stepper import Trajectory

DEFAULT_NORM_TOL = 1e-10


@dataclass
class NormAccumulator:
    """Running L-infinity / L2-in-time norms in H, V and V*."""

    tol: float = DEFAULT_NORM_TOL
    linf_h: float = 0.0
    linf_v: float = 0.0
    linf_dual: float = 0.0
    _l2_h_sq: float = 0.0
    _l2_v_sq: float = 0.0
    _l2_dual_sq: float = 0.0
    steps: int = 0

    def accumulate(self, field: Field, dt: float) -> "NormAccumulator":
        if dt <= 0:
            raise ValueError("dt must be > 0")
        triple = norms(field, self.tol)
        self.linf_h = max(self.linf_h, triple.h_norm)
        self.linf_v = max(self.linf_v, triple.v_norm)
        self.linf_dual = max(self.linf_dual, triple.dual_norm)
        self._l2_h_sq += dt * triple.h_norm**2
        self._l2_v_sq += dt * triple.v_norm**2
        self._l2_dual_sq += dt * triple.dual_norm**2
        self.steps += 1
        return self

    @property
    def l2_h(self) -> float:
        return math.sqrt(self._l2_h_sq)

    @property
    def l2_v(self) -> float:
        return math.sqrt(self._l2_v_sq)

    @property
    def l2_dual(self) -> float:
        return math.sqrt(self._l2_dual_sq)


def accumulate(acc: NormAccumulator, field: Field, dt: float) -> NormAccumulator:
    return acc.accumulate(field, dt)


@dataclass(frozen=True)
class ErrorReport:
    """Viscous-vs-limit error in the norm combination of the error estimate."""

    alpha: float
    beta: float
    e_phi: float    # Linf(V*) + L2(V) of the phi difference
    e_mu: float     # L2(V*) of the mu difference
    e_sigma: float  # Linf(V*) + L2(H) of the sigma difference
    total: float

    @property
    def sqrt_sum(self) -> float:
        return math.sqrt(self.alpha) + math.sqrt(self.beta)


def error_components(triples_a, triples_b, dt: float,
                     tol: float = DEFAULT_NORM_TOL):
    """(e_phi, e_mu, e_sigma) between two equal-length (mu, phi, sigma) lists.

    Index 0 is t = 0; the L2-in-time pieces use right-endpoint quadrature.
    """
    phi_linf_dual = 0.0
    phi_l2v_sq = 0.0
    mu_l2dual_sq = 0.0
    sig_linf_dual = 0.0
    sig_l2h_sq = 0.0
    for k, ((mu_a, phi_a, sig_a), (mu_b, phi_b, sig_b)) in enumerate(
            zip(triples_a, triples_b)):
        dphi = phi_a - phi_b
        dsig = sig_a - sig_b
        phi_linf_dual = max(phi_linf_dual, dual_norm(dphi, tol))
        sig_linf_dual = max(sig_linf_dual, dual_norm(dsig, tol))
        if k > 0:
            dmu = mu_a - mu_b
            phi_l2v_sq += dt * v_norm(dphi)**2
            mu_l2dual_sq += dt * dual_norm(dmu, tol)**2
            sig_l2h_sq += dt * h_norm(dsig)**2
    e_phi = phi_linf_dual + math.sqrt(phi_l2v_sq)
    e_mu = math.sqrt(mu_l2dual_sq)
    e_sigma = sig_linf_dual + math.sqrt(sig_l2h_sq)
    return e_phi, e_mu, e_sigma


def _check_comparable(viscous: Trajectory, limit: Trajectory) -> None:
    if viscous.grid != limit.grid:
        raise ComparisonError("trajectories live on different grids")
    if abs(viscous.dt - limit.dt) > 1e-15 * max(viscous.dt, limit.dt):
        raise ComparisonError("trajectories use different dt")
    if len(viscous.states) != len(limit.states):
        raise ComparisonError("trajectories cover different time spans")
    for a, b in ((viscous.states[0].phi, limit.states[0].phi),
                 (viscous.states[0].sigma, limit.states[0].sigma)):
        if not np.array_equal(a.values, b.values):
            raise ComparisonError("trajectories start from different (phi0, sigma0)")


def error_norms(viscous: Trajectory, limit: Trajectory,
                tol: float = DEFAULT_NORM_TOL) -> ErrorReport:
    """Error components of the alpha/beta estimate over the common time points."""
    _check_comparable(viscous, limit)
    e_phi, e_mu, e_sigma = error_components(
        [(s.mu, s.phi, s.sigma) for s in viscous.states],
        [(s.mu, s.phi, s.sigma) for s in limit.states],
        viscous.dt, tol)
    return ErrorReport(alpha=viscous.params.alpha, beta=viscous.params.beta,
                       e_phi=e_phi, e_mu=e_mu, e_sigma=e_sigma,
                       total=e_phi + e_mu + e_sigma)


@dataclass(frozen=True)
class RateReport:
    points: tuple          # (alpha, beta, total) triples used in the fit
    fitted_slope: float
    fitted_logc: float
    r_squared: float


def fit_rate(reports) -> RateReport:
    """Least-squares line of log(total) against log(sqrt(alpha) + sqrt(beta))."""
    reports = list(reports)
    if len(reports) < 3:
        raise FitError(f"rate fit needs >= 3 reports, got {len(reports)}")
    x = np.array([math.log(r.sqrt_sum) for r in reports])
    y = np.array([math.log(r.total) for r in reports])
    if np.ptp(x) < 1e-12:
        raise FitError("degenerate abscissae: all sqrt(alpha)+sqrt(beta) equal")
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateReport(points=tuple((r.alpha, r.beta, r.total) for r in reports),
                      fitted_slope=float(slope), fitted_logc=float(intercept),
                      r_squared=float(r2))


# Monitored norms of the uniform a priori estimate, in display order.
MONITOR_KEYS = (
    "sqrt_alpha_mu_linf_h",
    "grad_mu_l2h",
    "sqrt_beta_dtphi_l2h",
    "phi_linf_v",
    "f_phi_linf_l1_sqrt",
    "sigma_linf_h",
    "sigma_l2v",
    "dtsigma_l2dual",
    "s_l2h",
    "r_l2h",
    "dt_alphamu_phi_l2dual",
)


class RunningMonitor:
    """Incremental computation of every monitored norm along a trajectory."""

    def __init__(self, init: State, params: ModelParams,
                 tol: float = DEFAULT_NORM_TOL):
        self.params = params
        self.tol = tol
        self.sa = math.sqrt(params.alpha)
        self.sb = math.sqrt(params.beta)
        grid = init.grid
        f0_l1 = integral(Field(grid, np.abs(params.potential.f(init.phi.values))))
        self.rhs_data = (self.sa * h_norm(init.mu) + v_norm(init.phi)
                         + math.sqrt(max(0.0, f0_l1)) + h_norm(init.sigma))
        self._sq = dict(grad_mu=0.0, dtphi=0.0, s=0.0, r=0.0, dtsigma=0.0,
                        damuphi=0.0, sigma_v=0.0, mu_v=0.0, phi_w=0.0,
                        xi=0.0, grad_sigma=0.0)
        self._max = dict(sqrt_alpha_mu_linf_h=0.0, phi_linf_v=0.0,
                         sigma_linf_h=0.0, f_phi_linf_l1_sqrt=0.0)
        self.mean_mu_ratio = 0.0
        self._observe_instant(init)

    def _observe_instant(self, s: State) -> None:
        grid = s.grid
        self._max["sqrt_alpha_mu_linf_h"] = max(
            self._max["sqrt_alpha_mu_linf_h"], self.sa * h_norm(s.mu))
        self._max["phi_linf_v"] = max(self._max["phi_linf_v"], v_norm(s.phi))
        self._max["sigma_linf_h"] = max(self._max["sigma_linf_h"],
                                        h_norm(s.sigma))
        f_l1 = integral(Field(grid, np.abs(self.params.potential.f(s.phi.values))))
        self._max["f_phi_linf_l1_sqrt"] = max(self._max["f_phi_linf_l1_sqrt"],
                                              math.sqrt(max(0.0, f_l1)))

    def update(self, prev: State, s: State, dt: float) -> None:
        grid = s.grid
        params = self.params
        self._observe_instant(s)
        sq = self._sq
        sq["grad_mu"] += dt * max(
            0.0, -inner_h(Field(grid, lap_array(grid, s.mu.values)), s.mu))
        sq["grad_sigma"] += dt * max(
            0.0, -inner_h(Field(grid, lap_array(grid, s.sigma.values)), s.sigma))
        sq["sigma_v"] += dt * v_norm(s.sigma)**2
        dtphi = Field(grid, (s.phi.values - prev.phi.values) / dt)
        sq["dtphi"] += dt * inner_h(dtphi, dtphi)
        r_f, s_f = reaction(s.phi, s.sigma, s.mu, params.coupling)
        sq["s"] += dt * inner_h(s_f, s_f)
        sq["r"] += dt * inner_h(r_f, r_f)
        dtsig = Field(grid, (s.sigma.values - prev.sigma.values) / dt)
        sq["dtsigma"] += dt * dual_norm(dtsig, self.tol)**2
        damuphi = Field(grid, (params.alpha * (s.mu.values - prev.mu.values)
                               + (s.phi.values - prev.phi.values)) / dt)
        sq["damuphi"] += dt * dual_norm(damuphi, self.tol)**2
        sq["mu_v"] += dt * v_norm(s.mu)**2
        sq["phi_w"] += dt * h_norm(riesz_apply(s.phi))**2
        sq["xi"] += dt * h_norm(s.xi)**2
        f_l1 = integral(Field(grid, np.abs(params.potential.f(s.phi.values))))
        denom = (self.sb * h_norm(dtphi) + f_l1 + h_norm(s.phi) + 1.0)
        self.mean_mu_ratio = max(self.mean_mu_ratio,
                                 abs(integral(s.mu)) / denom)

    def values(self) -> dict:
        sq = self._sq
        out = {
            "sqrt_alpha_mu_linf_h": self._max["sqrt_alpha_mu_linf_h"],
            "grad_mu_l2h": math.sqrt(sq["grad_mu"]),
            "sqrt_beta_dtphi_l2h": self.sb * math.sqrt(sq["dtphi"]),
            "phi_linf_v": self._max["phi_linf_v"],
            "f_phi_linf_l1_sqrt": self._max["f_phi_linf_l1_sqrt"],
            "sigma_linf_h": self._max["sigma_linf_h"],
            "sigma_l2v": math.sqrt(sq["sigma_v"]),
            "dtsigma_l2dual": math.sqrt(sq["dtsigma"]),
            "s_l2h": math.sqrt(sq["s"]),
            "r_l2h": math.sqrt(sq["r"]),
            "dt_alphamu_phi_l2dual": math.sqrt(sq["damuphi"]),
        }
        rhs = self.rhs_data
        out["rhs_data"] = rhs
        out["ratios"] = {k: (out[k] / rhs if rhs > 0 else float("inf"))
                         for k in MONITOR_KEYS}
        out["mu_l2v"] = math.sqrt(sq["mu_v"])
        out["phi_l2w"] = math.sqrt(sq["phi_w"])
        out["xi_l2h"] = math.sqrt(sq["xi"])
        out["grad_sigma_l2h"] = math.sqrt(sq["grad_sigma"])
        out["dtphi_l2h"] = math.sqrt(sq["dtphi"])
        out["mean_mu_ratio"] = self.mean_mu_ratio
        return out


def uniform_bound_report(traj: Trajectory, params: ModelParams | None = None,
                         tol: float = DEFAULT_NORM_TOL) -> dict:
    """Every monitored norm of the uniform estimate, the data combination
    on its right-hand side, and their ratios, for one complete trajectory."""
    params = params if params is not None else traj.params
    mon = RunningMonitor(traj.states[0], params, tol)
    for prev, s in zip(traj.states, traj.states[1:]):
        mon.update(prev, s, traj.dt)
    return mon.values()
