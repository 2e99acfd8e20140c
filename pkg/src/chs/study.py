"""Experiment orchestration: single runs, vanishing-viscosity rate studies.

A study computes the limit trajectory once, a refined limit run for the
discretization-error floor, then one viscous trajectory per sweep point.
Sweep points whose error is within 5x the floor are excluded from the fit
(below the floor the alpha/beta signal is unobservable).  Results are
sorted by (alpha, beta) before writing, so output bytes are independent of
worker scheduling.
"""

from __future__ import annotations

import concurrent.futures
import datetime
import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .config import (StudyConfig, build_grid, build_initial_state,
                     build_params, build_solve_config, config_hash, serialize,
                     sweep_pairs)
from .diagnostics import (MONITOR_KEYS, ErrorReport, RateReport,
                          RunningMonitor, error_components, error_norms,
                          fit_rate, uniform_bound_report)
from .errors import FitError, SolverFailure, StepFailure
from .grid import Field, write_field
from .model import conserved_mean, energy
from .stepper import Trajectory, integrate

FLOOR_EXCLUSION_FACTOR = 5.0


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def write_manifest(outdir, cfg: StudyConfig, status: str, files, extra=None):
    manifest = {
        "config_hash": config_hash(cfg),
        "code_version": __version__,
        "timestamp": _timestamp(),
        "status": status,
        "files": sorted(files),
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def run_single(cfg: StudyConfig, outdir) -> Trajectory:
    """Integrate one configuration; write trajectory.csv, snapshots, figure."""
    os.makedirs(outdir, exist_ok=True)
    write_manifest(outdir, cfg, "running", [])
    grid = build_grid(cfg)
    params = build_params(cfg)
    init = build_initial_state(cfg, grid, params)
    solve = build_solve_config(cfg)

    mon = RunningMonitor(init, params)
    rows = []
    files = ["manifest.json", "trajectory.csv", "trajectory.png"]

    def record(state, report):
        vals = mon.values()
        row = [state.t, conserved_mean(state, params), energy(state, params)]
        row += [vals[k] for k in MONITOR_KEYS]
        if report is None:
            row += [0, 0.0, 0.0, 0.0, 0.0]
        else:
            row += [report.newton_iters, report.final_residual,
                    report.dissipation, report.energy_balance_residual,
                    report.mass_drift]
        rows.append(row)

    record(init, None)
    nsnap = [0]

    def hook(prev, state, report):
        mon.update(prev, state, cfg.dt)
        record(state, report)
        nsnap[0] += 1
        if cfg.snapshot_every > 0 and nsnap[0] % cfg.snapshot_every == 0:
            for name, f in (("mu", state.mu), ("phi", state.phi),
                            ("sigma", state.sigma)):
                fname = f"{name}_{nsnap[0]:06d}.csv"
                write_field(f, os.path.join(outdir, fname))
                files.append(fname)

    traj = integrate(init, params, solve, monitors=hook)

    header = ["t", "mass", "energy", *MONITOR_KEYS, "newton_iters",
              "final_residual", "dissipation", "energy_balance_residual",
              "mass_drift"]
    with open(os.path.join(outdir, "trajectory.csv"), "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join("%d" % v if isinstance(v, int) else "%.17g" % v
                              for v in row) + "\n")

    from .plots import trajectory_figure
    trajectory_figure([r[0] for r in rows], [r[2] for r in rows],
                      [r[1] for r in rows],
                      os.path.join(outdir, "trajectory.png"))
    write_manifest(outdir, cfg, "done", files)
    return traj


def _coarsen_array(a: np.ndarray) -> np.ndarray:
    """Block-mean restriction by a factor 2 per axis (cell-centered)."""
    for ax in range(a.ndim):
        n = a.shape[ax]
        if n % 2:
            raise ValueError("coarsening needs even extents")
        shape = a.shape[:ax] + (n // 2, 2) + a.shape[ax + 1:]
        a = a.reshape(shape).mean(axis=ax + 1)
    return a


def _limit_triples(traj: Trajectory):
    return [(s.mu, s.phi, s.sigma) for s in traj.states]


def estimate_floor(cfg: StudyConfig, limit_traj: Trajectory) -> float:
    """Discretization floor: limit solution at (dt, h) vs (dt/2, h/2)."""
    fine_cfg = replace(
        cfg,
        cells=tuple(2 * n for n in build_grid(cfg).extents),
        lengths=build_grid(cfg).lengths,
        dim=build_grid(cfg).dim,
        dt=cfg.dt / 2,
    )
    grid_f = build_grid(fine_cfg)
    params = build_params(fine_cfg, alpha=0.0, beta=0.0)
    init = build_initial_state(fine_cfg, grid_f, params)
    traj_f = integrate(init, params, build_solve_config(fine_cfg))

    coarse = limit_traj.grid
    restricted = []
    for s in traj_f.states[::2]:
        restricted.append(tuple(Field(coarse, _coarsen_array(np.array(f.values)))
                                for f in (s.mu, s.phi, s.sigma)))
    e_phi, e_mu, e_sigma = error_components(_limit_triples(limit_traj),
                                            restricted, cfg.dt)
    return e_phi + e_mu + e_sigma


def _run_viscous_point(cfg_text: str, alpha: float, beta: float,
                       limit_stack=None):
    """Worker for one sweep point; returns (status, ErrorReport|None, monitors)."""
    from .config import parse_config
    cfg = parse_config(cfg_text)
    grid = build_grid(cfg)
    params = build_params(cfg, alpha=alpha, beta=beta)
    init = build_initial_state(cfg, grid, params)
    try:
        traj = integrate(init, params, build_solve_config(cfg))
    except (StepFailure, SolverFailure) as exc:
        return f"failed: {exc}", None, None
    monitors = uniform_bound_report(traj, params)
    monitors = {k: monitors[k] for k in
                (*MONITOR_KEYS, "rhs_data", "mu_l2v", "phi_l2w", "xi_l2h",
                 "mean_mu_ratio", "grad_sigma_l2h", "dtphi_l2h")}
    mu_s, phi_s, sig_s = limit_stack
    limit_triples = [
        (Field(grid, mu_s[k]), Field(grid, phi_s[k]), Field(grid, sig_s[k]))
        for k in range(mu_s.shape[0])
    ]
    e_phi, e_mu, e_sigma = error_components(
        [(s.mu, s.phi, s.sigma) for s in traj.states], limit_triples, cfg.dt)
    rep = ErrorReport(alpha=alpha, beta=beta, e_phi=e_phi, e_mu=e_mu,
                      e_sigma=e_sigma, total=e_phi + e_mu + e_sigma)
    return "ok", rep, monitors


@dataclass
class StudyResult:
    reports: list          # (alpha, beta, status, ErrorReport|None, monitors|None)
    floor: float
    excluded: list         # bool per sweep point, aligned with reports
    rate: RateReport | None
    fit_refusal: str | None


def run_study(cfg: StudyConfig, outdir, jobs: int = 1) -> StudyResult:
    """Full vanishing-viscosity study; writes rates.csv, fit.txt, figures."""
    os.makedirs(outdir, exist_ok=True)
    write_manifest(outdir, cfg, "running", [])
    grid = build_grid(cfg)
    limit_params = build_params(cfg, alpha=0.0, beta=0.0)
    limit_init = build_initial_state(cfg, grid, limit_params)
    solve = build_solve_config(cfg)
    limit_traj = integrate(limit_init, limit_params, solve)
    floor = estimate_floor(cfg, limit_traj)

    limit_stack = tuple(
        np.stack([np.array(getattr(s, name).values) for s in limit_traj.states])
        for name in ("mu", "phi", "sigma"))

    pairs = sorted(sweep_pairs(cfg))
    cfg_text = serialize(cfg)
    results = []
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                pool.submit(_run_viscous_point, cfg_text, a, b, limit_stack):
                (a, b) for a, b in pairs
            }
            collected = {}
            for fut in concurrent.futures.as_completed(futures):
                collected[futures[fut]] = fut.result()
        for a, b in pairs:
            status, rep, monitors = collected[(a, b)]
            results.append((a, b, status, rep, monitors))
    else:
        for a, b in pairs:
            status, rep, monitors = _run_viscous_point(cfg_text, a, b,
                                                       limit_stack)
            results.append((a, b, status, rep, monitors))

    excluded = []
    for a, b, status, rep, _ in results:
        excluded.append(status != "ok"
                        or rep.total < FLOOR_EXCLUSION_FACTOR * floor)

    fit_reports = [rep for (a, b, status, rep, _), excl in zip(results, excluded)
                   if not excl]
    rate = None
    refusal = None
    try:
        rate = fit_rate(fit_reports)
    except FitError as exc:
        refusal = str(exc)

    files = ["manifest.json", "rates.csv", "fit.txt", "monitors.csv",
             "rate_fit.png"]
    with open(os.path.join(outdir, "rates.csv"), "w") as fh:
        fh.write("alpha,beta,sqrt_sum,e_phi,e_mu,e_sigma,total,excluded_flag\n")
        for (a, b, status, rep, _), excl in zip(results, excluded):
            if rep is None:
                fh.write("%.17g,%.17g,%.17g,nan,nan,nan,nan,1\n"
                         % (a, b, math.sqrt(a) + math.sqrt(b)))
            else:
                fh.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n"
                         % (a, b, rep.sqrt_sum, rep.e_phi, rep.e_mu,
                            rep.e_sigma, rep.total, int(excl)))

    with open(os.path.join(outdir, "fit.txt"), "w") as fh:
        fh.write("floor_estimate = %.17g\n" % floor)
        if rate is not None:
            fh.write("slope = %.17g\n" % rate.fitted_slope)
            fh.write("logC = %.17g\n" % rate.fitted_logc)
            fh.write("r_squared = %.17g\n" % rate.r_squared)
        else:
            fh.write("fit refused: %s\n" % refusal)

    mon_keys = (*MONITOR_KEYS, "rhs_data", "mu_l2v", "phi_l2w", "xi_l2h",
                "mean_mu_ratio")
    with open(os.path.join(outdir, "monitors.csv"), "w") as fh:
        fh.write("alpha,beta," + ",".join(mon_keys) + "\n")
        for a, b, status, rep, monitors in results:
            if monitors is None:
                continue
            fh.write("%.17g,%.17g," % (a, b)
                     + ",".join("%.17g" % monitors[k] for k in mon_keys) + "\n")

    from .plots import rate_figure
    pts = [(rep.sqrt_sum, rep.total, excl)
           for (a, b, status, rep, _), excl in zip(results, excluded)
           if rep is not None]
    rate_figure(pts,
                rate.fitted_slope if rate else None,
                rate.fitted_logc if rate else 0.0,
                os.path.join(outdir, "rate_fit.png"))

    statuses = {f"{a:g},{b:g}": status for a, b, status, _, _ in results}
    write_manifest(outdir, cfg, "done", files, extra={"points": statuses})
    return StudyResult(reports=results, floor=floor, excluded=excluded,
                       rate=rate, fit_refusal=refusal)
