"""Flat key = value study configuration: parsing, validation, builders.

One file fully determines a study.  Unknown keys, out-of-range parameters
and an inadmissible potential for the rate study are all collected and
reported together rather than failing at the first violation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .grid import Field, Grid, read_field
from .model import ModelParams, State, init_consistent
from .potentials import CouplingSpec, PotentialSpec, check_rate_admissible
from .stepper import SolveConfig

_KNOWN_KEYS = {
    "dim", "cells", "lengths", "alpha", "beta", "potential", "coupling",
    "phi0", "sigma0", "mu0", "dt", "t_end", "newton_tol", "newton_max",
    "linear_tol", "damping", "sweep", "snapshot_every", "seed", "out",
}


@dataclass
class StudyConfig:
    """Everything one run or study needs; defaults are the desk-scale preset."""

    dim: int = 1
    cells: tuple = (128,)
    lengths: tuple = (1.0,)
    alpha: float = 0.01
    beta: float = 0.01
    potential: str = "doublewell"
    coupling: str = "model:1.0"
    phi0: str = "tanh-interface:0.5,0.1"
    sigma0: str = "cosine:1,0.5,0.5"
    mu0: str = "prepared"
    dt: float = 1e-4
    t_end: float = 0.25
    newton_tol: float = 1e-10
    newton_max: int = 30
    linear_tol: float = 1e-12
    damping: float = 1.0
    sweep: str = "diag:1e-2,1e-4,5"
    snapshot_every: int = 0
    seed: int = 1234
    out: str = "out"


def _parse_tuple_int(s):
    return tuple(int(tok) for tok in s.split(","))


def _parse_tuple_float(s):
    return tuple(float(tok) for tok in s.split(","))


_PARSERS = {
    "dim": int,
    "cells": _parse_tuple_int,
    "lengths": _parse_tuple_float,
    "alpha": float,
    "beta": float,
    "dt": float,
    "t_end": float,
    "newton_tol": float,
    "newton_max": int,
    "linear_tol": float,
    "damping": float,
    "snapshot_every": int,
    "seed": int,
}


def parse_config(text: str, for_study: bool = False) -> StudyConfig:
    """Parse flat 'key = value' text; raises ConfigError with all violations."""
    violations = []
    cfg = StudyConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, value = (tok.strip() for tok in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        try:
            parsed = _PARSERS.get(key, str)(value)
        except ValueError:
            violations.append(f"line {lineno}: cannot parse {key} = {value!r}")
            continue
        setattr(cfg, key, parsed)
    violations.extend(validate(cfg, for_study=for_study))
    if violations:
        raise ConfigError(violations)
    return cfg


def validate(cfg: StudyConfig, for_study: bool = False) -> list[str]:
    v = []
    if cfg.dim not in (1, 2, 3):
        v.append(f"dim must be 1, 2 or 3, got {cfg.dim}")
    if len(cfg.cells) not in (1, cfg.dim):
        v.append("cells must list one count per axis")
    if len(cfg.lengths) not in (1, cfg.dim):
        v.append("lengths must list one length per axis")
    if any(n < 2 for n in cfg.cells):
        v.append("all cell counts must be >= 2")
    if any(l <= 0 for l in cfg.lengths):
        v.append("all lengths must be > 0")
    if not (0.0 <= cfg.alpha < 1.0):
        v.append(f"alpha must lie in [0,1), got {cfg.alpha}")
    if not (0.0 <= cfg.beta < 1.0):
        v.append(f"beta must lie in [0,1), got {cfg.beta}")
    if cfg.dt <= 0:
        v.append("dt must be > 0")
    if cfg.t_end < cfg.dt:
        v.append("t_end must be >= dt")
    if cfg.newton_tol <= 0 or cfg.linear_tol <= 0:
        v.append("tolerances must be > 0")
    if not (0 < cfg.damping <= 1):
        v.append("damping must lie in (0, 1]")
    try:
        pot = build_potential(cfg.potential)
    except ValueError as exc:
        v.append(str(exc))
        pot = None
    try:
        if pot is not None:
            build_coupling(cfg.coupling, pot)
    except ValueError as exc:
        v.append(str(exc))
    for key in ("phi0", "sigma0"):
        try:
            _check_data_spec(getattr(cfg, key))
        except ValueError as exc:
            v.append(f"{key}: {exc}")
    try:
        _check_mu0_spec(cfg.mu0)
    except ValueError as exc:
        v.append(f"mu0: {exc}")
    if for_study:
        try:
            pairs = sweep_pairs(cfg)
            if not pairs:
                v.append("sweep must be nonempty for a study")
            if any(not (0 <= a < 1 and 0 <= b < 1) for a, b in pairs):
                v.append("all sweep (alpha, beta) must lie in [0,1)^2")
        except ValueError as exc:
            v.append(f"sweep: {exc}")
        if pot is not None:
            report = check_rate_admissible(pot)
            if not report.admissible:
                v.append(f"potential not admissible for the rate study: {report}")
    return v


def serialize(cfg: StudyConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ",".join("%.17g" % x if isinstance(x, float) else str(x)
                             for x in value)
        elif isinstance(value, float):
            value = "%.17g" % value
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: StudyConfig) -> str:
    return hashlib.sha256(serialize(cfg).encode()).hexdigest()


def build_potential(spec: str) -> PotentialSpec:
    if spec == "doublewell":
        return PotentialSpec.double_well()
    if spec.startswith("log:"):
        return PotentialSpec.logarithmic(float(spec[4:]))
    if spec.startswith("poly:"):
        path = spec[5:]
        b, pi = _read_poly_file(path)
        return PotentialSpec.polynomial(b, pi)
    raise ValueError(f"unknown potential {spec!r} "
                     "(expected doublewell | log:<kappa> | poly:<file>)")


def _read_poly_file(path):
    """Two lines of ascending coefficients: 'b = ...' and 'pi = ...'."""
    b, pi = (), ()
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, val = (t.strip() for t in line.split("=", 1))
            coeffs = tuple(float(x) for x in val.split(","))
            if key == "b":
                b = coeffs
            elif key == "pi":
                pi = coeffs
            else:
                raise ValueError(f"unknown key {key!r} in polynomial file")
    return b, pi


def build_coupling(spec: str, potential: PotentialSpec) -> CouplingSpec:
    if spec == "zero":
        return CouplingSpec.zero()
    if spec.startswith("const:"):
        return CouplingSpec.constant(float(spec[6:]))
    if spec.startswith("model:"):
        return CouplingSpec.model_derived(float(spec[6:]), potential)
    raise ValueError(f"unknown coupling {spec!r} "
                     "(expected zero | const:<p0> | model:<p0>)")


_DATA_KINDS = ("cosine", "tanh-interface", "random", "file", "const")


def _check_data_spec(spec: str) -> None:
    kind = spec.split(":", 1)[0]
    if kind not in _DATA_KINDS:
        raise ValueError(f"unknown initial-data kind {spec!r}")
    if kind != spec and kind == "tanh-interface":
        args = spec.split(":", 1)[1].split(",")
        if len(args) != 2:
            raise ValueError(f"{kind} takes exactly two arguments, got {spec!r}")
    if kind != spec and kind == "random":
        args = spec.split(":", 1)[1].split(",")
        if len(args) not in (2, 4):
            raise ValueError(
                "random takes <seed>,<amp> or <seed>,<amp>,<kmin>,<kmax>, "
                f"got {spec!r}")


def _check_mu0_spec(spec: str) -> None:
    if spec == "prepared" or spec.startswith("file:") or spec.startswith("const:"):
        return
    raise ValueError(f"unknown mu0 spec {spec!r} "
                     "(expected prepared | file:<path> | const:<c>)")


def build_grid(cfg: StudyConfig) -> Grid:
    cells = cfg.cells if len(cfg.cells) == cfg.dim else cfg.cells * cfg.dim
    lengths = cfg.lengths if len(cfg.lengths) == cfg.dim else cfg.lengths * cfg.dim
    return Grid(cells, lengths)


def build_params(cfg: StudyConfig, alpha: float | None = None,
                 beta: float | None = None) -> ModelParams:
    pot = build_potential(cfg.potential)
    coup = build_coupling(cfg.coupling, pot)
    return ModelParams(
        alpha=cfg.alpha if alpha is None else alpha,
        beta=cfg.beta if beta is None else beta,
        potential=pot, coupling=coup)


def build_solve_config(cfg: StudyConfig) -> SolveConfig:
    return SolveConfig(dt=cfg.dt, t_end=cfg.t_end, newton_tol=cfg.newton_tol,
                       newton_max=cfg.newton_max, linear_tol=cfg.linear_tol,
                       damping=cfg.damping)


def build_data_field(spec: str, grid: Grid) -> Field:
    kind, _, rest = spec.partition(":")
    if kind == "const":
        return Field.full(grid, float(rest))
    if kind == "cosine":
        args = [float(x) for x in rest.split(",")] if rest else [1.0]
        k = args[0]
        amp = args[1] if len(args) > 1 else 1.0
        offset = args[2] if len(args) > 2 else 0.0
        x = grid.meshgrid()[0]
        return Field(grid, offset + amp * np.cos(k * np.pi * x / grid.lengths[0]))
    if kind == "tanh-interface":
        x0, w = (float(x) for x in rest.split(","))
        x = grid.meshgrid()[0]
        return Field(grid, np.tanh((x - x0) / w))
    if kind == "random":
        args = rest.split(",")
        rng = np.random.default_rng(int(args[0]))
        amp = float(args[1])
        if len(args) == 2:
            return Field(grid, rng.uniform(-amp, amp, size=grid.extents))
        # Band-limited roughness: random coefficients on the cosine modes
        # whose largest per-axis wavenumber lies in [kmin, kmax].
        kmin, kmax = int(args[2]), int(args[3])
        if not (0 <= kmin <= kmax):
            raise ValueError(f"bad wavenumber band in {spec!r}")
        coords = grid.meshgrid()
        vals = np.zeros(grid.extents)
        for kvec in np.ndindex(*(kmax + 1,) * grid.dim):
            if not (kmin <= max(kvec) <= kmax):
                continue
            mode = np.ones(grid.extents)
            for ax, k in enumerate(kvec):
                mode = mode * np.cos(k * np.pi * coords[ax] / grid.lengths[ax])
            vals += rng.uniform(-amp, amp) * mode
        return Field(grid, vals)
    if kind == "file":
        f = read_field(rest)
        if f.grid != grid:
            raise ValueError(f"snapshot grid of {rest!r} does not match the config")
        return f
    raise ValueError(f"unknown initial-data kind {spec!r}")


def build_initial_state(cfg: StudyConfig, grid: Grid,
                        params: ModelParams) -> State:
    phi0 = build_data_field(cfg.phi0, grid)
    sigma0 = build_data_field(cfg.sigma0, grid)
    if cfg.mu0 == "prepared":
        mu0 = None
    elif cfg.mu0.startswith("const:"):
        mu0 = Field.full(grid, float(cfg.mu0[6:]))
    elif cfg.mu0.startswith("file:"):
        mu0 = read_field(cfg.mu0[5:])
    else:
        raise ValueError(f"unknown mu0 spec {cfg.mu0!r}")
    return init_consistent(phi0, sigma0, params, mu0=mu0)


def sweep_pairs(cfg: StudyConfig) -> list[tuple[float, float]]:
    """Sweep grammar: diag:<a0>,<amin>,<n> | alpha:... | beta:... | pairs:a:b;..."""
    spec = cfg.sweep
    kind, _, rest = spec.partition(":")
    if kind in ("diag", "alpha", "beta"):
        a0_s, amin_s, n_s = rest.split(",")
        a0, amin, n = float(a0_s), float(amin_s), int(n_s)
        if n < 1 or a0 <= 0 or amin <= 0 or amin > a0:
            raise ValueError(f"bad geometric sweep {spec!r}")
        if n == 1:
            vals = [a0]
        else:
            vals = list(np.geomspace(a0, amin, n))
        if kind == "diag":
            return [(v, v) for v in vals]
        if kind == "alpha":
            return [(v, 0.0) for v in vals]
        return [(0.0, v) for v in vals]
    if kind == "pairs":
        out = []
        for tok in rest.split(";"):
            a_s, b_s = tok.split(":")
            out.append((float(a_s), float(b_s)))
        return out
    raise ValueError(f"unknown sweep grammar {spec!r}")
