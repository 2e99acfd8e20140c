"""Free-energy potentials F = B_hat + pi_hat, proliferation couplings, admissibility.

Supported potentials:
  double-well     F(r) = (1/4)(r^2-1)^2, split as (1/4)((r^2-1)+)^2 + (1/4)((1-r^2)+)^2
  logarithmic     F(r) = (1-r)ln(1-r) + (1+r)ln(1+r) + kappa (1-r^2)+ on (-1, 1)
  polynomial      user-supplied convex polynomial B_hat plus C^1 polynomial pi_hat

Couplings: p == 0, p == p0 (constant), and the model-derived
p(r) = 2 p0 sqrt(F(r)) on |r| <= 1 (zero outside).  For the double-well
potential sqrt(F) = (1 - r^2)/2 on |r| <= 1, so p(r) = p0 (1 - r^2) there;
that closed form is used to avoid the kinked sqrt composition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DomainError

# Safeguard band for the logarithmic potential: evaluations clamp the
# argument to [-1 + EPS_LOG, 1 - EPS_LOG].
EPS_LOG = 1e-9

# Growth bound of the rate-study assumptions: |F(r)| <= C0 (|r|^6 + 1).
MAX_RATE_DEGREE = 6


class PotentialValues(NamedTuple):
    f: np.ndarray
    df: np.ndarray
    d2f: np.ndarray
    b_hat: np.ndarray
    db_hat: np.ndarray
    pi_hat: np.ndarray
    dpi: np.ndarray


@dataclass(frozen=True)
class PotentialSpec:
    """One potential F = B_hat + pi_hat with its derivatives."""

    kind: str  # "doublewell" | "logarithmic" | "poly"
    kappa: float = 0.0
    b_coeffs: tuple = ()   # ascending polynomial coefficients of B_hat
    pi_coeffs: tuple = ()  # ascending polynomial coefficients of pi_hat

    @classmethod
    def double_well(cls) -> "PotentialSpec":
        return cls(kind="doublewell")

    @classmethod
    def logarithmic(cls, kappa: float) -> "PotentialSpec":
        if kappa <= 0:
            raise ValueError("kappa must be > 0")
        return cls(kind="logarithmic", kappa=float(kappa))

    @classmethod
    def polynomial(cls, b_coeffs, pi_coeffs) -> "PotentialSpec":
        return cls(kind="poly",
                   b_coeffs=tuple(float(c) for c in b_coeffs),
                   pi_coeffs=tuple(float(c) for c in pi_coeffs))

    @property
    def domain_is_reals(self) -> bool:
        return self.kind != "logarithmic"

    def _guard(self, r: np.ndarray) -> np.ndarray:
        if self.kind != "logarithmic":
            return r
        if np.any(np.abs(r) > 1.0):
            bad = float(np.asarray(r).reshape(-1)[np.argmax(np.abs(np.asarray(r)))])
            raise DomainError(
                f"logarithmic potential evaluated at r={bad:g} outside [-1, 1]",
                value=bad,
            )
        return np.clip(r, -1.0 + EPS_LOG, 1.0 - EPS_LOG)

    def evaluate(self, r) -> PotentialValues:
        """F, F', F'', B_hat, B_hat', pi_hat, pi at r (vectorized)."""
        r = self._guard(np.asarray(r, dtype=float))
        if self.kind == "doublewell":
            s = r * r - 1.0
            sp_ = np.maximum(s, 0.0)    # (r^2-1)+
            sm = np.maximum(-s, 0.0)    # (1-r^2)+
            b = 0.25 * sp_**2
            db = r * sp_
            pi_h = 0.25 * sm**2
            dpi = -r * sm
            f = 0.25 * s**2
            df = r**3 - r
            d2f = 3.0 * r * r - 1.0
        elif self.kind == "logarithmic":
            b = (1.0 - r) * np.log1p(-r) + (1.0 + r) * np.log1p(r)
            db = np.log1p(r) - np.log1p(-r)
            pi_h = self.kappa * np.maximum(1.0 - r * r, 0.0)
            dpi = -2.0 * self.kappa * r
            f = b + pi_h
            df = db + dpi
            d2f = 2.0 / (1.0 - r * r) - 2.0 * self.kappa
        elif self.kind == "poly":
            bp = np.polynomial.Polynomial(self.b_coeffs or (0.0,))
            pp = np.polynomial.Polynomial(self.pi_coeffs or (0.0,))
            b, db = bp(r), bp.deriv()(r)
            pi_h, dpi = pp(r), pp.deriv()(r)
            f = b + pi_h
            df = db + dpi
            d2f = bp.deriv(2)(r) + pp.deriv(2)(r)
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        return PotentialValues(f, df, d2f, b, db, pi_h, dpi)

    # Convenience accessors used by the model assembly.
    def f(self, r):
        return self.evaluate(r).f

    def df(self, r):
        return self.evaluate(r).df

    def d2f(self, r):
        return self.evaluate(r).d2f

    def db_hat(self, r):
        return self.evaluate(r).db_hat

    def d2b_hat(self, r):
        """Second derivative of the convex part (for convexity checks)."""
        r = self._guard(np.asarray(r, dtype=float))
        if self.kind == "doublewell":
            return np.where(np.abs(r) >= 1.0, 3.0 * r * r - 1.0, 0.0)
        if self.kind == "logarithmic":
            return 2.0 / (1.0 - r * r)
        bp = np.polynomial.Polynomial(self.b_coeffs or (0.0,))
        return bp.deriv(2)(r)

    @property
    def admissible_for_rate_study(self) -> bool:
        return check_rate_admissible(self).admissible


def potential_eval(spec: PotentialSpec, r) -> PotentialValues:
    return spec.evaluate(r)


@dataclass(frozen=True)
class CouplingSpec:
    """Proliferation function p; bounded, nonnegative, Lipschitz on R."""

    mode: str  # "zero" | "constant" | "model"
    p0: float = 0.0
    potential: PotentialSpec | None = None

    @classmethod
    def zero(cls) -> "CouplingSpec":
        return cls(mode="zero")

    @classmethod
    def constant(cls, p0: float) -> "CouplingSpec":
        if p0 < 0:
            raise ValueError("p0 must be >= 0")
        return cls(mode="constant", p0=float(p0))

    @classmethod
    def model_derived(cls, p0: float, potential: PotentialSpec) -> "CouplingSpec":
        if p0 <= 0:
            raise ValueError("p0 must be > 0")
        return cls(mode="model", p0=float(p0), potential=potential)

    def p(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.mode == "zero":
            return np.zeros_like(r)
        if self.mode == "constant":
            return np.full_like(r, self.p0)
        if self.potential is not None and self.potential.kind == "doublewell":
            return self.p0 * np.maximum(1.0 - r * r, 0.0)
        inside = np.abs(r) <= 1.0
        out = np.zeros_like(r)
        if np.any(inside):
            fvals = self.potential.f(np.clip(r, -1.0, 1.0))
            out = np.where(inside, 2.0 * self.p0 * np.sqrt(np.maximum(fvals, 0.0)), 0.0)
        return out

    def dp(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.mode in ("zero", "constant"):
            return np.zeros_like(r)
        if self.potential is not None and self.potential.kind == "doublewell":
            return np.where(np.abs(r) < 1.0, -2.0 * self.p0 * r, 0.0)
        inside = np.abs(r) < 1.0
        rc = np.clip(r, -1.0, 1.0)
        vals = self.potential.evaluate(rc)
        sq = np.sqrt(np.maximum(vals.f, 1e-30))
        return np.where(inside, self.p0 * vals.df / sq, 0.0)

    def bound(self) -> float:
        """sup p over R (dense sampling for non-closed-form modes)."""
        if self.mode == "zero":
            return 0.0
        if self.mode == "constant":
            return self.p0
        if self.potential is not None and self.potential.kind == "doublewell":
            return self.p0
        r = np.linspace(-1.0, 1.0, 4001)
        return float(self.p(r).max())


def coupling_eval(c: CouplingSpec, r) -> np.ndarray:
    return c.p(r)


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    reasons: tuple = ()

    def __str__(self):
        if self.admissible:
            return "admissible for the vanishing-viscosity rate study"
        return "not admissible: " + "; ".join(self.reasons)


def check_rate_admissible(spec: PotentialSpec) -> AdmissibilityReport:
    """Gate for the rate study: domain R, C^2, degree-6 growth, convex B_hat."""
    reasons = []
    if spec.kind == "logarithmic":
        reasons.append("D(B_hat) != R (defined only on [-1, 1])")
        return AdmissibilityReport(False, tuple(reasons))
    if spec.kind == "doublewell":
        return AdmissibilityReport(True)
    # polynomial case
    deg_b = len(spec.b_coeffs) - 1 if spec.b_coeffs else 0
    deg_pi = len(spec.pi_coeffs) - 1 if spec.pi_coeffs else 0
    if max(deg_b, deg_pi) > MAX_RATE_DEGREE:
        reasons.append(
            f"degree exceeds growth bound |F(r)| <= C0(|r|^{MAX_RATE_DEGREE}+1)"
            f" (got degree {max(deg_b, deg_pi)})"
        )
    r = np.linspace(-10.0, 10.0, 4001)
    if spec.b_coeffs and float(spec.d2b_hat(r).min()) < -1e-12:
        reasons.append("B_hat is not convex (negative second derivative found)")
    if spec.b_coeffs and float(spec.evaluate(r).b_hat.min()) < -1e-12:
        reasons.append("B_hat is not nonnegative on the sampled range")
    if spec.pi_coeffs and float(spec.evaluate(r).pi_hat.min()) < -1e-12:
        reasons.append("pi_hat is not nonnegative on the sampled range")
    if deg_pi > 2:
        reasons.append("pi_hat' is not globally Lipschitz (degree > 2)")
    return AdmissibilityReport(not reasons, tuple(reasons))
