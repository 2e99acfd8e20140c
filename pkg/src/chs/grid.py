"""Uniform tensor-product grids, cell-centered fields, and Neumann difference operators.

The Laplacian uses the second-order centered stencil with ghost-cell
reflection, which enforces a zero normal derivative and makes the discrete
divergence theorem exact: the cell_volume-weighted sum of the Laplacian of
any field vanishes to rounding.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg as _cg
from scipy.sparse.linalg import splu as _splu

from .errors import GridMismatchError, SolverFailure

# Above this cell count, riesz_solve switches from a cached sparse
# factorization to conjugate gradients.
DIRECT_CELL_LIMIT = 60_000


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on a d-dimensional box (d = 1, 2, 3)."""

    extents: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "extents", tuple(int(n) for n in self.extents))
        object.__setattr__(self, "lengths", tuple(float(l) for l in self.lengths))
        if not 1 <= len(self.extents) <= 3:
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(self.extents)}")
        if len(self.lengths) != len(self.extents):
            raise ValueError("extents and lengths must have the same dimension")
        if any(n < 2 for n in self.extents):
            raise ValueError(f"all extents must be >= 2, got {self.extents}")
        if any(l <= 0 for l in self.lengths):
            raise ValueError(f"all lengths must be > 0, got {self.lengths}")

    @property
    def dim(self) -> int:
        return len(self.extents)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(l / n for l, n in zip(self.lengths, self.extents))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def ncells(self) -> int:
        return int(np.prod(self.extents))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        h = self.spacing[axis]
        return (np.arange(self.extents[axis]) + 0.5) * h

    def meshgrid(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays, each shaped like a field."""
        axes = [self.centers(k) for k in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))


class Field:
    """Immutable scalar samples on a Grid, one value per cell."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float).reshape(grid.extents)
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Field is immutable")

    @classmethod
    def full(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.extents, float(value)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> "Field":
        """Sample fn(*coords) at the cell centers."""
        return cls(grid, fn(*grid.meshgrid()))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def _check(self, other: "Field"):
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, Field):
            self._check(other)
            return Field(self.grid, self.values * other.values)
        return Field(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __getstate__(self):
        return self.grid, np.array(self.values)

    def __setstate__(self, state):
        grid, values = state
        self.__init__(grid, values)

    def __repr__(self):
        return f"Field(grid={self.grid.extents}, range=[{self.values.min():g}, {self.values.max():g}])"


@dataclass(frozen=True)
class NormTriple:
    """H, V and dual (V*) norms of one field."""

    h_norm: float
    v_norm: float
    dual_norm: float


def lap_array(grid: Grid, a: np.ndarray) -> np.ndarray:
    """Neumann Laplacian applied to a shaped array (internal fast path)."""
    out = np.zeros_like(a)
    for ax, h in enumerate(grid.spacing):
        pad = [(1, 1) if k == ax else (0, 0) for k in range(grid.dim)]
        p = np.pad(a, pad, mode="edge")
        lo = tuple(slice(0, -2) if k == ax else slice(None) for k in range(grid.dim))
        hi = tuple(slice(2, None) if k == ax else slice(None) for k in range(grid.dim))
        out += (p[lo] - 2.0 * a + p[hi]) / h**2
    return out


def laplacian_neumann(u: Field) -> Field:
    """Second-order Laplacian with ghost-cell reflection (zero-flux boundary)."""
    return Field(u.grid, lap_array(u.grid, u.values))


def inner_h(u: Field, v: Field) -> float:
    """Discrete L2 pairing: cell_volume * sum(u_i v_i)."""
    u._check(v)
    return u.grid.cell_volume * float(np.dot(u.flat, v.flat))


def mean(u: Field) -> float:
    """Domain integral divided by the domain volume."""
    return u.grid.cell_volume * float(u.flat.sum()) / u.grid.volume


def integral(u: Field) -> float:
    return u.grid.cell_volume * float(u.flat.sum())


def riesz_apply(u: Field) -> Field:
    """A_h u = -Lap_h u + u; the discrete Riesz map of the V inner product."""
    return Field(u.grid, u.values - lap_array(u.grid, u.values))


def neumann_laplacian_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    """1D second-difference matrix with reflected ghost cells."""
    main = np.full(n, -2.0)
    main[0] = main[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


@functools.lru_cache(maxsize=32)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of the Neumann Laplacian on row-major flattened fields."""
    mats = [
        neumann_laplacian_matrix_1d(n, h)
        for n, h in zip(grid.extents, grid.spacing)
    ]
    out = None
    for k, m in enumerate(mats):
        eyes = [sp.identity(grid.extents[j], format="csr") for j in range(grid.dim)]
        eyes[k] = m
        term = eyes[0]
        for e in eyes[1:]:
            term = sp.kron(term, e, format="csr")
        out = term if out is None else out + term
    return out.tocsr()


@functools.lru_cache(maxsize=32)
def _riesz_lu(grid: Grid):
    a = sp.identity(grid.ncells, format="csr") - laplacian_matrix(grid)
    return _splu(a.tocsc())


def riesz_solve(f: Field, tol: float = 1e-10, method: str = "auto",
                maxiter: int | None = None) -> Field:
    """Solve A_h u = f to a relative H-norm residual of tol.

    Uses a cached sparse factorization on desk-scale grids and conjugate
    gradients beyond DIRECT_CELL_LIMIT cells.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    grid = f.grid
    if method == "auto":
        method = "direct" if grid.ncells <= DIRECT_CELL_LIMIT else "cg"
    fnorm = float(np.linalg.norm(f.flat))
    if fnorm == 0.0:
        return Field(grid, np.zeros(grid.extents))
    if method == "direct":
        x = _riesz_lu(grid).solve(f.flat)
    else:
        a = sp.identity(grid.ncells, format="csr") - laplacian_matrix(grid)
        x, info = _cg(a, f.flat, rtol=tol * 0.1, atol=0.0, maxiter=maxiter)
        if info != 0:
            res = float(np.linalg.norm(a @ x - f.flat)) / fnorm
            raise SolverFailure(
                f"conjugate-gradient iteration cap exceeded (residual {res:.3e})",
                residual=res,
            )
    u = Field(grid, x)
    res = float(np.linalg.norm(riesz_apply(u).flat - f.flat)) / fnorm
    if res > tol:
        raise SolverFailure(f"riesz_solve residual {res:.3e} > tol {tol:.3e}",
                            residual=res)
    return u


def grad_norm_sq(u: Field) -> float:
    """Operator-consistent |grad u|^2 = (-Lap_h u, u)_H; matches A_h exactly."""
    return max(0.0, -inner_h(laplacian_neumann(u), u))


def norms(u: Field, tol: float = 1e-10) -> NormTriple:
    """H, V and dual norms through the discrete Riesz operator."""
    h2 = inner_h(u, u)
    v2 = inner_h(riesz_apply(u), u)
    d2 = inner_h(u, riesz_solve(u, tol))
    return NormTriple(
        h_norm=float(np.sqrt(max(0.0, h2))),
        v_norm=float(np.sqrt(max(0.0, v2))),
        dual_norm=float(np.sqrt(max(0.0, d2))),
    )


def dual_norm(u: Field, tol: float = 1e-10) -> float:
    return float(np.sqrt(max(0.0, inner_h(u, riesz_solve(u, tol)))))


def h_norm(u: Field) -> float:
    return float(np.sqrt(max(0.0, inner_h(u, u))))


def v_norm(u: Field) -> float:
    return float(np.sqrt(max(0.0, inner_h(riesz_apply(u), u))))


def write_field(u: Field, path) -> None:
    """Snapshot format: '# grid d=<d> n=<N1,..> L=<L1,..>' then row-major values."""
    grid = u.grid
    n = ",".join(str(k) for k in grid.extents)
    l = ",".join("%.17g" % x for x in grid.lengths)
    with open(path, "w") as fh:
        fh.write(f"# grid d={grid.dim} n={n} L={l}\n")
        for v in u.flat:
            fh.write("%.17g\n" % v)


def read_field(path) -> Field:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# grid "):
            raise ValueError(f"not a field snapshot: {path}")
        parts = dict(tok.split("=", 1) for tok in header[len("# grid "):].split())
        extents = tuple(int(s) for s in parts["n"].split(","))
        lengths = tuple(float(s) for s in parts["L"].split(","))
        if len(extents) != int(parts["d"]):
            raise ValueError("snapshot header dimension mismatch")
        values = np.array([float(line) for line in fh if line.strip()])
    return Field(Grid(extents, lengths), values)
