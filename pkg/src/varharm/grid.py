"""Uniform cell-centred grids on a box [-L, L]^n and the functions living on them.

Every object of the toolkit is sampled on a :class:`Grid`.  Functions are
extended by zero outside the box, integrals use the midpoint rule and all
reductions go through :func:`pairwise_sum` so results do not depend on
thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import DomainError, EmptySupportError, InvariantError

ORTHO_TOL = 1e-12


def pairwise_sum(values: np.ndarray) -> float:
    """Sum with numpy's fixed pairwise tree over the C-ordered flattening."""
    return float(np.add.reduce(np.ascontiguousarray(values, dtype=float).ravel()))


@dataclass(frozen=True)
class Grid:
    """Cell-centred grid with ``N`` points per axis on ``[-L, L]^n``."""

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise DomainError(f"dimension must be 1 or 2, got {self.n}")
        if not self.L > 0:
            raise DomainError("half-width L must be positive")
        if self.N < 16:
            raise DomainError("need at least 16 points per axis")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N**self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def axis(self) -> np.ndarray:
        """1-D coordinates of the cell centres."""
        return -self.L + (np.arange(self.N) + 0.5) * self.h

    def coords(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape ``self.shape`` (``indexing='ij'``)."""
        ax = self.axis
        return tuple(np.meshgrid(*([ax] * self.n), indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``(size, n)`` in row-major order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def radius(self, center: Sequence[float] | float = 0.0) -> np.ndarray:
        """Euclidean distance of every grid point to ``center``."""
        c = np.broadcast_to(np.asarray(center, dtype=float), (self.n,))
        acc = np.zeros(self.shape)
        for xi, ci in zip(self.coords(), c):
            acc += (xi - ci) ** 2
        return np.sqrt(acc)

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.n, self.L, self.N * factor)

    def index_of(self, x: Sequence[float] | float) -> tuple[int, ...]:
        """Index of the grid cell containing ``x`` (clipped to the box)."""
        x = np.broadcast_to(np.asarray(x, dtype=float), (self.n,))
        idx = np.floor((x + self.L) / self.h).astype(int)
        return tuple(int(i) for i in np.clip(idx, 0, self.N - 1))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on a grid; the universal function representation."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.size != self.grid.size:
            raise InvariantError(
                f"expected {self.grid.size} values, got {v.size}"
            )
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise InvariantError("grid function values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "GridFunction":
        """Sample ``fn(*coords)`` at the cell centres."""
        vals = np.broadcast_to(np.asarray(fn(*grid.coords()), dtype=float), grid.shape)
        return cls(grid, vals)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(c)))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)

    def abs(self) -> "GridFunction":
        return self.with_values(np.abs(self.values))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def __add__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return self.with_values(self.values * other.values)
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def __truediv__(self, c: float):
        return self.with_values(self.values / c)

    def __pow__(self, s: float):
        return self.with_values(self.values**s)


def _same_grid(f: GridFunction, g: GridFunction) -> None:
    if f.grid != g.grid:
        raise InvariantError("grid functions live on different grids")


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball ``B(center, radius)``."""

    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "center", c)
        if not self.radius > 0:
            raise InvariantError("ball radius must be positive")

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        if self.n == 1:
            return 2.0 * self.radius
        return math.pi * self.radius**2

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)

    def mask(self, grid: Grid) -> np.ndarray:
        """Cell-centre membership ``|x_k - center| < radius``."""
        if grid.n != self.n:
            raise DomainError("ball and grid dimensions differ")
        return grid.radius(self.center) < self.radius


@dataclass(frozen=True, eq=False)
class OrthogonalMatrix:
    """An ``n x n`` matrix with ``A^T A = I`` to 1e-12."""

    matrix: np.ndarray = field()

    def __post_init__(self):
        a = np.atleast_2d(np.array(self.matrix, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise InvariantError("orthogonal matrix must be square")
        if np.max(np.abs(a.T @ a - np.eye(a.shape[0]))) > ORTHO_TOL:
            raise InvariantError("matrix is not orthogonal")
        if abs(abs(np.linalg.det(a)) - 1.0) > ORTHO_TOL:
            raise InvariantError("orthogonal matrix must have |det| = 1")
        a.flags.writeable = False
        object.__setattr__(self, "matrix", a)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def T(self) -> "OrthogonalMatrix":
        return OrthogonalMatrix(self.matrix.T)

    @classmethod
    def identity(cls, n: int) -> "OrthogonalMatrix":
        return cls(np.eye(n))

    @classmethod
    def reflection(cls, n: int) -> "OrthogonalMatrix":
        """The point reflection ``x -> -x``."""
        return cls(-np.eye(n))

    @classmethod
    def rotation(cls, theta: float) -> "OrthogonalMatrix":
        c, s = math.cos(theta), math.sin(theta)
        m = np.array([[c, -s], [s, c]])
        # exact zeros keep quarter turns lattice-preserving
        m[np.abs(m) < 1e-15] = 0.0
        return cls(m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Apply to points of shape ``(k, n)``."""
        return np.asarray(points, dtype=float) @ self.matrix.T

    def __matmul__(self, other):
        if isinstance(other, OrthogonalMatrix):
            return OrthogonalMatrix(self.matrix @ other.matrix)
        return self.matrix @ other


def indicator(grid: Grid, ball: Ball) -> GridFunction:
    """Characteristic function of ``ball`` by the cell-centre rule."""
    m = ball.mask(grid)
    if not m.any():
        raise EmptySupportError(f"{ball} contains no grid point of the box")
    return GridFunction(grid, m.astype(float))


def integrate(f: GridFunction, region: Ball | None = None) -> float:
    """Midpoint-rule integral over the box, or over ``region`` if given."""
    vals = f.values
    if region is not None:
        vals = np.where(region.mask(f.grid), vals, 0.0)
    return f.grid.cell_volume * pairwise_sum(vals)


def _sample(f: GridFunction, pts: np.ndarray) -> np.ndarray:
    g = f.grid
    idx = (pts + g.L) / g.h - 0.5
    snapped = np.round(idx)
    idx = np.where(np.abs(idx - snapped) < 1e-9, snapped, idx)
    out = ndimage.map_coordinates(
        f.values, idx.T, order=1, mode="grid-constant", cval=0.0, prefilter=False
    )
    inside = np.all(np.abs(pts) <= g.L, axis=1)
    return np.where(inside, out, 0.0)


def sample(f: GridFunction, pts: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of ``f`` at arbitrary points ``(k, n)``; zero off the box."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if pts.shape[1] != f.grid.n:
        pts = pts.reshape(-1, f.grid.n)
    return _sample(f, pts)


def pullback(f: GridFunction, A: OrthogonalMatrix) -> GridFunction:
    """The action ``f_A(x) = f(A^{-1} x)``."""
    if not isinstance(A, OrthogonalMatrix):
        A = OrthogonalMatrix(A)
    if A.n != f.grid.n:
        raise DomainError("matrix size does not match grid dimension")
    pts = f.grid.points()
    pre = pts @ A.matrix  # rows are (A^T x)^T = (A^{-1} x)^T
    return GridFunction(f.grid, _sample(f, pre).reshape(f.grid.shape))


# --- CSV interchange --------------------------------------------------------

def write_csv(f: GridFunction, path: str | Path) -> None:
    """Write ``n,L,N`` on the first line, then one value per line (row-major)."""
    g = f.grid
    with open(path, "w") as fh:
        fh.write(f"{g.n},{g.L!r},{g.N}\n")
        np.savetxt(fh, f.values.ravel(), fmt="%.17g")


def read_csv(path: str | Path) -> GridFunction:
    with open(path) as fh:
        first = fh.readline().strip()
        if first.replace(" ", "") == "n,L,N":
            first = fh.readline().strip()
        n, L, N = first.split(",")
        grid = Grid(int(n), float(L), int(N))
        vals = np.loadtxt(fh, dtype=float, ndmin=1)
    return GridFunction(grid, vals)
