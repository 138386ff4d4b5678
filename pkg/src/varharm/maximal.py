"""Maximal operators on grids.

Balls are lattice discs: for a grid point ``c`` and an integer ``v`` the ball
``S_v(c)`` holds the grid points ``x`` with ``|x - c|^2 <= v h^2`` (physical
radius ``sqrt(v + 1/2) h`` under the cell-centre rule).  Averages over balls
are computed with clipped prefix sums along rows, one chord of the disc at a
time, so the cost of one radius is ``O(min(v^(1/2), N) N^n)``.

The radius family is closed under doubling below the covering radius and the
normalising volume ``V(v) >= #S_v`` is inflated where the lattice count of the
doubled disc exceeds ``2^n #S_v``.  With that convention the centred and
uncentred operators satisfy ``2^{-n} M f <= Mc f <= M f`` exactly, as in the
continuum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import ndimage, signal

from .errors import DomainError
from .grid import Grid, GridFunction
from .lebesgue import ExponentFunction, luxemburg_norm

N_GRAND = 4


# --- lattice discs ----------------------------------------------------------

def _lattice_count(v: int, n: int) -> int:
    m = math.isqrt(v)
    if n == 1:
        return 2 * m + 1
    return sum(2 * math.isqrt(v - dy * dy) + 1 for dy in range(-m, m + 1))


@lru_cache(maxsize=None)
def _sums_of_two_squares(limit: int) -> np.ndarray:
    m = math.isqrt(limit)
    k = np.arange(0, m + 1)
    s = (k[:, None] ** 2 + k[None, :] ** 2).ravel()
    return np.unique(s[s <= limit])


def _cover_sq(grid: Grid) -> int:
    return grid.n * (grid.N - 1) ** 2


def _snap(grid: Grid, target_sq: float) -> int:
    """Largest attainable squared lattice radius not above ``target_sq``."""
    if grid.n == 1:
        return math.isqrt(int(math.floor(target_sq))) ** 2
    vals = _sums_of_two_squares(int(math.floor(target_sq)) + 1)
    return int(vals[vals <= target_sq + 1e-9].max())


@dataclass(frozen=True, eq=False)
class BallFamily:
    """A finite family of lattice balls used to discretise ball suprema.

    ``sq_radii`` are squared radii in units of ``h^2``; physical radii are
    ``sqrt(v + 1/2) h``.  The first member (``v = 0``) is the single cell,
    the discrete stand-in for the limit of shrinking balls.
    """

    grid: Grid
    sq_radii: tuple[int, ...]
    centered: bool = False
    volumes: dict = field(default=None, repr=False)

    def __post_init__(self):
        vs = tuple(sorted(set(int(v) for v in self.sq_radii)))
        if not vs or vs[0] < 0:
            raise DomainError("ball family needs non-negative squared radii")
        object.__setattr__(self, "sq_radii", vs)
        if self.volumes is None:
            object.__setattr__(self, "volumes", _inflated_volumes(self.grid, vs))

    @classmethod
    def ladder(
        cls,
        grid: Grid,
        ratio: float | None = None,
        centered: bool = False,
        r_max: float | None = None,
    ) -> "BallFamily":
        """Geometric radius ladder from the single cell up to the covering radius."""
        if ratio is None:
            ratio = 2 ** (1 / 8) if grid.n == 1 else math.sqrt(2)
        if not 1 < ratio <= math.sqrt(2) + 1e-12:
            raise DomainError("ladder ratio must lie in (1, sqrt 2]")
        cover = _cover_sq(grid)
        top = cover if r_max is None else min(cover, _snap(grid, (r_max / grid.h) ** 2))
        vs = [0, 1]
        while vs[-1] < top:
            cur = math.sqrt(vs[-1])
            nxt = _snap(grid, min((cur * ratio) ** 2, top))
            if nxt <= vs[-1]:
                nxt = _next_attainable(grid, vs[-1])
            vs.append(min(nxt, top) if nxt < top else top)
        closed = set(vs)
        for v in vs:
            w = v
            while 0 < w < cover:
                w = min(4 * w, cover)
                closed.add(w)
        return cls(grid, tuple(sorted(closed)), centered)

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(np.asarray(self.sq_radii, dtype=float) + 0.5) * self.grid.h

    @property
    def r_min(self) -> float:
        return float(self.radii[0])

    @property
    def r_max(self) -> float:
        return float(self.radii[-1])

    def volume(self, v: int) -> float:
        """Normalising measure of ``S_v`` (``h^n`` times the inflated count)."""
        return self.volumes[v] * self.grid.cell_volume

    def as_centered(self) -> "BallFamily":
        return BallFamily(self.grid, self.sq_radii, True, self.volumes)

    def as_uncentered(self) -> "BallFamily":
        return BallFamily(self.grid, self.sq_radii, False, self.volumes)


def _next_attainable(grid: Grid, v: int) -> int:
    if grid.n == 1:
        return (math.isqrt(v) + 1) ** 2
    vals = _sums_of_two_squares(v + 2 * math.isqrt(v) + 2)
    return int(vals[vals > v].min())


def _inflated_volumes(grid: Grid, vs: Sequence[int]) -> dict:
    cover = _cover_sq(grid)
    vol = {}
    factor = 2**grid.n
    for v in sorted(vs, reverse=True):
        c = _lattice_count(v, grid.n)
        if v == 0 or v >= cover:
            vol[v] = float(c)
            continue
        partner = min(4 * v, cover)
        pv = vol.get(partner)
        if pv is None:
            pv = float(_lattice_count(partner, grid.n))
        vol[v] = max(float(c), pv / factor)
    return vol


def _chords(v: int, N: int, n: int) -> list[tuple[int, int]]:
    m = math.isqrt(v)
    if n == 1:
        return [(0, min(m, N - 1))]
    top = min(m, N - 1)
    return [(dy, min(math.isqrt(v - dy * dy), N - 1)) for dy in range(-top, top + 1)]


def _as_rows(a: np.ndarray) -> np.ndarray:
    return a.reshape(1, -1) if a.ndim == 1 else a


def disk_sums(a: np.ndarray, v: int, grid: Grid) -> np.ndarray:
    """``sum_{y in S_v(x)} a(y)`` at every grid point, zero extension off the box."""
    rows = _as_rows(np.asarray(a, dtype=float))
    N = grid.N
    if v == 0:
        return np.array(a, dtype=float)
    if v >= _cover_sq(grid):
        return np.full(a.shape, float(rows.sum()))
    C = np.zeros((rows.shape[0], N + 1))
    np.cumsum(rows, axis=1, out=C[:, 1:])
    idx = np.arange(N)
    out = np.zeros_like(rows)
    cache: dict[int, np.ndarray] = {}
    for dy, w in _chords(v, N, grid.n):
        rs = cache.get(w)
        if rs is None:
            rs = C[:, np.minimum(idx + w + 1, N)] - C[:, np.maximum(idx - w, 0)]
            cache[w] = rs
        _accumulate(out, rs, dy, np.add)
    return out.reshape(a.shape)


def disk_max(a: np.ndarray, v: int, grid: Grid) -> np.ndarray:
    """``max_{c in S_v(x)} a(c)`` over grid points ``c`` of the box."""
    rows = _as_rows(np.asarray(a, dtype=float))
    if v == 0:
        return np.array(a, dtype=float)
    if v >= _cover_sq(grid):
        return np.full(a.shape, float(rows.max()))
    out = np.full_like(rows, -np.inf)
    cache: dict[int, np.ndarray] = {}
    for dy, w in _chords(v, grid.N, grid.n):
        rm = cache.get(w)
        if rm is None:
            rm = ndimage.maximum_filter1d(rows, size=2 * w + 1, axis=1, mode="constant", cval=-np.inf)
            cache[w] = rm
        _accumulate(out, rm, dy, np.maximum)
    return out.reshape(a.shape)


def disk_min(a: np.ndarray, v: int, grid: Grid) -> np.ndarray:
    return -disk_max(-np.asarray(a, dtype=float), v, grid)


def _accumulate(out: np.ndarray, rs: np.ndarray, dy: int, op) -> None:
    # out[y] <- op(out[y], rs[y + dy]) where both rows exist
    N = out.shape[0]
    if dy >= 0:
        op(out[: N - dy], rs[dy:], out=out[: N - dy])
    else:
        op(out[-dy:], rs[: N + dy], out=out[-dy:])


def ball_averages(f: np.ndarray, family: BallFamily) -> Iterable[tuple[int, np.ndarray]]:
    """Yield ``(v, avg)`` with ``avg(c)`` the average of ``f`` over ``S_v(c)``."""
    for v in family.sq_radii:
        yield v, disk_sums(f, v, family.grid) / family.volumes[v]


# --- Hardy-Littlewood type operators ----------------------------------------

def _default_family(f: GridFunction, family: BallFamily | None) -> BallFamily:
    if family is None:
        return BallFamily.ladder(f.grid)
    if family.grid != f.grid:
        raise DomainError("ball family built for another grid")
    return family


def fractional_maximal(
    f: GridFunction, alpha: float, family: BallFamily | None = None
) -> GridFunction:
    """``sup_{B ∋ x} |B|^{alpha/n - 1} ∫_B |f|`` over the family balls.

    ``alpha = 0`` is the Hardy-Littlewood operator itself (same arithmetic).
    """
    n = f.grid.n
    if not 0 <= alpha < n:
        raise DomainError(f"alpha must lie in [0, {n})")
    family = _default_family(f, family)
    absf = np.abs(f.values)
    out = np.zeros_like(absf)
    for v, avg in ball_averages(absf, family):
        val = avg * family.volume(v) ** (alpha / n)
        if not family.centered:
            val = disk_max(val, v, family.grid)
        np.maximum(out, val, out=out)
    return f.with_values(out)


def hl_maximal(f: GridFunction, family: BallFamily | None = None) -> GridFunction:
    """Uncentred (or, for a centred family, centred) Hardy-Littlewood maximal function."""
    return fractional_maximal(f, 0.0, family)


def centered_maximal(f: GridFunction, family: BallFamily | None = None) -> GridFunction:
    family = _default_family(f, family)
    return hl_maximal(f, family.as_centered())


# --- smooth test functions ---------------------------------------------------

def _bump(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    m = s < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2))
    return out


def _norm(*xs: np.ndarray) -> np.ndarray:
    return np.sqrt(sum(x**2 for x in xs))


_PROFILE_SHAPES: dict[str, tuple[Callable[..., np.ndarray], float]] = {
    # name: (function of coordinate arrays, support radius)
    "gauss": (lambda *x: np.where(_norm(*x) < math.sqrt(-math.log(1e-12)), np.exp(-(_norm(*x) ** 2)), 0.0),
              math.sqrt(-math.log(1e-12))),
    "poly-narrow": (lambda *x: np.clip(1.0 - _norm(*x) ** 2, 0.0, None) ** 6, 1.0),
    "poly-wide": (lambda *x: np.clip(1.0 - _norm(*x) ** 2 / 4.0, 0.0, None) ** 6, 2.0),
    "odd-bump": (lambda *x: _bump(_norm(*x)) * (1.0 + 0.5 * x[0]), 1.0),
    "annular": (lambda *x: _bump(np.abs(_norm(*x) - 1.0) / 0.5), 1.5),
}


@dataclass(frozen=True, eq=False)
class Profile:
    """A compactly supported test function normalised into the Schwartz unit ball."""

    name: str
    shape: Callable[..., np.ndarray]
    support: float
    n: int
    scale: float
    integral: float
    certificate: float

    def __call__(self, *x: np.ndarray) -> np.ndarray:
        return self.scale * self.shape(*x)


def seminorm_certificate(shape: Callable, support: float, n: int, order: int = N_GRAND,
                         points: int | None = None) -> float:
    """Numerical ``max sup |x^a d^b phi|`` over ``|a|, |b| <= order``.

    Derivatives are repeated second-order central differences on a fine grid.
    """
    if points is None:
        points = 4001 if n == 1 else 241
    ax = np.linspace(-support * 1.05, support * 1.05, points)
    d = ax[1] - ax[0]
    xs = np.meshgrid(*([ax] * n), indexing="ij")
    phi = shape(*xs)
    best = 0.0
    for b in _multi_indices(n, order):
        der = phi
        for axis, k in enumerate(b):
            for _ in range(k):
                der = np.gradient(der, d, axis=axis)
        for a in _multi_indices(n, order):
            mono = np.ones_like(der)
            for axis, k in enumerate(a):
                mono = mono * xs[axis] ** k
            best = max(best, float(np.max(np.abs(mono * der))))
    return best


def _multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    if n == 1:
        return [(k,) for k in range(order + 1)]
    return [(i, j) for i in range(order + 1) for j in range(order + 1 - i)]


def _profile_integral(shape: Callable, support: float, n: int) -> float:
    pts = 4001 if n == 1 else 801
    ax = np.linspace(-support, support, pts)
    d = ax[1] - ax[0]
    xs = np.meshgrid(*([ax] * n), indexing="ij")
    return float(shape(*xs).sum() * d**n)


@dataclass(frozen=True)
class TestFunctionBank:
    """Finite stand-in for the unit ball of the Schwartz seminorms of order ``N_GRAND``."""

    __test__ = False  # not a pytest class

    profiles: tuple[Profile, ...]

    def __post_init__(self):
        if not self.profiles:
            raise DomainError("test function bank must be non-empty")
        for p in self.profiles:
            if p.integral == 0:
                raise DomainError(f"profile {p.name} has zero integral")

    def __iter__(self):
        return iter(self.profiles)

    def __len__(self):
        return len(self.profiles)

    def __getitem__(self, i):
        return self.profiles[i]


@lru_cache(maxsize=None)
def default_bank(n: int) -> TestFunctionBank:
    """The five fixed profiles, each divided by its seminorm certificate."""
    profs = []
    for name, (shape, support) in _PROFILE_SHAPES.items():
        cert = seminorm_certificate(shape, support, n)
        scale = 1.0 / (cert * 1.01)
        integral = scale * _profile_integral(shape, support, n)
        profs.append(Profile(name, shape, support, n, scale, integral, cert * scale))
    return TestFunctionBank(tuple(profs))


def _kernel(profile: Profile, t: float, grid: Grid) -> np.ndarray:
    """Samples of ``t^{-n} phi(x/t)`` on the lattice offsets, times ``h^n``."""
    K = min(int(math.ceil(profile.support * t / grid.h)), grid.N - 1)
    off = np.arange(-K, K + 1) * grid.h
    xs = np.meshgrid(*([off] * grid.n), indexing="ij")
    vals = profile(*[x / t for x in xs]) * t ** (-grid.n)
    vals[np.abs(vals) < 1e-12 * np.abs(vals).max()] = 0.0
    return vals * grid.cell_volume


def smooth(f: GridFunction, profile: Profile, t: float) -> np.ndarray:
    """``(t^{-n} phi(./t) * f)`` on the grid (FFT linear convolution)."""
    ker = _kernel(profile, t, f.grid)
    return signal.fftconvolve(f.values, ker, mode="same")


def default_scales(grid: Grid, ratio: float = math.sqrt(2)) -> np.ndarray:
    """Scale ladder containing every dyadic ``2^{-j}`` between ``2h`` and ``2L``."""
    lo, hi = 2.0 * grid.h, 2.0 * grid.L
    k = math.log2(ratio)
    e = np.arange(math.ceil(math.log2(lo) / k - 1e-9), math.floor(math.log2(hi) / k + 1e-9) + 1)
    ex = e * k
    # snap integer exponents so every dyadic scale is reproduced bit for bit
    ex = np.where(np.abs(ex - np.round(ex)) < 1e-9, np.round(ex), ex)
    return 2.0**ex


def default_j_range(grid: Grid) -> tuple[int, int]:
    """Dyadic exponents ``j`` with ``2h <= 2^{-j} <= 2L``."""
    return (-math.floor(math.log2(2.0 * grid.L)), math.floor(-math.log2(2.0 * grid.h)))


def maximal_phi(f: GridFunction, profile: Profile, scales: Sequence[float] | None = None) -> GridFunction:
    """``sup_t |phi_t * f|`` over a scale ladder."""
    if scales is None:
        scales = default_scales(f.grid)
    out = np.zeros(f.grid.shape)
    for t in scales:
        np.maximum(out, np.abs(smooth(f, profile, t)), out=out)
    return f.with_values(out)


def discrete_maximal(
    f: GridFunction, phi: Profile, j_range: tuple[int, int] | None = None
) -> GridFunction:
    """``sup_j |phi^j * f|`` with ``phi^j(x) = 2^{jn} phi(2^j x)`` for ``j`` in the closed range."""
    if phi.integral == 0:
        raise DomainError("profile must have non-zero integral")
    if j_range is None:
        j_range = default_j_range(f.grid)
    lo, hi = j_range
    if hi < lo:
        raise DomainError("empty dyadic range")
    return maximal_phi(f, phi, [2.0 ** (-j) for j in range(lo, hi + 1)])


def grand_maximal(
    f: GridFunction,
    bank: TestFunctionBank | None = None,
    scales: Sequence[float] | None = None,
) -> GridFunction:
    """Bank-relative lower approximation of the grand maximal function.

    The supremum runs over the bank profiles and the scale ladder only, so
    the result is bounded above by the true grand maximal function.
    """
    if bank is None:
        bank = default_bank(f.grid.n)
    if scales is None:
        scales = default_scales(f.grid)
    out = np.zeros(f.grid.shape)
    for prof in bank:
        np.maximum(out, maximal_phi(f, prof, scales).values, out=out)
    return f.with_values(out)


# --- operator norm estimation -----------------------------------------------

def random_test_function(grid: Grid, rng: np.random.Generator, parts: int | None = None) -> GridFunction:
    """Sum of random indicators, bumps and truncated power spikes inside the box."""
    if parts is None:
        parts = int(rng.integers(1, 5))
    L = grid.L
    acc = np.zeros(grid.shape)
    for _ in range(parts):
        c = rng.uniform(-0.7 * L, 0.7 * L, size=grid.n)
        r = float(np.exp(rng.uniform(math.log(4 * grid.h), math.log(0.3 * L))))
        d = grid.radius(c)
        kind = rng.integers(0, 3)
        amp = rng.uniform(0.2, 1.0)
        if kind == 0:
            acc += amp * (d < r)
        elif kind == 1:
            acc += amp * _bump(d / r)
        else:
            gamma = rng.uniform(0.1, 0.4) * grid.n
            acc += amp * (d < r) * ((d + grid.h) / r) ** (-gamma)
    if not acc.any():
        acc[grid.index_of(np.zeros(grid.n))] = 1.0
    return GridFunction(grid, acc)


def estimate_operator_norm(
    p: ExponentFunction,
    trials: int = 64,
    seed: int = 42,
    family: BallFamily | None = None,
) -> float:
    """``max ‖Mf‖_{p(.)} / ‖f‖_{p(.)}`` over seeded random test functions."""
    if not p.p_minus > 1:
        raise DomainError("maximal operator norm needs p_minus > 1")
    rng = np.random.default_rng(seed)
    family = family or BallFamily.ladder(p.grid)
    best = 0.0
    for _ in range(trials):
        f = random_test_function(p.grid, rng)
        ratio = luxemburg_norm(hl_maximal(f, family), p).norm / luxemburg_norm(f, p).norm
        best = max(best, ratio)
    return best
