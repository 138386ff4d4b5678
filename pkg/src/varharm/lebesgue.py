"""Variable-exponent Lebesgue spaces: modulars, Luxemburg norms and exponent algebra."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DomainError, InvariantError
from .grid import Grid, GridFunction, integrate, pairwise_sum, read_csv

NORM_RTOL = 1e-8
_TINY = 1e-300


@dataclass(frozen=True, eq=False)
class ExponentFunction:
    """A pointwise exponent ``p(x)`` with cached ``p_minus`` / ``p_plus``.

    The essential infimum and supremum are taken over the grid samples.
    """

    values: GridFunction

    def __post_init__(self):
        v = self.values.values
        if not np.all(v > 0):
            raise InvariantError("exponent must be strictly positive")

    @classmethod
    def constant(cls, grid: Grid, p: float) -> "ExponentFunction":
        return cls(GridFunction.constant(grid, p))

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> "ExponentFunction":
        return cls(GridFunction.from_callable(grid, fn))

    @property
    def grid(self) -> Grid:
        return self.values.grid

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    @property
    def p_minus(self) -> float:
        return float(self.array.min())

    @property
    def p_plus(self) -> float:
        return float(self.array.max())

    @property
    def p_lower(self) -> float:
        """``min(p_minus, 1)``, the exponent of the quasi-triangle inequality."""
        return min(self.p_minus, 1.0)

    def is_constant(self) -> bool:
        return self.p_minus == self.p_plus

    def scaled(self, s: float) -> "ExponentFunction":
        """The exponent ``s * p(.)``."""
        return ExponentFunction(self.values * s)


@dataclass(frozen=True)
class LuxemburgResult:
    norm: float
    iterations: int
    bracket: tuple[float, float]

    def __float__(self):
        return self.norm


def _check_grids(f: GridFunction, p: ExponentFunction) -> None:
    if f.grid != p.grid:
        raise DomainError("function and exponent live on different grids")


def _modular_values(absf: np.ndarray, pv: np.ndarray, lam: float) -> np.ndarray:
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(absf > 0, (absf / lam) ** pv, 0.0)


def modular(f: GridFunction, p: ExponentFunction, lam: float) -> float:
    """``∫ |f(x)/lam|^{p(x)} dx`` by the midpoint rule."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    _check_grids(f, p)
    vals = _modular_values(np.abs(f.values), p.array, lam)
    return f.grid.cell_volume * pairwise_sum(vals)


def luxemburg_norm(f: GridFunction, p: ExponentFunction, rtol: float = NORM_RTOL) -> LuxemburgResult:
    """``inf{lam > 0 : modular(f, p, lam) <= 1}`` by geometric bisection.

    The returned norm is the upper end of the final bracket, so
    ``modular(f, p, norm) <= 1`` always holds.
    """
    _check_grids(f, p)
    absf = np.abs(f.values)
    sup = float(absf.max())
    if sup == 0.0:
        return LuxemburgResult(0.0, 0, (0.0, 0.0))
    g = f.grid
    dv = g.cell_volume
    pv = p.array

    def mod(lam):
        # tiny trial lambdas overflow to inf, which still reads as "too small"
        with np.errstate(over="ignore", invalid="ignore"):
            return dv * pairwise_sum(_modular_values(absf, pv, lam))

    hi = sup * (2.0 * g.L) ** (g.n / p.p_minus) + 1.0
    while mod(hi) > 1.0:
        hi *= 2.0
    lo = _TINY
    it = 0
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if mod(mid) > 1.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return LuxemburgResult(hi, it, (lo, hi))


def lp_norm(f: GridFunction, p: float) -> float:
    """Constant-exponent ``(∫|f|^p)^{1/p}``; the closed form used as an oracle."""
    return integrate(f.abs() ** p) ** (1.0 / p)


def conjugate(p: ExponentFunction) -> ExponentFunction:
    """Pointwise ``p'(x) = p(x) / (p(x) - 1)``."""
    if not p.p_minus > 1:
        raise DomainError("conjugate exponent needs p_minus > 1")
    v = p.array
    return ExponentFunction(p.values.with_values(v / (v - 1.0)))


def sobolev_shift(p: ExponentFunction, alpha: float) -> ExponentFunction:
    """The exponent ``q`` with ``1/q = 1/p - alpha/n``."""
    n = p.grid.n
    if not 0 <= alpha < n:
        raise DomainError(f"alpha must lie in [0, {n})")
    if alpha == 0:
        return p
    if p.p_plus >= n / alpha:
        raise DomainError("p_plus must stay below n/alpha")
    inv = 1.0 / p.array - alpha / n
    return ExponentFunction(p.values.with_values(1.0 / inv))


def duality_lower_bound(
    f: GridFunction, p: ExponentFunction, trials: int = 100, seed: int = 42
) -> float:
    """Largest ``∫|f g|`` over random ``g`` normalised to ``‖g‖_{p'} = 1``.

    Candidates mix the Hölder-extremal profile ``|f|^{p-1}`` with random
    multiplicative noise, so the bound approaches ``‖f‖_{p(.)}`` from below
    up to the duality constant.
    """
    if not p.p_minus > 1:
        raise DomainError("duality probe needs p_minus > 1")
    absf = np.abs(f.values)
    if absf.max() == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    pc = conjugate(p)
    best = 0.0
    base = absf ** (p.array - 1.0)
    for t in range(trials):
        if t == 0:
            cand = base
        elif t % 2:
            cand = base * np.exp(rng.normal(scale=0.5 * t / trials, size=absf.shape))
        else:
            cand = rng.random(absf.shape) * (absf > 0) + base * rng.random()
        g = f.with_values(cand)
        nrm = luxemburg_norm(g, pc).norm
        if nrm == 0:
            continue
        best = max(best, integrate(f.abs() * g) / nrm)
    return best


def log_holder_check(p: ExponentFunction, reach: float = 0.5) -> float:
    """``max |p(x)-p(y)| log(e + 1/|x-y|)`` over grid pairs with ``|x-y| <= reach``."""
    g = p.grid
    v = p.array
    kmax = int(math.floor(reach / g.h + 1e-12))
    best = 0.0
    if g.n == 1:
        for k in range(1, min(kmax, g.N - 1) + 1):
            d = np.abs(v[k:] - v[:-k]).max()
            best = max(best, float(d) * math.log(math.e + 1.0 / (k * g.h)))
        return best
    for i in range(0, min(kmax, g.N - 1) + 1):
        for j in range(-min(kmax, g.N - 1), min(kmax, g.N - 1) + 1):
            if (i == 0 and j <= 0) or (i * i + j * j) * g.h**2 > reach**2 + 1e-15:
                continue
            a = v[i:, max(j, 0): g.N + min(j, 0)]
            b = v[: g.N - i, max(-j, 0): g.N + min(-j, 0)]
            d = float(np.abs(a - b).max())
            dist = math.hypot(i, j) * g.h
            best = max(best, d * math.log(math.e + 1.0 / dist))
    return best


# --- named exponents --------------------------------------------------------

# radial profiles t -> h(t); all are log-Hölder and live in (1, 2)
RADIAL_PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "bump": lambda t: 1.3 + 0.2 * np.exp(-(t**2)),
    "decay": lambda t: 1.2 + 0.3 / (1.0 + t**2),
    "wide": lambda t: 1.25 + 0.2 * np.exp(-(t**2) / 16.0),
    "step": lambda t: np.where(t < 1.0, 1.2, 1.6),
}

# non-symmetric bases for p_e(x) = p(x) + p(-x); values near 0.6 so p_e is near 1.2
EVEN_SYM_BASES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "shifted": lambda x: 0.6 + 0.15 * np.exp(-((x - 1.0) ** 2)),
    "skew": lambda x: 0.6 + 0.1 * np.exp(-(x**2)) * (1.0 + 0.5 * np.tanh(x)),
}


def radial_exponent(grid: Grid, profile: str | Callable) -> ExponentFunction:
    fn = RADIAL_PROFILES[profile] if isinstance(profile, str) else profile
    return ExponentFunction(GridFunction(grid, fn(grid.radius())))


def even_symmetrized(grid: Grid, base: str | Callable) -> ExponentFunction:
    """``p_e(x) = p(x) + p(-x)``, invariant under ``x -> -x``."""
    fn = EVEN_SYM_BASES[base] if isinstance(base, str) else base
    x1 = grid.coords()[0]
    vals = fn(x1) + fn(-x1)
    return ExponentFunction(GridFunction(grid, vals))


def parse_exponent(spec: str, grid: Grid) -> ExponentFunction:
    """Build an exponent from ``const:<v>``, ``radial:<id>``, ``even-sym:<id>`` or a CSV path."""
    kind, _, arg = spec.partition(":")
    if kind == "const":
        return ExponentFunction.constant(grid, float(arg))
    if kind == "radial":
        if arg not in RADIAL_PROFILES:
            raise DomainError(f"unknown radial profile {arg!r}; known: {sorted(RADIAL_PROFILES)}")
        return radial_exponent(grid, arg)
    if kind == "even-sym":
        if arg not in EVEN_SYM_BASES:
            raise DomainError(f"unknown even-sym base {arg!r}; known: {sorted(EVEN_SYM_BASES)}")
        return even_symmetrized(grid, arg)
    path = Path(spec)
    if path.exists():
        vals = read_csv(path)
        if vals.grid != grid:
            raise DomainError("exponent CSV grid does not match")
        return ExponentFunction(vals)
    raise DomainError(f"cannot parse exponent spec {spec!r}")
