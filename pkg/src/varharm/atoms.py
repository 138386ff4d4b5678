"""Atoms with vanishing moments, finite atomic decompositions and weighted Hardy norms."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeedError, DomainError, IllConditionedError, InvariantError
from .grid import Ball, Grid, GridFunction, indicator, pairwise_sum
from .lebesgue import ExponentFunction, luxemburg_norm
from .maximal import TestFunctionBank, default_bank, maximal_phi
from .weights import Weight

SATURATION = 0.9
GRAM_COND_MAX = 1e12
SUPPORT_TOL = 1e-12
SIZE_RTOL = 1e-6
MOMENT_TOL = 1e-8


def moment_degree_for(n: int, p0: float) -> int:
    """``floor(n (1/p0 - 1))``, clipped at zero: the vanishing-moment order atoms need."""
    return max(int(math.floor(n * (1.0 / p0 - 1.0))), 0)


def riesz_atom_degree(n: int, q0: float, alpha: float) -> int:
    """Extra moment order making ``I_alpha a`` a molecule: ``2 floor(n(1/q0-1)) + 3 + floor(alpha) + n``."""
    return 2 * moment_degree_for(n, q0) + 3 + int(math.floor(alpha)) + n


def multi_indices(n: int, degree: int) -> list[tuple[int, ...]]:
    """All ``beta`` in ``N^n`` with ``|beta| <= degree``, graded by total order."""
    out = [b for b in itertools.product(range(degree + 1), repeat=n) if sum(b) <= degree]
    return sorted(out, key=lambda b: (sum(b), tuple(-x for x in b)))


def _scaled_coords(grid: Grid, ball: Ball, mask: np.ndarray) -> list[np.ndarray]:
    return [(c[mask] - x0) / ball.radius for c, x0 in zip(grid.coords(), ball.center)]


def _monomials(xi: list[np.ndarray], betas) -> np.ndarray:
    cols = []
    for b in betas:
        col = np.ones_like(xi[0])
        for x, e in zip(xi, b):
            col = col * x**e
        cols.append(col)
    return np.stack(cols, axis=1)


def _bump(s2: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s2)
    inside = s2 < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s2[inside]))
    return out


@dataclass(frozen=True, eq=False)
class Atom:
    """A grid function supported in ``ball`` with moments vanishing through ``moment_degree``."""

    values: GridFunction
    ball: Ball
    q_exponent: float
    moment_degree: int
    p: ExponentFunction
    gram_residual: float = 0.0

    def __post_init__(self):
        if not self.q_exponent > 1:
            raise InvariantError("atom integrability exponent must exceed 1")
        if self.moment_degree < 0:
            raise InvariantError("moment degree must be non-negative")
        if self.values.grid != self.p.grid:
            raise InvariantError("atom and exponent live on different grids")

    @property
    def grid(self) -> Grid:
        return self.values.grid

    @property
    def chi_norm(self) -> float:
        """``‖chi_B‖_{p(.)}`` for the atom's ball."""
        return luxemburg_norm(indicator(self.grid, self.ball), self.p).norm

    def scaled(self, c: float) -> "Atom":
        return Atom(self.values * c, self.ball, self.q_exponent, self.moment_degree, self.p)


def make_atom(
    ball: Ball,
    p: ExponentFunction,
    q: float,
    degree: int,
    seed: int = 42,
) -> Atom:
    """Seeded smooth bump times a random polynomial, with moments through ``degree`` projected out.

    The projection solves the bump-weighted Gram system of the monomials in
    ``(x - x0)/r`` so the correction stays smooth and supported in the ball;
    the result is rescaled so the size condition holds at 90% of its cap.
    """
    if not q > 1:
        raise DomainError("q must exceed 1")
    if degree < 0:
        raise DomainError("degree must be non-negative")
    grid = p.grid
    mask = ball.mask(grid)
    npts = int(mask.sum())
    if npts < (degree + 1) ** grid.n + 1:
        raise DomainError(f"ball holds {npts} grid points, too few for degree {degree}")
    rng = np.random.default_rng(seed)
    xi = _scaled_coords(grid, ball, mask)
    s2 = sum(x * x for x in xi)
    weight = _bump(s2)
    rich = multi_indices(grid.n, degree + 2)
    coef = rng.normal(size=len(rich))
    omega = rng.normal(size=grid.n) * 2.0
    phase = rng.uniform(0, 2 * math.pi)
    base = weight * (_monomials(xi, rich) @ coef + 0.5 * np.sin(sum(o * x for o, x in zip(omega, xi)) + phase))

    betas = multi_indices(grid.n, degree)
    V = _monomials(xi, betas)
    B = V * weight[:, None]
    G = V.T @ B
    cond = np.linalg.cond(G)
    if not cond < GRAM_COND_MAX:
        raise IllConditionedError(f"moment Gram system has condition {cond:.3g}")
    vals = base.copy()
    # two rounds of projection: the second mops up the solve's roundoff
    for _ in range(2):
        c = np.linalg.solve(G, V.T @ vals)
        vals = vals - B @ c
    resid = float(np.max(np.abs(V.T @ vals)))
    scale = np.max(np.abs(base))
    if not np.max(np.abs(vals)) > 1e-10 * scale:
        raise DegenerateSeedError("projection annihilated the seed function")

    full = np.zeros(grid.shape)
    full[mask] = vals
    f = GridFunction(grid, full)
    chi = luxemburg_norm(indicator(grid, ball), p).norm
    target = SATURATION * ball.volume ** (1.0 / q) / chi
    f = f * (target / _lq_norm(f, q))
    return Atom(f, ball, q, degree, p, gram_residual=resid / max(np.sum(np.abs(vals)), 1e-300))


def _lq_norm(f: GridFunction, q: float) -> float:
    return (f.grid.cell_volume * pairwise_sum(np.abs(f.values) ** q)) ** (1.0 / q)


def centered_moments(a: Atom, degree: int | None = None) -> dict:
    """``∫ a(x) ((x - x0)/r)^beta dx`` for ``|beta| <= degree``."""
    if degree is None:
        degree = a.moment_degree
    grid = a.grid
    full = np.ones(grid.shape, dtype=bool)
    xi = _scaled_coords(grid, a.ball, full)
    vals = a.values.values.ravel()
    out = {}
    for b in multi_indices(grid.n, degree):
        col = _monomials(xi, [b])[:, 0]
        out[b] = grid.cell_volume * pairwise_sum(vals * col)
    return out


@dataclass
class AtomReport:
    support: bool
    size: bool
    moments: bool
    size_slack: float
    support_leak: float
    moment_ratio: float
    smaller_exponents: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.support and self.size and self.moments and all(self.smaller_exponents.values())

    def as_dict(self) -> dict:
        return {
            "support": self.support,
            "size": self.size,
            "moments": self.moments,
            "size_slack": self.size_slack,
            "support_leak": self.support_leak,
            "moment_ratio": self.moment_ratio,
            "smaller_exponents": {str(k): v for k, v in self.smaller_exponents.items()},
            "passed": self.passed,
        }


def validate_atom(a: Atom) -> AtomReport:
    """Check support, size and moment conditions plus the Hölder consequence for smaller exponents.

    Moments are measured against ``((x - x0)/r)^beta``; multiplied by
    ``r^{|beta|}`` this is the tolerance model for ``x^beta`` moments about
    the centre, which is equivalent up to degree for vanishing moments.
    """
    grid = a.grid
    vals = a.values.values
    mask = a.ball.mask(grid)
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    leak = float(np.max(np.abs(vals[~mask]), initial=0.0)) / scale
    support = leak <= SUPPORT_TOL
    chi = a.chi_norm
    vol = a.ball.volume
    q = a.q_exponent
    cap = vol ** (1.0 / q) / chi
    nq = _lq_norm(a.values, q)
    size = nq <= cap * (1 + SIZE_RTOL)
    r = a.ball.radius
    mom = centered_moments(a)
    bound = MOMENT_TOL * nq * vol ** (1.0 - 1.0 / q)
    ratio = 0.0
    for b, m in mom.items():
        # scaled moments already carry the r^{|beta|} factor
        ratio = max(ratio, abs(m) / bound)
    moments = ratio <= 1.0
    rem = {}
    for s in sorted({1.5, (1.0 + q) / 2.0}):
        if s > q:
            continue
        rem[s] = bool(_lq_norm(a.values, s) <= vol ** (1.0 / s) / chi * (1 + SIZE_RTOL))
    return AtomReport(support, size, moments, nq / cap, leak, ratio, rem)


# --- decompositions -------------------------------------------------------

@dataclass(frozen=True)
class FiniteDecomposition:
    terms: tuple

    def __post_init__(self):
        terms = tuple((float(l), a) for l, a in self.terms)
        if not terms:
            raise InvariantError("a decomposition needs at least one atom")
        if any(not l > 0 for l, _ in terms):
            raise InvariantError("coefficients must be positive")
        object.__setattr__(self, "terms", terms)

    @property
    def grid(self) -> Grid:
        return self.terms[0][1].grid

    def function(self) -> GridFunction:
        acc = np.zeros(self.grid.shape)
        for lam, a in self._canonical():
            acc = acc + lam * a.values.values
        return GridFunction(self.grid, acc)

    def scaled(self, c: float) -> "FiniteDecomposition":
        return FiniteDecomposition(tuple((c * l, a) for l, a in self.terms))

    def _canonical(self):
        # a fixed summation order makes every norm permutation invariant bit for bit
        return sorted(self.terms, key=lambda t: (t[1].ball.center, t[1].ball.radius, t[0]))


def finite_atomic_norm(d: FiniteDecomposition, p: ExponentFunction) -> float:
    """``‖sum_j lambda_j chi_{B_j}/‖chi_{B_j}‖_{p(.)}‖_{p(.)}`` for this decomposition."""
    acc = np.zeros(p.grid.shape)
    for lam, a in d._canonical():
        chi = indicator(p.grid, a.ball)
        acc = acc + lam * chi.values / luxemburg_norm(chi, p).norm
    return luxemburg_norm(GridFunction(p.grid, acc), p).norm


def weighted_hardy_norm(
    f: GridFunction, p0: float, w: Weight, bank: TestFunctionBank | None = None, scales=None
) -> float:
    """``(∫ (M_phi f)^{p0} w)^{1/p0}`` with ``phi`` the bank's first profile."""
    if not p0 > 0:
        raise DomainError("p0 must be positive")
    if bank is None:
        bank = default_bank(f.grid.n)
    mf = maximal_phi(f, bank[0], scales).values
    return (f.grid.cell_volume * pairwise_sum(mf**p0 * w.array)) ** (1.0 / p0)


def weighted_finite_atomic_norm(
    d: FiniteDecomposition, p: ExponentFunction, p0: float, w: Weight
) -> float:
    """``‖sum_j lambda_j^{p0} chi_{B_j}/‖chi_{B_j}‖^{p0}‖_{L^1(w)}^{1/p0}``."""
    if not p0 > 0:
        raise DomainError("p0 must be positive")
    acc = np.zeros(p.grid.shape)
    for lam, a in d._canonical():
        chi = indicator(p.grid, a.ball)
        acc = acc + lam**p0 * chi.values / luxemburg_norm(chi, p).norm ** p0
    return (p.grid.cell_volume * pairwise_sum(acc * w.array)) ** (1.0 / p0)
