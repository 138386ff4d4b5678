"""Muckenhoupt and reverse Hölder constants, orthogonal actions and the Rubio de Francia iteration.

Ball-form constants range over the lattice discs of a :class:`BallFamily`
centred at grid points.  Averages inside a single ball are normalised by the
true lattice count, so every constant is at least one by Hölder's inequality
and a constant weight scores exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvariantError
from .grid import GridFunction, OrthogonalMatrix, sample
from .lebesgue import ExponentFunction, luxemburg_norm
from .maximal import (
    BallFamily,
    disk_min,
    disk_sums,
    hl_maximal,
)

FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class Weight:
    """A strictly positive grid function with lazily cached class constants."""

    values: GridFunction
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not np.all(self.values.values > 0):
            raise InvariantError("weights must be strictly positive")

    @classmethod
    def from_function(cls, f: GridFunction) -> "Weight":
        return cls(f.with_values(np.maximum(f.values, FLOOR)))

    @property
    def grid(self):
        return self.values.grid

    @property
    def array(self) -> np.ndarray:
        return self.values.values

    def power(self, r: float) -> "Weight":
        return Weight.from_function(self.values ** r)

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def a1_const(self, family: BallFamily | None = None) -> float:
        return self._cached(("a1", _fam_key(family)), lambda: a1_constant(self, family))

    def ap_const(self, p: float, family: BallFamily | None = None) -> float:
        return self._cached(("ap", p, _fam_key(family)), lambda: ap_constant(self, p, family))

    def rh_const(self, s: float, family: BallFamily | None = None) -> float:
        return self._cached(("rh", s, _fam_key(family)), lambda: rh_constant(self, s, family))


def _fam_key(family):
    return None if family is None else (family.sq_radii, family.centered)


def _family(w: Weight, family: BallFamily | None) -> BallFamily:
    if family is None:
        return BallFamily.ladder(w.grid)
    if family.grid != w.grid:
        raise DomainError("ball family built for another grid")
    return family


def _ball_means(a: np.ndarray, family: BallFamily):
    """Yield ``(v, mean)`` with ``mean(c)`` the plain average of ``a`` over ``S_v(c) ∩ box``."""
    grid = family.grid
    ones = np.ones(grid.shape)
    for v in family.sq_radii:
        cnt = disk_sums(ones, v, grid) if 0 < v else ones
        yield v, disk_sums(a, v, grid) / cnt


def a1_constant(w: Weight, family: BallFamily | None = None) -> float:
    """``max M(w)/w``, cross-checked against ``max_B avg_B w / min_B w``; the larger is returned."""
    family = _family(w, family)
    a = w.array
    m_form = float(np.max(hl_maximal(w.values, family).values / a))
    ball_form = 0.0
    for v, mean in _ball_means(a, family):
        ball_form = max(ball_form, float(np.max(mean / disk_min(a, v, family.grid))))
    return max(m_form, ball_form)


def ap_constant(w: Weight, p: float, family: BallFamily | None = None) -> float:
    """``max_B (avg_B w)(avg_B w^{-1/(p-1)})^{p-1}``."""
    if not p > 1:
        raise DomainError("A_p needs p > 1")
    family = _family(w, family)
    a = w.array
    dual = a ** (-1.0 / (p - 1.0))
    best = 0.0
    means = dict(_ball_means(dual, family))
    for v, mean in _ball_means(a, family):
        best = max(best, float(np.max(mean * means[v] ** (p - 1.0))))
    return best


def apq_constant(w: Weight, p: float, q: float, family: BallFamily | None = None) -> float:
    """``max_B (avg_B w^q)^{1/q} (avg_B w^{-p'})^{1/p'}``; ``p = 1`` uses ``1/min_B w``."""
    if not 1 <= p <= q:
        raise DomainError("A_{p,q} needs 1 <= p <= q")
    family = _family(w, family)
    a = w.array
    best = 0.0
    if p == 1:
        for v, mean in _ball_means(a**q, family):
            best = max(best, float(np.max(mean ** (1.0 / q) / disk_min(a, v, family.grid))))
        return best
    pp = p / (p - 1.0)
    means = dict(_ball_means(a ** (-pp), family))
    for v, mean in _ball_means(a**q, family):
        best = max(best, float(np.max(mean ** (1.0 / q) * means[v] ** (1.0 / pp))))
    return best


def rh_constant(w: Weight, s: float, family: BallFamily | None = None) -> float:
    """``max_B (avg_B w^s)^{1/s} / avg_B w``."""
    if not s > 1:
        raise DomainError("reverse Hölder exponent must exceed 1")
    family = _family(w, family)
    a = w.array
    plain = dict(_ball_means(a, family))
    best = 0.0
    for v, mean in _ball_means(a**s, family):
        best = max(best, float(np.max(mean ** (1.0 / s) / plain[v])))
    return best


def a1_rh_exponent(n: int, a1: float) -> float:
    """The reverse Hölder exponent ``1 + 1/(2^{n+1} [w]_{A_1})`` guaranteed for ``A_1`` weights."""
    return 1.0 + 1.0 / (2 ** (n + 1) * a1)


def act(w: Weight, A: OrthogonalMatrix) -> Weight:
    """``w_A(x) = w(A^{-1} x)``, floored to stay positive.

    Preimages leaving the box (corners under rotations) are clamped to its
    edge cells: weights are not compactly supported, so zero extension
    would fabricate vanishing values and break every class constant.
    """
    grid = w.grid
    edge = grid.L - grid.h / 2
    pre = np.clip(grid.points() @ A.matrix, -edge, edge)
    return Weight.from_function(w.values.with_values(sample(w.values, pre).reshape(grid.shape)))


# --- Rubio de Francia -----------------------------------------------------

@dataclass(frozen=True)
class RdFResult:
    Rg: Weight
    truncation_index: int
    m_norm_used: float
    tail_bound: float
    checks: dict = field(default_factory=dict)

    @property
    def flagged(self) -> bool:
        return not all(self.checks.values())


def rubio_de_francia(
    g: GridFunction,
    p_dual: ExponentFunction,
    m_norm: float,
    tol: float | None = None,
    family: BallFamily | None = None,
    a1_slack: float = 1.1,
) -> RdFResult:
    """Partial sums of ``sum_i M^i|g| / (2 m_norm)^i`` with a certified geometric tail.

    ``M`` does not increase sup norms, so after ``K`` terms the remainder is
    bounded by ``‖M^K g‖_∞ sum_{i>K} (2 m_norm)^{-i}``; summation stops once
    this falls below ``tol`` (default ``1e-8 ‖g‖_∞``).  The three majorant
    properties are then checked and recorded in ``checks``.
    """
    if not m_norm > 0.5:
        raise DomainError("m_norm must exceed 1/2 for the series to converge")
    absg = np.abs(g.values)
    gsup = float(absg.max())
    if gsup == 0:
        raise DomainError("g must not vanish identically")
    if tol is None:
        tol = 1e-8 * gsup
    family = family or BallFamily.ladder(g.grid)
    q = 1.0 / (2.0 * m_norm)
    total = absg.copy()
    term = g.with_values(absg)
    k = 0
    while True:
        tail = float(term.values.max()) * q ** (k + 1) / (1.0 - q)
        if tail < tol:
            break
        k += 1
        term = hl_maximal(term, family)
        total = total + term.values * q**k
    Rg = Weight.from_function(g.with_values(total))
    gn = luxemburg_norm(g.with_values(absg), p_dual).norm
    rn = luxemburg_norm(Rg.values, p_dual).norm
    a1 = a1_constant(Rg, family)
    checks = {
        "majorant": bool(np.all(total >= absg)),
        "dual_norm": bool(rn <= 2.0 * gn * (1 + 1e-6)),
        "a1": bool(a1 <= 2.0 * m_norm * a1_slack),
    }
    result = RdFResult(Rg, k, m_norm, tail, checks)
    Rg._cache[("a1", _fam_key(family))] = a1
    return result


def rdf_summary(res: RdFResult) -> dict:
    return {
        "truncation_index": res.truncation_index,
        "m_norm_used": res.m_norm_used,
        "tail_bound": res.tail_bound,
        "checks": res.checks,
        "flagged": res.flagged,
        "a1": next((v for k, v in res.Rg._cache.items() if k[0] == "a1"), math.nan),
    }
