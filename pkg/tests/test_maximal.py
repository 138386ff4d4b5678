import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varharm.errors import DomainError
from varharm.grid import Ball, Grid, GridFunction, indicator
from varharm.lebesgue import ExponentFunction, luxemburg_norm
from varharm.maximal import (
    BallFamily,
    TestFunctionBank,
    centered_maximal,
    default_bank,
    default_scales,
    discrete_maximal,
    estimate_operator_norm,
    fractional_maximal,
    grand_maximal,
    hl_maximal,
    maximal_phi,
    random_test_function,
    seminorm_certificate,
)

G1 = Grid(1, 8.0, 512)
G2 = Grid(2, 4.0, 48)


def test_uncentred_maximal_of_unit_interval():
    g = Grid(1, 8.0, 1024)
    f = GridFunction.from_callable(g, lambda x: ((x >= 0) & (x <= 1)).astype(float))
    Mf = hl_maximal(f).values
    assert Mf[g.index_of(2.0)] == pytest.approx(0.5, rel=0.1)


@pytest.mark.parametrize("grid", [G1, G2])
def test_constant_is_fixed_in_the_interior(grid):
    f = GridFunction.constant(grid, 3.0)
    inner = grid.radius() < grid.L / 4
    for op in (hl_maximal, centered_maximal):
        Mf = op(f).values
        assert np.max(np.abs(Mf[inner] - 3.0)) <= 3.0 * grid.h
        assert np.all(Mf <= 3.0 + 1e-12)


@given(seed=st.integers(0, 10_000), n=st.sampled_from([1, 2]))
def test_sandwich_and_domination(seed, n):
    grid = G1 if n == 1 else G2
    f = random_test_function(grid, np.random.default_rng(seed))
    fam = BallFamily.ladder(grid)
    M = hl_maximal(f, fam).values
    Mc = centered_maximal(f, fam).values
    tol = 1e-12 * M.max()
    assert np.all(M / 2**n <= Mc + tol)
    assert np.all(Mc <= M + tol)
    assert np.all(M >= np.abs(f.values) - tol)
    assert np.all(np.isfinite(M)) and np.all(M >= 0)


@given(seed=st.integers(0, 10_000))
def test_sublinear(seed):
    rng = np.random.default_rng(seed)
    f, g = random_test_function(G1, rng), random_test_function(G1, rng)
    fam = BallFamily.ladder(G1)
    lhs = hl_maximal(f + g, fam).values
    rhs = hl_maximal(f, fam).values + hl_maximal(g, fam).values
    assert np.all(lhs <= rhs + 1e-12 * rhs.max())


def test_spike_decays_like_inverse_distance():
    g = Grid(1, 8.0, 1024)
    vals = np.zeros(g.shape)
    vals[g.index_of(0.0)] = 1.0
    Mc = centered_maximal(GridFunction(g, vals)).values
    x = g.axis
    sel = (x > 0.5) & (x < 6)
    slope = np.polyfit(np.log(x[sel]), np.log(Mc[sel]), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.1)


def test_fractional_reduces_to_hl(rng):
    f = random_test_function(G1, rng)
    fam = BallFamily.ladder(G1)
    np.testing.assert_array_equal(fractional_maximal(f, 0.0, fam).values, hl_maximal(f, fam).values)
    with pytest.raises(DomainError):
        fractional_maximal(f, 1.0, fam)


@pytest.mark.parametrize("r", [0.25, 1.0, 2.0])
def test_fractional_on_ball_dominates_its_own_term(r):
    g = Grid(1, 8.0, 1024)
    ball = Ball((0.0,), r)
    chi = indicator(g, ball)
    alpha = 0.5
    Ma = fractional_maximal(chi, alpha, BallFamily.ladder(g)).values
    inside = ball.mask(g)
    assert np.all(Ma[inside] >= ball.volume ** alpha * (1 - 0.05))


def test_fractional_power_bound_on_balls():
    # |B|^{a/n} chi_B <= (M_{a p0/2} chi_B)^{2/p0} on the grid
    g = Grid(1, 8.0, 1024)
    alpha, p0 = 0.5, 0.6
    fam = BallFamily.ladder(g)
    for r in (0.125, 0.5, 2.0):
        ball = Ball((0.3,), r)
        chi = indicator(g, ball)
        rhs = fractional_maximal(chi, alpha * p0 / 2, fam).values ** (2 / p0)
        lhs = ball.volume**alpha * chi.values
        assert np.all(lhs <= rhs * (1 + 0.05))


def test_bank_profiles_are_certified():
    for n in (1, 2):
        bank = default_bank(n)
        assert len(bank) == 5
        for prof in bank:
            assert prof.certificate <= 1.0
            assert prof.integral != 0
    with pytest.raises(DomainError):
        TestFunctionBank(())


def test_certificate_of_gaussian_like_shape():
    cert = seminorm_certificate(lambda x: np.exp(-(x**2)), 6.0, 1, order=0)
    assert cert == pytest.approx(1.0, abs=1e-6)


def test_smoothing_a_constant(rng):
    f = GridFunction.constant(G1, 1.0)
    phi = default_bank(1)[0]
    scales = [s for s in default_scales(G1) if s <= 1.0]
    Mphi = maximal_phi(f, phi, scales).values
    inner = np.abs(G1.axis) < 4
    np.testing.assert_allclose(Mphi[inner], abs(phi.integral), rtol=1e-6)


@given(seed=st.integers(0, 10_000))
def test_dyadic_sup_is_a_subset_sup(seed):
    f = random_test_function(G1, np.random.default_rng(seed))
    bank = default_bank(1)
    md = discrete_maximal(f, bank[0]).values
    mphi = maximal_phi(f, bank[0]).values
    gm = grand_maximal(f, bank).values
    assert np.all(md <= mphi + 1e-14)
    assert np.all(mphi <= gm + 1e-14)


def test_zero_in_zero_out():
    z = GridFunction.zeros(G1)
    assert not grand_maximal(z).values.any()
    assert not hl_maximal(z).values.any()


def _grand_vs_dyadic_constant(grid, seed, theta=0.7):
    rng = np.random.default_rng(seed)
    fam = BallFamily.ladder(grid)
    phi = default_bank(grid.n)[0]
    best = 0.0
    for _ in range(20):
        f = random_test_function(grid, rng)
        gm = grand_maximal(f).values
        md = discrete_maximal(f, phi)
        rhs = hl_maximal(md ** theta, fam).values ** (1 / theta)
        best = max(best, float(np.max(gm / np.maximum(rhs, 1e-300))))
    return best


def test_grand_maximal_controlled_by_dyadic_maximal():
    c1 = _grand_vs_dyadic_constant(Grid(1, 8.0, 256), 42)
    c2 = _grand_vs_dyadic_constant(Grid(1, 8.0, 512), 42)
    assert math.isfinite(c1) and math.isfinite(c2)
    assert abs(c2 - c1) / c1 < 0.25


def test_single_profile_and_grand_norms_are_comparable(rng):
    p = ExponentFunction.constant(G1, 1.5)
    bank = default_bank(1)
    ratios = []
    for _ in range(20):
        f = random_test_function(G1, rng)
        ratios.append(luxemburg_norm(maximal_phi(f, bank[0]), p).norm / luxemburg_norm(grand_maximal(f, bank), p).norm)
    ratios = np.array(ratios)
    assert np.all(ratios <= 1 + 1e-12)
    assert ratios.min() > 0.1


def test_operator_norm_examples():
    g = Grid(1, 8.0, 512)
    p = ExponentFunction.constant(g, 2.0)
    chi = indicator(g, Ball((0.0,), 1.0))
    assert luxemburg_norm(hl_maximal(chi), p).norm >= luxemburg_norm(chi, p).norm
    est = estimate_operator_norm(p, trials=16)
    assert 1.0 <= est < 10 * 2.0
    with pytest.raises(DomainError):
        estimate_operator_norm(ExponentFunction.constant(g, 1.0))


def test_norm_ratio_is_dilation_invariant_for_constant_exponent():
    g = Grid(1, 32.0, 4096)
    p = ExponentFunction.constant(g, 2.0)
    fam = BallFamily.ladder(g)

    def ratio(lam):
        f = GridFunction.from_callable(g, lambda x: np.exp(-((lam * x) ** 2)) * (1 + np.sin(3 * lam * x)))
        return luxemburg_norm(hl_maximal(f, fam), p).norm / luxemburg_norm(f, p).norm

    base = ratio(1.0)
    for lam in (0.5, 2.0):
        assert ratio(lam) == pytest.approx(base, rel=0.05)


def test_family_rejects_foreign_grid(rng):
    f = random_test_function(G1, rng)
    with pytest.raises(DomainError):
        hl_maximal(f, BallFamily.ladder(Grid(1, 8.0, 256)))
    with pytest.raises(DomainError):
        BallFamily.ladder(G1, ratio=2.0)
