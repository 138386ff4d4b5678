import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from varharm.atoms import (
    Atom,
    FiniteDecomposition,
    centered_moments,
    finite_atomic_norm,
    make_atom,
    moment_degree_for,
    multi_indices,
    riesz_atom_degree,
    validate_atom,
    weighted_finite_atomic_norm,
    weighted_hardy_norm,
)
from varharm.errors import DomainError, InvariantError
from varharm.grid import Ball, Grid, GridFunction, indicator
from varharm.lebesgue import ExponentFunction, luxemburg_norm, radial_exponent
from varharm.maximal import default_bank, discrete_maximal, maximal_phi
from varharm.weights import Weight

G = Grid(1, 8.0, 1024)
P = radial_exponent(G, "bump")
ONE = Weight(GridFunction.constant(G, 1.0))


def test_degree_formulas():
    assert moment_degree_for(1, 0.6) == 0
    assert moment_degree_for(1, 0.4) == 1
    assert moment_degree_for(2, 0.6) == 1
    assert moment_degree_for(1, 1.5) == 0
    assert riesz_atom_degree(1, 0.8, 0.5) == 4
    assert multi_indices(2, 1) == [(0, 0), (1, 0), (0, 1)]


def test_degree_zero_atom_has_vanishing_mean():
    a = make_atom(Ball((0.3,), 0.5), P, 64.0, 0)
    scale = np.abs(a.values.values).max()
    assert abs(G.cell_volume * a.values.values.sum()) <= 1e-8 * scale
    assert validate_atom(a).passed


@pytest.mark.parametrize("degree", [0, 1, 2, 4])
@pytest.mark.parametrize("r", [0.125, 1.0, 3.0])
def test_constructed_atoms_validate(degree, r):
    a = make_atom(Ball((-0.2,), r), P, 64.0, degree, seed=7)
    rep = validate_atom(a)
    assert rep.passed, rep.as_dict()
    assert rep.size_slack == pytest.approx(0.9, rel=1e-6)


def test_high_order_atom_moments_vanish():
    deg = riesz_atom_degree(1, 0.8, 0.5)
    a = make_atom(Ball((0.0,), 1.0), P, 64.0, deg)
    mom = centered_moments(a)
    scale = np.sum(np.abs(a.values.values)) * G.cell_volume
    assert max(abs(m) for m in mom.values()) <= 1e-10 * scale


def test_planar_atoms_validate():
    g2 = Grid(2, 2.0, 96)
    p2 = radial_exponent(g2, "decay")
    a = make_atom(Ball((0.1, -0.2), 0.7), p2, 64.0, 1)
    assert validate_atom(a).passed
    assert len(centered_moments(a)) == 3


def test_hand_built_two_step_atom():
    g = Grid(1, 4.0, 512)
    p = ExponentFunction.constant(g, 2.0)
    ball = Ball((1.0,), 1.0)
    x = g.axis
    base = GridFunction(g, ((x >= 0) & (x < 1)).astype(float) - ((x >= 1) & (x < 2)).astype(float))
    chi = luxemburg_norm(indicator(g, ball), p).norm
    base_norm = math.sqrt(np.sum(base.values**2) * g.h)
    c = 0.9 * ball.volume**0.5 / chi / base_norm
    a = Atom(base * c, ball, 2.0, 0, p)
    assert validate_atom(a).passed


def test_validation_rejects_non_atoms():
    ball = Ball((0.0,), 1.0)
    chi = indicator(G, ball)
    raw = Atom(chi * 0.1, ball, 64.0, 0, P)
    rep = validate_atom(raw)
    assert rep.support and not rep.moments
    a = make_atom(ball, P, 64.0, 0)
    assert not validate_atom(a.scaled(2.0)).size
    leaky = Atom(a.values + indicator(G, Ball((3.0,), 0.2)) * 1e-3, ball, 64.0, 0, P)
    assert not validate_atom(leaky).support


def test_atom_construction_errors():
    with pytest.raises(DomainError):
        make_atom(Ball((0.0,), 0.01), P, 64.0, 2)
    with pytest.raises(DomainError):
        make_atom(Ball((0.0,), 1.0), P, 1.0, 0)
    with pytest.raises(InvariantError):
        Atom(GridFunction.zeros(G), Ball((0.0,), 1.0), 0.5, 0, P)


@given(seed=st.integers(0, 2**31))
def test_atoms_are_deterministic_per_seed(seed):
    b = Ball((0.5,), 0.75)
    a1 = make_atom(b, P, 64.0, 1, seed=seed)
    a2 = make_atom(b, P, 64.0, 1, seed=seed)
    np.testing.assert_array_equal(a1.values.values, a2.values.values)


def test_size_cap_for_constant_exponent():
    g = Grid(1, 4.0, 512)
    p0 = 1.5
    p = ExponentFunction.constant(g, p0)
    ball = Ball((0.0,), 1.0)  # edges fall between cell centres, so the lattice measure is exact
    a = make_atom(ball, p, 64.0, 0)
    assert a.chi_norm == pytest.approx(ball.volume ** (1 / p0), rel=1e-5)
    cap = ball.volume ** (1 / 64 - 1 / p0)
    nq = (np.sum(np.abs(a.values.values) ** 64) * g.h) ** (1 / 64)
    assert nq == pytest.approx(0.9 * cap, rel=1e-5)


# --- decompositions ---------------------------------------------------------

def _atoms(count, seed=0):
    rng = np.random.default_rng(seed)
    return [make_atom(Ball((rng.uniform(-5, 5),), rng.uniform(0.2, 1.5)), P, 64.0, 0, seed=j) for j in range(count)]


def test_single_atom_has_unit_norm():
    a = _atoms(1)[0]
    assert finite_atomic_norm(FiniteDecomposition(((1.0, a),)), P) == pytest.approx(1.0, rel=1e-6)


def test_disjoint_balls_add_in_l1():
    p1 = ExponentFunction.constant(G, 1.0)
    a = make_atom(Ball((-2.0,), 1.0), p1, 64.0, 0)
    b = make_atom(Ball((2.0,), 1.0), p1, 64.0, 0)
    assert finite_atomic_norm(FiniteDecomposition(((1.0, a), (1.0, b))), p1) == pytest.approx(2.0, rel=1e-6)


def test_norm_is_homogeneous_and_permutation_invariant(rng):
    atoms = _atoms(5)
    d = FiniteDecomposition(tuple((float(rng.uniform(0.1, 2)), a) for a in atoms))
    base = finite_atomic_norm(d, P)
    assert finite_atomic_norm(d.scaled(2.0), P) == pytest.approx(2 * base, rel=3e-8)
    perm = FiniteDecomposition(tuple(d.terms[i] for i in rng.permutation(len(d.terms))))
    assert finite_atomic_norm(perm, P) == base
    np.testing.assert_array_equal(perm.function().values, d.function().values)


def test_decomposition_validation():
    with pytest.raises(InvariantError):
        FiniteDecomposition(())
    with pytest.raises(InvariantError):
        FiniteDecomposition(((-1.0, _atoms(1)[0]),))


def test_weighted_hardy_norm_reductions(rng):
    assert weighted_hardy_norm(GridFunction.zeros(G), 0.8, ONE) == 0.0
    a = _atoms(1)[0]
    mphi = maximal_phi(a.values, default_bank(1)[0]).values
    assert weighted_hardy_norm(a.values, 1.0, ONE) == pytest.approx(np.sum(mphi) * G.h, rel=1e-12)
    with pytest.raises(DomainError):
        weighted_hardy_norm(a.values, 0.0, ONE)


def test_hardy_norm_controlled_by_dyadic_maximal():
    q0 = 0.8
    w = Weight.from_function(GridFunction(G, (1 + np.abs(G.axis)) ** -0.5))
    phi = default_bank(1)[0]
    ratios = []
    for a in _atoms(10, seed=3):
        md = discrete_maximal(a.values, phi).values
        rhs = (np.sum(md**q0 * w.array) * G.h) ** (1 / q0)
        ratios.append(weighted_hardy_norm(a.values, q0, w) / rhs)
    assert all(math.isfinite(r) and r >= 1 - 1e-12 for r in ratios)
    assert max(ratios) < 3


def test_weighted_atomic_norm_examples():
    a = _atoms(1)[0]
    d = FiniteDecomposition(((1.0, a),))
    p0 = 0.7
    expected = a.ball.volume ** (1 / p0) / a.chi_norm
    measured = np.count_nonzero(a.ball.mask(G)) * G.h
    assert weighted_finite_atomic_norm(d, P, p0, ONE) == pytest.approx(expected, rel=2 * G.h / measured)
    w_small = Weight.from_function(GridFunction(G, (1 + np.abs(G.axis)) ** -1.0))
    d3 = FiniteDecomposition(tuple((1.0, b) for b in _atoms(3)))
    assert weighted_finite_atomic_norm(d3, P, p0, w_small) <= weighted_finite_atomic_norm(d3, P, p0, ONE) + 1e-12


def test_l1_reduction_of_weighted_atomic_norm():
    p1 = ExponentFunction.constant(G, 1.0)
    a = make_atom(Ball((0.0,), 1.0), p1, 64.0, 0)
    d = FiniteDecomposition(((1.0, a),))
    assert weighted_finite_atomic_norm(d, p1, 1.0, ONE) == pytest.approx(finite_atomic_norm(d, p1), rel=1e-6)
