from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from conftest import random_problem, rel, scalar_problem
from hypothesis import given, settings
from hypothesis import strategies as st

from nare_radi import oracle as orc
from nare_radi.exceptions import (
    AssumptionViolated,
    NoSplitting,
    PoleHit,
    SingularShift,
)
from nare_radi.generators import TransportParams, gen_transport
from nare_radi.problem import NareProblem, residual_dense, residual_scale

ROOT = 2.0 + np.sqrt(3.0)


# -- Cayley transforms and rational functions ----------------------------------------


def test_cayley_small_cases():
    np.testing.assert_allclose(orc.cayley([[0.0]], 1, 1), [[1.0]])
    np.testing.assert_allclose(orc.cayley(np.eye(3), 1, 3), np.eye(3))
    np.testing.assert_allclose(orc.cayley([[-2.0]], -0.5, -0.5), [[-0.6]])
    with pytest.raises(SingularShift):
        orc.cayley([[1.0]], -1.0, 0.0)


def test_rational_values():
    assert orc.rational_value([(1, 1)], 0, 0, 0.3) == 1
    assert orc.rational_value([(1, 1)], 1, 1, 0.0) == 1
    lam = 1j
    want = (2 - lam) / (lam + 1) * (4 - lam) / (lam + 3)
    assert orc.rational_value([(1, 2), (3, 4)], 2, 2, lam) == pytest.approx(want)
    with pytest.raises(PoleHit):
        orc.rational_value([(1, 2)], 1, 1, -1.0)


def test_omega_and_j():
    np.testing.assert_array_equal(np.diag(orc.omega_matrix([(1, 1), (2, 3)])), [5, 2])
    np.testing.assert_array_equal(orc.j_matrix(2), np.diag([1, -1]))


# -- coefficients and the fixed-point iteration -----------------------------------------


@pytest.mark.parametrize("shift, want", [
    ((1, 1), (-1 / 4, -1 / 4, 1 / 4, 1 / 4)),
    ((-0.5, -0.5), (-11 / 5, -11 / 5, -4 / 5, -4 / 5)),
])
def test_coefficients_scalar(scalar, shift, want):
    co = orc.cayley_coefficients(scalar, shift)
    got = [float(np.real(x[0, 0])) for x in (co.E0, co.F0, co.G0, co.H0)]
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_coefficients_assumption(scalar):
    with pytest.raises(AssumptionViolated):
        orc.cayley_coefficients(scalar, (-1, -1))


def test_lowrank_forms_agree(rng):
    pb = random_problem(rng, 6, 5, 2, 3)
    for shift in [(-2.0, -3.0), (-1.5 + 0.5j, -2.0 - 0.2j)]:
        co = orc.cayley_coefficients(pb, shift)
        for name in ("E0", "F0", "G0", "H0"):
            assert rel(getattr(co, f"{name}_lowrank"), getattr(co, name)) < 1e-12


def test_fixed_point_hand_values(scalar):
    xs = [float(x[0, 0]) for x in orc.fixed_point_run(scalar, [(1, 1)] * 3, 3)]
    np.testing.assert_allclose(xs, [1 / 4, 4 / 15, 15 / 56], rtol=1e-14)
    xs = [float(x[0, 0]) for x in orc.fixed_point_run(scalar, [(-0.5, -0.5)] * 2, 2)]
    np.testing.assert_allclose(xs, [-0.8, -0.8 + 2.2 * 2.2 * -0.8 / (1 - 0.64)], rtol=1e-14)


def test_fixed_point_from_solution(scalar):
    r = np.sqrt(ROOT)
    xs = orc.fixed_point_run(scalar, [(-0.5, -0.5), (-1.0, -3.0), (-3.0, -0.5)], 3,
                             X0_factors=(np.array([[r]]), np.array([[r]])))
    for x in xs:
        assert abs(x[0, 0] - ROOT) < 1e-12


def test_ndare_holds_at_solution(rng):
    pb = random_problem(rng, 5, 4, 2, 2, coupling=0.6)
    star = orc.schur_stabilizing_solution(pb)
    for shift in [(-1.0, -2.0), (-3.0 + 1j, -0.5)]:
        res = orc.ndare_residual(pb, star.X_star, shift)
        assert np.abs(res).max() <= 1e-10 * max(1.0, np.abs(star.X_star).max())


# -- Toeplitz closed forms ------------------------------------------------------------------


def test_toeplitz_scalar_blocks(scalar):
    tf = orc.toeplitz_factors(scalar, [(1, 1)], 1)
    for blk, want in ((tf.UA, 1 / 3), (tf.VD, 2 / 3), (tf.TA, 1 / 3), (tf.TD, 1 / 3)):
        np.testing.assert_allclose(blk, [[want]], rtol=1e-14)
    tf2 = orc.toeplitz_factors(scalar, [(1, 1)] * 2, 2)
    np.testing.assert_allclose(tf2.UA, [[1 / 3, -1 / 9]], rtol=1e-14)


def test_closed_form_scalar(scalar):
    assert orc.closed_form_solution(scalar, [(1, 1)] * 2, 2)[0, 0] == pytest.approx(4 / 15)
    co = orc.cayley_coefficients(scalar, (1, 1))
    np.testing.assert_allclose(orc.closed_form_solution(scalar, [(1, 1)], 1), co.H0)


def test_closed_form_with_initial_guess(rng):
    pb = random_problem(rng, 4, 3, 1, 2)
    G = (0.1 * rng.standard_normal((4, 2)), 0.1 * rng.standard_normal((2, 3)))
    sh = [(-2.0, -3.0), (-4.0, -1.5), (-2.5, -2.5)]
    Xf = orc.fixed_point_run(pb, sh, 3, X0_factors=G)[-1]
    Xc = orc.closed_form_solution(pb, sh, 3, X0_factors=G)
    assert rel(Xc, Xf) < 1e-12


def test_residual_factors_scalar(scalar):
    L, R = orc.residual_factors_closed(scalar, [(1, 1)], 1)
    assert L[0, 0] == pytest.approx(0.25) and R[0, 0] == pytest.approx(0.25)
    L0, R0 = orc.residual_factors_closed(scalar, [(1, 1)], 0)
    np.testing.assert_array_equal(L0, scalar.LB)
    np.testing.assert_array_equal(R0, scalar.RB)


def test_residual_factors_random(rng):
    pb = random_problem(rng, 5, 4, 2, 1)
    sh = [(-3.0, -2.0), (-5.0, -4.0)]
    X2 = orc.fixed_point_run(pb, sh, 2)[-1]
    L, R = orc.residual_factors_closed(pb, sh, 2)
    Rd, nrm = residual_dense(pb, X2)
    assert np.linalg.norm(L @ R - Rd) <= 1e-12 * max(nrm, residual_scale(pb, X2))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.integers(1, 6))
def test_closed_form_property(seed, t):
    rng = np.random.default_rng(seed)
    m, n = rng.integers(1, 7, size=2)
    p, q = rng.integers(1, 3, size=2)
    pb = random_problem(rng, int(m), int(n), int(p), int(q))
    sh = [(rng.uniform(-6, -1), rng.uniform(-6, -1)) for _ in range(t)]
    Xf = orc.fixed_point_run(pb, sh, t)[-1]
    assert rel(orc.closed_form_solution(pb, sh, t), Xf) < 1e-10


def test_closed_form_complex_conjugate_pairs(rng):
    pb = random_problem(rng, 4, 4, 1, 1)
    a, b = -1.5 + 0.7j, -2.0 - 0.4j
    sh = [(a, b), (np.conj(a), np.conj(b))]
    Xf = orc.fixed_point_run(pb, sh, 2)[-1]
    Xc = orc.closed_form_solution(pb, sh, 2)
    assert np.isrealobj(Xc)
    assert rel(Xc, Xf) < 1e-12


# -- identities --------------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), t=st.integers(1, 6))
def test_rational_identities(seed, t):
    rng = np.random.default_rng(seed)
    sh = [(complex(rng.uniform(-5, -0.5), rng.uniform(-1, 1)),
           complex(rng.uniform(-5, -0.5), rng.uniform(-1, 1))) for _ in range(t)]
    lam = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
    e1, e2 = orc.identity_deviation(sh, lam)
    assert e1 <= 1e-12 and e2 <= 1e-12


def test_p_omega_identity_exact():
    sh = [(Fraction(1, 2), Fraction(3, 7)), (Fraction(-2), Fraction(5, 3)), (Fraction(4), Fraction(1, 9))]
    resid = orc.p_omega_identity(sh)
    assert all(x == 0 for row in resid for x in row)


# -- ground truth ------------------------------------------------------------------------------


def test_schur_scalar(scalar):
    star = orc.schur_stabilizing_solution(scalar, shift=(-0.5, -0.5))
    assert star.X_star[0, 0] == pytest.approx(ROOT)
    assert star.Y_star[0, 0] == pytest.approx(ROOT)
    assert star.classification == "stabilizing"
    assert star.spec_radius_product < 1


def test_schur_zero_b_picks_stable_subspace():
    # B = 0 and D = 2: lambda(H) = {2, -2}; the stable graph subspace is X = 4, not 0
    pb = scalar_problem(b=0.0)
    star = orc.schur_stabilizing_solution(pb)
    assert star.X_star[0, 0] == pytest.approx(4.0)
    assert residual_dense(pb, star.X_star)[1] < 1e-12
    assert star.Y_star is None


def test_schur_critical_transport_raises():
    pb = gen_transport(TransportParams(n=1, omega=np.array([0.5]), c=np.array([1.0]),
                                       c_alpha=0.0, c_beta=1.0))
    with pytest.raises(NoSplitting):
        orc.schur_stabilizing_solution(pb, half_plane="right")


def test_schur_transport_right_half_plane():
    pb = gen_transport(TransportParams(n=8, seed=4))
    star = orc.schur_stabilizing_solution(pb, half_plane="auto")
    _, nrm = residual_dense(pb, star.X_star)
    assert nrm <= 1e-10 * residual_scale(pb, star.X_star)
    assert star.classification == "anti_stabilizing"
    assert np.all(star.X_star >= -1e-14)


def test_incorporation(rng):
    pb = random_problem(rng, 4, 3, 2, 2, coupling=0.5)
    star = orc.schur_stabilizing_solution(pb).X_star
    Xt = orc.fixed_point_run(pb, [(-3.0, -3.0)] * 2, 2)[-1]
    delta = orc.incorporated_solution(pb, Xt)
    assert rel(Xt + delta, star) < 1e-10


def test_reduced_problem_input():
    pb = NareProblem(np.array([[2.0]]), np.array([[2.0]]), np.ones((1, 1)), np.ones((1, 1)),
                     np.ones((1, 1)), np.ones((1, 1)))
    coeffs = pb.dense_coefficients()
    assert orc.closed_form_solution(coeffs, [(1, 1)], 1)[0, 0] == pytest.approx(0.25)
