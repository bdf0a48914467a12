from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import random_problem, rel, scalar_problem

from nare_radi import oracle as orc
from nare_radi import radi
from nare_radi.exceptions import DegeneratePsi, SizeGuardError
from nare_radi.exceptions import SingularShift
from nare_radi.problem import NareProblem, residual_dense, residual_scale
from nare_radi.shifts import ShiftPair, ShiftStrategy

ROOT = 2.0 + np.sqrt(3.0)


def run(pb, shifts, real_arith=True):
    st = radi.initialize(pb)
    for sh in shifts:
        radi.step(st, sh, real_arith=real_arith)
    return st


def conj_seq(shifts):
    out = []
    for a, b in shifts:
        out.append((a, b))
        if np.imag(a) or np.imag(b):
            out.append((np.conj(a), np.conj(b)))
    return out


# -- single steps ---------------------------------------------------------------------------


def test_initial_state(scalar):
    st = radi.initialize(scalar)
    assert radi.residual_norm(st) == 1.0
    np.testing.assert_array_equal(st.LPhi, 0.0)
    np.testing.assert_array_equal(radi.assemble_dense(st), 0.0)


def test_step_hand_values_negative_shift(scalar):
    st = run(scalar, [(-0.5, -0.5)])
    assert radi.assemble_dense(st)[0, 0] == pytest.approx(-0.8, rel=1e-14)
    assert abs(st.LB[0, 0]) == pytest.approx(2.2) and abs(st.RB[0, 0]) == pytest.approx(2.2)
    assert radi.residual_norm(st) == pytest.approx(121 / 25, rel=1e-14)


def test_step_hand_values_positive_shift(scalar):
    st = run(scalar, [(1, 1)])
    assert radi.assemble_dense(st)[0, 0] == pytest.approx(0.25, rel=1e-14)
    assert radi.residual_norm(st) == pytest.approx(1 / 16, rel=1e-14)
    assert st.iter == 1 and st.dim == 1


def test_zero_residual_is_fixed():
    pb = scalar_problem(b=0.0)
    st = run(pb, [(-0.5, -0.5)])
    assert radi.residual_norm(st) == 0.0
    np.testing.assert_array_equal(radi.assemble_dense(st), 0.0)
    assert st.iter == 1


def test_real_steps_match_fixed_point(rng):
    pb = random_problem(rng, 7, 5, 2, 3)
    sh = [(-3.0, -2.0), (-5.0, -6.0), (-4.0, -1.0), (-2.5, -2.5)]
    st = run(pb, sh)
    Xs = orc.fixed_point_run(pb, sh, len(sh))
    assert rel(radi.assemble_dense(st), Xs[-1]) < 1e-12
    Rd, _ = residual_dense(pb, Xs[-1])
    assert rel(st.LB @ st.RB, Rd) < 1e-10


@pytest.mark.parametrize("real_arith", [True, False])
def test_complex_pair_matches_oracle(rng, real_arith):
    pb = random_problem(rng, 4, 3, 1, 1)
    sh = [(-0.5 + 0.3j, -0.4 + 0.2j)]
    st = run(pb, sh, real_arith=real_arith)
    Xref = orc.fixed_point_run(pb, conj_seq(sh), 2)[-1]
    X = radi.assemble_dense(st)
    assert np.isrealobj(X)
    assert rel(X, Xref.real) < 1e-11
    assert np.abs(Xref.imag).max() < 1e-10 * np.abs(Xref).max()
    assert st.iter == 2 and st.dim == 2


def test_mixed_pair(rng):
    pb = random_problem(rng, 5, 4, 2, 1)
    sh = [(-3.0, -2.0 + 0.5j), (-1.5 + 0.4j, -2.0)]
    st = run(pb, sh)
    Xref = orc.fixed_point_run(pb, conj_seq(sh), 4)[-1]
    assert rel(radi.assemble_dense(st), Xref.real) < 1e-11


def test_equal_imaginary_parts():
    a, b = -0.5 + 0.3j, -0.4 + 0.3j
    psi = radi.psi_matrix(a, b)
    assert np.all(np.isfinite(psi))
    pb = random_problem(np.random.default_rng(1), 4, 3, 1, 1)
    st = run(pb, [(a, b)])
    Xref = orc.fixed_point_run(pb, conj_seq([(a, b)]), 2)[-1]
    assert rel(radi.assemble_dense(st), Xref.real) < 1e-11


def test_degenerate_psi():
    # |a+b|^2 = 4 Im(a) Im(b) with a = b = i
    with pytest.raises(DegeneratePsi):
        radi.psi_matrix(1j, 1j)


def test_tiny_imaginary_part_dispatches_real(scalar):
    st = run(scalar, [ShiftPair(-0.5 + 1e-17j, -0.5)])
    assert st.iter == 1


def test_rejected_shift_leaves_state(scalar):
    st = run(scalar, [(1, 1)])
    before = st.snapshot()
    with pytest.raises(Exception):
        radi.step(st, (-2.0, -2.0))
    for x, y in zip(before, st.snapshot()):
        np.testing.assert_array_equal(x, y)
    assert st.iter == 1


# -- problem kinds --------------------------------------------------------------------------


def _strengthened(rng, m=6, n=5):
    Ap = np.diag(rng.uniform(3, 6, m))
    Dp = np.diag(rng.uniform(3, 6, n))
    return NareProblem(
        A=-Ap, D=-Dp, LB=rng.standard_normal((m, 1)), RB=rng.standard_normal((1, n)),
        LC=0.3 * rng.standard_normal((n, 1)), RC=0.3 * rng.standard_normal((1, m)),
        LPhi=0.3 * rng.standard_normal((m, 1)), RPhi=0.3 * rng.standard_normal((1, n)),
        kind="strengthened",
    )


def test_strengthened_matches_reduced(rng):
    pb = _strengthened(rng)
    sh = [(-3.0, -4.0), (-5.0, -2.0), (-4.0 + 1j, -3.0 - 0.5j)]
    X = radi.assemble_dense(run(pb, sh))
    Xr = orc.fixed_point_run(pb.reduced(), conj_seq(sh), 4)[-1]
    assert rel(X, Xr.real) < 1e-11


def test_weak_zero_padding_matches_strengthened(rng):
    pb = _strengthened(rng)
    m, n = pb.m, pb.n
    weak = pb.with_(kind="weak", LA=np.zeros((m, 1)), RA=np.zeros((1, m)),
                    LD=np.zeros((n, 1)), RD=np.zeros((1, n)))
    sh = [(-3.0, -4.0), (-5.0, -2.0)]
    a, b = run(pb, sh), run(weak, sh)
    for x, y in zip(a.snapshot(), b.snapshot()):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(radi.assemble_dense(a), radi.assemble_dense(b), rtol=1e-13)


def test_weak_matches_reduced_and_residual(rng):
    pb = _strengthened(rng)
    m, n = pb.m, pb.n
    weak = pb.with_(kind="weak", LA=0.2 * rng.standard_normal((m, 1)),
                    RA=0.2 * rng.standard_normal((1, m)),
                    LD=0.2 * rng.standard_normal((n, 1)), RD=0.2 * rng.standard_normal((1, n)))
    sh = [(-3.0, -4.0), (-5.0, -2.0), (-4.5, -4.5)]
    st = run(weak, sh)
    X = radi.assemble_dense(st)
    Xr = orc.fixed_point_run(weak.reduced(), sh, 3)[-1]
    assert rel(X, Xr) < 1e-11
    Rd, _ = residual_dense(weak, X)
    assert np.linalg.norm(st.LB @ st.RB - Rd) <= 1e-12 * residual_scale(weak, X)


def test_mass_matches_reduced(rng):
    base = random_problem(rng, 5, 4, 1, 1)
    M = np.eye(5) + 0.1 * rng.standard_normal((5, 5))
    N = np.eye(4) + 0.1 * rng.standard_normal((4, 4))
    pb = base.with_(M=M, N=N, kind="generalized")
    sh = [(-3.0, -2.0), (-2.0 + 0.5j, -4.0 - 0.3j)]
    X = radi.assemble_dense(run(pb, sh))
    Xr = orc.fixed_point_run(pb.reduced(), conj_seq(sh), 3)[-1]
    assert rel(X, Xr.real) < 1e-11


def test_assemble_guard():
    big = NareProblem(A=np.zeros((1, 1)), D=np.zeros((1, 1)), LB=np.ones((1, 1)),
                      RB=np.ones((1, 1)), LC=np.ones((1, 1)), RC=np.ones((1, 1)))
    st = radi.initialize(big)
    eye = sp.identity(30000, format="csc")
    st.problem = big.with_(A=eye, D=eye)
    with pytest.raises(SizeGuardError):
        radi.assemble_dense(st)


# -- driver ------------------------------------------------------------------------------------


def test_solve_scalar_user_shift(scalar):
    res = radi.solve(scalar, ShiftStrategy(kind="user", shifts=((-0.5, -0.5),)))
    assert res.converged
    assert abs(radi.assemble_dense(res.state)[0, 0] - ROOT) <= 1e-10


def test_solve_zero_rhs():
    res = radi.solve(scalar_problem(b=0.0))
    assert res.converged and res.state.iter == 0 and res.nu == 0.0


def test_solve_records_and_sink(rng):
    pb = random_problem(rng, 20, 15, 2, 2)
    seen = []
    res = radi.solve(pb, sink=seen.append)
    assert res.converged and seen == res.history
    assert [r.iter for r in res.history] == sorted(r.iter for r in res.history)
    assert all(r.t_shift_s >= 0 and r.t_solve_s >= 0 and r.t_other_s >= 0 for r in res.history)
    assert res.history[-1].dim == res.state.dim


def test_solve_max_iter(rng):
    pb = random_problem(rng, 20, 15, 2, 2)
    res = radi.solve(pb, max_iter=2)
    assert res.cause == "max_iter" and res.state.iter >= 2


def test_solve_divergence(scalar):
    res = radi.solve(scalar, ShiftStrategy(kind="user", shifts=((-0.5, -0.5),)), div_threshold=2.0)
    assert res.cause == "diverged"


class _RejectAll:
    def probe(self, alpha, beta):
        raise SingularShift("rejected")


def test_solve_starvation(scalar):
    res = radi.solve(scalar, ShiftStrategy(kind="user", shifts=((-2.0, -2.0),)), solver=_RejectAll())
    assert res.cause == "shift starvation"
    assert len(res.failures) == radi.STARVATION_LIMIT and res.state.iter == 0


def test_singular_user_shift_is_bumped(scalar):
    # beta = -2 hits A + beta I = 0 exactly; the queue nudges it off the pole
    res = radi.solve(scalar, ShiftStrategy(kind="user", shifts=((-2.0, -2.0),)))
    assert res.state.shifts[0].beta != -2.0


def test_estimator(rng):
    from sklearn.base import clone

    pb = random_problem(rng, 10, 8, 1, 1)
    est = radi.RADISolver(strategy="hami", s=2)
    assert clone(est).get_params()["s"] == 2
    est.fit(pb)
    assert est.converged_ and est.n_iter_ >= 1 and est.history_
    X = est.LX_ @ est.RX_
    star = orc.schur_stabilizing_solution(pb).X_star
    assert rel(X, star) < 1e-10
    with pytest.raises(ValueError):
        radi.RADISolver(strategy="nope").fit(pb)
