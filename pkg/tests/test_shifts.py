from __future__ import annotations

import math
from itertools import product

import numpy as np
import pytest
from conftest import random_problem

from nare_radi import radi
from nare_radi.exceptions import EmptyCandidates, PoleHit, SingularShift
from nare_radi.shifts import (
    ShiftPair,
    ShiftQueue,
    ShiftStrategy,
    _truncate,
    hamiltonian_shifts,
    kappa_diagnostics,
    leja_generate,
    parse_strategy,
    project_hamiltonian,
    projected_eigenpairs,
    split_spectrum,
    target_half_plane,
    window_bases,
)


def pairs(seq):
    return [(complex(p.alpha), complex(p.beta)) for p in seq]


# -- shift pairs and strategies --------------------------------------------------------------


def test_shift_pair_validation():
    with pytest.raises(ValueError):
        ShiftPair(1.0, -1.0)
    with pytest.raises(ValueError):
        ShiftPair(1.0, 1.0, origin="magic")
    p = ShiftPair(-1 + 1e-17j, -2)
    assert p.is_real
    q = ShiftPair(-1 + 1j, -2)
    assert q.is_mixed and not q.is_real
    assert q.conjugate().alpha == -1 - 1j


def test_strategy_labels():
    assert parse_strategy("leja 1").label == "leja 1"
    assert parse_strategy("hami c 5").label == "hami c 5"
    st = parse_strategy("hami c 2")
    assert st.kind == "hamiltonian" and st.recompute_each_iteration and st.s == 2
    assert st.effective_s_prime == 1
    with pytest.raises(ValueError):
        ShiftStrategy(kind="user")
    with pytest.raises(ValueError):
        ShiftStrategy(half_plane="up")


def test_target_half_plane(scalar):
    assert target_half_plane(ShiftStrategy(), scalar) == "left"
    right = scalar.with_(meta={"half_plane": "right"})
    assert target_half_plane(ShiftStrategy(), right) == "right"
    assert target_half_plane(ShiftStrategy(half_plane="left"), right) == "left"


# -- Leja ------------------------------------------------------------------------------------


def test_leja_first_pair_is_closest():
    got = leja_generate([-1, -2], [1, 2], 1)
    assert pairs(got) == [(-1, -1)]


def test_leja_singletons_repeat():
    assert pairs(leja_generate([-1], [1], 3)) == [(-1, -1)] * 3


def test_leja_conjugate_closure():
    got = leja_generate([-1 + 1j, -1 - 1j], [1 + 1j, 1 - 1j], 2)
    assert len(got) >= 2
    for i in range(0, len(got), 2):
        a, b = got[i], got[i + 1]
        assert b.alpha == a.alpha.conjugate() and b.beta == a.beta.conjugate()


def test_leja_brute_force_first_pair():
    S = [-1 + 1j, -1 - 1j, -3]
    U = [1 + 1j, 1 - 1j, 4]
    d = min(abs(u - s) for u, s in product(U, S))
    p = leja_generate(S, U, 1)[0]
    assert abs(-np.conj(p.alpha) - p.beta) == pytest.approx(d)


def test_leja_greedy_maximizes_on_stable_set():
    S, U = [-1, -2, -5], [1, 3, 6]
    got = leja_generate(S, U, 3, real_problem=True)
    ab = pairs(got[:1])
    val = lambda z: math.prod(abs((b - z) / (z + a)) if z + a else math.inf for a, b in ab)
    assert got[1].beta == max(S, key=val)
    assert -got[1].alpha.conjugate() == min(U, key=val)


def test_leja_empty():
    with pytest.raises(EmptyCandidates):
        leja_generate([], [1], 1)


def test_split_spectrum_mirrors():
    S, U = split_spectrum([1.0, 2.0 + 1j])
    assert np.all(S.real < 0) and len(S) == 2
    S, U = split_spectrum([-1.0])
    np.testing.assert_allclose(U, [1.0])


# -- Hamiltonian shifts ---------------------------------------------------------------------


def test_hamiltonian_paper_literal_order():
    vals = [-1, -3, 2, 4]
    qn = [0.9, 0.1, 0.2, 0.8]
    got = hamiltonian_shifts(vals, qn, "paper_literal")
    assert pairs(got) == [(1, 2), (3, 4)]


def test_hamiltonian_consistent_order():
    got = hamiltonian_shifts([-1, -3, 2, 4], [0.9, 0.1, 0.2, 0.8], "consistent")
    # poles from the anti-stable set by decreasing ||q||, zeros from the stable set by increasing
    assert pairs(got) == [(-4, -3), (-2, -1)]


def test_hamiltonian_single_pair_and_empty():
    assert len(hamiltonian_shifts([-1, 2], [1, 1])) == 1
    with pytest.raises(EmptyCandidates):
        hamiltonian_shifts([-1, -2], [1, 1])


def test_hamiltonian_conjugate_closure():
    got = hamiltonian_shifts([-1 + 1j, -1 - 1j, 2 + 1j, 2 - 1j], [0.5, 0.4, 0.3, 0.2])
    for i, p in enumerate(got):
        if p.origin == "conjugate_partner":
            prev = got[i - 1]
            assert p.alpha == prev.alpha.conjugate() and p.beta == prev.beta.conjugate()


# -- projection ------------------------------------------------------------------------------


def test_projection_exact_for_scalar(scalar):
    st = radi.initialize(scalar)
    radi.step_real(st, (1, 1))
    Hp, Ep, _, kr = project_hamiltonian(scalar, st, 1)
    X1 = 0.25
    H1 = np.array([[2 - X1, -1.0], [1 / 16, -(2 - X1)]])
    np.testing.assert_allclose(np.diag(Hp), np.diag(H1), rtol=1e-14)
    np.testing.assert_allclose(np.sort(np.linalg.eigvals(Hp).real),
                               np.sort(np.linalg.eigvals(H1).real), rtol=1e-12)
    np.testing.assert_array_equal(Ep, np.eye(2))


def test_projection_full_basis_is_exact(rng):
    pb = random_problem(rng, 3, 3, 3, 3)
    st = radi.initialize(pb)
    Hp, _, basis, kr = project_hamiltonian(pb, st, 1)
    A, D, LB, RB, LC, RC = pb.dense_coefficients()
    H = np.block([[D, -LC @ RC], [LB @ RB, -A]])
    ev = np.sort_complex(np.linalg.eigvals(Hp))
    np.testing.assert_allclose(ev, np.sort_complex(np.linalg.eigvals(H)), atol=1e-10)


def test_duplicate_window_shrinks(scalar):
    pb = random_problem(np.random.default_rng(3), 5, 4, 1, 1)
    st = radi.initialize(pb)
    radi.step_real(st, (-2.0, -2.0))
    st.window.append(st.window[-1])
    PiL, PiR, used = window_bases(st, 2)
    assert used == 1 and PiL.shape[1] == 1


def test_projected_eigenpairs_normalized(rng):
    H = rng.standard_normal((4, 4))
    w, qn = projected_eigenpairs(H, np.eye(4), 2)
    assert len(w) == 4 and np.all((qn >= 0) & (qn <= 1 + 1e-12))


# -- queue -----------------------------------------------------------------------------------


def test_queue_user_order(scalar):
    q = ShiftQueue(ShiftStrategy(kind="user", shifts=((-1, -1), (-2, -2))))
    st = radi.initialize(scalar)
    seen = [pairs([q.next_shift(scalar, st)[0]])[0] for _ in range(3)]
    assert seen == [(-1, -1), (-2, -2), (-1, -1)]


def test_queue_skips_rejected(scalar):
    def probe(p):
        if p.beta == -2:
            raise SingularShift("A + beta I is singular")

    q = ShiftQueue(ShiftStrategy(kind="user", shifts=((-2, -2), (-0.5, -0.5))))
    st = radi.initialize(scalar)
    pair, _ = q.next_shift(scalar, st, probe)
    assert pairs([pair]) == [(-0.5, -0.5)]


def test_queue_nonreal_brings_partner(scalar):
    q = ShiftQueue(ShiftStrategy(kind="user", shifts=((-1 + 1j, -2 - 0.5j),)))
    pair, partner = q.next_shift(scalar, radi.initialize(scalar))
    assert partner is not None and partner.alpha == pair.alpha.conjugate()


def test_truncate_keeps_conjugate():
    a = ShiftPair(-1 + 1j, -1 + 1j, "leja")
    lst = [a, a.conjugate(), ShiftPair(-2, -2, "leja")]
    assert len(_truncate(lst, 1)) == 2
    assert len(_truncate(lst[2:] + lst[:2], 1)) == 1


def test_queue_generates_conjugate_closed(rng):
    pb = random_problem(rng, 12, 10, 2, 2)
    q = ShiftQueue(ShiftStrategy(kind="hamiltonian", s=2))
    st = radi.initialize(pb)
    q.next_shift(pb, st)
    gen = q.generated
    i = 0
    while i < len(gen):
        if gen[i].is_real:
            i += 1
            continue
        assert gen[i + 1].alpha == gen[i].alpha.conjugate()
        i += 2


def test_right_half_plane_flips_shifts():
    pb = random_problem(np.random.default_rng(8), 6, 6, 1, 1)
    left = ShiftQueue(ShiftStrategy(half_plane="left"))
    right = ShiftQueue(ShiftStrategy(half_plane="right"))
    neg = pb.with_(A=-pb.A, D=-pb.D, LB=-pb.LB, LC=-pb.LC)
    pl = left.next_shift(pb, radi.initialize(pb))[0]
    pr = right.next_shift(neg, radi.initialize(neg))[0]
    assert pr.alpha == pytest.approx(-pl.alpha) and pr.beta == pytest.approx(-pl.beta)


# -- diagnostics ----------------------------------------------------------------------------


def test_kappa_point_sets():
    d = kappa_diagnostics([(-1, -1)], [-2], [2])
    assert d.kappa_t == pytest.approx(9.0)
    assert d.unbounded and d.asymptotic_rate is None


def test_kappa_disks():
    d = kappa_diagnostics([(-2, -2)], [-3, -1], [1, 3])
    assert (d.a, d.b, d.c, d.p) == pytest.approx((1, 1, 4, 7))
    assert d.asymptotic_rate == pytest.approx(7 + math.sqrt(48))


def test_kappa_pole():
    with pytest.raises(PoleHit):
        kappa_diagnostics([(-1, -1)], [-3, -1], [1, 3])


def test_kappa_repeated_shift_is_geometric():
    for t in range(1, 5):
        d = kappa_diagnostics([(-2, -2)] * t, [-3, -1], [1, 3])
        assert d.kappa_t == pytest.approx(9.0**t)
