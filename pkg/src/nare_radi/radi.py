"""RADI-type iteration for large sparse NAREs with low-rank B and C.

The solution is accumulated as ``X = LX @ RX`` while the residual is carried
in factored form ``R(X_k) = LB_k @ RB_k``.  Updates of ``A`` and ``D`` are
implicit: ``A_k = A - LPhi_k RC`` and ``D_k = D - LC RPhi_k`` (plus the fixed
weak-structure offsets when present), so only shifted solves with the
original sparse operators are ever needed.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from sklearn.base import BaseEstimator

from .exceptions import (
    DegeneratePsi,
    NoValidShift,
    ShiftError,
    SingularUpsilon,
    SizeGuardError,
)
from .linear_solver import ShiftedSolver, is_complex_shift
from .problem import DENSE_LIMIT, check_problem
from .shifts import ShiftPair, ShiftQueue, ShiftStrategy, as_shift

GROWTH_LIMIT = 1e14
STARVATION_LIMIT = 5
CAUSES = ("converged", "max_iter", "diverged", "shift starvation")


@dataclass(frozen=True)
class ConvergenceRecord:
    iter: int
    dim: int
    nu: float
    shift: ShiftPair | None
    t_shift_s: float
    t_solve_s: float
    t_other_s: float


class RadiState:
    """Mutable iteration state of one solve."""

    def __init__(self, problem, window=5):
        pb = problem
        self.problem = pb
        self.LB = np.array(pb.LB, dtype=float)
        self.RB = np.array(pb.RB, dtype=float)
        if pb.LPhi is None:
            self.LPhi = np.zeros((pb.m, pb.q))
            self.RPhi = np.zeros((pb.q, pb.n))
        else:
            self.LPhi = np.array(pb.LPhi, dtype=float)
            self.RPhi = np.array(pb.RPhi, dtype=float)
        self._LX, self._RX = [], []
        self._cat = None
        self.window = deque(maxlen=max(1, window))
        self.iter = 0
        self.history = []
        self.shifts = []
        self.nu0 = math.sqrt(max(_gram_trace(self.LB, self.RB), 0.0))
        self.t_solve = 0.0

    @property
    def weak(self):
        return self.problem.kind == "weak"

    @property
    def dim(self):
        return sum(b.shape[1] for b in self._LX)

    def _concat(self):
        if self._cat is None or self._cat[0] != len(self._LX):
            pb = self.problem
            LX = np.hstack(self._LX) if self._LX else np.zeros((pb.m, 0))
            RX = np.vstack(self._RX) if self._RX else np.zeros((0, pb.n))
            self._cat = (len(self._LX), LX, RX)
        return self._cat

    @property
    def LX(self):
        return self._concat()[1]

    @property
    def RX(self):
        return self._concat()[2]

    def append(self, LXh, RXh):
        self._LX.append(LXh)
        self._RX.append(RXh)
        self.window.append((LXh, RXh))

    def snapshot(self):
        return (self.LB.copy(), self.RB.copy(), self.LPhi.copy(), self.RPhi.copy())


def initialize(problem, window=5):
    check_problem(problem)
    return RadiState(problem, window)


def _gram_trace(LB, RB):
    return float(np.trace((LB.T @ LB) @ (RB @ RB.T)).real)


def residual_norm(state):
    """Relative residual ``||LB_k RB_k||_F / ||LB RB||_F`` via p x p Gram matrices."""
    if state.nu0 == 0.0:
        return 0.0
    tr = _gram_trace(state.LB, state.RB)
    if not math.isfinite(tr):
        return math.nan
    return math.sqrt(max(tr, 0.0)) / state.nu0


def assemble_dense(state):
    pb = state.problem
    if pb.m * pb.n > DENSE_LIMIT:
        raise SizeGuardError(f"refusing to form a {pb.m}x{pb.n} dense solution")
    if not state._LX:
        return np.zeros((pb.m, pb.n))
    return state.LX @ state.RX


# -- shifted solves ---------------------------------------------------------------------


def _solver_for(state, solver):
    if solver is None:
        solver = getattr(state, "_solver", None)
        if solver is None:
            solver = ShiftedSolver.for_problem(state.problem)
            state._solver = solver
    return solver


def _cols(f, rhs, conj=False):
    """``(base + shift mass)^{-1} rhs`` for real or complex ``rhs``.

    ``conj=True`` uses the conjugate shift through the same factorization.
    """
    size = f.size
    if f.mode == "real":
        if np.iscomplexobj(rhs):
            return f.solve_columns(rhs.real) + 1j * f.solve_columns(rhs.imag)
        return f.solve_columns(rhs)
    rhs = np.conj(rhs) if conj else rhs
    rhs = np.asarray(rhs, dtype=complex)
    x = f.solve_columns(np.vstack([rhs.real, rhs.imag]))
    z = x[:size] + 1j * x[size:]
    return np.conj(z) if conj else z


def _rows(f, lhs, conj=False):
    size = f.size
    if f.mode == "real":
        if np.iscomplexobj(lhs):
            return f.solve_rows(lhs.real) + 1j * f.solve_rows(lhs.imag)
        return f.solve_rows(lhs)
    lhs = np.conj(lhs) if conj else lhs
    lhs = np.asarray(lhs, dtype=complex)
    y = f.solve_rows(np.hstack([lhs.real, lhs.imag]))
    z = y[:, :size] + 1j * y[:, size:]
    return np.conj(z) if conj else z


def _mass_cols(op, V):
    return V if op is None else op @ V


def _mass_rows(op, W):
    return W if op is None else (op.T @ W.T).T


def _lu_upsilon(U):
    """``U = L_U R_U`` with partial pivoting folded into ``L_U``."""
    if not np.all(np.isfinite(U)):
        raise SingularUpsilon("Upsilon has non-finite entries")
    P, L, R = la.lu(U)
    scale = np.abs(U).max() if U.size else 1.0
    growth = np.abs(R).max() / scale if scale > 0 else math.inf
    diag = np.abs(np.diag(R))
    if scale == 0 or diag.min() == 0 or growth > GROWTH_LIMIT:
        raise SingularUpsilon("Upsilon factorization broke down")
    cond = np.linalg.cond(U)
    if not math.isfinite(cond) or cond > GROWTH_LIMIT:
        raise SingularUpsilon(f"Upsilon is numerically singular (cond {cond:.2e})")
    return P @ L, R


def _ext(state):
    """Extended factors ``RC_e, LC_e`` and fixed offsets for the weak case."""
    pb = state.problem
    if state.weak:
        return (np.vstack([pb.RC, pb.RA]), np.hstack([pb.LC, pb.LD]), pb.LA, pb.RD)
    return pb.RC, pb.LC, None, None


# -- one step with a single shift (real, or complex in complex arithmetic) -----------------


def _single_step(state, factors, alpha, beta, fA, fD, conj=False):
    """One RADI step on explicit ``factors = (LB, RB, LPhi, RPhi)``.

    Returns ``(LXh, RXh, new_factors)``; arrays are complex when the shift
    is.  Nothing in ``state`` is modified.
    """
    pb = state.problem
    LB, RB, LPhi, RPhi = factors
    p, q = LB.shape[1], pb.q
    RCe, LCe, LA, RD = _ext(state)
    qe = RCe.shape[0]

    lhs_cols = [LB, LPhi] + ([LA] if LA is not None else [])
    rhs_rows = [RB, RPhi] + ([RD] if RD is not None else [])
    t0 = time.perf_counter()
    W = _cols(fA, np.hstack(lhs_cols), conj)
    Z = _rows(fD, np.vstack(rhs_rows), conj)
    state.t_solve += time.perf_counter() - t0

    LBh, LPe = W[:, :p], W[:, p:]
    RBh, RPe = Z[:p], Z[p:]
    YA = la.solve(np.eye(qe) - RCe @ LPe, RCe @ LBh)
    YD = la.solve((np.eye(qe) - RPe @ LCe).T, (RBh @ LCe).T).T
    YAq, YDq = YA[:q], YD[:, :q]

    L_U, R_U = _lu_upsilon((np.eye(p) - YDq @ YAq) / (alpha + beta))
    LXh = la.solve_triangular(R_U, (LBh + LPe @ YA).T, trans="T", lower=False).T
    RXh = la.solve(L_U, RBh + YD @ RPe)
    ML = _mass_cols(pb.M, la.solve(L_U.T, LXh.T).T)
    RN = _mass_rows(pb.N, la.solve_triangular(R_U, RXh, lower=False))
    new = (LB - ML, RB - RN, LPhi + ML @ YDq, RPhi + YAq @ RN)
    return LXh, RXh, new


def step_real(state, shift, solver=None):
    """Apply one real shift; raises :class:`SingularUpsilon` without side effects."""
    shift = as_shift(shift)
    if not shift.is_real:
        return step_complex_pair(state, shift, solver=solver)
    solver = _solver_for(state, solver)
    alpha, beta = shift.alpha.real, shift.beta.real
    t0 = time.perf_counter()
    fA, fD = solver.get("A", beta), solver.get("D", alpha)
    state.t_solve += time.perf_counter() - t0
    LXh, RXh, new = _single_step(state, state.snapshot(), alpha, beta, fA, fD)
    state.LB, state.RB, state.LPhi, state.RPhi = new
    state.append(LXh, RXh)
    state.iter += 1
    state.shifts.append(shift)
    return state


# -- conjugate double steps ---------------------------------------------------------------


def psi_matrix(alpha, beta):
    """Real 2 x 2 weight matrix of the conjugate double step.

    Written with the common prefactor multiplied in, so it stays finite
    when one imaginary part is small.
    """
    alpha, beta = complex(alpha), complex(beta)
    s = alpha + beta
    ia, ib = alpha.imag, beta.imag
    s2 = abs(s) ** 2
    den = s2 - 4.0 * ia * ib
    if s2 == 0 or abs(den) < 1e-14 * s2:
        raise DegeneratePsi("|alpha+beta|^2 - 4 Im(alpha) Im(beta) vanishes")
    g = ia * ib / s2
    return np.array([
        [(s.real - 2.0 * s.real * g) / den, (2.0 * s.imag * g - ib) / den],
        [(2.0 * s.imag * g - ia) / den, 2.0 * s.real * g / den],
    ])


def _real_double_step(state, alpha, beta, fA, fD):
    pb = state.problem
    LB, RB, LPhi, RPhi = state.snapshot()
    m, n, p, q = pb.m, pb.n, LB.shape[1], pb.q
    RCe, LCe, LA, RD = _ext(state)
    qe = RCe.shape[0]

    lhs = np.hstack([LB, LPhi] + ([LA] if LA is not None else []))
    rows = np.vstack([RB, RPhi] + ([RD] if RD is not None else []))
    t0 = time.perf_counter()
    W = fA.solve_columns(np.vstack([lhs, np.zeros_like(lhs)]))
    Z = fD.solve_rows(np.hstack([rows, np.zeros_like(rows)]))
    state.t_solve += time.perf_counter() - t0

    LBr, LBi = W[:m, :p], W[m:, :p]
    LPr, LPi = W[:m, p:], W[m:, p:]
    RBr, RBi = Z[:p, :n], Z[:p, n:]
    RPr, RPi = Z[p:, :n], Z[p:, n:]

    ar, ai = RCe @ LPr, RCe @ LPi
    YAs = la.solve(np.eye(2 * qe) - np.block([[ar, -ai], [ai, ar]]),
                   np.vstack([RCe @ LBr, RCe @ LBi]))
    YAr, YAi = YAs[:qe], YAs[qe:]
    dr, di = RPr @ LCe, RPi @ LCe
    YDs = la.solve((np.eye(2 * qe) - np.block([[dr, di], [-di, dr]])).T,
                   np.hstack([RBr @ LCe, RBi @ LCe]).T).T
    YDr, YDi = YDs[:, :qe], YDs[:, qe:]

    Psi = psi_matrix(alpha, beta)
    YDbig = np.block([[YDr[:, :q], -YDi[:, :q]], [YDi[:, :q], YDr[:, :q]]])
    YAbig = np.block([[YAr[:q], YAi[:q]], [-YAi[:q], YAr[:q]]])
    U2 = np.kron(Psi, np.eye(p)) - YDbig @ np.kron(Psi, np.eye(q)) @ YAbig
    L_U, R_U = _lu_upsilon(U2)

    YAe = np.block([[YAr, YAi], [-YAi, YAr]])
    YDe = np.block([[YDr, -YDi], [YDi, YDr]])
    LXh = la.solve_triangular(
        R_U, (np.hstack([LBr, LBi]) + np.hstack([LPr, LPi]) @ YAe).T, trans="T", lower=False
    ).T
    RXh = la.solve(L_U, np.vstack([RBr, RBi]) + YDe @ np.vstack([RPr, RPi]))
    ML = _mass_cols(pb.M, la.solve(L_U.T, LXh.T).T)
    RN = _mass_rows(pb.N, la.solve_triangular(R_U, RXh, lower=False))
    new = (
        LB - ML[:, :p],
        RB - RN[:p],
        LPhi + ML @ np.vstack([YDr[:, :q], YDi[:, :q]]),
        RPhi + np.hstack([YAr[:q], YAi[:q]]) @ RN,
    )
    return LXh, RXh, new


def _complex_double_step(state, alpha, beta, fA, fD):
    """Two complex-arithmetic steps ``(alpha, beta)``, ``(conj alpha, conj beta)``."""
    pb = state.problem
    p = pb.p
    f0 = state.snapshot()
    L1, R1, f1 = _single_step(state, f0, alpha, beta, fA, fD)
    L2, R2, f2 = _single_step(state, f1, alpha.conjugate(), beta.conjugate(), fA, fD, conj=True)
    new = tuple(np.real(x).copy() for x in f2)
    Lc, Rc = np.hstack([L1, L2]), np.vstack([R1, R2])
    # Delta X = Re(Lc Rc) = [Re Lc, Im Lc] [Re Rc; -Im Rc], compressed to rank 2p
    Lr = np.hstack([Lc.real, Lc.imag])
    Rr = np.vstack([Rc.real, -Rc.imag])
    Q1, T1 = la.qr(Lr, mode="economic")
    Q2, T2 = la.qr(Rr.T, mode="economic")
    U, sv, Vt = la.svd(T1 @ T2.T)
    k = min(2 * p, sv.size)
    root = np.sqrt(sv[:k])
    LXh = (Q1 @ U[:, :k]) * root
    RXh = (root[:, None] * Vt[:k]) @ Q2.T
    return LXh, RXh, new


def step_complex_pair(state, shift, solver=None, real_arith=True):
    """Apply ``(alpha, beta)`` followed by its conjugate as one double step."""
    shift = as_shift(shift)
    if shift.is_real:
        return step_real(state, shift, solver=solver)
    solver = _solver_for(state, solver)
    alpha, beta = shift.alpha, shift.beta
    t0 = time.perf_counter()
    fA, fD = solver.get("A", beta), solver.get("D", alpha)
    state.t_solve += time.perf_counter() - t0
    if real_arith and not shift.is_mixed:
        LXh, RXh, new = _real_double_step(state, alpha, beta, fA, fD)
    else:
        LXh, RXh, new = _complex_double_step(state, alpha, beta, fA, fD)
    state.LB, state.RB, state.LPhi, state.RPhi = new
    state.append(LXh, RXh)
    state.iter += 2
    state.shifts.extend([shift, shift.conjugate()])
    return state


def step_weak(state, shift, solver=None, real_arith=True):
    """Step for the weakly strengthened structure (offsets enter via ``_ext``)."""
    if not state.weak:
        raise ValueError("step_weak requires a kind='weak' problem")
    return step(state, shift, solver=solver, real_arith=real_arith)


def step(state, shift, solver=None, real_arith=True):
    shift = as_shift(shift)
    if shift.is_real:
        return step_real(state, shift, solver=solver)
    return step_complex_pair(state, shift, solver=solver, real_arith=real_arith)


# -- driver ----------------------------------------------------------------------------------


@dataclass
class SolveResult:
    state: RadiState
    history: list
    cause: str
    nu: float
    queue: ShiftQueue | None = None
    failures: list = field(default_factory=list)

    @property
    def converged(self):
        return self.cause == "converged"


def solve(problem, strategy=None, tol=1e-12, max_iter=300, div_threshold=1e12,
          real_arith=True, sink=None, solver=None):
    """Run the iteration until one of the four stopping rules fires.

    ``sink`` is called with each :class:`ConvergenceRecord` as it is
    produced.  The returned :class:`SolveResult` records the terminal cause:
    ``converged``, ``max_iter``, ``diverged`` (large or NaN residual) or
    ``shift starvation`` (five consecutive rejected shifts).
    """
    strategy = strategy or ShiftStrategy()
    state = initialize(problem, window=max(strategy.s, 1))
    solver = solver or ShiftedSolver.for_problem(problem)
    state._solver = solver
    queue = ShiftQueue(strategy)
    failures, fails_in_row = [], 0

    def probe(pair):
        t0 = time.perf_counter()
        try:
            solver.probe(pair.alpha, pair.beta)
        finally:
            state.t_solve += time.perf_counter() - t0

    nu = residual_norm(state)
    while True:
        if math.isnan(nu) or nu >= div_threshold:
            cause = "diverged"
            break
        if nu < tol:
            cause = "converged"
            break
        if state.iter >= max_iter:
            cause = "max_iter"
            break
        t_start = time.perf_counter()
        solve0 = state.t_solve
        try:
            pair, _partner = queue.next_shift(problem, state, probe)
            t_shift = time.perf_counter() - t_start - (state.t_solve - solve0)
            step(state, pair, solver=solver, real_arith=real_arith)
        except (ShiftError, NoValidShift, np.linalg.LinAlgError) as exc:
            failures.append(exc)
            fails_in_row += 1
            if fails_in_row >= STARVATION_LIMIT:
                cause = "shift starvation"
                break
            continue
        fails_in_row = 0
        t_total = time.perf_counter() - t_start
        t_solve = state.t_solve - solve0
        t_other = max(t_total - t_shift - t_solve, 0.0)
        nu = residual_norm(state)
        rec = ConvergenceRecord(state.iter, state.dim, nu, pair, t_shift, t_solve, t_other)
        state.history.append(rec)
        if sink is not None:
            sink(rec)
    return SolveResult(state, state.history, cause, nu, queue, failures)


# -- estimator facade --------------------------------------------------------------------------


class RADISolver(BaseEstimator):
    """Estimator-style wrapper around :func:`solve`.

    ``fit(problem)`` stores the factors ``LX_``/``RX_`` of the approximate
    stabilizing solution, the convergence history and the terminal cause.
    """

    def __init__(self, strategy="leja", s=1, s_prime=None, recompute=False,
                 orientation="consistent", half_plane="auto", shifts=None, tol=1e-12,
                 max_iter=300, div_threshold=1e12, real_arith=True):
        self.strategy = strategy
        self.s = s
        self.s_prime = s_prime
        self.recompute = recompute
        self.orientation = orientation
        self.half_plane = half_plane
        self.shifts = shifts
        self.tol = tol
        self.max_iter = max_iter
        self.div_threshold = div_threshold
        self.real_arith = real_arith

    def _strategy(self):
        kind = {"leja": "leja", "hami": "hamiltonian", "hamiltonian": "hamiltonian",
                "user": "user"}.get(self.strategy)
        if kind is None:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        return ShiftStrategy(
            kind=kind, s=self.s, s_prime=self.s_prime,
            recompute_each_iteration=self.recompute, orientation=self.orientation,
            half_plane=self.half_plane, shifts=tuple(self.shifts or ()),
        )

    def fit(self, problem, y=None, sink=None):
        res = solve(problem, self._strategy(), tol=self.tol, max_iter=self.max_iter,
                    div_threshold=self.div_threshold, real_arith=self.real_arith, sink=sink)
        self.LX_ = res.state.LX
        self.RX_ = res.state.RX
        self.history_ = res.history
        self.cause_ = res.cause
        self.nu_ = res.nu
        self.n_iter_ = res.state.iter
        self.shifts_ = list(res.state.shifts)
        self.result_ = res
        return self

    @property
    def converged_(self):
        return self.cause_ == "converged"

    def solution(self):
        """Dense ``LX_ @ RX_`` (small problems only)."""
        return assemble_dense(self.result_.state)
