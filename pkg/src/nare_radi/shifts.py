"""Shift selection: projected Hamiltonian spectra, Leja and Hamiltonian shifts.

A shift pair ``(alpha, beta)`` defines ``C(lam) = (beta - lam) / (lam + alpha)``.
Its zero ``beta`` belongs near the stable eigenvalues of the Hamiltonian and
its pole ``-alpha`` near the anti-stable ones; the Zolotarev ratio

    kappa = min_{anti} |C_{t,t}| / max_{stable} |C_{t,t}|

measures how well a shift list separates the two sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .exceptions import (
    EmptyCandidates,
    NoValidShift,
    PoleHit,
    RankDeficientWindow,
    ShiftError,
)

ORIGINS = ("leja", "hamiltonian", "user", "conjugate_partner")
ORIENTATIONS = ("consistent", "paper_literal")
AXIS_TOL = 1e-10
HALF_PLANES = ("auto", "left", "right")


def pair_tol(alpha, beta):
    return 1e-12 * (1.0 + abs(alpha) + abs(beta))


@dataclass(frozen=True)
class ShiftPair:
    alpha: complex
    beta: complex
    origin: str = "user"

    def __post_init__(self):
        a, b = complex(self.alpha), complex(self.beta)
        tol = 1e-14 * (1.0 + abs(a) + abs(b))
        # snap numerically-real parts so downstream branching is exact
        if abs(a.imag) <= tol:
            a = complex(a.real, 0.0)
        if abs(b.imag) <= tol:
            b = complex(b.real, 0.0)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if abs(a + b) <= pair_tol(a, b):
            raise ValueError(f"alpha + beta vanishes for ({a}, {b})")

    @property
    def is_real(self):
        return self.alpha.imag == 0.0 and self.beta.imag == 0.0

    @property
    def is_mixed(self):
        """Exactly one of alpha, beta is real."""
        return (self.alpha.imag == 0.0) != (self.beta.imag == 0.0)

    def conjugate(self):
        return ShiftPair(self.alpha.conjugate(), self.beta.conjugate(), "conjugate_partner")

    def __iter__(self):
        return iter((self.alpha, self.beta))


def as_shift(obj, origin="user"):
    if isinstance(obj, ShiftPair):
        return obj
    a, b = obj
    return ShiftPair(complex(a), complex(b), origin)


@dataclass(frozen=True)
class ShiftStrategy:
    """Configuration of a shift generator.

    ``kind`` is ``leja``, ``hamiltonian`` or ``user`` (a fixed, cycled list
    in ``shifts``).  ``s`` is the projection window, ``s_prime`` the number
    of shifts used per projection (``None``: all of them, or one when
    ``recompute_each_iteration``).
    """

    kind: str = "leja"
    s: int = 1
    s_prime: int | None = None
    recompute_each_iteration: bool = False
    orientation: str = "consistent"
    shifts: tuple = ()
    half_plane: str = "auto"

    def __post_init__(self):
        if self.kind not in ("leja", "hamiltonian", "user"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.half_plane not in HALF_PLANES:
            raise ValueError(f"unknown half_plane {self.half_plane!r}")
        if self.s < 1:
            raise ValueError("s must be at least 1")
        if self.s_prime is not None and self.s_prime < 1:
            raise ValueError("s_prime must be at least 1")
        if self.kind == "user" and not self.shifts:
            raise ValueError("user strategy requires shifts")
        object.__setattr__(self, "shifts", tuple(as_shift(x) for x in self.shifts))

    @property
    def label(self):
        if self.kind == "user":
            return "user"
        name = "leja" if self.kind == "leja" else "hami"
        c = " c" if self.recompute_each_iteration else ""
        return f"{name}{c} {self.s}"

    @property
    def effective_s_prime(self):
        if self.s_prime is not None:
            return self.s_prime
        return 1 if self.recompute_each_iteration else None


def target_half_plane(strategy, problem):
    """``left`` or ``right``: where ``D - C X`` should end up.

    ``auto`` defers to ``problem.meta['half_plane']`` and falls back to
    ``left``.  Generators of M-matrix equations set ``right`` because the
    physically meaningful minimal solution has ``D - C X`` an M-matrix.
    """
    hp = strategy.half_plane
    if hp == "auto":
        hp = (getattr(problem, "meta", None) or {}).get("half_plane", "left")
    if hp not in ("left", "right"):
        raise ValueError(f"unknown half_plane {hp!r}")
    return hp


def parse_strategy(label, orientation="consistent", half_plane="auto"):
    """``'leja 1'``, ``'hami c 5'`` and the like."""
    parts = label.split()
    kind = {"leja": "leja", "hami": "hamiltonian", "hamiltonian": "hamiltonian"}[parts[0]]
    recompute = len(parts) == 3 and parts[1] == "c"
    return ShiftStrategy(kind=kind, s=int(parts[-1]), recompute_each_iteration=recompute,
                         orientation=orientation, half_plane=half_plane)


TABLE_STRATEGIES = tuple(
    f"{k}{c} {s}" for k in ("leja", "hami") for c in ("", " c") for s in (1, 2, 5)
)


# -- projection ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProjectionBasis:
    PiL: np.ndarray
    PiR: np.ndarray
    age: int = 0


def orth_columns(blocks, drop=1e-12, strict=False):
    """Orthonormal basis of the columns of ``blocks`` via pivoted QR.

    With ``strict=True`` a numerically dependent column raises
    :class:`RankDeficientWindow`.
    """
    mat = np.hstack(blocks) if isinstance(blocks, (list, tuple)) else blocks
    if mat.shape[1] == 0:
        return mat
    Q, R, _ = la.qr(mat, mode="economic", pivoting=True)
    norms = np.linalg.norm(mat, axis=0)
    thresh = drop * max(norms.max(), np.finfo(float).tiny)
    rank = int(np.sum(np.abs(np.diag(R)) > thresh))
    if strict and rank < mat.shape[1]:
        raise RankDeficientWindow(f"window has rank {rank} < {mat.shape[1]}")
    return Q[:, :rank]


def window_bases(state, s):
    """Bases from the last ``s`` step blocks, shrinking ``s`` on rank loss."""
    blocks = list(state.window)[-s:] if s else []
    if not blocks:
        return orth_columns(state.LB), orth_columns(state.RB.T).T, 0
    while True:
        try:
            PiL = orth_columns([b[0] for b in blocks], strict=len(blocks) > 1)
            PiRt = orth_columns([b[1].T for b in blocks], strict=len(blocks) > 1)
            return PiL, PiRt.T, len(blocks)
        except RankDeficientWindow:
            blocks = blocks[1:]


def _apply_A(problem, state, V):
    """``A_k V`` and ``M V`` with the low-rank offsets applied implicitly."""
    pb = problem
    out = pb.A @ V - state.LPhi @ (pb.RC @ V)
    if pb.LA is not None:
        out -= pb.LA @ (pb.RA @ V)
    mv = V if pb.M is None else pb.M @ V
    return np.asarray(out), np.asarray(mv)


def _apply_D_rows(problem, state, W):
    """``W D_k`` and ``W N`` for a row block ``W``."""
    pb = problem
    out = (pb.D.T @ W.T).T - (W @ pb.LC) @ state.RPhi
    if pb.LD is not None:
        out -= (W @ pb.LD) @ pb.RD
    nv = W if pb.N is None else (pb.N.T @ W.T).T
    return np.asarray(out), np.asarray(nv)


def project_hamiltonian(problem, state, s):
    """Projected residual Hamiltonian pencil ``(Hp, Ep)`` and its bases.

    ``Ep`` is the projected ``diag(N, M)`` (identity without mass matrices).
    """
    PiL, PiR, used = window_bases(state, s)
    pb = problem
    AL, ML = _apply_A(pb, state, PiL)
    DR, NR = _apply_D_rows(pb, state, PiR)
    top = np.hstack([DR @ PiR.T, -(PiR @ pb.LC) @ (pb.RC @ PiL)])
    bot = np.hstack([(PiL.T @ state.LB) @ (state.RB @ PiR.T), -(PiL.T @ AL)])
    Hp = np.vstack([top, bot])
    kr, kl = PiR.shape[0], PiL.shape[1]
    Ep = np.zeros_like(Hp)
    Ep[:kr, :kr] = NR @ PiR.T
    Ep[kr:, kr:] = PiL.T @ ML
    return Hp, Ep, ProjectionBasis(PiL, PiR, 0), kr


def projected_eigenpairs(Hp, Ep, kr):
    """Finite eigenvalues and eigenvector tail norms ``||q||`` (normalized)."""
    if np.allclose(Ep, np.eye(Ep.shape[0]), rtol=0, atol=0):
        w, V = la.eig(Hp)
    else:
        w, V = la.eig(Hp, Ep)
    keep = np.isfinite(w)
    w, V = w[keep], V[:, keep]
    V = V / np.maximum(np.linalg.norm(V, axis=0), np.finfo(float).tiny)
    qn = np.linalg.norm(V[kr:], axis=0)
    return w, qn


def split_spectrum(vals, real_problem=True):
    """Split into (stable, anti-stable); mirror one class if the other is empty."""
    vals = np.asarray(vals, dtype=complex)
    stable = vals[vals.real < -AXIS_TOL]
    anti = vals[vals.real >= -AXIS_TOL]
    if stable.size == 0 and anti.size == 0:
        raise EmptyCandidates("no finite eigenvalues")
    if stable.size == 0:
        stable = -np.conj(anti)
        on_axis = stable.real >= -AXIS_TOL
        stable[on_axis] = -np.maximum(np.abs(stable[on_axis]), 1.0)
    if anti.size == 0:
        anti = -np.conj(stable)
    return stable, anti


# -- candidate handling ---------------------------------------------------------------


def _sorted_unique(vals, rel=1e-12):
    vals = sorted((complex(v) for v in vals), key=lambda z: (z.real, z.imag))
    out = []
    for v in vals:
        if not any(abs(v - u) <= rel * max(1.0, abs(u)) for u in out):
            out.append(v)
    return out


def _rational_abs(shifts, lam):
    val = 1.0
    for a, b in shifts:
        den = lam + a
        if den == 0:
            return math.inf
        val *= abs((b - lam) / den)
    return val


def _argbest(cands, key, maximize):
    best, best_i = None, None
    for i, z in enumerate(cands):
        v = key(z)
        if math.isnan(v):
            continue
        if best is None or (v > best if maximize else v < best):
            best, best_i = v, i
    return 0 if best_i is None else best_i


def _with_partner(out, pair, real_problem):
    out.append(pair)
    if real_problem and not pair.is_real:
        out.append(ShiftPair(pair.alpha.conjugate(), pair.beta.conjugate(), "conjugate_partner"))


def leja_generate(stable_set, anti_set, count, orientation="consistent", real_problem=True):
    """Generalized Leja shift pairs for the two discrete candidate sets.

    The first pair joins the closest points of the two sets; afterwards
    ``consistent`` places the new zero where ``|C_k|`` is largest on the
    stable set and the new pole where it is smallest on the anti-stable set,
    while ``paper_literal`` uses the reverse extrema.  ``alpha`` is always
    ``-conj`` of the chosen anti-stable point.  For real problems nonreal
    pairs are followed by their conjugates; the partner counts toward
    ``count``.
    """
    S = _sorted_unique(stable_set)
    U = _sorted_unique(anti_set)
    if not S or not U:
        raise EmptyCandidates("both candidate sets must be nonempty")
    best = None
    for iu, u in enumerate(U):
        for is_, s in enumerate(S):
            d = abs(u - s)
            if best is None or d < best[0]:
                best = (d, iu, is_)
    out = []
    u, s = U[best[1]], S[best[2]]
    _with_partner(out, ShiftPair(-u.conjugate(), s, "leja"), real_problem)
    while len(out) < count:
        ab = [(p.alpha, p.beta) for p in out]
        key = lambda z: _rational_abs(ab, z)
        if orientation == "consistent":
            s = S[_argbest(S, key, True)]
            u = U[_argbest(U, key, False)]
        else:
            u = U[_argbest(U, key, True)]
            s = S[_argbest(S, key, False)]
        try:
            pair = ShiftPair(-u.conjugate(), s, "leja")
        except ValueError:
            break
        _with_partner(out, pair, real_problem)
    return out


def hamiltonian_shifts(eigvals, qnorms, orientation="consistent", real_problem=True):
    """Residual Hamiltonian shifts from projected eigenpairs.

    ``paper_literal``: ``-alpha`` runs over the stable eigenvalues by
    decreasing ``||q||`` and ``beta`` over the anti-stable ones by increasing
    ``||q||``.  ``consistent`` swaps the classes (the pole ``-conj(alpha)``
    from the anti-stable set by decreasing ``||q||``, the zero ``beta`` from
    the stable set by increasing ``||q||``).
    """
    vals = np.asarray(eigvals, dtype=complex)
    qn = np.asarray(qnorms, dtype=float)
    st = vals.real < -AXIS_TOL
    if st.all() or not st.any():
        raise EmptyCandidates("all eigenvalues lie on one side of the axis")
    order = lambda mask, decreasing: sorted(
        np.flatnonzero(mask), key=lambda i: ((-qn[i] if decreasing else qn[i]), vals[i].real, vals[i].imag)
    )
    if orientation == "paper_literal":
        alphas = [-vals[i] for i in order(st, True)]
        betas = [vals[i] for i in order(~st, False)]
    else:
        alphas = [-np.conj(vals[i]) for i in order(~st, True)]
        betas = [vals[i] for i in order(st, False)]
    out = []
    for a, b in zip(alphas, betas):
        try:
            pair = ShiftPair(a, b, "hamiltonian")
        except ValueError:
            continue
        out.append(pair)
    return _close_under_conjugation(out) if real_problem else out


def _close_under_conjugation(pairs):
    """Reorder so every nonreal pair is directly followed by its conjugate."""
    out = []
    pending = list(pairs)
    while pending:
        p = pending.pop(0)
        if p.is_real:
            out.append(p)
            continue
        partner = None
        for j, r in enumerate(pending):
            if abs(r.alpha - p.alpha.conjugate()) <= 1e-12 * (1 + abs(p.alpha)) and \
                    abs(r.beta - p.beta.conjugate()) <= 1e-12 * (1 + abs(p.beta)):
                partner = pending.pop(j)
                break
        out.append(p)
        out.append(ShiftPair(p.alpha.conjugate(), p.beta.conjugate(), "conjugate_partner")
                   if partner is None else
                   ShiftPair(partner.alpha, partner.beta, "conjugate_partner"))
    return out


# -- queue -------------------------------------------------------------------------------


@dataclass
class ShiftQueue:
    """Shift scheduling for one solve (the ``(s, s')`` policy)."""

    strategy: ShiftStrategy
    pending: list = field(default_factory=list)
    generated: list = field(default_factory=list)
    user_pos: int = 0
    n_projections: int = 0
    last_spectrum: tuple | None = None

    def _generate(self, problem, state):
        st = self.strategy
        if st.kind == "user":
            k = self.user_pos % len(st.shifts)
            self.user_pos += 1
            first = st.shifts[k]
            out = [first]
            if not first.is_real:
                out.append(first.conjugate())
            return out
        Hp, Ep, _, kr = project_hamiltonian(problem, state, st.s)
        vals, qn = projected_eigenpairs(Hp, Ep, kr)
        self.n_projections += 1
        flip = target_half_plane(st, problem) == "right"
        if flip:
            # shifts for the negated equation, negated back below
            vals = -vals
        if st.kind == "leja":
            S, U = split_spectrum(vals)
            self.last_spectrum = (S, U)
            out = leja_generate(S, U, max(1, len(vals) // 2), st.orientation)
        else:
            st_mask = vals.real < -AXIS_TOL
            if st_mask.all() or not st_mask.any():
                mirrored = -np.conj(vals)
                on_axis = np.abs(mirrored.real) <= AXIS_TOL
                mirrored[on_axis] = -np.maximum(np.abs(mirrored[on_axis]), 1.0)
                vals = np.concatenate([vals, mirrored])
                qn = np.concatenate([qn, qn])
            self.last_spectrum = (vals[vals.real < -AXIS_TOL], vals[vals.real >= -AXIS_TOL])
            out = hamiltonian_shifts(vals, qn, st.orientation)
        if flip:
            out = [ShiftPair(-x.alpha, -x.beta, x.origin) for x in out]
        sp = st.effective_s_prime
        if sp is not None:
            out = _truncate(out, sp)
        return out

    def next_shift(self, problem, state, probe=None):
        """Next usable pair; nonreal pairs drag their conjugate partner along.

        Returns ``(pair, partner_or_None)``.  ``probe(pair)`` must raise a
        :class:`ShiftError` for unusable shifts.
        """
        if self.strategy.recompute_each_iteration:
            self.pending = []
        tried = []
        # a user list is cycled one entry per generation
        budget = len(self.strategy.shifts) if self.strategy.kind == "user" else 1
        generations = 0
        while True:
            if not self.pending:
                if generations >= budget and tried:
                    break
                fresh = self._generate(problem, state)
                self.generated.extend(fresh)
                self.pending = list(fresh)
                generations += 1
                if not self.pending:
                    break
            pair = self.pending.pop(0)
            partner = None
            if not pair.is_real and self.pending and self.pending[0].origin == "conjugate_partner":
                partner = self.pending.pop(0)
            try:
                if probe is not None:
                    probe(pair)
                return pair, partner
            except ShiftError:
                tried.append(pair)
                if len(tried) >= 50:
                    break
        if not tried:
            raise NoValidShift("no shift candidates were generated")
        last = tried[-1]
        bump = lambda z: z + 1e-8 * (1.0 + abs(z))
        try:
            pair = ShiftPair(bump(last.alpha), bump(last.beta), last.origin)
            if probe is not None:
                probe(pair)
            return pair, None
        except (ShiftError, ValueError) as exc:
            raise NoValidShift(f"all {len(tried)} candidates rejected") from exc


def _truncate(pairs, sp):
    out = pairs[:sp]
    if out and not out[-1].is_real and out[-1].origin != "conjugate_partner" and len(pairs) > sp:
        out.append(pairs[sp])
    return out


# -- diagnostics --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShiftDiagnostics:
    kappa_t: float
    disk_stable: tuple
    disk_anti: tuple
    a: float
    b: float
    c: float
    p: float
    asymptotic_rate: float | None
    unbounded: bool


def enclosing_disk(points):
    """Smallest enclosing disk ``(center, radius)`` (Welzl, deterministic)."""
    pts = [complex(z) for z in points]
    if not pts:
        raise EmptyCandidates("empty point set")
    rng = np.random.default_rng(12345)
    order = rng.permutation(len(pts))
    pts = [pts[i] for i in order]

    def contains(disk, z):
        return abs(z - disk[0]) <= disk[1] * (1 + 1e-12) + 1e-14

    def from2(a, b):
        return ((a + b) / 2, abs(a - b) / 2)

    def from3(a, b, c):
        ax, ay, bx, by, cx, cy = a.real, a.imag, b.real, b.imag, c.real, c.imag
        d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if d == 0:
            cands = [from2(a, b), from2(a, c), from2(b, c)]
            return max(cands, key=lambda x: x[1])
        ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
        uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
        ctr = complex(ux, uy)
        return (ctr, abs(a - ctr))

    disk = (pts[0], 0.0)
    for i, z in enumerate(pts):
        if contains(disk, z):
            continue
        disk = (z, 0.0)
        for j in range(i):
            if contains(disk, pts[j]):
                continue
            disk = from2(z, pts[j])
            for k in range(j):
                if not contains(disk, pts[k]):
                    disk = from3(z, pts[j], pts[k])
    return disk


def kappa_diagnostics(shifts, stable_set, anti_set):
    """Zolotarev ratio of a shift list and the disk-based asymptotic rate."""
    pairs = [as_shift(s) for s in shifts]
    S = [complex(z) for z in stable_set]
    U = [complex(z) for z in anti_set]
    if not S or not U:
        raise EmptyCandidates("both sets must be nonempty")
    ab = [(p.alpha, p.beta) for p in pairs]
    for z in S + U:
        for a, _ in ab:
            if z + a == 0:
                raise PoleHit(f"candidate {z} is a pole")
    top = max(_rational_abs(ab, z) for z in S)
    low = min(_rational_abs(ab, z) for z in U)
    kappa = math.inf if top == 0 else low / top
    ds, da = enclosing_disk(S), enclosing_disk(U)
    a, b = ds[1], da[1]
    c = abs(ds[0] - da[0])
    if a == 0 or b == 0:
        return ShiftDiagnostics(kappa, ds, da, a, b, c, math.inf, None, True)
    p = (c * c - a * a - b * b) / (2 * a * b)
    rate = p + math.sqrt(p * p - 1) if p > 1 else None
    return ShiftDiagnostics(kappa, ds, da, a, b, c, p, rate, False)
