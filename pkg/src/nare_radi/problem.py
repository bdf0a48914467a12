"""Problem definitions for nonsymmetric algebraic Riccati equations.

The equation family handled here is

    M X C X N - M X D - A X N + B = 0,        B = LB @ RB,  C = LC @ RC,

with ``M`` and ``N`` defaulting to identities.  Structured variants carry
their low-rank offsets separately so that the sparse parts of ``A`` and
``D`` are never modified:

* ``strengthened``: the effective coefficients are ``A - LPhi @ RC`` and
  ``D - LC @ RPhi``;
* ``weak``: additionally ``- LA @ RA`` and ``- LD @ RD``;
* ``care``: produced by :func:`from_care`, ``A`` is a transpose view of ``D``.

Everything that materializes ``B``, ``C`` or ``X`` densely lives in this
module and is meant for small reference computations only.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

KINDS = ("plain", "generalized", "strengthened", "weak", "care")

#: dense reference evaluation refuses anything larger than this many entries
DENSE_LIMIT = 4_000_000


def _shape(op):
    return None if op is None else tuple(op.shape)


def to_dense(op):
    """Return ``op`` as a dense ndarray (sparse input is expanded)."""
    if op is None:
        return None
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op)


def _as_operator(op):
    if op is None or sp.issparse(op):
        return op
    return np.atleast_2d(np.asarray(op, dtype=float))


def _as_factor(arr):
    if arr is None:
        return None
    if sp.issparse(arr):
        arr = arr.toarray()
    return np.atleast_2d(np.asarray(arr, dtype=float))


@dataclass(frozen=True, eq=False)
class NareProblem:
    """Coefficients of one NARE instance.

    ``A`` (m x m) and ``D`` (n x n) may be dense arrays or scipy sparse
    matrices.  For ``strengthened`` and ``weak`` problems they hold the sparse
    parts A' and D'; the low-rank offsets are applied implicitly.
    """

    A: object
    D: object
    LB: np.ndarray
    RB: np.ndarray
    LC: np.ndarray
    RC: np.ndarray
    M: object = None
    N: object = None
    LPhi: np.ndarray | None = None
    RPhi: np.ndarray | None = None
    LA: np.ndarray | None = None
    RA: np.ndarray | None = None
    LD: np.ndarray | None = None
    RD: np.ndarray | None = None
    kind: str = "plain"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("A", "D", "M", "N"):
            object.__setattr__(self, name, _as_operator(getattr(self, name)))
        for name in ("LB", "RB", "LC", "RC", "LPhi", "RPhi", "LA", "RA", "LD", "RD"):
            object.__setattr__(self, name, _as_factor(getattr(self, name)))

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.D.shape[0]

    @property
    def p(self):
        return self.LB.shape[1]

    @property
    def q(self):
        return self.LC.shape[1]

    @property
    def w(self):
        return 0 if self.LA is None else self.LA.shape[1]

    @property
    def has_mass(self):
        return self.M is not None or self.N is not None

    @property
    def is_weak(self):
        return self.kind == "weak"

    def with_(self, **changes):
        return replace(self, **changes)

    # -- dense reference helpers -------------------------------------------

    def _guard(self):
        if self.m * self.n > DENSE_LIMIT or max(self.m, self.n) ** 2 > DENSE_LIMIT:
            from .exceptions import SizeGuardError

            raise SizeGuardError(
                f"dense evaluation refused for m={self.m}, n={self.n}"
            )

    def effective_A(self):
        """Dense ``A`` including strengthened/weak offsets (mass not applied)."""
        self._guard()
        A = to_dense(self.A).astype(float)
        if self.LPhi is not None:
            A = A - self.LPhi @ self.RC
        if self.LA is not None:
            A = A - self.LA @ self.RA
        return A

    def effective_D(self):
        self._guard()
        D = to_dense(self.D).astype(float)
        if self.RPhi is not None:
            D = D - self.LC @ self.RPhi
        if self.LD is not None:
            D = D - self.LD @ self.RD
        return D

    def dense_mass(self):
        self._guard()
        M = np.eye(self.m) if self.M is None else to_dense(self.M)
        N = np.eye(self.n) if self.N is None else to_dense(self.N)
        return M, N

    def dense_coefficients(self):
        """Coefficients ``(A, D, LB, RB, LC, RC)`` of the equivalent plain NARE.

        Mass matrices are folded in: ``A <- M^{-1} A``, ``D <- D N^{-1}``,
        ``LB <- M^{-1} LB`` and ``RB <- RB N^{-1}``.
        """
        A, D = self.effective_A(), self.effective_D()
        LB, RB = self.LB, self.RB
        if self.M is not None:
            M = to_dense(self.M)
            A = la.solve(M, A)
            LB = la.solve(M, LB)
        if self.N is not None:
            N = to_dense(self.N)
            D = la.solve(N.T, D.T).T
            RB = la.solve(N.T, RB.T).T
        return A, D, LB, RB, self.LC, self.RC

    def reduced(self):
        """Equivalent dense ``plain`` problem (offsets and mass folded in)."""
        A, D, LB, RB, LC, RC = self.dense_coefficients()
        return NareProblem(A, D, LB, RB, LC, RC, kind="plain")


@dataclass(frozen=True, eq=False)
class DenseSolutionCandidate:
    """A dense solution together with the half-plane of ``D - C X``."""

    X: np.ndarray
    classification: str
    max_real_part: float


# -- validation ---------------------------------------------------------------


def validate(problem):
    """List the invariant violations of ``problem``; empty when it is valid."""
    pb = problem
    out = []
    if pb.kind not in KINDS:
        out.append(f"unknown kind {pb.kind!r}")
    sA, sD = _shape(pb.A), _shape(pb.D)
    if len(sA) != 2 or sA[0] != sA[1]:
        out.append("A must be square")
    if len(sD) != 2 or sD[0] != sD[1]:
        out.append("D must be square")
    if out:
        return out
    m, n = sA[0], sD[0]

    def pair(lname, rname, rows, cols):
        L, R = getattr(pb, lname), getattr(pb, rname)
        if L is None or R is None:
            return None
        if L.shape[0] != rows:
            out.append(f"{lname} must have {rows} rows, got {L.shape[0]}")
        if R.shape[1] != cols:
            out.append(f"{rname} must have {cols} columns, got {R.shape[1]}")
        if L.shape[1] != R.shape[0]:
            out.append(f"{lname}/{rname} inner dimension mismatch")
        return L.shape[1]

    p = pair("LB", "RB", m, n)
    q = pair("LC", "RC", n, m)
    if p is not None and p < 1:
        out.append("rank p must be at least 1")
    if q is not None and q < 1:
        out.append("rank q must be at least 1")

    if (pb.LPhi is None) != (pb.RPhi is None):
        out.append("LPhi and RPhi must be given together")
    if pb.LPhi is not None:
        if pb.LPhi.shape != (m, q):
            out.append(f"LPhi must be {m}x{q}, got {pb.LPhi.shape[0]}x{pb.LPhi.shape[1]}")
        if pb.RPhi.shape != (q, n):
            out.append(f"RPhi must be {q}x{n}, got {pb.RPhi.shape[0]}x{pb.RPhi.shape[1]}")

    weak = ("LA", "RA", "LD", "RD")
    present = [getattr(pb, k) is not None for k in weak]
    if pb.kind == "weak":
        for k, has in zip(weak, present):
            if not has:
                out.append(f"weak structure requires {k}")
    elif any(present):
        out.append("LA/RA/LD/RD are only allowed for kind='weak'")
    if all(present):
        wa = pair("LA", "RA", m, m)
        wd = pair("LD", "RD", n, n)
        if wa is not None and wd is not None and wa != wd:
            out.append(f"weak structure requires equal ranks, got {wa} and {wd}")
    if pb.kind in ("strengthened", "weak") and pb.LPhi is None:
        out.append(f"kind={pb.kind} requires LPhi and RPhi")

    if pb.kind == "care":
        if m != n:
            out.append("care problems require m == n")
        elif not _is_transpose(pb.A, pb.D):
            out.append("care problems require A == D^T")

    for name, size in (("M", m), ("N", n)):
        op = getattr(pb, name)
        if op is None:
            continue
        if _shape(op) != (size, size):
            out.append(f"{name} must be {size}x{size}")
            continue
        from .linear_solver import factor_shifted
        from .exceptions import ShiftError

        try:
            factor_shifted(op, None, 0.0, "A")
        except ShiftError:
            out.append(f"{name} is singular or ill-conditioned")
    return out


def check_problem(problem):
    """Raise ``ValueError`` listing every violation, else return ``problem``."""
    errs = validate(problem)
    if errs:
        raise ValueError("invalid NARE problem: " + "; ".join(errs))
    return problem


def _is_transpose(A, D):
    if sp.issparse(A) or sp.issparse(D):
        diff = sp.csr_matrix(A) - sp.csr_matrix(D).T
        return diff.count_nonzero() == 0 or abs(diff).max() == 0
    return np.array_equal(np.asarray(A), np.asarray(D).T)


# -- constructors -------------------------------------------------------------


def from_care(Acare, Bcare, Ccare, Ecare=None):
    """Rewrite ``E^T X A + A^T X E - E^T X B B^T X E + C^T C = 0`` as a NARE.

    The substitution is ``D = Acare``, ``A = Acare^T``, ``LC = Bcare``,
    ``RC = Bcare^T``, ``RB = Ccare``, ``LB = -Ccare^T`` and, when ``Ecare``
    is given, ``M = Ecare^T``, ``N = Ecare``.
    """
    Acare = _as_operator(Acare)
    Bcare = _as_factor(Bcare)
    Ccare = _as_factor(Ccare)
    n = Acare.shape[0]
    if Acare.shape != (n, n):
        raise ValueError("Acare must be square")
    if Bcare.shape[0] != n:
        raise ValueError(f"Bcare must have {n} rows, got {Bcare.shape[0]}")
    if Ccare.shape[1] != n:
        raise ValueError(f"Ccare must have {n} columns, got {Ccare.shape[1]}")
    M = N = None
    if Ecare is not None:
        Ecare = _as_operator(Ecare)
        if Ecare.shape != (n, n):
            raise ValueError("Ecare must match Acare")
        M, N = Ecare.T, Ecare
    return NareProblem(
        A=Acare.T, D=Acare, LB=-Ccare.T, RB=Ccare, LC=Bcare, RC=Bcare.T.copy(),
        M=M, N=N, kind="care",
    )


# -- dense reference evaluation -------------------------------------------------


def residual_dense(problem, X):
    """Evaluate ``R(X)`` densely; returns ``(R, ||R||_F)``."""
    pb = problem
    pb._guard()
    X = np.asarray(X)
    A, D = pb.effective_A(), pb.effective_D()
    XLC = X @ pb.LC
    RCX = pb.RC @ X
    if pb.M is None and pb.N is None:
        R = XLC @ RCX - X @ D - A @ X
    else:
        M, N = pb.dense_mass()
        MX, XN = M @ X, X @ N
        R = (MX @ pb.LC) @ (pb.RC @ XN) - MX @ D - A @ XN
    R = R + pb.LB @ pb.RB
    return R, float(np.linalg.norm(R))


def residual_scale(problem, X):
    """Sum of the Frobenius norms of the four terms of ``R(X)``.

    Near a solution the terms cancel, so this is the natural yardstick for
    rounding errors in residual computations.
    """
    pb = problem
    X = np.asarray(X)
    A, D = pb.effective_A(), pb.effective_D()
    M, N = pb.dense_mass()
    MX, XN = M @ X, X @ N
    terms = ((MX @ pb.LC) @ (pb.RC @ XN), MX @ D, A @ XN, pb.LB @ pb.RB)
    return float(sum(np.linalg.norm(t) for t in terms))


def residual_assembled(problem, X):
    """Reference residual with ``B`` and ``C`` explicitly assembled."""
    pb = problem
    A, D = pb.effective_A(), pb.effective_D()
    B, C = pb.LB @ pb.RB, pb.LC @ pb.RC
    M, N = pb.dense_mass()
    return M @ X @ C @ X @ N - M @ X @ D - A @ X @ N + B


def hamiltonian(problem, Xshift=None):
    """Linearizing matrix ``[[D, -C], [B, -A]]`` of the (reduced) problem.

    With ``Xshift`` the matrix of the equation for the correction
    ``X - Xshift`` is returned: ``[[D - C Xs, -C], [R(Xs), -(A - Xs C)]]``.
    Mass matrices are folded in first.
    """
    A, D, LB, RB, LC, RC = problem.dense_coefficients()
    C = LC @ RC
    B = LB @ RB
    if Xshift is None:
        return np.block([[D, -C], [B, -A]])
    Xs = np.asarray(Xshift)
    R = Xs @ C @ Xs - Xs @ D - A @ Xs + B
    return np.block([[D - C @ Xs, -C], [R, -(A - Xs @ C)]])


def classify(problem, X, tol=1e-10):
    """Classify ``X`` by the sign of the real parts of ``eig(D - C X)``."""
    A, D, LB, RB, LC, RC = problem.dense_coefficients()
    K = D - LC @ (RC @ X)
    ev = np.linalg.eigvals(K)
    scale = tol * max(1.0, np.abs(ev).max(initial=0.0))
    top, bottom = ev.real.max(), ev.real.min()
    if top < -scale:
        label = "stabilizing"
    elif bottom > scale:
        label = "anti_stabilizing"
    else:
        label = "unknown"
    return DenseSolutionCandidate(np.asarray(X), label, float(top))
