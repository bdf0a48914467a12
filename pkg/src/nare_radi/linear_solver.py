"""Shifted linear solves ``(A + beta M) x = b`` and ``y (D + alpha N) = r``.

Complex shifts are handled in real arithmetic through the doubled block
matrices

    A-side:  [[A + Re(b) M, -Im(b) M], [Im(b) M, A + Re(b) M]]
    D-side:  [[D + Re(a) N,  Im(a) N], [-Im(a) N, D + Re(a) N]]

whose solutions stack the real and imaginary parts of the complex solve.
"""

from __future__ import annotations

import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .exceptions import IllConditionedShift, SingularShift

EPS = np.finfo(float).eps
COND_LIMIT = 1.0 / (100.0 * EPS)
SIDES = ("A", "D")


def imag_tol(shift):
    return 1e-14 * (1.0 + abs(shift))


def is_complex_shift(shift):
    return abs(complex(shift).imag) > imag_tol(shift)


def _is_diagonal(op):
    if op is None:
        return True
    if sp.issparse(op):
        coo = op.tocoo()
        return bool(np.all(coo.row == coo.col))
    return False


def _diag_of(op, size):
    if op is None:
        return np.ones(size)
    return np.asarray(op.diagonal(), dtype=float)


# -- factorization handles ------------------------------------------------------


class _DenseLU:
    def __init__(self, mat):
        mat = np.asarray(mat, dtype=float)
        anorm = np.linalg.norm(mat, 1)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            self.lu, self.piv = la.lu_factor(mat, check_finite=False)
        if np.any(np.diag(self.lu) == 0.0):
            raise SingularShift("exact zero pivot")
        rcond, info = lapack.dgecon(self.lu, anorm, norm="1")
        self.cond = np.inf if rcond == 0.0 else 1.0 / rcond

    def solve(self, b, trans):
        return la.lu_solve((self.lu, self.piv), b, trans=int(trans), check_finite=False)


class _SparseLU:
    def __init__(self, mat, perm_c):
        mat = sp.csc_matrix(mat)
        self.perm_c = perm_c
        try:
            self.lu = spla.splu(mat[:, perm_c], permc_spec="NATURAL")
        except RuntimeError as exc:
            raise SingularShift(str(exc)) from exc
        if not np.all(np.isfinite(self.lu.U.diagonal())) or np.any(self.lu.U.diagonal() == 0):
            raise SingularShift("exact zero pivot")
        size = mat.shape[0]
        op = spla.LinearOperator(
            (size, size), matvec=lambda v: self.solve(v, False),
            rmatvec=lambda v: self.solve(v, True), dtype=float,
        )
        anorm = spla.norm(mat, 1)
        if size <= 4:
            inv = self.solve(np.eye(size), False)
            self.cond = anorm * np.abs(inv).sum(axis=0).max()
        else:
            self.cond = anorm * spla.onenormest(op)

    def solve(self, b, trans):
        b = np.asarray(b, dtype=float)
        if not trans:
            y = self.lu.solve(b)
            x = np.empty_like(y)
            x[self.perm_c] = y
            return x
        return self.lu.solve(b[self.perm_c], trans="T")


class _Diagonal:
    """Diagonal base and mass; complex shifts are divided out directly."""

    def __init__(self, dvals):
        if np.any(dvals == 0):
            raise SingularShift("exact zero pivot")
        self.d = dvals
        mags = np.abs(dvals)
        self.cond = float(mags.max() / mags.min())

    def solve(self, b, trans):
        d = self.d
        if np.iscomplexobj(d):
            # block layout of the doubled real system
            size = d.shape[0]
            b = np.asarray(b, dtype=float)
            z = b[:size] + 1j * b[size:]
            dd = np.conj(d) if trans else d
            z = z / (dd if z.ndim == 1 else dd[:, None])
            return np.concatenate([z.real, z.imag], axis=0)
        return b / (d if np.ndim(b) == 1 else d[:, None])


@dataclass(frozen=True, eq=False)
class ShiftedFactorization:
    """Factorization of ``base + shift * mass`` (or its doubled real form).

    ``transposed`` marks a handle borrowed from the other side, e.g. the
    D-side of a CARE reusing ``(A + beta M) = (D + beta N)^T``.
    """

    side: str
    shift: complex
    mode: str
    handle: object
    cond_estimate: float
    size: int
    transposed: bool = False

    def _apply(self, b, trans):
        return self.handle.solve(b, bool(trans) ^ self.transposed)

    def _pad(self, rows, k):
        if rows.shape[0] == self.size and self.mode == "complex_block":
            rows = np.vstack([rows, np.zeros((self.size, k))])
        want = 2 * self.size if self.mode == "complex_block" else self.size
        if rows.shape[0] != want:
            raise ValueError(f"expected {want} rows, got {rows.shape[0]}")
        return rows

    def solve_columns(self, rhs):
        """Solve ``K x = rhs``; for complex shifts returns ``[Re x; Im x]``."""
        rhs = np.asarray(rhs, dtype=float)
        vec = rhs.ndim == 1
        b = self._pad(rhs.reshape(rhs.shape[0], -1), 1 if vec else rhs.shape[1])
        x = self._apply(b, False)
        return x.ravel() if vec else x

    def solve_rows(self, lhs):
        """Return ``lhs K^{-1}``; for complex shifts returns ``[Re y, Im y]``."""
        lhs = np.atleast_2d(np.asarray(lhs, dtype=float))
        b = self._pad(lhs.T, lhs.shape[0])
        return self._apply(b, True).T

    def flipped(self):
        other = "D" if self.side == "A" else "A"
        return ShiftedFactorization(
            other, self.shift, self.mode, self.handle, self.cond_estimate,
            self.size, not self.transposed,
        )


def _block_matrix(base, mass, shift, side):
    size = base.shape[0]
    re, im = shift.real, shift.imag
    if side == "D":
        im = -im
    sparse = sp.issparse(base) or sp.issparse(mass)
    if sparse:
        I = sp.identity(size, format="csc") if mass is None else sp.csc_matrix(mass)
        diag = sp.csc_matrix(base) + re * I
        return sp.bmat([[diag, -im * I], [im * I, diag]], format="csc")
    I = np.eye(size) if mass is None else np.asarray(mass, dtype=float)
    diag = np.asarray(base, dtype=float) + re * I
    return np.block([[diag, -im * I], [im * I, diag]])


def _shifted_matrix(base, mass, shift):
    size = base.shape[0]
    if sp.issparse(base) or sp.issparse(mass):
        I = sp.identity(size, format="csc") if mass is None else sp.csc_matrix(mass)
        return (sp.csc_matrix(base) + shift * I).tocsc()
    I = np.eye(size) if mass is None else np.asarray(mass, dtype=float)
    return np.asarray(base, dtype=float) + shift * I


def _ordering(mat):
    lu = spla.splu(sp.csc_matrix(mat), permc_spec="COLAMD")
    return lu.perm_c.copy()


def factor_shifted(base, mass, shift, side, perm_c=None):
    """Factorize ``base + shift * mass`` (doubled when ``shift`` is nonreal).

    Raises :class:`SingularShift` on a zero pivot and
    :class:`IllConditionedShift` when the 1-norm condition estimate exceeds
    ``1 / (100 eps)``.  ``perm_c`` reuses a precomputed column ordering for
    sparse input.
    """
    if side not in SIDES:
        raise ValueError(f"side must be 'A' or 'D', got {side!r}")
    shift = complex(shift)
    size = base.shape[0]
    if base.shape != (size, size):
        raise ValueError("base must be square")
    if mass is not None and mass.shape != base.shape:
        raise ValueError("mass must match base")
    mode = "complex_block" if is_complex_shift(shift) else "real"
    if mode == "real":
        shift = complex(shift.real, 0.0)

    if sp.issparse(base) and _is_diagonal(base) and _is_diagonal(mass):
        d = _diag_of(base, size) + (shift if mode == "complex_block" else shift.real) * _diag_of(mass, size)
        if mode == "complex_block" and side == "D":
            # the D-side block is the real form of conj(D + alpha N)
            d = np.conj(d)
        handle = _Diagonal(d)
    elif sp.issparse(base) or sp.issparse(mass):
        if mode == "complex_block":
            mat = _block_matrix(base, mass, shift, side)
        else:
            mat = _shifted_matrix(base, mass, shift.real)
        if perm_c is None or perm_c.shape[0] != mat.shape[0]:
            try:
                perm_c = _ordering(mat)
            except RuntimeError as exc:
                raise SingularShift(str(exc)) from exc
        handle = _SparseLU(mat, perm_c)
    else:
        if mode == "complex_block":
            mat = _block_matrix(base, mass, shift, side)
        else:
            mat = _shifted_matrix(base, mass, shift.real)
        if not np.all(np.isfinite(mat)):
            raise SingularShift("non-finite matrix entries")
        handle = _DenseLU(mat)

    if not np.isfinite(handle.cond):
        raise SingularShift("exact zero pivot")
    if handle.cond > COND_LIMIT:
        raise IllConditionedShift(
            f"condition estimate {handle.cond:.3e} exceeds {COND_LIMIT:.3e}",
            cond_estimate=handle.cond,
        )
    return ShiftedFactorization(side, shift, mode, handle, float(max(handle.cond, 1.0)), size)


def solve_columns(f, rhs):
    if f.side != "A":
        raise ValueError("solve_columns expects an A-side factorization")
    return f.solve_columns(rhs)


def solve_rows(f, lhs):
    if f.side != "D":
        raise ValueError("solve_rows expects a D-side factorization")
    return f.solve_rows(lhs)


# -- cached solver ----------------------------------------------------------------


def _key(side, shift):
    shift = complex(shift)
    if not is_complex_shift(shift):
        shift = complex(shift.real, 0.0)
    return side, float(f"{shift.real:.15e}"), float(f"{shift.imag:.15e}")


class ShiftedSolver:
    """LRU cache of shifted factorizations for one problem.

    ``base_A``/``mass_A`` and ``base_D``/``mass_D`` are the operators of the
    two sides.  With ``care_transpose=True`` the D-side factorization for a
    shift is borrowed (transposed) from the A-side factorization of the
    same shift.
    """

    def __init__(self, base_A, mass_A, base_D, mass_D, capacity=8, care_transpose=False):
        self.ops = {"A": (base_A, mass_A), "D": (base_D, mass_D)}
        self.capacity = capacity
        self.care_transpose = care_transpose
        self._cache = OrderedDict()
        self._orderings = {}
        self._lock = threading.Lock()
        self.n_factorizations = 0

    @classmethod
    def for_problem(cls, problem, capacity=8):
        return cls(problem.A, problem.M, problem.D, problem.N, capacity=capacity,
                   care_transpose=problem.kind == "care")

    def get(self, side, shift):
        key = _key(side, shift)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        if side == "D" and self.care_transpose:
            f = self.get("A", shift).flipped()
        else:
            base, mass = self.ops[side]
            mode = "complex_block" if is_complex_shift(shift) else "real"
            perm = self._orderings.get((side, mode))
            f = factor_shifted(base, mass, shift, side, perm_c=perm)
            if isinstance(f.handle, _SparseLU):
                self._orderings.setdefault((side, mode), f.handle.perm_c)
            self.n_factorizations += 1
        with self._lock:
            self._cache[key] = f
            self._cache.move_to_end(key)
            while len(self._cache) > self.capacity:
                self._cache.popitem(last=False)
        return f

    def probe(self, alpha, beta):
        """Factorize both sides for ``(alpha, beta)``; raises on failure."""
        return self.get("A", beta), self.get("D", alpha)

    def clear(self):
        with self._lock:
            self._cache.clear()
