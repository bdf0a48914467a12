"""Dense reference implementations used to cross-check the RADI engine.

Everything here forms full matrices and works in complex arithmetic where
convenient.  Problems are reduced first (mass matrices and structured
offsets folded in), so the formulas below are stated for

    X C X - X D - A X + B = 0,    B = LB RB,  C = LC RC.

Shift lists are sequences of ``(alpha, beta)`` tuples or objects with
``alpha``/``beta`` attributes.  Throughout, ``C^{a,b}(lam) = (b - lam) /
(lam + a)`` and the products

    C_{i,j}(lam) = prod_{l=1..j} C^{a_{i-l}, b_{i-l}}(lam)

use the shifts in the order they are applied.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .exceptions import (
    AssumptionViolated,
    IterationBreakdown,
    NoSplitting,
    PoleHit,
    SingularBasis,
    SingularShift,
)

RCOND_MIN = 1e-14


def _pair(shift):
    if hasattr(shift, "alpha"):
        return complex(shift.alpha), complex(shift.beta)
    a, b = shift
    return complex(a), complex(b)


def _pairs(shifts, t=None):
    out = [_pair(s) for s in shifts]
    if t is not None:
        if len(out) < t:
            raise ValueError(f"need {t} shifts, got {len(out)}")
        out = out[:t]
    return out


def _real_if_close(mat, like):
    if np.iscomplexobj(like):
        return mat
    if np.iscomplexobj(mat) and np.all(np.abs(mat.imag) <= 1e-13 * (1 + np.abs(mat).max(initial=0))):
        return mat.real.copy()
    return mat


def _checked_solve(mat, rhs, name):
    mat = np.asarray(mat)
    if mat.size == 0:
        return rhs
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(mat, check_finite=False)
    diag = np.abs(np.diag(lu))
    scale = max(np.abs(mat).max(), 1e-300)
    if diag.min() <= 1e-14 * scale or not np.all(np.isfinite(lu)):
        raise AssumptionViolated(name)
    return la.lu_solve((lu, piv), rhs, check_finite=False)


def _coefficients(problem):
    if hasattr(problem, "dense_coefficients"):
        return problem.dense_coefficients()
    return tuple(np.atleast_2d(np.asarray(x)) for x in problem)


# -- scalar rational machinery --------------------------------------------------


def cayley(Mmat, alpha, beta):
    """``C^{alpha,beta}(M) = (alpha I + M)^{-1} (beta I - M)``."""
    Mmat = np.atleast_2d(np.asarray(Mmat))
    eye = np.eye(Mmat.shape[0])
    try:
        return _checked_solve(alpha * eye + Mmat, beta * eye - Mmat, "alpha I + M")
    except AssumptionViolated as exc:
        raise SingularShift("alpha I + M is singular") from exc


def rational_value(shifts, i, j, lam, variant="plain"):
    """Evaluate ``C_{i,j}`` (``plain``), its ``over`` or ``under`` variant.

    ``over`` divides by ``lam + a_{i-j-1}``, ``under`` by ``lam + a_i``.
    """
    sh = _pairs(shifts)
    lam = complex(lam)
    val = 1.0 + 0j
    for l in range(1, j + 1):
        a, b = sh[i - l]
        den = lam + a
        if den == 0:
            raise PoleHit(f"lambda = {-a} is a pole")
        val *= (b - lam) / den
    if variant == "plain":
        return val
    a = sh[i - j - 1][0] if variant == "over" else sh[i][0]
    if variant not in ("over", "under"):
        raise ValueError(f"unknown variant {variant!r}")
    if lam + a == 0:
        raise PoleHit(f"lambda = {-a} is a pole")
    return val / (lam + a)


def _mat_cayley_product(M, sh, i, j, swap=False):
    """Matrix version of ``C_{i,j}(M)``; ``swap`` exchanges alpha and beta."""
    eye = np.eye(M.shape[0])
    out = eye.astype(complex)
    for l in range(1, j + 1):
        a, b = sh[i - l]
        if swap:
            a, b = b, a
        out = la.solve(a * eye + M, (b * eye - M) @ out)
    return out


def _mat_over(M, sh, i, j, swap=False):
    a = sh[i - j - 1][1 if swap else 0]
    eye = np.eye(M.shape[0])
    return la.solve(a * eye + M, _mat_cayley_product(M, sh, i, j, swap))


def _mat_under(M, sh, i, j, swap=False):
    a = sh[i][1 if swap else 0]
    eye = np.eye(M.shape[0])
    return la.solve(a * eye + M, _mat_cayley_product(M, sh, i, j, swap))


def omega_matrix(shifts, t=None):
    """``Omega_t = diag(a_{t-1}+b_{t-1}, ..., a_0+b_0)``."""
    sh = _pairs(shifts, t)
    return np.diag([a + b for a, b in reversed(sh)])


def j_matrix(t):
    return np.diag([(-1.0) ** k for k in range(t)])


def p_matrix(shifts, t=None, swap=False):
    """Lower triangular ``P_t`` (``swap=True`` gives ``P^{beta,alpha}``)."""
    sh = _pairs(shifts, t)
    t = len(sh)
    P = np.zeros((t, t), dtype=complex)
    for col in range(t):
        a, b = sh[t - 1 - col]
        if swap:
            a, b = b, a
        P[col, col] = a
        for row in range(col + 1, t):
            P[row, col] = a + b
    return P


def v_vector(shifts, lam, t=None, swap=False):
    """Column ``V_t(lam)`` with entries ``over C_{t,k}(lam)``, k = 0..t-1."""
    sh = _swap(_pairs(shifts, t), swap)
    t = len(sh)
    return np.array([rational_value(sh, t, k, lam, "over") for k in range(t)])


def v_under_vector(shifts, lam, t=None, swap=False):
    sh = _swap(_pairs(shifts, t), swap)
    t = len(sh)
    return np.array([rational_value(sh, t - 1 - k, t - 1 - k, lam, "under") for k in range(t)])


def t_matrix(shifts, lam, t=None, swap=False):
    """Lower triangular ``T_t(lam)`` of the flexible closed form."""
    sh = _swap(_pairs(shifts, t), swap)
    t = len(sh)
    lam = complex(lam)
    T = np.zeros((t, t), dtype=complex)
    for c in range(t):
        a, b = sh[t - 1 - c]
        T[c, c] = rational_value(sh, t - c, 0, lam, "over") / (a + b)
        for r in range(c + 1, t):
            T[r, c] = rational_value(sh, t - 1 - c, r - 1 - c, lam, "over") / (a + lam)
    return T


def _swap(sh, swap):
    return [(b, a) for a, b in sh] if swap else sh


# -- coefficient formulas ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CayleyCoefficients:
    E0: np.ndarray
    F0: np.ndarray
    G0: np.ndarray
    H0: np.ndarray
    shift: tuple
    At: np.ndarray
    Dt: np.ndarray
    L_B: np.ndarray
    R_C: np.ndarray
    L_C: np.ndarray
    R_B: np.ndarray
    YA: np.ndarray
    YD: np.ndarray
    H0_lowrank: np.ndarray
    E0_lowrank: np.ndarray
    F0_lowrank: np.ndarray
    G0_lowrank: np.ndarray


def cayley_coefficients(problem, shift):
    """``E0, F0, G0, H0`` for one shift, directly and in low-rank form."""
    A, D, LB, RB, LC, RC = _coefficients(problem)
    alpha, beta = _pair(shift)
    m, n = A.shape[0], D.shape[0]
    Im, In = np.eye(m), np.eye(n)
    B, C = LB @ RB, LC @ RC
    s = alpha + beta
    A_b, A_ma = A + beta * Im, A - alpha * Im
    D_a, D_mb = D + alpha * In, D - beta * In

    Dinv_C = _checked_solve(D_a, C, "D_alpha")
    Ainv_B = _checked_solve(A_b, B, "A_beta")
    SA = A_b - B @ Dinv_C
    SD = D_a - C @ Ainv_B
    F0 = -_checked_solve(SA, A_ma - B @ Dinv_C, "A_beta - B D_alpha^{-1} C")
    E0 = -_checked_solve(SD, D_mb - C @ Ainv_B, "D_alpha - C A_beta^{-1} B")
    H0 = s * _checked_solve(SA, B @ la.inv(D_a), "A_beta - B D_alpha^{-1} C")
    G0 = s * _checked_solve(SD, C @ la.inv(A_b), "D_alpha - C A_beta^{-1} B")
    for name, mat in (("A_{-alpha} - B D_alpha^{-1} C", A_ma - B @ Dinv_C),
                      ("D_{-beta} - C A_beta^{-1} B", D_mb - C @ Ainv_B)):
        _checked_solve(mat, np.eye(mat.shape[0]), name)

    At = -la.solve(A_b, A_ma)
    Dt = -la.solve(D_a, D_mb)
    L_B = la.solve(A_b, LB)
    R_C = s * la.solve(A_b.T, RC.T).T
    L_C = la.solve(D_a, LC)
    R_B = s * la.solve(D_a.T, RB.T).T
    YA = RC @ L_B
    YD = RB @ L_C
    p, q = LB.shape[1], LC.shape[1]
    H0_lr = L_B @ la.solve(np.eye(p) - YD @ YA, R_B)
    E0_lr = Dt + L_C @ la.solve(np.eye(q) - YA @ YD, YA @ R_B)
    F0_lr = At + L_B @ la.solve(np.eye(p) - YD @ YA, YD @ R_C)
    G0_lr = L_C @ la.solve(np.eye(q) - YA @ YD, R_C)
    like = A if alpha.imag == 0 and beta.imag == 0 else 1j
    fix = lambda M: _real_if_close(M, like)
    return CayleyCoefficients(
        *(fix(M) for M in (E0, F0, G0, H0)), (alpha, beta),
        *(fix(M) for M in (At, Dt, L_B, R_C, L_C, R_B, YA, YD)),
        *(fix(M) for M in (H0_lr, E0_lr, F0_lr, G0_lr)),
    )


# -- fixed-point iterations ---------------------------------------------------------


def fixed_point_run(problem, shifts, t, X0_factors=None):
    """Iterates ``X_1..X_t`` of ``X <- H + F X (I - G X)^{-1} E``.

    The ``k``-th step uses the ``k``-th shift of ``shifts``; pass a repeated
    list for the constant-shift iteration.
    """
    A, D, LB, RB, LC, RC = _coefficients(problem)
    sh = _pairs(shifts, t)
    m, n = A.shape[0], D.shape[0]
    if X0_factors is None:
        X = np.zeros((m, n))
    else:
        GA, GD = X0_factors
        X = np.asarray(GA) @ np.asarray(GD)
    out = []
    cache = {}
    for k, shift in enumerate(sh):
        if shift not in cache:
            cache[shift] = cayley_coefficients((A, D, LB, RB, LC, RC), shift)
        co = cache[shift]
        K = np.eye(n) - co.G0 @ X
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(K)
        if np.abs(np.diag(lu)).min() <= 1e-14 * max(1.0, np.abs(K).max()):
            raise IterationBreakdown(k)
        X = co.H0 + co.F0 @ X @ la.lu_solve((lu, piv), co.E0)
        X = _real_if_close(X, A) if np.iscomplexobj(X) and np.isrealobj(A) and _conj_closed(sh[: k + 1]) else X
        out.append(X)
    return out


def _conj_closed(sh):
    """Whether a prefix of the shift list is closed under conjugation."""
    rest = list(sh)
    while rest:
        a, b = rest.pop(0)
        if a.imag == 0 and b.imag == 0:
            continue
        partner = (a.conjugate(), b.conjugate())
        if partner in rest:
            rest.remove(partner)
        else:
            return False
    return True


# -- Toeplitz closed forms ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ToeplitzFactors:
    UA: np.ndarray
    VD: np.ndarray
    UD: np.ndarray
    VA: np.ndarray
    TA: np.ndarray
    TD: np.ndarray
    Omega: np.ndarray
    J: np.ndarray
    PAB: np.ndarray
    PBA: np.ndarray
    t: int
    shifts: list
    cond_estimate: float


def toeplitz_factors(problem, shifts, t):
    """Blocks of ``X_t = UA (I - TD TA)^{-1} VD`` for a flexible shift list."""
    A, D, LB, RB, LC, RC = _coefficients(problem)
    sh = _pairs(shifts, t)
    for shift in sh:
        cayley_coefficients((A, D, LB, RB, LC, RC), shift)
    m, n = A.shape[0], D.shape[0]
    p, q = LB.shape[1], LC.shape[1]
    om = np.array([a + b for a, b in reversed(sh)])
    UA = np.zeros((m, t * p), dtype=complex)
    VD = np.zeros((t * p, n), dtype=complex)
    UD = np.zeros((n, t * q), dtype=complex)
    VA = np.zeros((t * q, m), dtype=complex)
    TA = np.zeros((t * q, t * p), dtype=complex)
    TD = np.zeros((t * p, t * q), dtype=complex)
    for k in range(t):
        i = t - 1 - k
        UA[:, k * p:(k + 1) * p] = _mat_over(A, sh, t, k, swap=True) @ LB
        VD[k * p:(k + 1) * p] = om[k] * RB @ _mat_over(D, sh, t, k)
        UD[:, k * q:(k + 1) * q] = _mat_under(D, sh, i, i) @ LC
        VA[k * q:(k + 1) * q] = om[k] * RC @ _mat_under(A, sh, i, i, swap=True)
    for j in range(t):
        for k in range(t):
            # T^{beta,alpha}_{k,j}(A) and T^{alpha,beta}_{j,k}(D)
            if k >= j:
                TA[j * q:(j + 1) * q, k * p:(k + 1) * p] = om[j] * RC @ _t_entry_mat(A, sh, k, j, True) @ LB
            if j >= k:
                TD[j * p:(j + 1) * p, k * q:(k + 1) * q] = om[j] * RB @ _t_entry_mat(D, sh, j, k, False) @ LC
    K = np.eye(t * p) - TD @ TA
    cond = np.linalg.cond(K) if K.size else 1.0
    return ToeplitzFactors(
        UA, VD, UD, VA, TA, TD, np.diag(om), j_matrix(t),
        p_matrix(sh), p_matrix(sh, swap=True), t, sh, float(cond),
    )


def _t_entry_mat(M, sh, r, c, swap):
    t = len(sh)
    s2 = _swap(sh, swap)
    a, b = s2[t - 1 - c]
    eye = np.eye(M.shape[0])
    if r == c:
        return la.solve(a * eye + M, eye) / (a + b)
    return la.solve(a * eye + M, _mat_over(M, sh, t - 1 - c, r - 1 - c, swap))


def closed_form_solution(problem, shifts, t, X0_factors=None):
    """Closed form of the ``t``-th flexible fixed-point iterate."""
    A, D, LB, RB, LC, RC = _coefficients(problem)
    sh = _pairs(shifts, t)
    tf = toeplitz_factors((A, D, LB, RB, LC, RC), sh, t)
    if X0_factors is None:
        Lft, K, Rgt = tf.UA, np.eye(tf.TD.shape[0]) - tf.TD @ tf.TA, tf.VD
    else:
        GA, GD = (np.atleast_2d(np.asarray(g)) for g in X0_factors)
        CA = _mat_cayley_product(A, sh, t, t, swap=True)
        CD = _mat_cayley_product(D, sh, t, t)
        Lft = np.hstack([tf.UA, CA @ GA])
        top = np.vstack([tf.TD, GD @ tf.UD])
        right = np.hstack([tf.TA, tf.VA @ GA])
        K = np.eye(top.shape[0]) - top @ right
        Rgt = np.vstack([tf.VD, GD @ CD])
    if K.size == 0:
        return np.zeros((A.shape[0], D.shape[0]))
    try:
        mid = _checked_solve(K, Rgt, "I - T^D T^A")
    except AssumptionViolated as exc:
        raise IterationBreakdown(t, "I - T^D T^A is numerically singular") from exc
    X = Lft @ mid
    return _real_if_close(X, A) if _conj_closed(sh) else X


def residual_factors_closed(problem, shifts, t):
    """Factors ``(LB_t, RB_t)`` with ``R(X_t) = LB_t RB_t`` for ``X_0 = 0``."""
    A, D, LB, RB, LC, RC = _coefficients(problem)
    if t == 0:
        return LB.copy(), RB.copy()
    sh = _pairs(shifts, t)
    tf = toeplitz_factors((A, D, LB, RB, LC, RC), sh, t)
    p = LB.shape[1]
    ones = np.ones((t, 1))
    K = np.eye(t * p) - tf.TD @ tf.TA
    left = np.kron(tf.Omega @ tf.J @ ones, np.eye(p))
    right = np.kron(ones.T @ tf.J, np.eye(p))
    LBt = LB - tf.UA @ la.solve(K, left)
    RBt = RB - right @ la.solve(K, tf.VD)
    if _conj_closed(sh):
        LBt, RBt = _real_if_close(LBt, A), _real_if_close(RBt, A)
    return LBt, RBt


# -- identity checks ----------------------------------------------------------------


def identity_deviation(shifts, lam, t=None):
    """Max deviations of ``V = T Omega J 1`` and ``(J P J + lam I) T Omega = I``."""
    sh = _pairs(shifts, t)
    t = len(sh)
    T = t_matrix(sh, lam)
    Om = omega_matrix(sh)
    J = j_matrix(t)
    V = v_vector(sh, lam)
    e1 = np.abs(V - T @ Om @ J @ np.ones(t)).max() / max(1.0, np.abs(V).max())
    # checked as (J P J + lam I) (T Omega) = I to avoid forming an inverse
    lhs = J @ p_matrix(sh) @ J + complex(lam) * np.eye(t)
    TO = T @ Om
    e2 = np.abs(lhs @ TO - np.eye(t)).max() / max(1.0, np.abs(lhs).max() * np.abs(TO).max())
    return float(e1), float(e2)


def p_omega_identity(shifts):
    """Return ``P Omega^{-1} + Omega^{-1} P'^T - 1 1^T`` (exact for Fractions)."""
    sh = [(a, b) for a, b in (_raw_pair(s) for s in shifts)]
    t = len(sh)
    om = [a + b for a, b in reversed(sh)]
    P = [[0] * t for _ in range(t)]
    Q = [[0] * t for _ in range(t)]
    for col in range(t):
        a, b = sh[t - 1 - col]
        P[col][col], Q[col][col] = a, b
        for row in range(col + 1, t):
            P[row][col] = Q[row][col] = a + b
    return [
        [P[i][j] / om[j] + Q[j][i] / om[i] - 1 for j in range(t)]
        for i in range(t)
    ]


def _raw_pair(shift):
    if hasattr(shift, "alpha"):
        return shift.alpha, shift.beta
    return shift


# -- ground truth ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StabilizingPair:
    X_star: np.ndarray
    Y_star: np.ndarray | None
    R: np.ndarray | None
    S: np.ndarray | None
    spec_radius_product: float | None
    classification: str


def schur_stabilizing_solution(problem, shift=None, axis_tol=1e-10, half_plane="left"):
    """Stabilizing ``X`` (and dual ``Y``) from ordered Schur forms of ``H``.

    ``X = Z2 Z1^{-1}`` from the left-half-plane invariant subspace, ``Y =
    W1 W2^{-1}`` from the right-half-plane one.  With ``shift`` the
    matrices ``R = -C^{a,b}(D - C X)`` and ``S = -C^{b,a}(A - B Y)`` are
    returned as well.  ``Y`` (and with it ``S``) is ``None`` when the
    complementary subspace is not a graph, e.g. for ``B = 0``; only a
    non-graph stable subspace is an error.  ``half_plane='right'`` solves the negated equation
    instead (same solution set), i.e. targets ``lambda(D - C X)`` in the
    right half-plane as for the minimal solution of an M-matrix equation.
    """
    A, D, LB, RB, LC, RC = _coefficients(problem)
    m, n = A.shape[0], D.shape[0]
    B, C = LB @ RB, LC @ RC
    if half_plane == "auto":
        half_plane = (getattr(problem, "meta", None) or {}).get("half_plane", "left")
    sign = {"left": 1.0, "right": -1.0}[half_plane]
    H = sign * np.block([[D, -C], [B, -A]])
    band = axis_tol * max(1.0, np.linalg.norm(H, 2))
    ev = np.linalg.eigvals(H)
    if np.any(np.abs(ev.real) <= band):
        raise NoSplitting("eigenvalues of H on the imaginary axis")
    if np.sum(ev.real < 0) != n:
        raise NoSplitting(f"{np.sum(ev.real < 0)} stable eigenvalues, expected {n}")

    cplx = np.iscomplexobj(H)
    out = "complex" if cplx else "real"
    _, Z, sdim = la.schur(H, output=out, sort=lambda x: x.real < 0)
    _, W, _ = la.schur(H, output=out, sort=lambda x: x.real > 0)
    Z1, Z2 = Z[:n, :n], Z[n:, :n]
    W1, W2 = W[:n, :m], W[n:, :m]
    if np.linalg.cond(Z1) > 1e12:
        raise SingularBasis("invariant subspace basis is not a graph")
    X = la.solve(Z1.T, Z2.T).T
    Y = la.solve(W2.T, W1.T).T if np.linalg.cond(W2) <= 1e12 else None

    top = np.linalg.eigvals(D - C @ X).real.max() if n else -1.0
    label = "stabilizing" if top < 0 else ("anti_stabilizing" if top > 0 else "unknown")
    R = S = rho = None
    if shift is not None:
        alpha, beta = _pair(shift)
        R = -cayley(sign * (D - C @ X), sign * alpha, sign * beta)
        rho = float(np.abs(np.linalg.eigvals(R)).max())
        if Y is not None:
            S = -cayley(sign * (A - B @ Y), sign * beta, sign * alpha)
            rho *= float(np.abs(np.linalg.eigvals(S)).max())
    return StabilizingPair(X, Y, R, S, rho, label)


def ndare_residual(problem, X, shift):
    """Residual of ``X - H0 - F0 X (I - G0 X)^{-1} E0``."""
    co = cayley_coefficients(problem, shift)
    n = co.G0.shape[0]
    return X - co.H0 - co.F0 @ X @ la.solve(np.eye(n) - co.G0 @ X, co.E0)


def incorporated_solution(problem, Xt):
    """Stabilizing ``Delta`` of the equation for ``X - Xt``, computed densely."""
    A, D, LB, RB, LC, RC = _coefficients(problem)
    C = LC @ RC
    R = Xt @ C @ Xt - Xt @ D - A @ Xt + LB @ RB
    return schur_stabilizing_solution(
        (A - Xt @ C, D - C @ Xt, R, np.eye(R.shape[1]), LC, RC)
    ).X_star
