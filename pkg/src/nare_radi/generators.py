"""Test problem generators: transport MARE, Nash stacking, random stable."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .problem import NareProblem, from_care, to_dense


@dataclass(frozen=True)
class TransportParams:
    """Parameters of the one-group transport MARE.

    ``omega`` and ``c`` are drawn from ``seed`` when not given; ``c_alpha``
    and ``c_beta`` are the physical parameters (not shifts).
    """

    n: int = 100
    c_alpha: float = 0.5
    c_beta: float = 0.5
    seed: int = 0
    omega: np.ndarray | None = field(default=None, repr=False)
    c: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 <= self.c_alpha < 1.0:
            raise ValueError("c_alpha must lie in [0, 1)")
        if not 0.0 < self.c_beta <= 1.0:
            raise ValueError("c_beta must lie in (0, 1]")
        rng = np.random.default_rng(self.seed)
        omega = self.omega
        if omega is None:
            omega = np.sort(rng.uniform(0.0, 1.0, self.n))[::-1]
            for i in range(1, self.n):
                if omega[i] >= omega[i - 1]:
                    omega[i] = omega[i - 1] - 1e-12
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        c = self.c
        if c is None:
            c = rng.uniform(0.0, 1.0, self.n)
            c = np.where(c == 0.0, 1e-12, c)
            c = c / c.sum()
        c = np.atleast_1d(np.asarray(c, dtype=float))
        if omega.shape != (self.n,) or c.shape != (self.n,):
            raise ValueError("omega and c must have length n")
        if np.any(omega <= 0) or np.any(omega >= 1) or np.any(np.diff(omega) >= 0):
            raise ValueError("omega must be strictly decreasing in (0, 1)")
        if np.any(c <= 0) or abs(c.sum() - 1.0) > 1e-12:
            raise ValueError("c must be positive and sum to 1")
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "c", c)


def gen_transport(params: TransportParams) -> NareProblem:
    """Transport MARE as a strengthened problem with diagonal sparse parts.

    ``A = A' - 1 q^T`` and ``D = D' - q 1^T`` with ``B = C^T = 1 1^T``-type
    rank-one terms; the ``-1 q^T`` offsets are carried as ``LPhi``/``RPhi``.
    """
    n = params.n
    inv = 1.0 / params.omega
    ones = np.ones((n, 1))
    qv = (inv * params.c / 2.0).reshape(n, 1)
    Ap = sp.diags(inv / (params.c_beta * (1.0 + params.c_alpha)), format="csc")
    Dp = sp.diags(inv / (params.c_beta * (1.0 - params.c_alpha)), format="csc")
    meta = {"generator": "transport", "n": n, "c_alpha": params.c_alpha,
            "c_beta": params.c_beta, "seed": params.seed, "half_plane": "right"}
    return NareProblem(
        A=Ap, D=Dp, LB=ones, RB=ones.T, LC=qv, RC=qv.T,
        LPhi=ones, RPhi=ones.T, kind="strengthened", meta=meta,
    )


def _h_split_ok(problem):
    A, D, LB, RB, LC, RC = problem.dense_coefficients()
    H = np.block([[D, -(LC @ RC)], [LB @ RB, -A]])
    ev = np.linalg.eigvals(H)
    tol = 1e-10 * max(np.abs(H).max(), 1.0)
    return int(np.sum(ev.real < -tol)) == problem.n and int(np.sum(ev.real > tol)) == problem.m


def _sparse_stable(rng, size, density, margin):
    S = sp.random(size, size, density=density, random_state=rng, format="csc",
                  data_rvs=lambda k: rng.standard_normal(k))
    radius = np.abs(S).sum(axis=1).A.ravel()
    shift = radius + margin * (1.0 + rng.uniform(0.0, 1.0, size))
    return (S - sp.diags(shift)).tocsc()


def gen_random_stable(m, n, p=1, q=1, density=0.2, seed=0):
    """Sparse ``A``, ``D`` with Gershgorin disks in the left half-plane.

    The coupling ``B``, ``C`` is scaled so that ``||B|| ||C||`` stays below
    a fifth of the squared margin, which keeps ``n`` eigenvalues of the
    Hamiltonian in the open left half-plane.  For ``m, n <= 100`` the
    split is also checked densely and the margin is widened if needed.
    """
    if not 0.0 < density <= 1.0:
        raise ValueError("density must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    margin = 1.0
    A = _sparse_stable(rng, m, density, margin)
    D = _sparse_stable(rng, n, density, margin)
    LB = rng.standard_normal((m, p))
    RB = rng.standard_normal((p, n))
    LC = rng.standard_normal((n, q))
    RC = rng.standard_normal((q, m))
    nb = np.linalg.norm(LB, 2) * np.linalg.norm(RB, 2)
    nc = np.linalg.norm(LC, 2) * np.linalg.norm(RC, 2)
    scale = np.sqrt(0.2 * margin**2 / (nb * nc))
    LB, LC = LB * scale, LC * scale
    meta = {"generator": "random", "m": m, "n": n, "p": p, "q": q,
            "density": density, "seed": seed}
    pb = NareProblem(A=A, D=D, LB=LB, RB=RB, LC=LC, RC=RC, meta=meta)
    if max(m, n) <= 100:
        extra = 1.0
        while not _h_split_ok(pb):
            extra *= 2.0
            pb = pb.with_(A=(pb.A - extra * sp.identity(m)).tocsc(),
                          D=(pb.D - extra * sp.identity(n)).tocsc())
    return pb


def gen_nash(base: NareProblem, seed=0) -> NareProblem:
    """Two-player Nash stacking of a CARE-derived problem.

    Player two's input and output factors share the sparsity pattern and
    scale of player one's.  The result has ``m = 2 n_care`` rows:
    ``X = [X1; X2]``, ``A = blkdiag(Acare^T, Acare^T)``, ``D = Acare``,
    ``B = [C1^T C1; C2^T C2]``, ``C = [B1 B1^T, B2 B2^T]``.
    """
    if base.kind != "care":
        raise ValueError("gen_nash requires a kind='care' base problem")
    rng = np.random.default_rng(seed)
    Acare = base.D
    B1 = base.LC
    C1 = base.RB

    def partner(F):
        mask = F != 0
        G = np.where(mask, rng.standard_normal(F.shape), 0.0)
        peak = np.abs(G).max()
        return G * (np.abs(F).max() / peak) if peak > 0 else G

    B2, C2 = partner(B1), partner(C1)
    if sp.issparse(Acare):
        A = sp.block_diag([Acare.T, Acare.T], format="csc")
    else:
        A = np.kron(np.eye(2), to_dense(Acare).T)
    LB = np.vstack([-C1.T, np.zeros_like(C2.T)])
    LB = np.hstack([LB, np.vstack([np.zeros_like(C1.T), -C2.T])])
    RB = np.vstack([C1, C2])
    LC = np.hstack([B1, B2])
    n2 = B1.shape[0]
    RC = np.block([[B1.T, np.zeros((B1.shape[1], n2))],
                   [np.zeros((B2.shape[1], n2)), B2.T]])
    M = None
    if base.N is not None:
        E = base.N
        M = sp.block_diag([E.T, E.T], format="csc") if sp.issparse(E) else np.kron(np.eye(2), E.T)
    meta = dict(base.meta, generator="nash", seed=seed)
    return NareProblem(A=A, D=Acare, LB=LB, RB=RB, LC=LC, RC=RC, M=M, N=base.N,
                       kind="generalized" if M is not None else "plain", meta=meta)


__all__ = ["TransportParams", "gen_transport", "gen_random_stable", "gen_nash", "from_care"]
