from __future__ import annotations

import numpy as np
import pytest

from nare_radi.problem import NareProblem


def scalar_problem(a=2.0, d=2.0, b=1.0, c=1.0):
    return NareProblem(
        A=np.array([[a]]), D=np.array([[d]]), LB=np.array([[b]]), RB=np.array([[1.0]]),
        LC=np.array([[c]]), RC=np.array([[1.0]]),
    )


def random_problem(rng, m, n, p, q, shift=None, coupling=0.3, **extra):
    """Dense problem with ``A``, ``D`` stable (spectra pushed left by ``shift``)."""
    sa = m + 2 if shift is None else shift
    sd = n + 2 if shift is None else shift
    A = rng.standard_normal((m, m)) - sa * np.eye(m)
    D = rng.standard_normal((n, n)) - sd * np.eye(n)
    return NareProblem(
        A=A, D=D, LB=rng.standard_normal((m, p)), RB=rng.standard_normal((p, n)),
        LC=coupling * rng.standard_normal((n, q)), RC=coupling * rng.standard_normal((q, m)),
        **extra,
    )


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


@pytest.fixture
def scalar():
    return scalar_problem()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
