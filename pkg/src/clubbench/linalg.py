"""Dense SPD linear algebra for small dimensions.

Matrices and vectors are plain ``float64`` numpy arrays. Every policy keeps a
Gram matrix ``M = I + sum(x x^T)`` next to its inverse; :class:`GramInverse`
maintains that pair with Sherman-Morrison updates and a periodic Cholesky
refresh.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve

from .errors import InputError, NumericFailure

#: Full recomputation of a maintained inverse after this many rank-1 updates.
REFRESH_EVERY = 10_000


def _cholesky(m: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure(f"matrix is not positive definite ({exc})") from exc


def _check_dims(m: np.ndarray, v: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"expected a square matrix, got shape {m.shape}")
    if v.shape[0] != m.shape[0]:
        raise InputError(f"dimension mismatch: matrix {m.shape}, vector {v.shape}")


def spd_solve(m: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``m @ x = rhs`` for symmetric positive definite ``m``.

    Raises NumericFailure when the Cholesky factorization breaks down.
    """
    m = np.asarray(m, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    _check_dims(m, rhs)
    chol = _cholesky(m)
    return cho_solve((chol, True), rhs, check_finite=False)


def spd_inverse(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    chol = _cholesky(m)
    inv = cho_solve((chol, True), np.eye(m.shape[0]), check_finite=False)
    # symmetrize: the two triangles of a solve are not bit-identical
    upper = np.triu(inv)
    return upper + np.triu(inv, 1).T


def rank1_update(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Return ``m + x x^T``; the result is exactly symmetric if ``m`` is."""
    x = np.asarray(x, dtype=np.float64)
    _check_dims(m, x)
    # x_i * x_j == x_j * x_i in IEEE arithmetic, so the outer product is
    # already bit-symmetric and no explicit mirroring is needed
    return m + np.outer(x, x)


def inv_rank1_update(minv: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Sherman-Morrison: ``(M + x x^T)^-1`` from ``M^-1``."""
    x = np.asarray(x, dtype=np.float64)
    _check_dims(minv, x)
    with np.errstate(over="ignore", invalid="ignore"):
        v = minv @ x
        denom = 1.0 + float(x @ v)
    if not (denom > 0.0 and np.isfinite(denom)):
        raise NumericFailure(f"Sherman-Morrison denominator {denom!r} is not finite and positive")
    return minv - np.outer(v, v) / denom


class GramInverse:
    """A Gram matrix together with its maintained inverse.

    ``m`` is updated exactly (one rank-1 addition per call); ``minv`` follows
    by Sherman-Morrison and is recomputed from ``m`` every ``REFRESH_EVERY``
    updates to bound drift.
    """

    __slots__ = ("m", "minv", "n_updates")

    def __init__(self, m: np.ndarray, minv: np.ndarray | None = None):
        self.m = np.array(m, dtype=np.float64)
        self.minv = spd_inverse(self.m) if minv is None else np.array(minv, dtype=np.float64)
        self.n_updates = 0

    @classmethod
    def identity(cls, d: int) -> "GramInverse":
        return cls(np.eye(d), np.eye(d))

    @property
    def dim(self) -> int:
        return self.m.shape[0]

    def add_outer(self, x: np.ndarray) -> None:
        self.minv = inv_rank1_update(self.minv, x)
        self.m += np.outer(x, x)
        self.n_updates += 1
        if self.n_updates % REFRESH_EVERY == 0:
            self.refresh()

    def refresh(self) -> None:
        self.minv = spd_inverse(self.m)

    def copy(self) -> "GramInverse":
        out = GramInverse(self.m, self.minv)
        out.n_updates = self.n_updates
        return out
