"""Per-user linear contextual bandit (LinUCB-style) primitives."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericFailure
from .linalg import GramInverse, spd_solve


@dataclass
class UserModel:
    """Ridge state of one user: ``M = I + sum x x^T``, ``b = sum r x``."""

    gram: GramInverse
    b: np.ndarray
    occ: int = 0

    @classmethod
    def fresh(cls, d: int) -> "UserModel":
        return cls(GramInverse.identity(d), np.zeros(d))

    @property
    def m(self) -> np.ndarray:
        return self.gram.m

    @property
    def minv(self) -> np.ndarray:
        return self.gram.minv

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def copy(self) -> "UserModel":
        return UserModel(self.gram.copy(), self.b.copy(), self.occ)


def user_vector(model: UserModel) -> np.ndarray:
    return spd_solve(model.m, model.b)


def ucb_scores(w, occ, ctx, minv, alpha):
    """Score every row of ``ctx``: ``k.w + alpha * sqrt(k^T minv k) * sqrt(log(1 + occ))``."""
    estimate = ctx @ w
    quad = np.einsum("ij,ij->i", ctx @ minv, ctx)
    bonus = alpha * np.sqrt(np.maximum(quad, 0.0)) * math.sqrt(math.log1p(occ))
    return estimate + bonus


def ucb_select(w: np.ndarray, occ: int, ctx: np.ndarray, minv: np.ndarray, alpha: float) -> int:
    """Index of the highest upper confidence bound; ties go to the lowest index."""
    ctx = np.asarray(ctx, dtype=np.float64)
    if ctx.ndim != 2 or ctx.shape[0] == 0:
        raise InputError("context must hold at least one item")
    if ctx.shape[1] != w.shape[0] or minv.shape != (w.shape[0], w.shape[0]):
        raise InputError(f"dimension mismatch: ctx {ctx.shape}, w {w.shape}, minv {minv.shape}")
    if alpha < 0:
        raise InputError("alpha must be non-negative")
    with np.errstate(over="ignore", invalid="ignore"):
        scores = ucb_scores(w, occ, ctx, minv, alpha)
    if not np.all(np.isfinite(scores)):
        raise NumericFailure("non-finite UCB score; features or model state overflowed")
    # np.argmax returns the first maximum
    return int(np.argmax(scores))


def linear_update(model: UserModel, x: np.ndarray, reward: float) -> UserModel:
    """Absorb one observation in place and return the model."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.b.shape:
        raise InputError(f"context vector has shape {x.shape}, model expects {model.b.shape}")
    model.gram.add_outer(x)
    if reward:
        model.b += reward * x
    model.occ += 1
    return model


def confidence_bound(occ):
    """``sqrt((1 + ln(1 + occ)) / (1 + occ))``, strictly decreasing in ``occ``.

    Accepts a scalar or an integer array.
    """
    if np.ndim(occ) == 0:
        return math.sqrt((1.0 + math.log1p(occ)) / (1.0 + occ))
    occ = np.asarray(occ, dtype=np.float64)
    return np.sqrt((1.0 + np.log1p(occ)) / (1.0 + occ))


def edge_threshold(occ_u, occ_v, gamma):
    """Distance above which two users are no longer considered similar."""
    return gamma * (confidence_bound(occ_u) + confidence_bound(occ_v))
