"""Cost-matrix construction and per-sample margin estimation.

A batch of B preference triplets yields a B x B cost matrix blending the
semantic similarity between chosen/rejected embeddings with the model's
current reward differences.  Margins are then read off a transport plan over
that matrix (strategy ``aplot``), off plain row averages (``point``), or set
to a constant (``hard`` / ``none``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

from .errors import GammaOutOfRangeError, ShapeMismatchError, ZeroVectorError
from .ot import Marginals, SinkhornConfig, TransportPlan, sinkhorn

_COSINE_EPS = 1e-12


class MarginStrategy(str, Enum):
    APLOT = "aplot"
    POINT = "point"
    HARD = "hard"
    NONE = "none"


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise cosine similarities, rows = chosen items, cols = rejected."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise ShapeMismatchError("similarity matrix must be 2-D")
        if not np.isfinite(m).all():
            raise ShapeMismatchError("similarity matrix must be finite")
        if (np.abs(m) > 1.0 + 1e-9).any():
            raise ShapeMismatchError("cosine similarities must lie in [-1, 1]")


@dataclass(frozen=True)
class RewardDiffMatrix:
    """All chosen-vs-rejected reward differences within a batch."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise ShapeMismatchError("reward-difference matrix must be 2-D")
        if not np.isfinite(m).all():
            raise ShapeMismatchError("reward-difference matrix must be finite")


@dataclass(frozen=True)
class CostMatrix:
    """Blend of similarity and inverted reward difference, weighted by gamma."""

    matrix: np.ndarray
    gamma: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2:
            raise ShapeMismatchError("cost matrix must be 2-D")
        if not np.isfinite(m).all():
            raise ShapeMismatchError("cost matrix must be finite")


@dataclass(frozen=True)
class MarginVector:
    """Per-triplet margins plus the strategy that produced them."""

    values: np.ndarray
    strategy: MarginStrategy

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ShapeMismatchError("margins must form a 1-D vector")
        if not np.isfinite(v).all() or (v < 0).any():
            raise ShapeMismatchError("margins must be finite and nonnegative")


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two feature vectors.

    Raises ``ZeroVectorError`` when either norm is below 1e-12.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeMismatchError(f"vectors must share one dimension, got {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < _COSINE_EPS or nb < _COSINE_EPS:
        raise ZeroVectorError("cosine similarity is undefined for (near-)zero vectors")
    return float(a @ b) / (na * nb)


def similarity_matrix(chosen: np.ndarray, rejected: np.ndarray) -> SimilarityMatrix:
    """Cosine similarities between every chosen row and every rejected row."""
    chosen = np.asarray(chosen, dtype=float)
    rejected = np.asarray(rejected, dtype=float)
    if chosen.ndim != 2 or rejected.ndim != 2 or chosen.shape[1] != rejected.shape[1]:
        raise ShapeMismatchError(
            f"feature matrices must be 2-D with equal width, got {chosen.shape} vs {rejected.shape}"
        )
    norms_c = np.linalg.norm(chosen, axis=1)
    norms_r = np.linalg.norm(rejected, axis=1)
    if (norms_c < _COSINE_EPS).any() or (norms_r < _COSINE_EPS).any():
        raise ZeroVectorError("cosine similarity is undefined for (near-)zero vectors")
    sim = (chosen @ rejected.T) / np.outer(norms_c, norms_r)
    return SimilarityMatrix(np.clip(sim, -1.0, 1.0))


def reward_difference_matrix(rewards_chosen, rewards_rejected) -> RewardDiffMatrix:
    """matrix[i, j] = rewards_chosen[i] - rewards_rejected[j]."""
    rw = np.asarray(rewards_chosen, dtype=float)
    rl = np.asarray(rewards_rejected, dtype=float)
    if rw.shape != rl.shape or rw.ndim != 1:
        raise ShapeMismatchError(f"reward vectors must share one length, got {rw.shape} vs {rl.shape}")
    if not (np.isfinite(rw).all() and np.isfinite(rl).all()):
        raise ShapeMismatchError("reward vectors must be finite")
    return RewardDiffMatrix(rw[:, None] - rl[None, :])


def build_cost_matrix(
    sim: SimilarityMatrix,
    diff: RewardDiffMatrix,
    gamma: float,
    remap_similarity: bool = True,
) -> CostMatrix:
    """Blend similarity and reward difference into a transport cost.

    Entry (i, j) is ``gamma * s + (1 - gamma) * (1 - sigmoid(diff_ij))``.
    By default ``s`` is the cosine similarity remapped affinely from [-1, 1]
    onto [0, 1], which keeps every cost entry in [0, 1] (transport costs are
    nonnegative).  Pass ``remap_similarity=False`` to blend the raw cosine
    instead; costs may then be negative.
    """
    if not 0.0 <= gamma <= 1.0:
        raise GammaOutOfRangeError(f"gamma must lie in [0, 1], got {gamma}")
    s = sim.matrix
    d = diff.matrix
    if s.shape != d.shape:
        raise ShapeMismatchError(f"similarity {s.shape} and reward-difference {d.shape} shapes differ")
    if remap_similarity:
        s = np.clip((s + 1.0) / 2.0, 0.0, 1.0)
    cost = gamma * s + (1.0 - gamma) * (1.0 - expit(d))
    return CostMatrix(cost, gamma)


def transport_plan_for_cost(
    cost: CostMatrix,
    config: SinkhornConfig = SinkhornConfig(),
    row_mass: str = "unit",
) -> TransportPlan:
    """Solve the batch transport problem underlying the adaptive margins.

    ``row_mass="unit"`` (default) places one unit of mass on every row and
    column, so each plan row sums to 1 and the derived margin is a convex
    combination of that row's costs.  ``row_mass="uniform"`` uses 1/B weights
    instead (plan scales by 1/B, and so do the margins).
    """
    b = _square_size(cost)
    if row_mass == "unit":
        marginals = Marginals.unit_rows(b)
    elif row_mass == "uniform":
        marginals = Marginals.uniform(b, b)
    else:
        raise ValueError(f"row_mass must be 'unit' or 'uniform', got {row_mass!r}")
    return sinkhorn(cost.matrix, marginals, config)


def margins_from_plan(plan: TransportPlan, cost: CostMatrix) -> MarginVector:
    """Per-row transport-weighted average cost: mu_i = sum_j T_ij C_ij."""
    if plan.matrix.shape != cost.matrix.shape:
        raise ShapeMismatchError(
            f"plan shape {plan.matrix.shape} does not match cost shape {cost.matrix.shape}"
        )
    values = (plan.matrix * cost.matrix).sum(axis=1)
    # raw-similarity costs can dip below zero; margins are floored there
    return MarginVector(np.maximum(values, 0.0), MarginStrategy.APLOT)


def estimate_margins(
    cost: CostMatrix,
    strategy: MarginStrategy,
    sinkhorn_config: SinkhornConfig = SinkhornConfig(),
    hard_value: float = 1.0,
    point_literal: bool = False,
    row_mass: str = "unit",
) -> MarginVector:
    """Estimate one margin per triplet from the batch cost matrix.

    aplot  - transport-weighted row averages of the cost (solves Sinkhorn);
    point  - plain row means, or row sums when ``point_literal`` is set;
    hard   - the constant ``hard_value`` everywhere;
    none   - all zeros (recovers the unmodified ranking loss).
    """
    strategy = MarginStrategy(strategy)
    b = _square_size(cost)
    if strategy is MarginStrategy.NONE:
        return MarginVector(np.zeros(b), strategy)
    if strategy is MarginStrategy.HARD:
        return MarginVector(np.full(b, float(hard_value)), strategy)
    if strategy is MarginStrategy.POINT:
        sums = cost.matrix.sum(axis=1)
        values = sums if point_literal else sums / b
        return MarginVector(np.maximum(values, 0.0), strategy)
    plan = transport_plan_for_cost(cost, sinkhorn_config, row_mass)
    return margins_from_plan(plan, cost)


def _square_size(cost: CostMatrix) -> int:
    n, m = cost.matrix.shape
    if n != m:
        raise ShapeMismatchError(f"margin estimation needs a square cost matrix, got {n}x{m}")
    return n
